//! One line per acceptance criterion; run with `--nocapture` to see them.

mod common;

use common::scenarios::{self, Check};

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("golden-run", scenarios::invoice_golden),
        ("dsl-oracle-suite", scenarios::dsl_oracle_suite),
        ("fallback-safety", scenarios::fallback_safety),
        ("tree-edit-oracle", scenarios::tree_edit_oracle),
        ("adjacency-grits", scenarios::adjacency_grits),
        ("exact-decimal", scenarios::exact_decimal),
        ("throughput", scenarios::throughput),
        ("routing", scenarios::routing),
        ("vqa-oracle-perfect", scenarios::vqa_oracle_perfect),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
