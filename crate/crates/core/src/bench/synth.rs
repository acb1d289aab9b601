//! Seeded synthetic dental-estimate tables with questions for every category.
//!
//! Gold answers are computed from the generator's own row model, never by
//! running the executor.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::category::QuestionCategory;
use crate::dsl::{ArgmaxReturn, LookupMode, Op, Program, RowPick};
use crate::gateway::{ScriptEntry, Stage};
use crate::money::Convention;
use crate::pipeline::TableSource;
use crate::sample::{Question, Sample};
use crate::table::{RowRole, TableJson, TableRow};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("infeasible synthetic config: {0}")]
pub struct InfeasibleConfig(pub String);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_samples: usize,
    /// Data rows per table, inclusive.
    pub rows: (usize, usize),
    /// Columns per table, inclusive (3 to 7).
    pub cols: (usize, usize),
    /// Probability that a table carries at least one merged cell.
    pub span_probability: f64,
    pub subtotal_probability: f64,
    pub total_probability: f64,
    /// Probability that a printed total differs from the true data sum.
    pub inconsistent_total_probability: f64,
    pub convention: Convention,
    /// Relative weight per category label; missing labels weigh 0.
    pub category_weights: BTreeMap<QuestionCategory, f64>,
    pub questions_per_sample: usize,
    /// Fixed k for kth-row questions; random within the data rows when unset.
    pub kth_k: Option<usize>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_samples: 100,
            rows: (3, 8),
            cols: (3, 7),
            span_probability: 0.65,
            subtotal_probability: 0.3,
            total_probability: 0.5,
            inconsistent_total_probability: 0.3,
            convention: Convention::CommaDecimal,
            category_weights: QuestionCategory::labelled().map(|c| (c, 1.0)).collect(),
            questions_per_sample: 3,
            kth_k: None,
            seed: 7,
        }
    }
}

const ACTES: [&str; 20] = [
    "Détartrage",
    "Radiographie panoramique",
    "Couronne céramo-métallique",
    "Extraction simple",
    "Inlay-core",
    "Composite 2 faces",
    "Bridge 3 éléments",
    "Implant",
    "Consultation",
    "Scellement de sillons",
    "Dévitalisation molaire",
    "Couronne zircone",
    "Onlay céramique",
    "Pilier implantaire",
    "Greffe osseuse",
    "Surfaçage radiculaire",
    "Blanchiment",
    "Gouttière occlusale",
    "Prothèse amovible",
    "Radiographie rétro-alvéolaire",
];

const TEETH: [&str; 16] = ["11", "12", "14", "16", "21", "24", "26", "27", "31", "35", "36", "37", "41", "45", "46", "47"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Col {
    Dent,
    Acte,
    Code,
    Honoraires,
    Base,
    Remboursement,
    Reste,
}

impl Col {
    fn name(self) -> &'static str {
        match self {
            Col::Dent => "Dent",
            Col::Acte => "Acte",
            Col::Code => "Code",
            Col::Honoraires => "Honoraires",
            Col::Base => "Base de remboursement",
            Col::Remboursement => "Remboursement",
            Col::Reste => "Reste à charge",
        }
    }

    fn numeric(self) -> bool {
        matches!(self, Col::Honoraires | Col::Base | Col::Remboursement | Col::Reste)
    }
}

const ORDER: [Col; 7] = [Col::Dent, Col::Acte, Col::Code, Col::Honoraires, Col::Base, Col::Remboursement, Col::Reste];
const OPTIONAL: [Col; 4] = [Col::Code, Col::Base, Col::Remboursement, Col::Reste];

#[derive(Clone, Debug)]
enum Cell {
    Text(String),
    Cents(i64),
    Empty,
}

#[derive(Clone, Debug)]
struct BodyRow {
    role: RowRole,
    cells: Vec<Cell>,
    /// Dent cell covers this row and the next one.
    dent_rowspan: bool,
    /// Label cell spans every text column.
    label_colspan: bool,
}

struct Table {
    cols: Vec<Col>,
    group_header: bool,
    rows: Vec<BodyRow>,
    convention: Convention,
    euro_suffix: bool,
}

/// A generated sample together with its canonical programs (one per
/// question, by position) and the table as the executor should see it.
#[derive(Clone, Debug)]
pub struct SynthFixture {
    pub sample: Sample,
    pub programs: Vec<Program>,
    pub table: TableJson,
}

fn group(digits: &str, sep: char) -> String {
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(sep);
        }
        out.push(ch);
    }
    out
}

/// Gold rendering: no grouping, two decimals.
fn gold_cents(cents: i64, conv: Convention) -> String {
    let sign = if cents < 0 { "-" } else { "" };
    let a = cents.unsigned_abs();
    let mark = if conv == Convention::DotDecimal { '.' } else { ',' };
    format!("{sign}{}{mark}{:02}", a / 100, a % 100)
}

impl Table {
    fn idx(&self, col: Col) -> usize {
        self.cols.iter().position(|c| *c == col).expect("column present")
    }

    fn header(&self, col: Col) -> String {
        if self.group_header && col.numeric() {
            format!("Montants | {}", col.name())
        } else {
            col.name().to_string()
        }
    }

    /// Printed form of a cell, with grouping and the optional euro sign.
    fn printed(&self, cell: &Cell) -> String {
        match cell {
            Cell::Text(t) => t.clone(),
            Cell::Empty => String::new(),
            Cell::Cents(c) => {
                let (mark, sep) = match self.convention {
                    Convention::DotDecimal => ('.', ','),
                    Convention::CommaDecimal => (',', ' '),
                };
                let sign = if *c < 0 { "-" } else { "" };
                let a = c.unsigned_abs();
                let s = format!("{sign}{}{mark}{:02}", group(&(a / 100).to_string(), sep), a % 100);
                if self.euro_suffix {
                    format!("{s} €")
                } else {
                    s
                }
            }
        }
    }

    fn text_cols(&self) -> usize {
        self.cols.iter().filter(|c| !c.numeric()).count()
    }

    /// Cell text per body slot after span expansion: the row-covered Dent
    /// slot repeats the anchor, column-covered label slots are empty.
    fn slot_texts(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            let mut cells: Vec<String> = row.cells.iter().map(|c| self.printed(c)).collect();
            if row.label_colspan {
                for c in cells.iter_mut().take(self.text_cols()).skip(1) {
                    c.clear();
                }
            }
            if r > 0 && self.rows[r - 1].dent_rowspan {
                cells[0] = out[r - 1][0].clone();
            }
            out.push(cells);
        }
        out
    }

    fn table_json(&self) -> TableJson {
        TableJson {
            headers: self.cols.iter().map(|c| self.header(*c)).collect(),
            rows: self
                .slot_texts()
                .into_iter()
                .zip(&self.rows)
                .enumerate()
                .map(|(i, (cells, row))| TableRow { index: i + 1, role: row.role, cells })
                .collect(),
        }
    }

    fn to_html(&self) -> String {
        let esc = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
        let mut h = String::from("<table><thead>");
        if self.group_header {
            h.push_str("<tr>");
            let n_num = self.cols.iter().filter(|c| c.numeric()).count();
            for c in self.cols.iter().filter(|c| !c.numeric()) {
                h.push_str(&format!("<td rowspan=\"2\">{}</td>", esc(c.name())));
            }
            if n_num > 1 {
                h.push_str(&format!("<td colspan=\"{n_num}\">Montants</td>"));
            } else {
                h.push_str("<td>Montants</td>");
            }
            h.push_str("</tr><tr>");
            for c in self.cols.iter().filter(|c| c.numeric()) {
                h.push_str(&format!("<td>{}</td>", esc(c.name())));
            }
            h.push_str("</tr>");
        } else {
            h.push_str("<tr>");
            for c in &self.cols {
                h.push_str(&format!("<td>{}</td>", esc(c.name())));
            }
            h.push_str("</tr>");
        }
        h.push_str("</thead><tbody>");
        for (r, row) in self.rows.iter().enumerate() {
            h.push_str("<tr>");
            let covered_dent = r > 0 && self.rows[r - 1].dent_rowspan;
            for (c, cell) in row.cells.iter().enumerate() {
                if c == 0 && covered_dent {
                    continue;
                }
                if row.label_colspan && c > 0 && c < self.text_cols() {
                    continue;
                }
                let mut attrs = String::new();
                if c == 0 && row.dent_rowspan {
                    attrs.push_str(" rowspan=\"2\"");
                }
                if c == 0 && row.label_colspan {
                    attrs.push_str(&format!(" colspan=\"{}\"", self.text_cols()));
                }
                h.push_str(&format!("<td{attrs}>{}</td>", esc(&self.printed(cell))));
            }
            h.push_str("</tr>");
        }
        h.push_str("</tbody></table>");
        h
    }

    fn data_rows(&self) -> impl Iterator<Item = (usize, &BodyRow)> + '_ {
        self.rows.iter().enumerate().filter(|(_, r)| r.role == RowRole::Data)
    }

    fn cents(&self, row: &BodyRow, col: Col) -> Option<i64> {
        match row.cells[self.idx(col)] {
            Cell::Cents(c) => Some(c),
            _ => None,
        }
    }

    fn text(&self, r: usize, col: Col) -> String {
        self.slot_texts()[r][self.idx(col)].clone()
    }

    fn data_sum(&self, col: Col, tooth: Option<&str>) -> Option<i64> {
        let texts = self.slot_texts();
        let vals: Vec<i64> = self
            .data_rows()
            .filter(|(r, _)| tooth.is_none_or(|t| texts[*r][0] == t))
            .filter_map(|(_, row)| self.cents(row, col))
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum())
    }
}

fn validate(cfg: &SynthConfig) -> Result<(), InfeasibleConfig> {
    let bad = |m: String| Err(InfeasibleConfig(m));
    let (rmin, rmax) = cfg.rows;
    if rmin < 1 || rmin > rmax {
        return bad(format!("rows range {rmin}..={rmax}"));
    }
    if rmax > ACTES.len() {
        return bad(format!("at most {} data rows supported", ACTES.len()));
    }
    let (cmin, cmax) = cfg.cols;
    if cmin < 3 || cmax > 7 || cmin > cmax {
        return bad(format!("cols range {cmin}..={cmax} (must lie within 3..=7)"));
    }
    for (name, p) in [
        ("span_probability", cfg.span_probability),
        ("subtotal_probability", cfg.subtotal_probability),
        ("total_probability", cfg.total_probability),
        ("inconsistent_total_probability", cfg.inconsistent_total_probability),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return bad(format!("{name} = {p}"));
        }
    }
    if cfg.questions_per_sample == 0 {
        return bad("questions_per_sample = 0".into());
    }
    if cfg.category_weights.values().any(|w| !w.is_finite() || *w < 0.0) {
        return bad("category weights must be finite and non-negative".into());
    }
    if cfg.category_weights.get(&QuestionCategory::Other).is_some_and(|w| *w > 0.0) {
        return bad("the other category cannot be generated".into());
    }
    if cfg.category_weights.values().sum::<f64>() <= 0.0 {
        return bad("all category weights are zero".into());
    }
    let wants = |c: QuestionCategory| cfg.category_weights.get(&c).is_some_and(|w| *w > 0.0);
    if let Some(k) = cfg.kth_k {
        if wants(QuestionCategory::KthRowValue) && (k == 0 || k > rmin) {
            return bad(format!("kth_row k={k} but tables may have only {rmin} data row(s)"));
        }
    }
    if wants(QuestionCategory::NaFromEmpty) && cmax < 4 {
        return bad("na_from_empty needs a fourth column".into());
    }
    Ok(())
}

struct Drafted {
    category: QuestionCategory,
    text: String,
    ops: Vec<Op>,
    gold: String,
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> &'a T {
    items.choose(rng).expect("non-empty choice")
}

fn build_table(rng: &mut ChaCha8Rng, cfg: &SynthConfig, cats: &[QuestionCategory]) -> Table {
    use QuestionCategory as Q;
    let has = |c: Q| cats.contains(&c);
    let n_data = rng.gen_range(cfg.rows.0..=cfg.rows.1);
    let n_cols = rng.gen_range(cfg.cols.0..=cfg.cols.1);

    let mut optional: Vec<Col> = OPTIONAL.to_vec();
    optional.shuffle(rng);
    let mut chosen: Vec<Col> = optional.into_iter().take(n_cols - 3).collect();
    if has(Q::NaFromEmpty) && !chosen.contains(&Col::Remboursement) {
        if chosen.len() < cfg.cols.1 - 3 {
            chosen.push(Col::Remboursement);
        } else {
            chosen[0] = Col::Remboursement;
        }
    }
    let cols: Vec<Col> = ORDER.iter().copied().filter(|c| matches!(c, Col::Dent | Col::Acte | Col::Honoraires) || chosen.contains(c)).collect();
    let n_numeric = cols.iter().filter(|c| c.numeric()).count();

    let mut actes: Vec<&str> = ACTES.to_vec();
    actes.shuffle(rng);
    let mut teeth: Vec<&str> = TEETH.to_vec();
    teeth.shuffle(rng);
    let teeth_pool = &teeth[..n_data.div_ceil(2)];

    let mut data: Vec<BodyRow> = (0..n_data)
        .map(|i| {
            let hon: i64 = rng.gen_range(15..=1200) * 100 + rng.gen_range(0..100);
            let base: i64 = rng.gen_range(500..=hon.clamp(500, 30_000));
            let remb: i64 = rng.gen_range(0..=hon);
            let cells = cols
                .iter()
                .map(|c| match c {
                    Col::Dent => Cell::Text(pick(rng, teeth_pool).to_string()),
                    Col::Acte => Cell::Text(actes[i].to_string()),
                    Col::Code => Cell::Text(format!("HB{}{:03}", ["JD", "KD", "MD", "LD"][i % 4], rng.gen_range(1..=999))),
                    Col::Honoraires => Cell::Cents(hon),
                    Col::Base => Cell::Cents(base),
                    Col::Remboursement => Cell::Cents(remb),
                    Col::Reste => Cell::Cents(hon - remb),
                })
                .collect();
            BodyRow { role: RowRole::Data, cells, dent_rowspan: false, label_colspan: false }
        })
        .collect();
    if has(Q::NaFromEmpty) {
        let ri = cols.iter().position(|c| *c == Col::Remboursement).expect("column forced above");
        let r = rng.gen_range(0..n_data);
        data[r].cells[ri] = Cell::Empty;
    }

    let diff_from_total = has(Q::ConsistencyDiffTotal) && (n_numeric < 2 || rng.gen_bool(0.5));
    let want_total = diff_from_total || has(Q::TotalRowValue) || rng.gen_bool(cfg.total_probability);
    let want_sub = diff_from_total || rng.gen_bool(cfg.subtotal_probability);
    let sub_after = if diff_from_total { n_data } else { rng.gen_range(1..=n_data) };
    let inconsistent = rng.gen_bool(cfg.inconsistent_total_probability);
    let delta: i64 = if inconsistent { rng.gen_range(1..=50) * 100 } else { 0 };

    let summary_row = |rows: &[BodyRow], role: RowRole, label: &str, delta: i64| {
        let cells = cols
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if j == 0 {
                    Cell::Text(label.to_string())
                } else if c.numeric() {
                    let s: i64 = rows
                        .iter()
                        .filter(|r| r.role == RowRole::Data)
                        .filter_map(|r| match r.cells[j] {
                            Cell::Cents(v) => Some(v),
                            _ => None,
                        })
                        .sum();
                    Cell::Cents(s + delta)
                } else {
                    Cell::Empty
                }
            })
            .collect();
        BodyRow { role, cells, dent_rowspan: false, label_colspan: false }
    };

    let mut rows: Vec<BodyRow> = Vec::new();
    for (i, row) in data.iter().enumerate() {
        rows.push(row.clone());
        if want_sub && i + 1 == sub_after {
            let label = *pick(rng, &["Sous-total", "SOUS-TOTAL", "Sous total"]);
            rows.push(summary_row(&data[..sub_after], RowRole::Subtotal, label, 0));
        }
    }
    if want_total {
        let label = *pick(rng, &["Total", "TOTAL", "Total à payer"]);
        rows.push(summary_row(&data, RowRole::Total, label, delta));
    }

    let mut table = Table {
        cols,
        group_header: false,
        rows,
        convention: cfg.convention,
        euro_suffix: rng.gen_bool(0.3),
    };

    if rng.gen_bool(cfg.span_probability) {
        let mut any = false;
        if rng.gen_bool(0.5) {
            let pairs: Vec<usize> = (0..table.rows.len().saturating_sub(1))
                .filter(|&r| {
                    table.rows[r].role == RowRole::Data
                        && table.rows[r + 1].role == RowRole::Data
                        && (r == 0 || !table.rows[r - 1].dent_rowspan)
                })
                .collect();
            if let Some(&r) = pairs.choose(rng) {
                let tooth = table.rows[r].cells[0].clone();
                table.rows[r + 1].cells[0] = tooth;
                table.rows[r].dent_rowspan = true;
                any = true;
            }
        }
        if rng.gen_bool(0.5) && table.rows.iter().any(|r| r.role != RowRole::Data) {
            for row in table.rows.iter_mut().filter(|r| r.role != RowRole::Data) {
                row.label_colspan = true;
            }
            any = true;
        }
        if !any || rng.gen_bool(0.5) {
            table.group_header = true;
        }
    }
    table
}

fn amount_col(rng: &mut ChaCha8Rng, t: &Table) -> Col {
    let nums: Vec<Col> = t.cols.iter().copied().filter(|c| c.numeric()).collect();
    *pick(rng, &nums)
}

fn label(col: Col) -> String {
    col.name().to_lowercase()
}

fn make_question(rng: &mut ChaCha8Rng, t: &Table, cat: QuestionCategory, kth_k: Option<usize>) -> Drafted {
    use QuestionCategory as Q;
    let excl = || Op::ExcludeRoles { roles: vec![RowRole::Total, RowRole::Subtotal] };
    let keep = || Op::KeepRoles { roles: vec![RowRole::Total, RowRole::Subtotal] };
    let texts = t.slot_texts();
    let data_idx: Vec<usize> = t.data_rows().map(|(r, _)| r).collect();
    let conv = t.convention;
    let h = |c: Col| t.header(c);

    let (text, ops, gold) = match cat {
        Q::LookupByHeader => {
            let options: Vec<(usize, Col)> = data_idx
                .iter()
                .flat_map(|&r| t.cols.iter().filter(|c| c.numeric()).map(move |c| (r, *c)))
                .filter(|&(r, c)| !texts[r][t.idx(c)].is_empty())
                .collect();
            let &(r, c) = pick(rng, &options);
            let acte = t.text(r, Col::Acte);
            (
                format!("Quel est le montant « {} » pour l'acte « {acte} » ?", label(c)),
                vec![Op::Lookup {
                    key_col: h(Col::Acte),
                    key_value: acte,
                    target_col: h(c),
                    mode: LookupMode::First,
                    empty_to_na: false,
                }],
                texts[r][t.idx(c)].clone(),
            )
        }
        Q::LookupListByHeader => {
            let r = *pick(rng, &data_idx);
            let tooth = texts[r][0].clone();
            let actes: Vec<String> =
                data_idx.iter().filter(|&&i| texts[i][0] == tooth).map(|&i| t.text(i, Col::Acte)).collect();
            (
                format!("Quels actes concernent la dent {tooth} ?"),
                vec![Op::Lookup {
                    key_col: h(Col::Dent),
                    key_value: tooth,
                    target_col: h(Col::Acte),
                    mode: LookupMode::All,
                    empty_to_na: false,
                }],
                actes.join("; "),
            )
        }
        Q::KthRowValue => {
            let k = kth_k.unwrap_or_else(|| rng.gen_range(1..=data_idx.len()));
            let r = data_idx[k - 1];
            let mut c = *pick(rng, &t.cols.iter().copied().filter(|c| *c == Col::Acte || c.numeric()).collect::<Vec<_>>());
            if texts[r][t.idx(c)].is_empty() {
                c = Col::Acte;
            }
            (
                format!("Quelle est la valeur « {} » de la ligne d'acte n°{k} ?", label(c)),
                vec![Op::KthRow { k: RowPick::Nth(k as u64), target_col: h(c), data_only: true }],
                texts[r][t.idx(c)].clone(),
            )
        }
        Q::NaFromEmpty => {
            let ri = t.idx(Col::Remboursement);
            let r = *data_idx.iter().find(|&&r| texts[r][ri].is_empty()).expect("blank cell planted");
            let acte = t.text(r, Col::Acte);
            (
                format!("Quel est le remboursement pour l'acte « {acte} » ?"),
                vec![Op::Lookup {
                    key_col: h(Col::Acte),
                    key_value: acte,
                    target_col: h(Col::Remboursement),
                    mode: LookupMode::First,
                    empty_to_na: true,
                }],
                "N/A".to_string(),
            )
        }
        Q::TotalRowValue => {
            let c = amount_col(rng, t);
            let last = t.rows.iter().rposition(|r| r.role != RowRole::Data).expect("total row forced");
            (
                format!("Quel est le montant total « {} » indiqué sur le devis ?", label(c)),
                vec![keep(), Op::KthRow { k: RowPick::Last, target_col: h(c), data_only: false }],
                texts[last][t.idx(c)].clone(),
            )
        }
        Q::AggregationSum => {
            let c = amount_col(rng, t);
            (
                format!("Quelle est la somme des montants « {} » des actes ?", label(c)),
                vec![excl(), Op::Sum { col: h(c) }],
                gold_cents(t.data_sum(c, None).expect("column has values"), conv),
            )
        }
        Q::AggregationSumConditional => {
            let r = *pick(rng, &data_idx);
            let tooth = texts[r][0].clone();
            let mut c = amount_col(rng, t);
            if t.data_sum(c, Some(&tooth)).is_none() {
                c = Col::Honoraires;
            }
            (
                format!("Quelle est la somme des montants « {} » pour la dent {tooth} ?", label(c)),
                vec![excl(), Op::FilterEq { col: h(Col::Dent), value: tooth.clone() }, Op::Sum { col: h(c) }],
                gold_cents(t.data_sum(c, Some(&tooth)).expect("tooth row has a value"), conv),
            )
        }
        Q::ComparisonArgmax | Q::ComparisonArgmaxRows => {
            let c = amount_col(rng, t);
            let vals: Vec<(usize, i64)> =
                data_idx.iter().filter_map(|&r| t.cents(&t.rows[r], c).map(|v| (r, v))).collect();
            let max = vals.iter().map(|(_, v)| *v).max().expect("column has values");
            let winners: Vec<usize> = vals.iter().filter(|(_, v)| *v == max).map(|(r, _)| *r).collect();
            if cat == Q::ComparisonArgmax {
                (
                    format!("Quel acte a le montant « {} » le plus élevé ?", label(c)),
                    vec![excl(), Op::Argmax { col: h(c), ret: ArgmaxReturn::Column(h(Col::Acte)), all_ties: true }],
                    winners.iter().map(|&r| t.text(r, Col::Acte)).collect::<Vec<_>>().join("; "),
                )
            } else {
                (
                    format!("Quelle ligne a le montant « {} » le plus élevé ?", label(c)),
                    vec![excl(), Op::Argmax { col: h(c), ret: ArgmaxReturn::RowIndex, all_ties: true }],
                    winners.iter().map(|r| (r + 1).to_string()).collect::<Vec<_>>().join("; "),
                )
            }
        }
        Q::CountEquals => {
            if rng.gen_bool(0.5) {
                let tooth = texts[*pick(rng, &data_idx)][0].clone();
                let n = data_idx.iter().filter(|&&r| texts[r][0] == tooth).count();
                (
                    format!("Combien d'actes concernent la dent {tooth} ?"),
                    vec![excl(), Op::Count { col: h(Col::Dent), value: Some(tooth) }],
                    n.to_string(),
                )
            } else {
                (
                    "Combien de lignes d'actes comporte le devis ?".to_string(),
                    vec![excl(), Op::Count { col: h(Col::Acte), value: None }],
                    data_idx.len().to_string(),
                )
            }
        }
        Q::ConsistencyDiffTotal => {
            let last = t.rows.len() - 1;
            let from_total = t.rows[last].role == RowRole::Total
                && t.rows[last - 1].role == RowRole::Subtotal
                && t.data_rows().all(|(r, _)| r < last - 1);
            let nums: Vec<Col> = t.cols.iter().copied().filter(|c| c.numeric()).collect();
            if from_total || nums.len() < 2 {
                let c = *pick(rng, &nums);
                let printed = t.cents(&t.rows[last], c).expect("total printed");
                let true_sum = t.data_sum(c, None).unwrap_or(0);
                (
                    format!("Quel est l'écart entre le total indiqué et la somme des lignes pour « {} » ?", label(c)),
                    vec![
                        keep(),
                        Op::Diff {
                            a: Box::new(Op::KthRow { k: RowPick::Last, target_col: h(c), data_only: false }),
                            b: Box::new(Op::KthRow { k: RowPick::Nth(1), target_col: h(c), data_only: false }),
                        },
                    ],
                    gold_cents(printed - true_sum, conv),
                )
            } else {
                let mut two = nums.clone();
                two.shuffle(rng);
                let (a, b) = (two[0], two[1]);
                let (sa, sb) = (t.data_sum(a, None).unwrap_or(0), t.data_sum(b, None).unwrap_or(0));
                (
                    format!("Quelle est la différence entre la somme « {} » et la somme « {} » ?", label(a), label(b)),
                    vec![
                        excl(),
                        Op::Diff { a: Box::new(Op::Sum { col: h(a) }), b: Box::new(Op::Sum { col: h(b) }) },
                    ],
                    gold_cents(sa - sb, conv),
                )
            }
        }
        Q::Other => unreachable!("rejected by validate"),
    };
    Drafted { category: cat, text, ops, gold }
}

/// Generates fixtures deterministically from `cfg.seed`.
pub fn generate_fixtures(cfg: &SynthConfig) -> Result<Vec<SynthFixture>, InfeasibleConfig> {
    validate(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cats: Vec<QuestionCategory> =
        cfg.category_weights.iter().filter(|(_, w)| **w > 0.0).map(|(c, _)| *c).collect();
    let weights = WeightedIndex::new(cats.iter().map(|c| cfg.category_weights[c]))
        .map_err(|e| InfeasibleConfig(e.to_string()))?;
    let mut out = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let asked: Vec<QuestionCategory> =
            (0..cfg.questions_per_sample).map(|_| cats[weights.sample(&mut rng)]).collect();
        let table = build_table(&mut rng, cfg, &asked);
        let qs: Vec<Drafted> = asked.iter().map(|c| make_question(&mut rng, &table, *c, cfg.kth_k)).collect();
        let sample = Sample {
            id: format!("synth-{:05}", i + 1),
            image_path: None,
            gt_html: table.to_html(),
            questions: qs
                .iter()
                .enumerate()
                .map(|(k, q)| Question { qid: k + 1, text: q.text.clone(), gold_category: q.category, gold_answer: q.gold.clone() })
                .collect(),
            row_roles: Some(table.rows.iter().map(|r| r.role).collect()),
        };
        let programs = qs.into_iter().enumerate().map(|(k, q)| Program::new(k + 1, q.ops)).collect();
        out.push(SynthFixture { sample, programs, table: table.table_json() });
    }
    Ok(out)
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<Sample>, InfeasibleConfig> {
    Ok(generate_fixtures(cfg)?.into_iter().map(|f| f.sample).collect())
}

/// Script for the scripted gateway that routes every question to its gold
/// category and plans every arithmetic question with its canonical program.
/// Direct answers are gold for non-arithmetic questions and `"0"` otherwise,
/// so arithmetic accuracy comes only from the program branch.
pub fn perfect_script(fixtures: &[SynthFixture], source: TableSource) -> Vec<ScriptEntry> {
    let mut script = Vec::new();
    for f in fixtures {
        let qs = &f.sample.questions;
        let answers: Vec<&str> =
            qs.iter().map(|q| if q.gold_category.is_arithmetic() { "0" } else { q.gold_answer.as_str() }).collect();
        script.push(ScriptEntry::new(Stage::DirectQa, json!({ "answers": answers }).to_string()));
        let cats: Vec<&str> = qs.iter().map(|q| q.gold_category.as_str()).collect();
        script.push(ScriptEntry::new(Stage::Route, json!({ "categories": cats }).to_string()));
        let planned: Vec<_> = qs
            .iter()
            .zip(&f.programs)
            .filter(|(q, _)| q.gold_category.is_arithmetic())
            .map(|(_, p)| p.to_json())
            .collect();
        if planned.is_empty() {
            continue;
        }
        if source == TableSource::ImageModel {
            script.push(ScriptEntry::new(Stage::Tsr, f.sample.gt_html.clone()));
        }
        script.push(ScriptEntry::new(Stage::Plan, json!({ "programs": planned }).to_string()));
    }
    script
}
