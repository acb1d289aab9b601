//! Reference evaluator for table programs: direct loops over the rows with
//! rational arithmetic and its own number reader.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use regex::Regex;
use std::sync::OnceLock;
use tabrouter::dsl::{ArgmaxReturn, LookupMode, Op, Program, RowPick, SortOrder};
use tabrouter::table::{RowRole, TableJson};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

#[derive(Clone, Debug, PartialEq)]
pub enum OracleValue {
    Number(BigRational),
    Count(usize),
    Text(String),
}

/// Error kind names as the executor reports them.
pub type OracleError = &'static str;

pub fn fold(s: &str) -> String {
    let s: String = s.nfkc().collect::<String>().nfd().filter(|c| !is_combining_mark(*c)).collect();
    s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

fn number_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"^(?x)
            (?P<sign>[-+])?
            (?:
                (?P<sp>\d{1,3}(?:[\x20\x{a0}\x{202f}]\d{3})+)(?:,(?P<spf>\d{1,2}))?
              | (?P<dg>\d{1,3}(?:\.\d{3})+)(?:,(?P<dgf>\d{1,2}))?
              | (?P<cg>\d{1,3}(?:,\d{3})+)(?:\.(?P<cgf>\d{1,2}))?
              | (?P<pl>\d+)(?:[.,](?P<plf>\d{1,2}))?
            )$",
        )
        .unwrap()
    })
}

/// Reads `"1 234,56 €"`-style amounts; `None` for anything else.
pub fn read_number(text: &str) -> Option<BigRational> {
    let mut s = text.trim();
    loop {
        let before = s;
        s = s.trim_end_matches('€').trim_start_matches('€').trim();
        if s.to_lowercase().ends_with("eur") {
            s = s[..s.len() - 3].trim();
        }
        if s == before {
            break;
        }
    }
    let caps = number_re().captures(s)?;
    let (int, frac) = ["sp", "dg", "cg", "pl"]
        .iter()
        .find_map(|k| caps.name(k).map(|m| (m.as_str(), caps.name(&format!("{k}f")).map_or("", |f| f.as_str()))))?;
    let digits: String = int.chars().filter(char::is_ascii_digit).collect::<String>() + frac;
    let mut v = BigRational::new(digits.parse::<BigInt>().ok()?, BigInt::from(10).pow(frac.len() as u32));
    if caps.name("sign").is_some_and(|m| m.as_str() == "-") {
        v = -v;
    }
    Some(v)
}

/// Two-decimal rendering with the given mark (for comparing against gold strings).
pub fn render_two_decimals(v: &BigRational, mark: char) -> String {
    let cents = (v * BigRational::from_integer(BigInt::from(100))).to_integer();
    let neg = cents.is_negative();
    let a = cents.abs();
    let (q, r) = (&a / 100, &a % 100);
    format!("{}{q}{mark}{r:0>2}", if neg { "-" } else { "" })
}

struct Eval<'a> {
    t: &'a TableJson,
}

impl<'a> Eval<'a> {
    fn col(&self, h: &str) -> Result<usize, OracleError> {
        self.t.headers.iter().position(|x| x == h).ok_or("UnknownHeader")
    }

    fn cell(&self, row: usize, c: usize) -> &'a str {
        &self.t.rows.iter().find(|r| r.index == row).unwrap().cells[c]
    }

    fn role(&self, row: usize) -> RowRole {
        self.t.rows.iter().find(|r| r.index == row).unwrap().role
    }

    fn terminal(&self, op: &Op, rows: &[usize]) -> Result<OracleValue, OracleError> {
        match op {
            Op::Sum { col } => {
                let c = self.col(col)?;
                if rows.is_empty() {
                    return Err("EmptySelection");
                }
                let vals: Vec<BigRational> = rows.iter().filter_map(|&r| read_number(self.cell(r, c))).collect();
                if vals.is_empty() {
                    return Err("NoNumericValues");
                }
                Ok(OracleValue::Number(vals.into_iter().fold(BigRational::zero(), |a, b| a + b)))
            }
            Op::Count { col, value } => {
                let c = self.col(col)?;
                let n = match value {
                    None => rows.len(),
                    Some(v) => rows.iter().filter(|&&r| fold(self.cell(r, c)) == fold(v)).count(),
                };
                Ok(OracleValue::Count(n))
            }
            Op::KthRow { k, target_col, data_only } => {
                let c = self.col(target_col)?;
                let pool: Vec<usize> =
                    rows.iter().copied().filter(|&r| !data_only || self.role(r) == RowRole::Data).collect();
                let r = match k {
                    RowPick::Last => pool.last().copied(),
                    RowPick::Nth(0) => return Err("BadShape"),
                    RowPick::Nth(n) => pool.get(*n as usize - 1).copied(),
                }
                .ok_or("EmptySelection")?;
                Ok(OracleValue::Text(self.cell(r, c).to_string()))
            }
            Op::Lookup { key_col, key_value, target_col, mode, empty_to_na } => {
                let (kc, tc) = (self.col(key_col)?, self.col(target_col)?);
                let mut hits: Vec<usize> =
                    rows.iter().copied().filter(|&r| fold(self.cell(r, kc)) == fold(key_value)).collect();
                if hits.is_empty() {
                    return Err("EmptySelection");
                }
                if *mode == LookupMode::First {
                    hits.truncate(1);
                }
                let mut out = Vec::new();
                for r in hits {
                    let v = self.cell(r, tc);
                    if !v.trim().is_empty() {
                        out.push(v.to_string());
                    } else if *empty_to_na {
                        out.push("N/A".to_string());
                    }
                }
                Ok(OracleValue::Text(out.join("; ")))
            }
            Op::Argmax { col, ret, all_ties } => {
                let c = self.col(col)?;
                if let ArgmaxReturn::Column(h) = ret {
                    self.col(h)?;
                }
                if rows.is_empty() {
                    return Err("EmptySelection");
                }
                let vals: Vec<(usize, BigRational)> =
                    rows.iter().filter_map(|&r| read_number(self.cell(r, c)).map(|v| (r, v))).collect();
                let Some(max) = vals.iter().map(|(_, v)| v.clone()).max() else {
                    return Err("NoNumericValues");
                };
                let mut win: Vec<usize> = vals.iter().filter(|(_, v)| *v == max).map(|(r, _)| *r).collect();
                if !all_ties {
                    win.truncate(1);
                }
                let parts: Vec<String> = match ret {
                    ArgmaxReturn::RowIndex => win.iter().map(|r| r.to_string()).collect(),
                    ArgmaxReturn::Column(h) => {
                        let hc = self.col(h)?;
                        win.iter().map(|&r| self.cell(r, hc).to_string()).collect()
                    }
                };
                Ok(OracleValue::Text(parts.join("; ")))
            }
            Op::Diff { a, b } => {
                let num = |v: OracleValue| match v {
                    OracleValue::Number(x) => Ok(x),
                    OracleValue::Count(n) => Ok(BigRational::from_integer(BigInt::from(n))),
                    OracleValue::Text(t) => read_number(&t).ok_or("NonNumericOperand"),
                };
                let x = num(self.terminal(a, rows)?)?;
                let y = num(self.terminal(b, rows)?)?;
                Ok(OracleValue::Number(x - y))
            }
            _ => Err("BadShape"),
        }
    }
}

fn headers_ok(op: &Op, t: &TableJson) -> bool {
    let known = |h: &String| t.headers.contains(h);
    match op {
        Op::ExcludeRoles { .. } | Op::KeepRoles { .. } => true,
        Op::FilterEq { col, .. } | Op::Sort { col, .. } | Op::Sum { col } | Op::Count { col, .. } => known(col),
        Op::Lookup { key_col, target_col, .. } => known(key_col) && known(target_col),
        Op::KthRow { target_col, .. } => known(target_col),
        Op::Argmax { col, ret, .. } => known(col) && matches!(ret, ArgmaxReturn::RowIndex) || {
            known(col) && matches!(ret, ArgmaxReturn::Column(h) if known(h))
        },
        Op::Diff { a, b } => headers_ok(a, t) && headers_ok(b, t),
    }
}

fn diff_operand_ok(op: &Op) -> bool {
    match op {
        Op::Sum { .. } | Op::Count { .. } => true,
        Op::KthRow { k, .. } => *k != RowPick::Nth(0),
        Op::Lookup { mode, .. } => *mode == LookupMode::First,
        _ => false,
    }
}

fn is_context(op: &Op) -> bool {
    matches!(op, Op::ExcludeRoles { .. } | Op::KeepRoles { .. } | Op::FilterEq { .. } | Op::Sort { .. })
}

/// Evaluates a program the slow, obvious way.
pub fn evaluate(p: &Program, t: &TableJson) -> Result<OracleValue, OracleError> {
    let n = p.ops.len();
    if n == 0 {
        return Err("BadShape");
    }
    for (i, op) in p.ops.iter().enumerate() {
        if (i + 1 < n) == !is_context(op) {
            return Err("BadShape");
        }
        if let Op::KthRow { k: RowPick::Nth(0), .. } = op {
            return Err("BadShape");
        }
        if let Op::Diff { a, b } = op {
            if !diff_operand_ok(a) || !diff_operand_ok(b) {
                return Err("BadShape");
            }
        }
        if !headers_ok(op, t) {
            return Err("UnknownHeader");
        }
    }
    let ev = Eval { t };
    let mut rows: Vec<usize> = t.rows.iter().map(|r| r.index).collect();
    for op in &p.ops[..n - 1] {
        rows = match op {
            Op::ExcludeRoles { roles } => rows.into_iter().filter(|&r| !roles.contains(&ev.role(r))).collect(),
            Op::KeepRoles { roles } => rows.into_iter().filter(|&r| roles.contains(&ev.role(r))).collect(),
            Op::FilterEq { col, value } => {
                let c = ev.col(col)?;
                rows.into_iter().filter(|&r| fold(ev.cell(r, c)) == fold(value)).collect()
            }
            Op::Sort { col, order, numeric } => {
                let c = ev.col(col)?;
                // Insertion sort keeps equal keys in their original order.
                let mut out: Vec<usize> = Vec::new();
                for r in rows {
                    let before = |x: usize, y: usize| -> bool {
                        if *numeric {
                            match (read_number(ev.cell(x, c)), read_number(ev.cell(y, c))) {
                                (Some(a), Some(b)) => {
                                    if *order == SortOrder::Asc { a < b } else { a > b }
                                }
                                (Some(_), None) => true,
                                _ => false,
                            }
                        } else {
                            let (a, b) = (fold(ev.cell(x, c)), fold(ev.cell(y, c)));
                            if *order == SortOrder::Asc { a < b } else { a > b }
                        }
                    };
                    let pos = out.iter().position(|&o| before(r, o)).unwrap_or(out.len());
                    out.insert(pos, r);
                }
                out
            }
            _ => unreachable!(),
        };
    }
    ev.terminal(&p.ops[n - 1], &rows)
}
