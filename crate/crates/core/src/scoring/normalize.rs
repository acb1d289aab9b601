use std::fmt;

use unicode_normalization::UnicodeNormalization;

use crate::money::{parse_amount, Decimal};
use crate::text::{collapse_whitespace, strip_accents};

/// Comparison form of an answer string.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NormalizedAnswer {
    Na,
    Number(Decimal),
    Text(String),
    /// Sorted, so equality is multiset equality.
    List(Vec<NormalizedAnswer>),
}

const NA_FORMS: [&str; 3] = ["n/a", "na", "non applicable"];

fn strip_currency(s: &str) -> &str {
    let mut s = s.trim();
    loop {
        let before = s;
        for mark in ["€", "eur", "$"] {
            s = s.strip_prefix(mark).unwrap_or(s).trim();
            s = s.strip_suffix(mark).unwrap_or(s).trim();
        }
        if s == before {
            return s;
        }
    }
}

/// Splits on `;`, `/` and on commas that are not between two digits, so
/// `"1 234,56"` stays whole.
fn segments(s: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for (k, &(pos, c)) in chars.iter().enumerate() {
        let decimal_comma = c == ','
            && k > 0
            && chars[k - 1].1.is_ascii_digit()
            && chars.get(k + 1).is_some_and(|(_, n)| n.is_ascii_digit());
        if c == ';' || c == '/' || (c == ',' && !decimal_comma) {
            out.push(&s[start..pos]);
            start = pos + c.len_utf8();
        }
    }
    out.push(&s[start..]);
    out
}

/// Rewrites standalone `n/a` as `na` so the slash does not split it.
fn protect_na(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(pos) = rest.find("n/a") {
        let before = rest[..pos].chars().next_back().or_else(|| out.chars().next_back());
        let after = rest[pos + 3..].chars().next();
        out.push_str(&rest[..pos]);
        let standalone = !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric);
        out.push_str(if standalone { "na" } else { "n/a" });
        rest = &rest[pos + 3..];
    }
    out.push_str(rest);
    out
}

fn scalar(seg: &str) -> NormalizedAnswer {
    let seg = strip_currency(seg);
    if NA_FORMS.contains(&seg) {
        return NormalizedAnswer::Na;
    }
    match parse_amount(seg) {
        Some(a) => NormalizedAnswer::Number(a.value.normalized()),
        None => {
            let text = collapse_whitespace(seg);
            if NA_FORMS.contains(&text.as_str()) {
                NormalizedAnswer::Na
            } else {
                NormalizedAnswer::Text(text)
            }
        }
    }
}

pub fn normalize_answer(raw: &str) -> NormalizedAnswer {
    let folded = strip_accents(&raw.trim().nfkc().collect::<String>().to_lowercase());
    let core = strip_currency(&folded);
    if NA_FORMS.contains(&core) {
        return NormalizedAnswer::Na;
    }
    if parse_amount(core).is_some() {
        return scalar(core);
    }
    let mut items: Vec<NormalizedAnswer> =
        segments(&protect_na(core)).into_iter().map(scalar).filter(|a| *a != NormalizedAnswer::Text(String::new())).collect();
    match items.len() {
        0 => NormalizedAnswer::Text(String::new()),
        1 => items.pop().unwrap(),
        _ => {
            items.sort();
            NormalizedAnswer::List(items)
        }
    }
}

/// Canonical string; normalizing it gives back the same value.
impl fmt::Display for NormalizedAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormalizedAnswer::Na => f.write_str("na"),
            NormalizedAnswer::Number(d) => write!(f, "{d}"),
            NormalizedAnswer::Text(t) => f.write_str(t),
            NormalizedAnswer::List(items) => {
                let parts: Vec<String> = items.iter().map(|i| i.to_string()).collect();
                f.write_str(&parts.join("; "))
            }
        }
    }
}

pub fn exact_match(pred: &str, gold: &str) -> bool {
    normalize_answer(pred) == normalize_answer(gold)
}
