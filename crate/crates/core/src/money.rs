//! Locale-aware money parsing and formatting over exact base-10 decimals.
//!
//! Values are scaled big integers; no code path in this module or its callers
//! goes through `f32`/`f64`.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

/// Exact decimal: `units * 10^-scale`.
#[derive(Clone, Debug)]
pub struct Decimal {
    units: BigInt,
    scale: u32,
}

fn pow10(n: u32) -> BigInt {
    num_traits::pow(BigInt::from(10u32), n as usize)
}

impl Decimal {
    pub fn new(units: impl Into<BigInt>, scale: u32) -> Self {
        Decimal { units: units.into(), scale }
    }

    pub fn zero() -> Self {
        Decimal::new(0, 0)
    }

    pub fn from_int(n: i64) -> Self {
        Decimal::new(n, 0)
    }

    /// Number of fraction digits carried (not necessarily minimal: 90.00 has scale 2).
    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn units(&self) -> &BigInt {
        &self.units
    }

    pub fn is_zero(&self) -> bool {
        self.units.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.units.is_negative()
    }

    /// Same value expressed with `scale` fraction digits. Only widening is lossless,
    /// so narrower targets are clamped to the current scale.
    pub fn with_scale(&self, scale: u32) -> Decimal {
        if scale <= self.scale {
            return self.clone();
        }
        Decimal::new(&self.units * pow10(scale - self.scale), scale)
    }

    /// Drops trailing fractional zeros (90.00 -> 90).
    pub fn normalized(&self) -> Decimal {
        let mut units = self.units.clone();
        let mut scale = self.scale;
        let ten = BigInt::from(10);
        while scale > 0 {
            let (q, r) = units.div_rem(&ten);
            if !r.is_zero() {
                break;
            }
            units = q;
            scale -= 1;
        }
        Decimal { units, scale }
    }

    fn aligned(&self, other: &Decimal) -> (BigInt, BigInt, u32) {
        let scale = self.scale.max(other.scale);
        (
            self.with_scale(scale).units,
            other.with_scale(scale).units,
            scale,
        )
    }

    /// Plain rendering with the given decimal mark and at least `min_scale` fraction digits.
    pub fn render(&self, mark: char, min_scale: u32) -> String {
        let d = self.with_scale(min_scale);
        let digits = d.units.abs().to_string();
        let scale = d.scale as usize;
        let mut out = String::new();
        if d.units.is_negative() {
            out.push('-');
        }
        if scale == 0 {
            out.push_str(&digits);
            return out;
        }
        let padded = if digits.len() <= scale {
            format!("{}{}", "0".repeat(scale + 1 - digits.len()), digits)
        } else {
            digits
        };
        let split = padded.len() - scale;
        out.push_str(&padded[..split]);
        out.push(mark);
        out.push_str(&padded[split..]);
        out
    }
}

impl PartialEq for Decimal {
    fn eq(&self, other: &Self) -> bool {
        let (a, b, _) = self.aligned(other);
        a == b
    }
}

impl Eq for Decimal {}

impl Hash for Decimal {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let n = self.normalized();
        n.units.hash(state);
        n.scale.hash(state);
    }
}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl Add for &Decimal {
    type Output = Decimal;
    fn add(self, rhs: &Decimal) -> Decimal {
        let (a, b, scale) = self.aligned(rhs);
        Decimal::new(a + b, scale)
    }
}

impl Sub for &Decimal {
    type Output = Decimal;
    fn sub(self, rhs: &Decimal) -> Decimal {
        let (a, b, scale) = self.aligned(rhs);
        Decimal::new(a - b, scale)
    }
}

impl Neg for &Decimal {
    type Output = Decimal;
    fn neg(self) -> Decimal {
        Decimal::new(-&self.units, self.scale)
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render('.', 0))
    }
}

/// Which character marks the decimal point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `1 234,56`
    CommaDecimal,
    /// `1,234.56`
    DotDecimal,
}

impl Convention {
    pub fn mark(self) -> char {
        match self {
            Convention::CommaDecimal => ',',
            Convention::DotDecimal => '.',
        }
    }
}

/// A parsed money value together with where it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Amount {
    pub value: Decimal,
    pub source: String,
    /// `None` when the source had no decimal mark (e.g. `"12"` or `"1 200"`).
    pub convention: Option<Convention>,
}

impl Amount {
    pub fn scale(&self) -> u32 {
        self.value.scale()
    }

    pub fn from_decimal(value: Decimal) -> Self {
        Amount {
            source: value.to_string(),
            value,
            convention: None,
        }
    }
}

const SPACES: [char; 4] = [' ', '\u{a0}', '\u{202f}', '\u{2009}'];

fn strip_edge_marks(mut s: &str) -> &str {
    loop {
        let before = s;
        s = s.trim();
        for mark in ["€", "%"] {
            s = s.strip_prefix(mark).unwrap_or(s);
            s = s.strip_suffix(mark).unwrap_or(s);
        }
        if s.len() >= 3 && s.is_char_boundary(3) && s[..3].eq_ignore_ascii_case("eur") {
            s = &s[3..];
        }
        let n = s.len();
        if n >= 3 && s.is_char_boundary(n - 3) && s[n - 3..].eq_ignore_ascii_case("eur") {
            s = &s[..n - 3];
        }
        if s == before {
            return s;
        }
    }
}

/// Parses a financial number such as `"90,00"`, `"1 234,56 €"` or `"-1,234.5"`.
///
/// Returns `None` when the text is not entirely one unambiguous number once edge
/// currency/percent marks are removed.
pub fn parse_amount(text: &str) -> Option<Amount> {
    let core = strip_edge_marks(text);
    let (negative, body) = match core.chars().next()? {
        '-' | '\u{2212}' => (true, &core[core.chars().next()?.len_utf8()..]),
        '+' => (false, &core[1..]),
        _ => (false, core),
    };
    let first = body.chars().next()?;
    let last = body.chars().next_back()?;
    if !first.is_ascii_digit() || !last.is_ascii_digit() {
        return None;
    }
    if !body
        .chars()
        .all(|c| c.is_ascii_digit() || c == '.' || c == ',' || SPACES.contains(&c))
    {
        return None;
    }

    // Decimal mark: rightmost of , or . followed by exactly 1-2 digits to the end.
    let mut decimal: Option<(usize, char)> = None;
    if let Some(pos) = body.rfind([',', '.']) {
        let tail = &body[pos + 1..];
        if (1..=2).contains(&tail.len()) && tail.bytes().all(|b| b.is_ascii_digit()) {
            decimal = Some((pos, body.as_bytes()[pos] as char));
        }
    }
    let (int_part, frac_part) = match decimal {
        Some((pos, _)) => (&body[..pos], &body[pos + 1..]),
        None => (body, ""),
    };

    let punct_groupers: Vec<char> = int_part.chars().filter(|c| *c == '.' || *c == ',').collect();
    match decimal {
        Some((_, mark)) if punct_groupers.contains(&mark) => return None,
        None if punct_groupers.contains(&'.') && punct_groupers.contains(&',') => return None,
        _ => {}
    }

    let groups: Vec<&str> = int_part
        .split(|c: char| c == '.' || c == ',' || SPACES.contains(&c))
        .collect();
    if groups.iter().any(|g| g.is_empty()) {
        return None;
    }
    if groups.len() > 1
        && (groups[0].len() > 3 || groups[1..].iter().any(|g| g.len() != 3))
    {
        return None;
    }

    let digits: String = groups.concat() + frac_part;
    let mut units: BigInt = digits.parse().ok()?;
    if negative {
        units = -units;
    }
    Some(Amount {
        value: Decimal::new(units, frac_part.len() as u32),
        source: text.to_string(),
        convention: decimal.map(|(_, mark)| {
            if mark == ',' {
                Convention::CommaDecimal
            } else {
                Convention::DotDecimal
            }
        }),
    })
}

/// Renders `value` with the convention's decimal mark, no grouping and
/// `max(value.scale, min_scale)` fraction digits.
pub fn format_decimal(value: &Decimal, convention: Convention, min_scale: u32) -> String {
    value.render(convention.mark(), min_scale)
}

pub fn format_amount(a: &Amount, convention: Convention, min_scale: u32) -> String {
    format_decimal(&a.value, convention, min_scale)
}

/// Majority decimal convention among the parseable cells that carry a decimal mark.
/// Ties and tables without any marked number fall back to comma-decimal.
pub fn detect_convention<'a>(cells: impl IntoIterator<Item = &'a str>) -> Convention {
    let (mut comma, mut dot) = (0usize, 0usize);
    for cell in cells {
        match parse_amount(cell).and_then(|a| a.convention) {
            Some(Convention::CommaDecimal) => comma += 1,
            Some(Convention::DotDecimal) => dot += 1,
            None => {}
        }
    }
    if dot > comma {
        Convention::DotDecimal
    } else {
        Convention::CommaDecimal
    }
}
