//! String folding helpers shared by role detection, DSL matching and answer scoring.

use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Removes combining marks after canonical decomposition ("Détartrage" -> "Detartrage").
pub fn strip_accents(s: &str) -> String {
    s.nfd().filter(|c| !is_combining_mark(*c)).nfc().collect()
}

/// Collapses every run of Unicode whitespace into a single ASCII space and trims the ends.
pub fn collapse_whitespace(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Case-, accent- and whitespace-insensitive key used for cell equality.
pub fn fold(s: &str) -> String {
    collapse_whitespace(&strip_accents(&s.nfkc().collect::<String>()).to_lowercase())
}
