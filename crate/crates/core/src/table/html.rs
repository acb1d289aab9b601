//! Minimal HTML tokenizer for the table dialect, plus sanitization and raw
//! row/cell extraction with implicit-close recovery.

use super::TableError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Token {
    Start {
        name: String,
        attrs: Vec<(String, String)>,
    },
    End {
        name: String,
    },
    Text(String),
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == ':'
}

/// Splits `input` into tags and text. Anything that does not look like a tag
/// (a bare `<`, an unterminated tag) is kept as text.
pub(crate) fn tokenize(input: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut text = String::new();
    let mut rest = input;

    let flush = |text: &mut String, tokens: &mut Vec<Token>| {
        if !text.is_empty() {
            tokens.push(Token::Text(std::mem::take(text)));
        }
    };

    while let Some(lt) = rest.find('<') {
        text.push_str(&rest[..lt]);
        rest = &rest[lt..];

        if let Some(after) = rest.strip_prefix("<!--") {
            flush(&mut text, &mut tokens);
            rest = match after.find("-->") {
                Some(end) => &after[end + 3..],
                None => "",
            };
            continue;
        }
        if rest.starts_with("<!") || rest.starts_with("<?") {
            if let Some(end) = rest.find('>') {
                flush(&mut text, &mut tokens);
                rest = &rest[end + 1..];
                continue;
            }
        }

        match parse_tag(rest) {
            Some((token, consumed)) => {
                flush(&mut text, &mut tokens);
                tokens.push(token);
                rest = &rest[consumed..];
            }
            None => {
                text.push('<');
                rest = &rest[1..];
            }
        }
    }
    text.push_str(rest);
    flush(&mut text, &mut tokens);
    tokens
}

/// Parses one tag at the start of `s` (which begins with `<`).
fn parse_tag(s: &str) -> Option<(Token, usize)> {
    let mut chars = s.char_indices().skip(1).peekable();
    let closing = matches!(chars.peek(), Some((_, '/')));
    if closing {
        chars.next();
    }
    let name_start = chars.peek()?.0;
    if !chars.peek()?.1.is_ascii_alphabetic() {
        return None;
    }
    let mut name_end = name_start;
    while let Some(&(i, c)) = chars.peek() {
        if is_name_char(c) {
            chars.next();
            name_end = i + c.len_utf8();
        } else {
            break;
        }
    }
    let name = s[name_start..name_end].to_ascii_lowercase();

    // Attributes up to the closing '>', honouring quotes.
    let mut attrs = Vec::new();
    let bytes = s.as_bytes();
    let mut i = name_end;
    loop {
        while i < s.len() && (bytes[i] as char).is_ascii_whitespace() || (i < s.len() && bytes[i] == b'/') {
            i += 1;
        }
        if i >= s.len() {
            return None;
        }
        if bytes[i] == b'>' {
            i += 1;
            break;
        }
        if bytes[i] == b'<' {
            return None;
        }
        let key_start = i;
        while i < s.len() && !matches!(bytes[i], b'=' | b'>' | b'/' | b'<') && !(bytes[i] as char).is_ascii_whitespace() {
            i += 1;
        }
        let key = s[key_start..i].to_ascii_lowercase();
        while i < s.len() && (bytes[i] as char).is_ascii_whitespace() {
            i += 1;
        }
        let mut value = String::new();
        if i < s.len() && bytes[i] == b'=' {
            i += 1;
            while i < s.len() && (bytes[i] as char).is_ascii_whitespace() {
                i += 1;
            }
            if i < s.len() && (bytes[i] == b'"' || bytes[i] == b'\'') {
                let quote = bytes[i];
                let vstart = i + 1;
                let vend = vstart + s[vstart..].find(quote as char)?;
                value = s[vstart..vend].to_string();
                i = vend + 1;
            } else {
                let vstart = i;
                while i < s.len() && bytes[i] != b'>' && !(bytes[i] as char).is_ascii_whitespace() {
                    i += 1;
                }
                value = s[vstart..i].to_string();
            }
        }
        if !key.is_empty() {
            attrs.push((key, value));
        }
    }

    let token = if closing {
        Token::End { name }
    } else {
        Token::Start { name, attrs }
    };
    Some((token, i))
}

/// Decodes the handful of entities that appear in model-produced tables.
pub(crate) fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        rest = &rest[amp..];
        let Some(semi) = rest[..rest.len().min(12)].find(';') else {
            out.push('&');
            rest = &rest[1..];
            continue;
        };
        let entity = &rest[1..semi];
        let decoded = match entity {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            "nbsp" => Some('\u{a0}'),
            "euro" => Some('€'),
            _ => entity
                .strip_prefix("#x")
                .or_else(|| entity.strip_prefix("#X"))
                .and_then(|h| u32::from_str_radix(h, 16).ok())
                .or_else(|| entity.strip_prefix('#').and_then(|d| d.parse().ok()))
                .and_then(char::from_u32),
        };
        match decoded {
            Some(c) => {
                out.push(c);
                rest = &rest[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

pub(crate) fn escape_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

const STRUCTURAL: [&str; 5] = ["table", "thead", "tbody", "tr", "td"];

fn span_attr(attrs: &[(String, String)], key: &str) -> Option<usize> {
    attrs
        .iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.trim().parse::<usize>().ok())
        .filter(|n| *n >= 1)
}

fn cell_name(name: &str) -> &str {
    if name == "th" {
        "td"
    } else {
        name
    }
}

/// Reduces model output to a single `<table>…</table>` fragment in the canonical dialect.
///
/// Keeps only table/thead/tbody/tr/td tags (with `th` renamed to `td`), only the
/// colspan/rowspan attributes, and only text that sits inside a cell, trimmed.
pub fn sanitize_html(raw: &str) -> Result<String, TableError> {
    let tokens = tokenize(raw);
    let start = tokens
        .iter()
        .position(|t| matches!(t, Token::Start { name, .. } if name == "table"))
        .ok_or(TableError::NoTableFound)?;

    let mut out = String::from("<table>");
    let mut in_cell = false;
    let mut buf = String::new();

    fn flush(out: &mut String, buf: &mut String, in_cell: &mut bool) {
        if *in_cell {
            // Text stays raw (entities included); only angle brackets are escaped.
            out.push_str(&buf.trim().replace('<', "&lt;").replace('>', "&gt;"));
        }
        buf.clear();
    }

    for token in &tokens[start + 1..] {
        match token {
            Token::Start { name, attrs } => {
                let name = cell_name(name);
                if name == "table" {
                    // Nested tables are not supported; their markup is dropped.
                    continue;
                }
                if STRUCTURAL.contains(&name) {
                    flush(&mut out, &mut buf, &mut in_cell);
                    in_cell = false;
                    out.push('<');
                    out.push_str(name);
                    if name == "td" {
                        for key in ["colspan", "rowspan"] {
                            if let Some(n) = span_attr(attrs, key) {
                                out.push_str(&format!(" {key}=\"{n}\""));
                            }
                        }
                        in_cell = true;
                    }
                    out.push('>');
                } else if name == "br" && in_cell {
                    buf.push(' ');
                }
            }
            Token::End { name } => {
                let name = cell_name(name);
                if name == "table" {
                    break;
                }
                if STRUCTURAL.contains(&name) {
                    flush(&mut out, &mut buf, &mut in_cell);
                    in_cell = false;
                    out.push_str("</");
                    out.push_str(name);
                    out.push('>');
                }
            }
            Token::Text(t) => {
                if in_cell {
                    buf.push_str(t);
                }
            }
        }
    }
    flush(&mut out, &mut buf, &mut in_cell);
    out.push_str("</table>");
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SectionKind {
    Thead,
    Tbody,
    /// Rows placed directly under `<table>`.
    Bare,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawCell {
    pub text: String,
    pub colspan: usize,
    pub rowspan: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSection {
    pub kind: SectionKind,
    pub rows: Vec<Vec<RawCell>>,
}

/// The table as written: sections, rows and cells before span expansion.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawTable {
    pub sections: Vec<RawSection>,
}

impl RawTable {
    pub fn rows(&self) -> impl Iterator<Item = (SectionKind, &Vec<RawCell>)> {
        self.sections
            .iter()
            .flat_map(|s| s.rows.iter().map(move |r| (s.kind, r)))
    }
}

/// Upper bound on a single span, as in the HTML table model.
pub const MAX_SPAN: usize = 1000;

/// Reads the structure of a (sanitized) table fragment.
///
/// Unclosed `<td>`/`<tr>` are closed by the next sibling or parent tag; a
/// `<td>` outside any row opens one implicitly.
pub fn parse_raw(html: &str) -> Result<RawTable, TableError> {
    let tokens = tokenize(html);
    let mut iter = tokens.iter().skip_while(|t| matches!(t, Token::Text(s) if s.trim().is_empty()));
    match iter.next() {
        Some(Token::Start { name, .. }) if name == "table" => {}
        _ => return Err(TableError::MalformedHtml("fragment does not start with <table>".into())),
    }

    struct Builder {
        table: RawTable,
        row: Option<Vec<RawCell>>,
        cell: Option<RawCell>,
    }
    impl Builder {
        fn section(&mut self, kind: SectionKind) {
            self.close_row();
            self.table.sections.push(RawSection { kind, rows: Vec::new() });
        }
        fn close_cell(&mut self) {
            if let Some(mut cell) = self.cell.take() {
                cell.text = decode_entities(cell.text.trim()).trim().to_string();
                self.row.get_or_insert_with(Vec::new).push(cell);
            }
        }
        fn close_row(&mut self) {
            self.close_cell();
            if let Some(row) = self.row.take() {
                if self.table.sections.is_empty() {
                    self.table.sections.push(RawSection { kind: SectionKind::Bare, rows: Vec::new() });
                }
                self.table.sections.last_mut().unwrap().rows.push(row);
            }
        }
    }

    let mut b = Builder { table: RawTable::default(), row: None, cell: None };
    let mut saw_end = false;
    for token in iter {
        match token {
            Token::Start { name, attrs } => match cell_name(name) {
                "thead" => b.section(SectionKind::Thead),
                "tbody" => b.section(SectionKind::Tbody),
                "tr" => {
                    b.close_row();
                    b.row = Some(Vec::new());
                }
                "td" => {
                    b.close_cell();
                    b.row.get_or_insert_with(Vec::new);
                    b.cell = Some(RawCell {
                        text: String::new(),
                        colspan: span_attr(attrs, "colspan").unwrap_or(1).min(MAX_SPAN),
                        rowspan: span_attr(attrs, "rowspan").unwrap_or(1).min(MAX_SPAN),
                    });
                }
                _ => {}
            },
            Token::End { name } => match cell_name(name) {
                "td" => b.close_cell(),
                "tr" => b.close_row(),
                "thead" | "tbody" => {
                    b.close_row();
                    b.table.sections.push(RawSection { kind: SectionKind::Bare, rows: Vec::new() });
                }
                "table" => {
                    saw_end = true;
                    break;
                }
                _ => {}
            },
            Token::Text(t) => {
                if let Some(cell) = b.cell.as_mut() {
                    cell.text.push_str(t);
                }
            }
        }
    }
    let _ = saw_end;
    b.close_row();
    // Drop the placeholder bare sections that never received rows, but keep
    // explicit (possibly empty) thead/tbody sections.
    b.table
        .sections
        .retain(|s| s.kind != SectionKind::Bare || !s.rows.is_empty());
    Ok(b.table)
}
