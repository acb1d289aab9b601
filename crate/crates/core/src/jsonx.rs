//! Pulling a JSON value out of chatty model replies.

use serde_json::Value;

/// Removes Markdown code-fence lines (```` ``` ```` or ```` ```json ````).
pub fn strip_code_fences(reply: &str) -> String {
    reply
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// End offset (exclusive) of the balanced object/array starting at `start`.
fn balanced_end(s: &str, start: usize) -> Option<usize> {
    let bytes = s.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' | b'[' => depth += 1,
            b'}' | b']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// First balanced top-level JSON object or array in `reply` that parses.
pub fn extract_json(reply: &str) -> Option<Value> {
    let text = strip_code_fences(reply);
    let mut from = 0;
    while let Some(offset) = text[from..].find(['{', '[']) {
        let start = from + offset;
        if let Some(end) = balanced_end(&text, start) {
            if let Ok(v) = serde_json::from_str::<Value>(&text[start..end]) {
                return Some(v);
            }
        }
        from = start + 1;
    }
    None
}
