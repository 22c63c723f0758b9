/// Cuts a C source file into top-level chunks, each ending at the `}` that
/// closes its outermost brace. Braces inside comments, string and character
/// literals are ignored. Trailing text without a closing brace becomes a
/// chunk of its own so it is reported rather than lost.
pub fn split_functions(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut depth = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'/' if bytes.get(i + 1) == Some(&b'*') => {
                i += 2;
                while i < bytes.len() && !(bytes[i] == b'*' && bytes.get(i + 1) == Some(&b'/')) {
                    i += 1;
                }
                i += 2;
                continue;
            }
            quote @ (b'"' | b'\'') => {
                i += 1;
                while i < bytes.len() && bytes[i] != quote && bytes[i] != b'\n' {
                    i += if bytes[i] == b'\\' { 2 } else { 1 };
                }
            }
            b'{' => depth += 1,
            b'}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    chunks.push(&text[start..=i]);
                    start = i + 1;
                }
            }
            _ => {}
        }
        i += 1;
    }
    let rest = &text[start.min(text.len())..];
    if !rest.trim().is_empty() && !rest.trim().chars().all(|c| c == ';') {
        chunks.push(rest);
    }
    chunks.into_iter().map(|c| c.trim_start_matches(|ch: char| ch == ';' || ch.is_whitespace())).collect()
}
