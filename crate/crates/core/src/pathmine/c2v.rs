//! Line-oriented bag format: `<label> <start,hash,end> <start,hash,end> ...`
//! after a `#c2v-format 1` header line.

use std::fmt::Write as _;

use super::bag::{is_representable, BagOfContexts, PathContext};
use super::FORMAT_HEADER;
use crate::corpus::Label;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("c2v line {line}: {reason}")]
pub struct C2vError {
    pub line: usize,
    pub reason: String,
}

pub fn write_c2v(bags: &[BagOfContexts]) -> String {
    let mut out = format!("{FORMAT_HEADER}\n");
    for bag in bags {
        out.push_str(bag.label.as_str());
        for ctx in &bag.contexts {
            write!(out, " {},{},{}", ctx.start_value, ctx.path_hash, ctx.end_value).unwrap();
        }
        out.push('\n');
    }
    out
}

fn is_md5_hex(s: &str) -> bool {
    s.len() == 32 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b))
}

/// Reads bags back. Sample ids are the 0-based record ordinals because the
/// line format does not carry them.
pub fn read_c2v(text: &str) -> Result<Vec<BagOfContexts>, C2vError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == FORMAT_HEADER => {}
        Some(_) => return Err(C2vError { line: 1, reason: format!("expected {FORMAT_HEADER:?} header") }),
        None => return Ok(Vec::new()),
    }
    let mut bags = Vec::new();
    for (i, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: String| C2vError { line: i + 1, reason };
        let mut fields = line.split(' ');
        let label: Label = fields.next().unwrap_or_default().parse().map_err(bad)?;
        let mut contexts = Vec::new();
        for field in fields {
            let parts: Vec<&str> = field.split(',').collect();
            let [start, hash, end] = parts[..] else {
                return Err(bad(format!("context {field:?} is not start,hash,end")));
            };
            if !is_representable(start) || !is_representable(end) || !is_md5_hex(hash) {
                return Err(bad(format!("malformed context {field:?}")));
            }
            contexts.push(PathContext { start_value: start.into(), path_hash: hash.into(), end_value: end.into() });
        }
        if contexts.is_empty() {
            return Err(bad("bag has no contexts".into()));
        }
        bags.push(BagOfContexts { sample_id: bags.len() as u64, label, contexts });
    }
    Ok(bags)
}
