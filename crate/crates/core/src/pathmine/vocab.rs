//! Symbol tables for token values, path hashes and labels.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::bag::BagOfContexts;
use super::FORMAT_HEADER;
use crate::corpus::Label;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const PAD_SYMBOL: &str = "<PAD>";
pub const UNK_SYMBOL: &str = "<UNK>";

/// Dense string-to-id table with `PAD` and `UNK` at ids 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    index: HashMap<String, u32>,
    names: Vec<String>,
    counts: Vec<u64>,
}

impl SymbolTable {
    fn reserved() -> Self {
        Self { index: HashMap::new(), names: vec![PAD_SYMBOL.to_string(), UNK_SYMBOL.to_string()], counts: vec![0, 0] }
    }

    /// Entries with `count >= min_count`, ordered by descending count then
    /// lexicographically.
    fn from_counts(counts: HashMap<&str, u64>, min_count: u64) -> Self {
        let mut entries: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut table = Self::reserved();
        for (name, count) in entries {
            table.push(name.to_string(), count);
        }
        table
    }

    fn push(&mut self, name: String, count: u64) {
        let id = self.names.len() as u32;
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.counts.push(count);
    }

    /// Id of `name`, or `UNK` when absent.
    pub fn id(&self, name: &str) -> u32 {
        self.index.get(name).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn count(&self, id: u32) -> Option<u64> {
        self.counts.get(id as usize).copied()
    }

    /// Number of ids including the two reserved ones.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.len() <= 2
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{FORMAT_HEADER}\n");
        for (id, (name, count)) in self.names.iter().zip(&self.counts).enumerate() {
            writeln!(out, "{id}\t{count}\t{name}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, VocabError> {
        let mut table = Self { index: HashMap::new(), names: Vec::new(), counts: Vec::new() };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == FORMAT_HEADER => {}
            _ => return Err(VocabError::Format { line: 1, reason: format!("missing {FORMAT_HEADER:?} header") }),
        }
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| VocabError::Format { line: i + 1, reason: reason.to_string() };
            let mut parts = line.splitn(3, '\t');
            let id: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad id"))?;
            let count: u64 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("bad frequency"))?;
            let name = parts.next().ok_or_else(|| bad("missing symbol"))?;
            if id != table.names.len() {
                return Err(bad("ids must be dense and ascending"));
            }
            if id >= 2 {
                table.index.insert(name.to_string(), id as u32);
            } else if name != [PAD_SYMBOL, UNK_SYMBOL][id] {
                return Err(bad("reserved ids 0 and 1 must be <PAD> and <UNK>"));
            }
            table.names.push(name.to_string());
            table.counts.push(count);
        }
        if table.names.len() < 2 {
            return Err(VocabError::Format { line: 1, reason: "reserved entries missing".into() });
        }
        Ok(table)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum VocabError {
    #[error("vocabulary line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("vocabulary io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub values: SymbolTable,
    pub paths: SymbolTable,
    /// Training-set label counts, indexed by [`Label::index`].
    pub tag_counts: [u64; 2],
}

pub const VALUES_FILE: &str = "values.vocab";
pub const PATHS_FILE: &str = "paths.vocab";
pub const TAGS_FILE: &str = "tags.vocab";

impl Vocabulary {
    /// Builds the tables from training bags only.
    pub fn build(bags: &[BagOfContexts], min_count: u64) -> Self {
        let mut values: HashMap<&str, u64> = HashMap::new();
        let mut paths: HashMap<&str, u64> = HashMap::new();
        let mut tag_counts = [0u64; 2];
        for bag in bags {
            tag_counts[bag.label.index()] += 1;
            for ctx in &bag.contexts {
                *values.entry(&ctx.start_value).or_default() += 1;
                *values.entry(&ctx.end_value).or_default() += 1;
                *paths.entry(&ctx.path_hash).or_default() += 1;
            }
        }
        Self {
            values: SymbolTable::from_counts(values, min_count),
            paths: SymbolTable::from_counts(paths, min_count),
            tag_counts,
        }
    }

    pub fn tag_id(&self, label: Label) -> u32 {
        label.index() as u32
    }

    pub fn tags_text(&self) -> String {
        let mut out = format!("{FORMAT_HEADER}\n");
        for label in Label::ALL {
            writeln!(out, "{}\t{}\t{}", label.index(), self.tag_counts[label.index()], label).unwrap();
        }
        out
    }

    fn tags_from_text(text: &str) -> Result<[u64; 2], VocabError> {
        let mut lines = text.lines();
        if lines.next() != Some(FORMAT_HEADER) {
            return Err(VocabError::Format { line: 1, reason: format!("missing {FORMAT_HEADER:?} header") });
        }
        let mut counts = [0u64; 2];
        let mut seen = 0;
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let bad = |reason: &str| VocabError::Format { line: i + 2, reason: reason.to_string() };
            let parts: Vec<&str> = line.splitn(3, '\t').collect();
            let [id, count, name] = parts[..] else { return Err(bad("expected id, frequency, symbol")) };
            let label: Label = name.parse().map_err(|e: String| bad(&e))?;
            if id.parse::<usize>().ok() != Some(label.index()) {
                return Err(bad("tag ids are fixed: 0 safe, 1 vuln"));
            }
            counts[label.index()] = count.parse().map_err(|_| bad("bad frequency"))?;
            seen += 1;
        }
        if seen != 2 {
            return Err(VocabError::Format { line: 1, reason: "tag vocabulary must list safe and vuln".into() });
        }
        Ok(counts)
    }

    /// SHA-256 over the three serialized tables; checkpoints record it.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for part in [self.values.to_text(), self.paths.to_text(), self.tags_text()] {
            h.update((part.len() as u64).to_le_bytes());
            h.update(part.as_bytes());
        }
        format!("{:x}", h.finalize())
    }

    pub fn save(&self, dir: &Path) -> Result<(), VocabError> {
        std::fs::write(dir.join(VALUES_FILE), self.values.to_text())?;
        std::fs::write(dir.join(PATHS_FILE), self.paths.to_text())?;
        std::fs::write(dir.join(TAGS_FILE), self.tags_text())?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, VocabError> {
        Ok(Self {
            values: SymbolTable::from_text(&std::fs::read_to_string(dir.join(VALUES_FILE))?)?,
            paths: SymbolTable::from_text(&std::fs::read_to_string(dir.join(PATHS_FILE))?)?,
            tag_counts: Self::tags_from_text(&std::fs::read_to_string(dir.join(TAGS_FILE))?)?,
        })
    }
}
