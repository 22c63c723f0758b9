//! Labeled function corpus in the CodeXGLUE defect-detection layout: JSON
//! Lines records with `func`, `target` and (optionally) `idx` fields.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Safe,
    Vuln,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Safe, Label::Vuln];

    /// 0 is safe, 1 is vuln.
    pub fn from_target(target: i64) -> Option<Self> {
        match target {
            0 => Some(Label::Safe),
            1 => Some(Label::Vuln),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Safe => "safe",
            Label::Vuln => "vuln",
        }
    }

    /// Position in the tag vocabulary.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Label::ALL.get(i).copied()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "safe" => Ok(Label::Safe),
            "vuln" => Ok(Label::Vuln),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Valid,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Valid, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Valid => "valid",
            SplitName::Test => "test",
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSample {
    pub id: u64,
    pub source_text: String,
    pub label: Label,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{split}: line {line}: malformed record: {reason}")]
    MalformedRecord { split: SplitName, line: usize, reason: String },
    #[error("{split}: line {line}: invalid label {target} (expected 0 or 1)")]
    InvalidLabel { split: SplitName, line: usize, target: i64 },
    #[error("duplicate sample id {id} in {first} and {second}")]
    DuplicateId { id: u64, first: SplitName, second: SplitName },
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Deserialize)]
struct RawRecord {
    func: Option<String>,
    target: Option<serde_json::Value>,
    idx: Option<u64>,
}

/// Parses JSON Lines text. Blank lines are ignored; ids fall back to the
/// 0-based line number when a record has no `idx`.
pub fn parse_split(text: &str, split: SplitName) -> Result<Vec<FunctionSample>, CorpusError> {
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        samples.push(parse_record(line, i, split)?);
    }
    Ok(samples)
}

fn parse_record(line: &str, index: usize, split: SplitName) -> Result<FunctionSample, CorpusError> {
    let line_no = index + 1;
    let malformed = |reason: String| CorpusError::MalformedRecord { split, line: line_no, reason };
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let source_text = raw.func.ok_or_else(|| malformed("missing field `func`".into()))?;
    if source_text.trim().is_empty() {
        return Err(malformed("empty `func`".into()));
    }
    let target = raw.target.ok_or_else(|| malformed("missing field `target`".into()))?;
    let target = target.as_i64().ok_or_else(|| malformed(format!("non-integer `target` {target}")))?;
    let label = Label::from_target(target).ok_or(CorpusError::InvalidLabel { split, line: line_no, target })?;
    Ok(FunctionSample { id: raw.idx.unwrap_or(index as u64), source_text, label })
}

pub fn load_split(path: &Path, split: SplitName) -> Result<Vec<FunctionSample>, CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.display().to_string(), source };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(parse_record(&line, i, split)?);
    }
    Ok(samples)
}

/// Per-label counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub vuln: usize,
    pub safe: usize,
}

impl LabelCounts {
    pub fn total(&self) -> usize {
        self.vuln + self.safe
    }

    pub fn add(&mut self, label: Label) {
        match label {
            Label::Vuln => self.vuln += 1,
            Label::Safe => self.safe += 1,
        }
    }
}

pub fn corpus_stats(samples: &[FunctionSample]) -> LabelCounts {
    let mut counts = LabelCounts::default();
    for s in samples {
        counts.add(s.label);
    }
    counts
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SplitCorpus {
    pub train: Vec<FunctionSample>,
    pub validation: Vec<FunctionSample>,
    pub test: Vec<FunctionSample>,
}

impl SplitCorpus {
    /// Assembles the three splits, rejecting any id that occurs in more
    /// than one place.
    pub fn new(
        train: Vec<FunctionSample>,
        validation: Vec<FunctionSample>,
        test: Vec<FunctionSample>,
    ) -> Result<Self, CorpusError> {
        let mut seen = std::collections::HashMap::new();
        for (split, samples) in [(SplitName::Train, &train), (SplitName::Valid, &validation), (SplitName::Test, &test)]
        {
            for s in samples {
                if let Some(first) = seen.insert(s.id, split) {
                    return Err(CorpusError::DuplicateId { id: s.id, first, second: split });
                }
            }
        }
        Ok(Self { train, validation, test })
    }

    pub fn split(&self, name: SplitName) -> &[FunctionSample] {
        match name {
            SplitName::Train => &self.train,
            SplitName::Valid => &self.validation,
            SplitName::Test => &self.test,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_targets_to_labels() {
        let text =
            "{\"func\":\"void f(){}\",\"target\":0}\n{\"func\":\"int g(){return 1;}\",\"target\":1,\"idx\":42}\n";
        let samples = parse_split(text, SplitName::Train).unwrap();
        assert_eq!(samples[0], FunctionSample { id: 0, source_text: "void f(){}".into(), label: Label::Safe });
        assert_eq!(samples[1].label, Label::Vuln);
        assert_eq!(samples[1].id, 42);
    }

    #[test]
    fn malformed_records_abort_with_line_number() {
        let text = "{\"func\":\"a\",\"target\":0}\nnot json\n";
        match parse_split(text, SplitName::Valid) {
            Err(CorpusError::MalformedRecord { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_split("{\"target\":0}", SplitName::Test),
            Err(CorpusError::MalformedRecord { line: 1, .. })
        ));
        assert!(matches!(
            parse_split("{\"func\":\"x\",\"target\":\"1\"}", SplitName::Test),
            Err(CorpusError::MalformedRecord { .. })
        ));
        assert!(matches!(
            parse_split("{\"func\":\"\",\"target\":1}", SplitName::Test),
            Err(CorpusError::MalformedRecord { .. })
        ));
    }

    #[test]
    fn invalid_label() {
        assert!(matches!(
            parse_split("{\"func\":\"x\",\"target\":2}", SplitName::Train),
            Err(CorpusError::InvalidLabel { target: 2, line: 1, .. })
        ));
    }

    #[test]
    fn stats() {
        assert_eq!(corpus_stats(&[]), LabelCounts { vuln: 0, safe: 0 });
        let text = "{\"func\":\"a\",\"target\":1}\n{\"func\":\"b\",\"target\":0}\n{\"func\":\"c\",\"target\":1}\n";
        let counts = corpus_stats(&parse_split(text, SplitName::Train).unwrap());
        assert_eq!(counts, LabelCounts { vuln: 2, safe: 1 });
        assert_eq!(counts.total(), 3);
    }

    #[test]
    fn split_corpus_rejects_shared_ids() {
        let s = |id| FunctionSample { id, source_text: "x".into(), label: Label::Safe };
        assert!(SplitCorpus::new(vec![s(1)], vec![s(2)], vec![s(3)]).is_ok());
        assert!(matches!(
            SplitCorpus::new(vec![s(1)], vec![s(2)], vec![s(1)]),
            Err(CorpusError::DuplicateId { id: 1, .. })
        ));
    }
}
