use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{FunctionSample, Label, SplitName};
use crate::cparse::parse_source;
use crate::pathmine::{extract_bag, BagOfContexts, ExtractError, MiningLimits};

/// Why a function produced no bag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub category: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub split: SplitName,
    pub id: u64,
    pub category: String,
    pub reason: String,
}

/// Samples excluded from training and evaluation, with their causes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReport {
    pub entries: Vec<SkipEntry>,
}

impl SkipReport {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn by_category(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.category.as_str()).or_insert(0) += 1;
        }
        out
    }

    pub fn count_for(&self, split: SplitName) -> usize {
        self.entries.iter().filter(|e| e.split == split).count()
    }

    pub fn extend(&mut self, other: SkipReport) {
        self.entries.extend(other.entries);
    }
}

/// Parses one function and mines its bag.
pub fn extract_source(source: &str, id: u64, label: Label, limits: &MiningLimits) -> Result<BagOfContexts, Skip> {
    let ast = parse_source(source).map_err(|e| Skip { category: e.category().to_string(), reason: e.to_string() })?;
    extract_bag(&ast, id, label, limits).map_err(|e| match e {
        ExtractError::EmptyBag => Skip { category: "empty_bag".into(), reason: e.to_string() },
    })
}

/// Mines every sample of a split in parallel; output order follows input.
pub fn extract_split(
    samples: &[FunctionSample],
    split: SplitName,
    limits: &MiningLimits,
) -> (Vec<BagOfContexts>, SkipReport) {
    let results: Vec<Result<BagOfContexts, Skip>> =
        samples.par_iter().map(|s| extract_source(&s.source_text, s.id, s.label, limits)).collect();
    let mut bags = Vec::with_capacity(samples.len());
    let mut report = SkipReport::default();
    for (sample, result) in samples.iter().zip(results) {
        match result {
            Ok(bag) => bags.push(bag),
            Err(skip) => {
                log::debug!("{} sample {} skipped: {}", split.as_str(), sample.id, skip.reason);
                report.entries.push(SkipEntry { split, id: sample.id, category: skip.category, reason: skip.reason });
            }
        }
    }
    (bags, report)
}
