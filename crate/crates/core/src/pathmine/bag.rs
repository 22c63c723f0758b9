use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::paths::{enumerate_paths, hash_path, path_string, MiningLimits};
use crate::corpus::Label;
use crate::cparse::{kinds, Ast};

/// Value substituted for every string literal.
pub const STRING_PLACEHOLDER: &str = "STR";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathContext {
    pub start_value: String,
    pub path_hash: String,
    pub end_value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BagOfContexts {
    pub sample_id: u64,
    pub label: Label,
    pub contexts: Vec<PathContext>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("no path-contexts could be extracted")]
    EmptyBag,
}

fn normalize_value<'a>(kind: &str, value: &'a str) -> &'a str {
    if kind == kinds::STRING_LITERAL_EXPR {
        STRING_PLACEHOLDER
    } else {
        value
    }
}

/// Values that would break the space/comma-delimited C2V line format.
pub fn is_representable(value: &str) -> bool {
    !value.is_empty() && !value.contains(|c: char| c == ',' || c.is_whitespace())
}

/// Seed for one sample's context sampling, mixed from the run seed and the
/// sample id (splitmix64 finalizer).
pub fn sample_seed(seed: u64, sample_id: u64) -> u64 {
    let mut z = seed ^ sample_id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Extracts the bag of path-contexts for one function.
///
/// Contexts whose values contain a space or comma are dropped. When more
/// than `max_contexts` remain, a uniform subset of exactly `max_contexts`
/// is drawn without replacement, kept in source order, seeded by
/// `(limits.seed, sample_id)`.
pub fn extract_bag(
    ast: &Ast,
    sample_id: u64,
    label: Label,
    limits: &MiningLimits,
) -> Result<BagOfContexts, ExtractError> {
    let paths = enumerate_paths(ast, limits);
    let mut dropped = 0usize;
    let mut contexts: Vec<PathContext> = Vec::with_capacity(paths.len());
    for path in &paths {
        let first = path.nodes[0];
        let last = path.nodes[path.nodes.len() - 1];
        let start = normalize_value(&first.kind, path.start_value());
        let end = normalize_value(&last.kind, path.end_value());
        if !is_representable(start) || !is_representable(end) {
            dropped += 1;
            continue;
        }
        contexts.push(PathContext {
            start_value: start.to_string(),
            path_hash: hash_path(&path_string(path)),
            end_value: end.to_string(),
        });
    }
    if dropped > 0 {
        log::warn!("sample {sample_id}: dropped {dropped} contexts whose values contain spaces or commas");
    }
    if contexts.is_empty() {
        return Err(ExtractError::EmptyBag);
    }
    if contexts.len() > limits.max_contexts {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(limits.seed, sample_id));
        let mut keep = rand::seq::index::sample(&mut rng, contexts.len(), limits.max_contexts).into_vec();
        keep.sort_unstable();
        let mut all: Vec<Option<PathContext>> = contexts.into_iter().map(Some).collect();
        contexts = keep.into_iter().map(|i| all[i].take().expect("indices are distinct")).collect();
    }
    Ok(BagOfContexts { sample_id, label, contexts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cparse::{parse_source, AstNode};

    fn wide_ast(leaves: usize) -> Ast {
        // Groups of four siblings under a chain of blocks gives plenty of
        // short paths.
        let groups = (0..leaves / 4)
            .map(|g| {
                AstNode::node("Block", (0..4).map(|i| AstNode::terminal("NameExpr", format!("v{g}_{i}"))).collect())
            })
            .collect();
        Ast::new(AstNode::node(kinds::FUNCTION_DEF, groups)).unwrap()
    }

    #[test]
    fn small_bag_keeps_everything() {
        let ast = parse_source("void f(){ x = 7; }").unwrap();
        let n = enumerate_paths(&ast, &MiningLimits::default()).len();
        let bag = extract_bag(&ast, 3, Label::Safe, &MiningLimits::default()).unwrap();
        assert_eq!(bag.contexts.len(), n);
        assert_eq!(bag.sample_id, 3);
        let ctx = bag.contexts.iter().find(|c| c.start_value == "x" && c.end_value == "7").unwrap();
        assert_eq!(ctx.path_hash, hash_path("NameExpr↑AssignExpr↓IntegerLiteralExpr"));
    }

    #[test]
    fn few_paths_below_cap() {
        // FunctionDef(a, b, Block(c, d)) at width 1: a-b, b-c, b-d, c-d.
        let ast = Ast::new(AstNode::node(
            kinds::FUNCTION_DEF,
            vec![
                AstNode::terminal("A", "a"),
                AstNode::terminal("B", "b"),
                AstNode::node("Block", vec![AstNode::terminal("C", "c"), AstNode::terminal("D", "d")]),
            ],
        ))
        .unwrap();
        let limits = MiningLimits { max_width: 1, ..Default::default() };
        let n = enumerate_paths(&ast, &limits).len();
        assert_eq!(n, 4);
        let bag = extract_bag(&ast, 0, Label::Vuln, &limits).unwrap();
        assert_eq!(bag.contexts.len(), 4);
    }

    #[test]
    fn oversized_bags_are_sampled_deterministically() {
        let ast = wide_ast(200);
        let limits = MiningLimits::default();
        assert!(enumerate_paths(&ast, &limits).len() >= 500);
        let a = extract_bag(&ast, 11, Label::Vuln, &limits).unwrap();
        let b = extract_bag(&ast, 11, Label::Vuln, &limits).unwrap();
        assert_eq!(a.contexts.len(), 200);
        assert_eq!(a, b);
        let c = extract_bag(&ast, 12, Label::Vuln, &limits).unwrap();
        assert_ne!(a.contexts, c.contexts);
        let distinct: std::collections::HashSet<_> = a.contexts.iter().collect();
        assert_eq!(distinct.len(), 200, "sampling must be without replacement");
    }

    #[test]
    fn strings_are_normalized_and_separators_dropped() {
        let ast = parse_source("void f(){ log(\"a b\", x, ','); }").unwrap();
        let bag = extract_bag(&ast, 0, Label::Safe, &MiningLimits::default()).unwrap();
        assert!(bag.contexts.iter().any(|c| c.start_value == "STR" || c.end_value == "STR"));
        assert!(bag.contexts.iter().all(|c| is_representable(&c.start_value) && is_representable(&c.end_value)));
    }

    #[test]
    fn empty_bag() {
        let ast = Ast::new(AstNode::node(kinds::FUNCTION_DEF, vec![AstNode::terminal("NameExpr", "x")])).unwrap();
        assert_eq!(extract_bag(&ast, 0, Label::Safe, &MiningLimits::default()), Err(ExtractError::EmptyBag));
    }
}
