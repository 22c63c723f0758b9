//! Terminal-to-terminal tree paths.

use md5::{Digest, Md5};

use crate::cparse::{Ast, AstNode};

pub const UP: char = '↑';
pub const DOWN: char = '↓';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MiningLimits {
    /// Maximum path length in edges.
    pub max_length: usize,
    /// Maximum child-index spread at the lowest common ancestor.
    pub max_width: usize,
    pub max_contexts: usize,
    pub seed: u64,
}

impl Default for MiningLimits {
    fn default() -> Self {
        Self { max_length: 8, max_width: 3, max_contexts: 200, seed: 0 }
    }
}

impl MiningLimits {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_length == 0 || self.max_width == 0 || self.max_contexts == 0 {
            return Err("mining limits must be positive".into());
        }
        Ok(())
    }
}

/// Pre-order flattening with parent links.
pub struct FlatTree<'a> {
    pub nodes: Vec<&'a AstNode>,
    pub parent: Vec<Option<usize>>,
    /// Index of each node among its parent's children.
    pub child_index: Vec<usize>,
    pub children: Vec<Vec<usize>>,
    /// Node indices of terminals, in source order.
    pub terminals: Vec<usize>,
}

impl<'a> FlatTree<'a> {
    pub fn new(root: &'a AstNode) -> Self {
        let mut tree = FlatTree {
            nodes: Vec::new(),
            parent: Vec::new(),
            child_index: Vec::new(),
            children: Vec::new(),
            terminals: Vec::new(),
        };
        let mut stack = vec![(root, None, 0usize)];
        while let Some((node, parent, index)) = stack.pop() {
            let id = tree.nodes.len();
            tree.nodes.push(node);
            tree.parent.push(parent);
            tree.child_index.push(index);
            tree.children.push(Vec::with_capacity(node.children.len()));
            if let Some(p) = parent {
                tree.children[p].push(id);
            }
            if node.is_terminal() {
                tree.terminals.push(id);
            }
            for (i, child) in node.children.iter().enumerate().rev() {
                stack.push((child, Some(id), i));
            }
        }
        tree
    }
}

/// A path `n1 d1 n2 ... dk n(k+1)` between two terminals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstPath<'a> {
    pub nodes: Vec<&'a AstNode>,
    pub directions: Vec<Direction>,
    /// Source-order ordinals of the two end terminals; `start < end`.
    pub start_terminal: usize,
    pub end_terminal: usize,
}

impl<'a> AstPath<'a> {
    /// Edge count.
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn start_value(&self) -> &'a str {
        self.nodes[0].value.as_deref().unwrap_or_default()
    }

    pub fn end_value(&self) -> &'a str {
        self.nodes[self.nodes.len() - 1].value.as_deref().unwrap_or_default()
    }
}

/// All terminal pairs whose connecting path fits the length and width
/// limits, ordered by (start, end) terminal position.
///
/// Works bottom-up: each node keeps the terminals below it together with
/// their upward distance, and pairs are formed at the node where two
/// child subtrees meet, which is their lowest common ancestor.
pub fn enumerate_paths<'a>(ast: &'a Ast, limits: &MiningLimits) -> Vec<AstPath<'a>> {
    let tree = FlatTree::new(&ast.root);
    if tree.terminals.len() < 2 {
        return Vec::new();
    }
    let mut terminal_ordinal = vec![usize::MAX; tree.nodes.len()];
    for (ordinal, &node) in tree.terminals.iter().enumerate() {
        terminal_ordinal[node] = ordinal;
    }

    // (terminal node id, edges up to the current node)
    let mut reach: Vec<Vec<(usize, usize)>> = vec![Vec::new(); tree.nodes.len()];
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();

    // Children have larger pre-order ids than their parent.
    for id in (0..tree.nodes.len()).rev() {
        let kids = &tree.children[id];
        if kids.is_empty() {
            reach[id].push((id, 0));
            continue;
        }
        let lifted: Vec<Vec<(usize, usize)>> = kids
            .iter()
            .map(|&c| {
                std::mem::take(&mut reach[c])
                    .into_iter()
                    .map(|(t, d)| (t, d + 1))
                    .filter(|&(_, d)| d < limits.max_length)
                    .collect()
            })
            .collect();
        for i in 0..lifted.len() {
            for j in i + 1..lifted.len().min(i + limits.max_width + 1) {
                for &(a, da) in &lifted[i] {
                    for &(b, db) in &lifted[j] {
                        if da + db <= limits.max_length {
                            pairs.push((a, b, id));
                        }
                    }
                }
            }
        }
        reach[id] = lifted.into_iter().flatten().collect();
    }

    pairs.sort_by_key(|&(a, b, _)| (terminal_ordinal[a], terminal_ordinal[b]));
    pairs
        .into_iter()
        .map(|(a, b, lca)| build_path(&tree, a, b, lca, terminal_ordinal[a], terminal_ordinal[b]))
        .collect()
}

fn build_path<'a>(tree: &FlatTree<'a>, a: usize, b: usize, lca: usize, start: usize, end: usize) -> AstPath<'a> {
    let mut nodes = Vec::new();
    let mut directions = Vec::new();
    let mut cur = a;
    while cur != lca {
        nodes.push(tree.nodes[cur]);
        directions.push(Direction::Up);
        cur = tree.parent[cur].expect("lca is an ancestor");
    }
    nodes.push(tree.nodes[lca]);
    let mut down = Vec::new();
    let mut cur = b;
    while cur != lca {
        down.push(tree.nodes[cur]);
        cur = tree.parent[cur].expect("lca is an ancestor");
    }
    for node in down.into_iter().rev() {
        nodes.push(node);
        directions.push(Direction::Down);
    }
    AstPath { nodes, directions, start_terminal: start, end_terminal: end }
}

/// Canonical text of a path: node kinds joined by direction glyphs, with
/// terminal values left out, e.g. `NameExpr↑AssignExpr↓IntegerLiteralExpr`.
pub fn path_string(path: &AstPath<'_>) -> String {
    let mut out = String::new();
    for (i, node) in path.nodes.iter().enumerate() {
        out.push_str(&node.kind);
        if let Some(dir) = path.directions.get(i) {
            out.push(match dir {
                Direction::Up => UP,
                Direction::Down => DOWN,
            });
        }
    }
    out
}

/// Lowercase hex MD5 of the UTF-8 bytes.
pub fn hash_path(canonical: &str) -> String {
    format!("{:x}", Md5::digest(canonical.as_bytes()))
}
