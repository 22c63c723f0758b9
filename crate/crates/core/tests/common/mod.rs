//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;

use code2vuln::corpus::{FunctionSample, Label, SplitCorpus};
use code2vuln::cparse::{Ast, AstNode};
use code2vuln::model::{AdamConfig, AdamState, Checkpoint, ModelParams};
use code2vuln::pathmine::{BagOfContexts, MiningLimits, PathContext, Vocabulary};
use rand::Rng;

pub const FIG1: &str = "void scsi_req_abort(SCSIRequest *req, int status) {
    if (!req->enqueued) {
        return;
    }
    scsi_req_ref(req);
    scsi_req_dequeue(req);
    req->io_canceled = true;
    if (req->ops->cancel_io) {
        req->ops->cancel_io(req);
    }
    scsi_req_complete(req, status);
    scsi_req_unref(req);
}
";

pub const FIG2: &str = "uint32_t HELPER(shr_cc)(CPUM68KState *env, uint32_t val, uint32_t shift) {
    uint64_t temp;
    uint32_t result;
    shift &= 63;
    temp = (uint64_t)val << 32 >> shift;
    result = temp >> 32;
    env->cc_c = (temp >> 31) & 1;
    env->cc_n = result;
    env->cc_z = result;
    env->cc_v = 0;
    env->cc_x = shift ? env->cc_c : env->cc_x;
    return result;
}
";

// ---------------------------------------------------------------- random ASTs

const INNER_KINDS: &[&str] = &["Block", "IfStmt", "BinaryExpr:+", "CallExpr", "AssignExpr"];
const LEAF_KINDS: &[&str] = &["NameExpr", "IntegerLiteralExpr", "FieldName"];

/// Random tree with a FunctionDef root and at most `max_nodes` nodes.
pub fn random_ast(rng: &mut impl Rng, max_nodes: usize) -> Ast {
    let target = rng.gen_range(2..=max_nodes);
    // Grow by attaching each new node to a random existing node, then turn
    // the parent/child lists into a tree.
    let mut parent: Vec<Option<usize>> = vec![None];
    for i in 1..target {
        parent.push(Some(rng.gen_range(0..i)));
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); target];
    for (i, p) in parent.iter().enumerate() {
        if let Some(p) = p {
            children[*p].push(i);
        }
    }
    fn build(i: usize, children: &[Vec<usize>], rng: &mut impl Rng) -> AstNode {
        if children[i].is_empty() {
            let kind = LEAF_KINDS[rng.gen_range(0..LEAF_KINDS.len())];
            AstNode::terminal(kind, format!("v{}", rng.gen_range(0..5)))
        } else {
            let kind = if i == 0 { "FunctionDef" } else { INNER_KINDS[rng.gen_range(0..INNER_KINDS.len())] };
            AstNode::node(kind, children[i].iter().map(|&c| build(c, children, rng)).collect())
        }
    }
    let mut root = build(0, &children, rng);
    if root.children.is_empty() {
        root = AstNode::node("FunctionDef", vec![AstNode::terminal("NameExpr", "f")]);
    }
    Ast::new(root).expect("generated tree is well formed")
}

/// A path as (start terminal ordinal, end terminal ordinal, pre-order ids of
/// every node along it).
pub type OraclePath = (usize, usize, Vec<usize>);

struct Flat<'a> {
    nodes: Vec<&'a AstNode>,
    parent: Vec<Option<usize>>,
    child_index: Vec<usize>,
}

fn flatten<'a>(node: &'a AstNode, parent: Option<usize>, index: usize, out: &mut Flat<'a>) {
    let me = out.nodes.len();
    out.nodes.push(node);
    out.parent.push(parent);
    out.child_index.push(index);
    for (i, c) in node.children.iter().enumerate() {
        flatten(c, Some(me), i, out);
    }
}

/// Brute force: every terminal pair, joined through its lowest common
/// ancestor, kept when length and width are within the limits.
pub fn oracle_paths(ast: &Ast, limits: &MiningLimits) -> BTreeSet<OraclePath> {
    let mut flat = Flat { nodes: Vec::new(), parent: Vec::new(), child_index: Vec::new() };
    flatten(&ast.root, None, 0, &mut flat);
    let terminals: Vec<usize> = (0..flat.nodes.len()).filter(|&i| flat.nodes[i].children.is_empty()).collect();
    let chain = |mut n: usize| {
        let mut v = vec![n];
        while let Some(p) = flat.parent[n] {
            v.push(p);
            n = p;
        }
        v
    };
    let mut out = BTreeSet::new();
    for a in 0..terminals.len() {
        for b in a + 1..terminals.len() {
            let up = chain(terminals[a]);
            let down = chain(terminals[b]);
            let lca_pos_a = up.iter().position(|n| down.contains(n)).unwrap();
            let lca = up[lca_pos_a];
            let lca_pos_b = down.iter().position(|&n| n == lca).unwrap();
            let length = lca_pos_a + lca_pos_b;
            let width = flat.child_index[up[lca_pos_a - 1]].abs_diff(flat.child_index[down[lca_pos_b - 1]]);
            if length > limits.max_length || width > limits.max_width {
                continue;
            }
            let mut nodes: Vec<usize> = up[..=lca_pos_a].to_vec();
            nodes.extend(down[..lca_pos_b].iter().rev());
            out.insert((a, b, nodes));
        }
    }
    out
}

/// `enumerate_paths` output in the oracle's representation.
pub fn implementation_paths(ast: &Ast, limits: &MiningLimits) -> BTreeSet<OraclePath> {
    let mut ids = std::collections::HashMap::new();
    ast.root.walk(&mut |n| {
        let next = ids.len();
        ids.insert(n as *const AstNode, next);
    });
    code2vuln::pathmine::enumerate_paths(ast, limits)
        .iter()
        .map(|p| (p.start_terminal, p.end_terminal, p.nodes.iter().map(|&n| ids[&(n as *const AstNode)]).collect()))
        .collect()
}

// ------------------------------------------------------------ model oracle

/// Direct transcription of the forward equations; returns the loss.
pub fn reference_loss(p: &ModelParams, contexts: &[[u32; 3]], label: Label) -> f64 {
    let d = p.dim;
    let mut hs = Vec::new();
    for &[s, j, t] in contexts {
        if s == 0 && j == 0 && t == 0 {
            continue;
        }
        let mut c = Vec::new();
        c.extend_from_slice(p.value_embeddings.row(s as usize));
        c.extend_from_slice(p.path_embeddings.row(j as usize));
        c.extend_from_slice(p.value_embeddings.row(t as usize));
        let h: Vec<f64> = (0..d).map(|i| (0..3 * d).map(|k| p.w(i, k) * c[k]).sum::<f64>().tanh()).collect();
        hs.push(h);
    }
    let scores: Vec<f64> = hs.iter().map(|h| h.iter().zip(&p.attention).map(|(x, y)| x * y).sum()).collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    let mut v = vec![0.0; d];
    for (h, s) in hs.iter().zip(&scores) {
        let a = (s - max).exp() / z;
        for i in 0..d {
            v[i] += a * h[i];
        }
    }
    let logits: Vec<f64> = (0..2).map(|y| v.iter().zip(p.tag_embeddings.row(y)).map(|(a, b)| a * b).sum()).collect();
    let m = logits[0].max(logits[1]);
    let lz = m + ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
    lz - logits[label.index()]
}

// ------------------------------------------------------- crafted fixture

fn bag(id: u64, label: Label, values: &[&str]) -> BagOfContexts {
    BagOfContexts {
        sample_id: id,
        label,
        contexts: values
            .windows(2)
            .map(|w| PathContext { start_value: w[0].into(), path_hash: format!("{:032x}", 7), end_value: w[1].into() })
            .collect(),
    }
}

/// Ten bags and a hand-set checkpoint that predicts `vuln` exactly for bags
/// containing the value `bad`: 3 true positives, 1 false positive, 4 true
/// negatives and 2 false negatives.
pub fn crafted_fixture() -> (Vec<BagOfContexts>, Vocabulary, Checkpoint) {
    use Label::*;
    let layout: [(Label, bool); 10] = [
        (Vuln, true),
        (Vuln, true),
        (Vuln, true),
        (Safe, true),
        (Safe, false),
        (Safe, false),
        (Safe, false),
        (Safe, false),
        (Vuln, false),
        (Vuln, false),
    ];
    let bags: Vec<BagOfContexts> = layout
        .iter()
        .enumerate()
        .map(|(i, &(label, flagged))| {
            let vals = if flagged { vec!["a", "bad", "c"] } else { vec!["a", "b", "c"] };
            bag(i as u64, label, &vals)
        })
        .collect();
    let vocab = Vocabulary::build(&bags, 1);
    let mut params = ModelParams::zeros(vocab.values.len(), vocab.paths.len(), 2);
    params.value_embeddings.row_mut(vocab.values.id("bad") as usize).copy_from_slice(&[1.0, 0.0]);
    // Start-value and end-value blocks map coordinate 0 straight through.
    params.transform.row_mut(0).copy_from_slice(&[5.0, 0.0]);
    params.transform.row_mut(4).copy_from_slice(&[5.0, 0.0]);
    params.tag_embeddings.row_mut(Label::Vuln.index()).copy_from_slice(&[10.0, 0.0]);
    let adam = AdamState::new(&params, AdamConfig::default());
    let checkpoint = Checkpoint { params, adam, vocab_digest: vocab.digest(), meta: serde_json::json!({}) };
    (bags, vocab, checkpoint)
}

// ------------------------------------------------------------ corpus files

pub fn write_jsonl(path: &Path, samples: &[FunctionSample]) {
    let mut text = String::new();
    for s in samples {
        let target = if s.label == Label::Vuln { 1 } else { 0 };
        text.push_str(&serde_json::json!({ "func": s.source_text, "target": target, "idx": s.id }).to_string());
        text.push('\n');
    }
    std::fs::write(path, text).unwrap();
}

pub fn write_splits(dir: &Path, corpus: &SplitCorpus) {
    write_jsonl(&dir.join("train.jsonl"), &corpus.train);
    write_jsonl(&dir.join("valid.jsonl"), &corpus.validation);
    write_jsonl(&dir.join("test.jsonl"), &corpus.test);
}
