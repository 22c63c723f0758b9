//! Analytic gradients of the cross-entropy loss.
//!
//! With `g_y = q_y - [y = label]` (scaled by the per-sample weight):
//!
//! ```text
//! ∂tags[y]  = g_y v                     ∂v   = Σ_y g_y tags[y]
//! ∂h̃_i     = α_i ∂v + s_i a            ∂α_i = h̃_i · ∂v
//! s_i       = α_i (∂α_i - Σ_j α_j ∂α_j) ∂a   = Σ_i s_i h̃_i
//! ∂z_i      = (∂h̃_i ⊙ mask_i)(1 - h_i²)
//! ∂W        = Σ_i ∂z_i c_iᵀ             ∂c_i = Wᵀ ∂z_i
//! ```
//!
//! where `h̃` is the post-dropout combined vector. `∂c_i` is scattered into
//! the value rows `s`, `t` and the path row `j`.

use std::collections::HashMap;

use super::forward::{slot_row, ForwardTrace, SlotGroups};
use super::{axpy, dot, ModelParams, NUM_TAGS};
use crate::corpus::Label;

/// Gradient rows for the subset of an embedding table touched by a batch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRows {
    dim: usize,
    index: HashMap<u32, usize>,
    ids: Vec<u32>,
    data: Vec<f64>,
}

impl SparseRows {
    pub fn new(dim: usize) -> Self {
        Self { dim, ..Default::default() }
    }

    pub fn row_mut(&mut self, id: u32) -> &mut [f64] {
        let slot = match self.index.get(&id) {
            Some(&slot) => slot,
            None => {
                let slot = self.ids.len();
                self.index.insert(id, slot);
                self.ids.push(id);
                self.data.resize(self.data.len() + self.dim, 0.0);
                slot
            }
        };
        &mut self.data[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn get(&self, id: u32) -> Option<&[f64]> {
        self.index.get(&id).map(|&slot| &self.data[slot * self.dim..(slot + 1) * self.dim])
    }

    /// Rows in first-touch order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &[f64])> + '_ {
        self.ids.iter().enumerate().map(move |(slot, &id)| (id, &self.data[slot * self.dim..(slot + 1) * self.dim]))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn add(&mut self, other: &SparseRows) {
        for (id, row) in other.iter() {
            axpy(self.row_mut(id), 1.0, row);
        }
    }

    fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }
}

/// Gradients shaped like [`ModelParams`]; embedding tables are sparse.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub value_embeddings: SparseRows,
    pub path_embeddings: SparseRows,
    pub transform: Vec<f64>,
    pub attention: Vec<f64>,
    pub tag_embeddings: Vec<f64>,
}

impl Gradients {
    pub fn zeros(dim: usize) -> Self {
        Self {
            value_embeddings: SparseRows::new(dim),
            path_embeddings: SparseRows::new(dim),
            transform: vec![0.0; 3 * dim * dim],
            attention: vec![0.0; dim],
            tag_embeddings: vec![0.0; NUM_TAGS * dim],
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        self.value_embeddings.add(&other.value_embeddings);
        self.path_embeddings.add(&other.path_embeddings);
        axpy(&mut self.transform, 1.0, &other.transform);
        axpy(&mut self.attention, 1.0, &other.attention);
        axpy(&mut self.tag_embeddings, 1.0, &other.tag_embeddings);
    }

    pub fn scale(&mut self, factor: f64) {
        self.value_embeddings.scale(factor);
        self.path_embeddings.scale(factor);
        for t in [&mut self.transform, &mut self.attention, &mut self.tag_embeddings] {
            t.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// Largest absolute coordinate, for sanity checks.
    pub fn max_abs(&self) -> f64 {
        let dense = self.transform.iter().chain(&self.attention).chain(&self.tag_embeddings);
        let sparse = self.value_embeddings.data.iter().chain(&self.path_embeddings.data);
        dense.chain(sparse).fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Accumulates `weight * ∂loss/∂θ` for one bag into `grads`.
pub fn backward_into(trace: &ForwardTrace, label: Label, params: &ModelParams, weight: f64, grads: &mut Gradients) {
    let d = trace.dim;
    let n = trace.mask.len();

    let mut dlogits = trace.probs;
    dlogits[label.index()] -= 1.0;
    dlogits.iter_mut().for_each(|g| *g *= weight);
    if dlogits.iter().all(|&g| g == 0.0) {
        return;
    }

    let mut dv = vec![0.0; d];
    for (y, &g) in dlogits.iter().enumerate() {
        axpy(&mut grads.tag_embeddings[y * d..(y + 1) * d], g, &trace.code_vector);
        axpy(&mut dv, g, params.tag_embeddings.row(y));
    }

    let dalpha: Vec<f64> =
        (0..n).map(|i| if trace.mask[i] { dot(&trace.dropped[i * d..(i + 1) * d], &dv) } else { 0.0 }).collect();
    let mean: f64 = trace.attention.iter().zip(&dalpha).map(|(a, g)| a * g).sum();

    // ∂z summed per distinct id in each slot; W and the embeddings are then
    // visited once per distinct row instead of once per context.
    let groups = SlotGroups::new(&trace.contexts, &trace.mask);
    let mut dz_sums: [Vec<f64>; 3] = std::array::from_fn(|b| vec![0.0; groups.ids[b].len() * d]);
    let mut dz = vec![0.0; d];
    for i in 0..n {
        if !trace.mask[i] {
            continue;
        }
        let alpha = trace.attention[i];
        let dscore = alpha * (dalpha[i] - mean);
        let dropped = &trace.dropped[i * d..(i + 1) * d];
        axpy(&mut grads.attention, dscore, dropped);

        let h = &trace.combined[i * d..(i + 1) * d];
        let keep = &trace.dropout.scale[i * d..(i + 1) * d];
        for k in 0..d {
            let dh = alpha * dv[k] + dscore * params.attention[k];
            dz[k] = dh * keep[k] * (1.0 - h[k] * h[k]);
        }
        for (b, &slot) in groups.slots[i].iter().enumerate() {
            axpy(&mut dz_sums[b][slot * d..(slot + 1) * d], 1.0, &dz);
        }
    }

    for (b, ids) in groups.ids.iter().enumerate() {
        for (g, &id) in ids.iter().enumerate() {
            let dz = &dz_sums[b][g * d..(g + 1) * d];
            let row = slot_row(params, b, id);
            let mut dc = vec![0.0; d];
            for (k, &ck) in row.iter().enumerate() {
                let input = b * d + k;
                dc[k] = dot(params.transform.row(input), dz);
                if ck != 0.0 {
                    axpy(&mut grads.transform[input * d..(input + 1) * d], ck, dz);
                }
            }
            let target = if b == 1 { &mut grads.path_embeddings } else { &mut grads.value_embeddings };
            axpy(target.row_mut(id), 1.0, &dc);
        }
    }
}

/// Gradients of one bag's loss.
pub fn backward(trace: &ForwardTrace, label: Label, params: &ModelParams) -> Gradients {
    let mut grads = Gradients::zeros(params.dim);
    backward_into(trace, label, params, 1.0, &mut grads);
    grads
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, init_params};

    type NoRng = rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        let mut p = init_params(5, 5, 4, 1);
        // Saturate the vuln logit so q(vuln) rounds to exactly 1.
        p.tag_embeddings.row_mut(1).fill(1e6);
        p.tag_embeddings.row_mut(0).fill(-1e6);
        p.transform.data.fill(0.0);
        for i in 0..4 {
            p.transform.data[i * 4 + i] = 10.0;
        }
        p.value_embeddings.row_mut(2).fill(1.0);
        let t = forward::<NoRng>(&p, &[[2, 2, 2]], None).unwrap();
        assert_eq!(t.probs[1], 1.0);
        let g = backward(&t, Label::Vuln, &p);
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn padding_contributes_nothing() {
        let p = init_params(6, 6, 4, 9);
        let real = [[2, 3, 4], [5, 2, 3]];
        let padded = [[2, 3, 4], [0, 0, 0], [5, 2, 3], [0, 0, 0]];
        let a = backward(&forward::<NoRng>(&p, &real, None).unwrap(), Label::Safe, &p);
        let b = backward(&forward::<NoRng>(&p, &padded, None).unwrap(), Label::Safe, &p);
        assert!(b.value_embeddings.get(0).is_none());
        assert!(b.path_embeddings.get(0).is_none());
        for (x, y) in a.transform.iter().zip(&b.transform) {
            assert!((x - y).abs() < 1e-15);
        }
        for (id, row) in a.value_embeddings.iter() {
            let other = b.value_embeddings.get(id).unwrap();
            assert!(row.iter().zip(other).all(|(x, y)| (x - y).abs() < 1e-15));
        }
    }

    #[test]
    fn sparse_rows_accumulate() {
        let mut a = SparseRows::new(2);
        a.row_mut(5).copy_from_slice(&[1.0, 2.0]);
        let mut b = SparseRows::new(2);
        b.row_mut(5).copy_from_slice(&[0.5, 0.5]);
        b.row_mut(7).copy_from_slice(&[1.0, 1.0]);
        a.add(&b);
        assert_eq!(a.get(5), Some(&[1.5, 2.5][..]));
        assert_eq!(a.get(7), Some(&[1.0, 1.0][..]));
        assert_eq!(a.iter().map(|(id, _)| id).collect::<Vec<_>>(), vec![5, 7]);
    }

    fn loss_at(p: &ModelParams, ctx: &[[u32; 3]], label: Label) -> f64 {
        forward::<NoRng>(p, ctx, None).unwrap().loss(label)
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(40))]
        #[test]
        fn matches_central_differences(
            seed in 0u64..10_000,
            ctx in proptest::collection::vec((1u32..5, 1u32..5, 1u32..5), 1..5),
            vuln in proptest::bool::ANY,
        ) {
            let mut p = init_params(5, 5, 4, seed);
            // Larger weights so the check is not dominated by the linear regime.
            for t in p.tensors_mut() {
                t.iter_mut().for_each(|x| *x *= 8.0);
            }
            let ctx: Vec<[u32; 3]> = ctx.into_iter().map(|(s, j, t)| [s, j, t]).collect();
            let label = if vuln { Label::Vuln } else { Label::Safe };
            let g = backward(&forward::<NoRng>(&p, &ctx, None).unwrap(), label, &p);
            let value_rows = p.value_embeddings.data.len();
            let path_rows = p.path_embeddings.data.len();
            let analytic = |tensor: usize, i: usize| -> f64 {
                match tensor {
                    0 => g.value_embeddings.get((i / 4) as u32).map_or(0.0, |r| r[i % 4]),
                    1 => g.path_embeddings.get((i / 4) as u32).map_or(0.0, |r| r[i % 4]),
                    2 => g.transform[i],
                    3 => g.attention[i],
                    _ => g.tag_embeddings[i],
                }
            };
            let lens = [value_rows, path_rows, p.transform.data.len(), 4, 8];
            let h = 1e-5;
            for (tensor, &len) in lens.iter().enumerate() {
                for i in 0..len {
                    let mut plus = p.clone();
                    plus.tensors_mut()[tensor][i] += h;
                    let mut minus = p.clone();
                    minus.tensors_mut()[tensor][i] -= h;
                    let numeric = (loss_at(&plus, &ctx, label) - loss_at(&minus, &ctx, label)) / (2.0 * h);
                    let a = analytic(tensor, i);
                    let scale = a.abs().max(numeric.abs());
                    proptest::prop_assert!(
                        (a - numeric).abs() <= 1e-4 * scale || (a - numeric).abs() < 1e-9,
                        "tensor {} coord {}: analytic {} numeric {}", tensor, i, a, numeric
                    );
                }
            }
        }
    }
}
