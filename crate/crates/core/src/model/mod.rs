//! Path-attention network over bags of encoded path-contexts.
//!
//! Per context `(s, j, t)`:
//!
//! ```text
//! c   = [values[s]; paths[j]; values[t]]          (3d)
//! h   = tanh(W c)                                  (d)
//! α   = softmax_i(h_i · a)                         over unmasked contexts
//! v   = Σ α_i h_i                                  (d)
//! q   = softmax_y(v · tags[y])                     over {safe, vuln}
//! ```
//!
//! Training minimizes `-ln q(label)` with Adam. Gradients are derived by
//! hand in [`backward`].

pub mod adam;
pub mod backward;
pub mod checkpoint;
pub mod dropout;
pub mod forward;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use backward::{backward, backward_into, Gradients, SparseRows};
pub use checkpoint::Checkpoint;
pub use dropout::{apply_dropout, DropoutMask};
pub use forward::{
    attention_weights, code_vector, combine, embed_context, forward, loss, predict_label, predict_proba, ForwardTrace,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::Label;

pub const NUM_TAGS: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("{table} id {id} out of range for table of {len} rows")]
    IndexOutOfRange { table: &'static str, id: u32, len: usize },
    #[error("every context in the bag is padding")]
    AllMasked,
    #[error("vocabulary mismatch: checkpoint was trained with {expected}, supplied vocabulary is {found}")]
    VocabMismatch { expected: String, found: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// The five learnable tensors.
///
/// `transform` is the `d × 3d` map `W`, stored transposed: row `k` holds
/// the `d` weights applied to input coordinate `k`, so `W c` is a sum of
/// contiguous row slices scaled by `c[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    pub value_embeddings: Matrix,
    pub path_embeddings: Matrix,
    pub transform: Matrix,
    pub attention: Vec<f64>,
    pub tag_embeddings: Matrix,
}

impl ModelParams {
    pub fn zeros(value_rows: usize, path_rows: usize, dim: usize) -> Self {
        Self {
            dim,
            value_embeddings: Matrix::zeros(value_rows, dim),
            path_embeddings: Matrix::zeros(path_rows, dim),
            transform: Matrix::zeros(3 * dim, dim),
            attention: vec![0.0; dim],
            tag_embeddings: Matrix::zeros(NUM_TAGS, dim),
        }
    }

    pub fn zeros_like(other: &Self) -> Self {
        Self::zeros(other.value_embeddings.rows, other.path_embeddings.rows, other.dim)
    }

    /// Weight of `W` at output `i`, input `k`.
    pub fn w(&self, i: usize, k: usize) -> f64 {
        self.transform.data[k * self.dim + i]
    }

    pub fn tensors(&self) -> [&[f64]; 5] {
        [
            &self.value_embeddings.data,
            &self.path_embeddings.data,
            &self.transform.data,
            &self.attention,
            &self.tag_embeddings.data,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 5] {
        [
            &mut self.value_embeddings.data,
            &mut self.path_embeddings.data,
            &mut self.transform.data,
            &mut self.attention,
            &mut self.tag_embeddings.data,
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Uniform `(-1/√d, 1/√d)` initialization of every tensor, with the PAD
/// rows of both embedding tables zeroed. Deterministic in `seed`.
pub fn init_params(value_rows: usize, path_rows: usize, dim: usize, seed: u64) -> ModelParams {
    assert!(value_rows >= 2 && path_rows >= 2, "tables must hold the reserved PAD and UNK rows");
    assert!(dim > 0);
    let mut params = ModelParams::zeros(value_rows, path_rows, dim);
    let bound = 1.0 / (dim as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for tensor in params.tensors_mut() {
        for x in tensor.iter_mut() {
            // gen_range over the half-open interval; reject the lower edge
            // so the draw lies strictly inside the open interval.
            *x = loop {
                let u: f64 = rng.gen_range(-bound..bound);
                if u != -bound {
                    break u;
                }
            };
        }
    }
    params.value_embeddings.row_mut(0).fill(0.0);
    params.path_embeddings.row_mut(0).fill(0.0);
    params
}

pub fn label_from_tag(index: usize) -> Label {
    Label::from_index(index).expect("two tags")
}

/// Dot product with four independent accumulators; summation order is
/// fixed, so results are reproducible across runs.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
