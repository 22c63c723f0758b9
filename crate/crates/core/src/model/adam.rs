use serde::{Deserialize, Serialize};

use super::backward::{Gradients, SparseRows};
use super::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 0.001, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &ModelParams, config: AdamConfig) -> Self {
        Self { m: ModelParams::zeros_like(params), v: ModelParams::zeros_like(params), t: 0, config }
    }
}

fn densify(rows: &SparseRows, len: usize, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (id, row) in rows.iter() {
        let start = id as usize * dim;
        out[start..start + dim].copy_from_slice(row);
    }
    out
}

/// One Adam update of every coordinate. Embedding rows absent from the
/// sparse gradient are treated as having gradient zero, so their moments
/// still decay.
pub fn adam_step(params: &mut ModelParams, grads: &Gradients, state: &mut AdamState) {
    let AdamConfig { learning_rate, beta1, beta2, epsilon } = state.config;
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    let d = params.dim;
    let values = densify(&grads.value_embeddings, params.value_embeddings.data.len(), d);
    let paths = densify(&grads.path_embeddings, params.path_embeddings.data.len(), d);
    let g: [&[f64]; 5] = [&values, &paths, &grads.transform, &grads.attention, &grads.tag_embeddings];

    let theta = params.tensors_mut();
    let m = state.m.tensors_mut();
    let v = state.v.tensors_mut();
    for (((theta, m), v), g) in theta.into_iter().zip(m).zip(v).zip(g) {
        for i in 0..theta.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            theta[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = init_params(4, 4, 3, 1);
        let before = p.clone();
        let mut s = AdamState::new(&p, AdamConfig::default());
        adam_step(&mut p, &Gradients::zeros(3), &mut s);
        assert_eq!(p, before);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn single_scalar_step() {
        let mut p = ModelParams::zeros(2, 2, 1);
        let mut s = AdamState::new(&p, AdamConfig::default());
        let mut g = Gradients::zeros(1);
        g.attention[0] = 1.0;
        adam_step(&mut p, &g, &mut s);
        // m̂ = 1, v̂ = 1, so θ = -0.001 / (1 + 1e-8)
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((p.attention[0] - expected).abs() < 1e-18);
        assert!((p.attention[0] + 0.000999999990).abs() < 1e-12);
        assert!(p.transform.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sparse_rows_land_on_their_ids() {
        let mut p = ModelParams::zeros(5, 3, 2);
        let mut s = AdamState::new(&p, AdamConfig::default());
        let mut g = Gradients::zeros(2);
        g.value_embeddings.row_mut(3).copy_from_slice(&[1.0, -1.0]);
        adam_step(&mut p, &g, &mut s);
        assert!(p.value_embeddings.row(3)[0] < 0.0);
        assert!(p.value_embeddings.row(3)[1] > 0.0);
        for r in [0, 1, 2, 4] {
            assert!(p.value_embeddings.row(r).iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn repeated_runs_are_bitwise_identical() {
        let run = || {
            let mut p = init_params(6, 6, 4, 3);
            let mut s = AdamState::new(&p, AdamConfig::default());
            for step in 0..10 {
                let mut g = Gradients::zeros(4);
                g.transform.iter_mut().enumerate().for_each(|(i, x)| *x = ((i + step) as f64).sin());
                g.path_embeddings.row_mut((step % 5) as u32 + 1).fill(0.3);
                adam_step(&mut p, &g, &mut s);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
