use rand::Rng;

use super::dropout::{apply_dropout, DropoutMask};
use super::{axpy, dot, ModelError, ModelParams, NUM_TAGS};
use crate::corpus::Label;
use crate::pathmine::PAD;

fn is_padding(triplet: &[u32; 3]) -> bool {
    triplet.iter().all(|&id| id == PAD)
}

fn check_ids(triplet: &[u32; 3], params: &ModelParams) -> Result<(), ModelError> {
    let [s, j, t] = *triplet;
    let values = params.value_embeddings.rows;
    let paths = params.path_embeddings.rows;
    for id in [s, t] {
        if id as usize >= values {
            return Err(ModelError::IndexOutOfRange { table: "value", id, len: values });
        }
    }
    if j as usize >= paths {
        return Err(ModelError::IndexOutOfRange { table: "path", id: j, len: paths });
    }
    Ok(())
}

/// Context vector `[values[s]; paths[j]; values[t]]`. A PAD triplet yields
/// the zero vector and `false` (masked).
pub fn embed_context(triplet: [u32; 3], params: &ModelParams) -> Result<(Vec<f64>, bool), ModelError> {
    check_ids(&triplet, params)?;
    let d = params.dim;
    if is_padding(&triplet) {
        return Ok((vec![0.0; 3 * d], false));
    }
    let [s, j, t] = triplet;
    let mut c = Vec::with_capacity(3 * d);
    c.extend_from_slice(params.value_embeddings.row(s as usize));
    c.extend_from_slice(params.path_embeddings.row(j as usize));
    c.extend_from_slice(params.value_embeddings.row(t as usize));
    Ok((c, true))
}

/// `tanh(W c)`.
pub fn combine(context: &[f64], params: &ModelParams) -> Vec<f64> {
    assert_eq!(context.len(), 3 * params.dim);
    let mut z = vec![0.0; params.dim];
    for (k, &ck) in context.iter().enumerate() {
        if ck != 0.0 {
            axpy(&mut z, ck, params.transform.row(k));
        }
    }
    z.iter_mut().for_each(|x| *x = x.tanh());
    z
}

/// Distinct ids in each slot (start value, path, end value) of a bag's
/// real contexts. `W c` splits into three block products, so each distinct
/// row only goes through its block of `W` once per bag.
pub(crate) struct SlotGroups {
    pub ids: [Vec<u32>; 3],
    /// Per context, the position of its ids within `ids`; unused for padding.
    pub slots: Vec<[usize; 3]>,
}

impl SlotGroups {
    pub fn new(contexts: &[[u32; 3]], mask: &[bool]) -> Self {
        let ids: [Vec<u32>; 3] = std::array::from_fn(|b| {
            let mut v: Vec<u32> = contexts.iter().zip(mask).filter(|(_, &m)| m).map(|(t, _)| t[b]).collect();
            v.sort_unstable();
            v.dedup();
            v
        });
        let slots = contexts
            .iter()
            .zip(mask)
            .map(|(t, &m)| {
                if m {
                    std::array::from_fn(|b| ids[b].binary_search(&t[b]).expect("id was collected"))
                } else {
                    [0; 3]
                }
            })
            .collect();
        Self { ids, slots }
    }
}

/// Embedding row feeding block `b` of `W`.
pub(crate) fn slot_row(params: &ModelParams, b: usize, id: u32) -> &[f64] {
    if b == 1 {
        params.path_embeddings.row(id as usize)
    } else {
        params.value_embeddings.row(id as usize)
    }
}

/// Softmax of `h_i · a` over unmasked contexts; masked positions get 0.
/// `combined` is `n × d`, row-major.
pub fn attention_weights(combined: &[f64], mask: &[bool], attention: &[f64]) -> Result<Vec<f64>, ModelError> {
    let d = attention.len();
    let n = mask.len();
    assert_eq!(combined.len(), n * d);
    let scores: Vec<f64> = (0..n)
        .map(|i| if mask[i] { dot(&combined[i * d..(i + 1) * d], attention) } else { f64::NEG_INFINITY })
        .collect();
    softmax_masked(&scores, mask).ok_or(ModelError::AllMasked)
}

/// Max-subtracted softmax restricted to `mask`; `None` when nothing is
/// unmasked.
pub(crate) fn softmax_masked(scores: &[f64], mask: &[bool]) -> Option<Vec<f64>> {
    let max = scores.iter().zip(mask).filter(|(_, &m)| m).map(|(&s, _)| s).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let mut out: Vec<f64> = scores.iter().zip(mask).map(|(&s, &m)| if m { (s - max).exp() } else { 0.0 }).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    Some(out)
}

/// `v = Σ α_i h_i`.
pub fn code_vector(combined: &[f64], weights: &[f64]) -> Vec<f64> {
    let n = weights.len();
    assert!(n > 0 && combined.len() % n == 0);
    let d = combined.len() / n;
    let mut v = vec![0.0; d];
    for (i, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            axpy(&mut v, w, &combined[i * d..(i + 1) * d]);
        }
    }
    v
}

/// Label distribution `softmax_y(v · tags[y])`, indexed by tag id.
pub fn predict_proba(code: &[f64], params: &ModelParams) -> [f64; NUM_TAGS] {
    let logits: Vec<f64> = (0..NUM_TAGS).map(|y| dot(code, params.tag_embeddings.row(y))).collect();
    let q = softmax_masked(&logits, &[true; NUM_TAGS]).expect("tags are never masked");
    [q[0], q[1]]
}

/// Cross-entropy `-ln q(label)`.
pub fn loss(q: &[f64; NUM_TAGS], label: Label) -> f64 {
    -q[label.index()].ln()
}

/// Argmax label; an exact tie goes to `safe`.
pub fn predict_label(q: &[f64; NUM_TAGS]) -> Label {
    if q[Label::Vuln.index()] > q[Label::Safe.index()] {
        Label::Vuln
    } else {
        Label::Safe
    }
}

/// Everything the backward pass needs from one bag.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub dim: usize,
    pub contexts: Vec<[u32; 3]>,
    /// `true` for real contexts, `false` for padding.
    pub mask: Vec<bool>,
    /// `tanh(W c_i)` before dropout, `n × d`.
    pub combined: Vec<f64>,
    pub dropout: DropoutMask,
    /// Combined vectors after dropout; these feed attention and pooling.
    pub dropped: Vec<f64>,
    pub attention: Vec<f64>,
    pub code_vector: Vec<f64>,
    pub probs: [f64; NUM_TAGS],
}

impl ForwardTrace {
    pub fn loss(&self, label: Label) -> f64 {
        loss(&self.probs, label)
    }

    pub fn predicted(&self) -> Label {
        predict_label(&self.probs)
    }
}

/// Full forward pass over one (possibly padded) bag. Dropout is applied to
/// the combined context vectors when `dropout` is given.
pub fn forward<R: Rng + ?Sized>(
    params: &ModelParams,
    contexts: &[[u32; 3]],
    dropout: Option<(f64, &mut R)>,
) -> Result<ForwardTrace, ModelError> {
    let d = params.dim;
    let n = contexts.len();
    let mut mask = Vec::with_capacity(n);
    for triplet in contexts {
        check_ids(triplet, params)?;
        mask.push(!is_padding(triplet));
    }
    let groups = SlotGroups::new(contexts, &mask);
    let projected: [Vec<f64>; 3] = std::array::from_fn(|b| {
        let mut out = vec![0.0; groups.ids[b].len() * d];
        for (g, &id) in groups.ids[b].iter().enumerate() {
            let target = &mut out[g * d..(g + 1) * d];
            for (k, &x) in slot_row(params, b, id).iter().enumerate() {
                if x != 0.0 {
                    axpy(target, x, params.transform.row(b * d + k));
                }
            }
        }
        out
    });
    let mut combined = vec![0.0; n * d];
    for i in (0..n).filter(|&i| mask[i]) {
        let h = &mut combined[i * d..(i + 1) * d];
        for (b, &slot) in groups.slots[i].iter().enumerate() {
            axpy(h, 1.0, &projected[b][slot * d..(slot + 1) * d]);
        }
        h.iter_mut().for_each(|x| *x = x.tanh());
    }
    let (dropped, dropout) = match dropout {
        Some((rate, rng)) => apply_dropout(&combined, rate, rng, true),
        None => (combined.clone(), DropoutMask::identity(combined.len())),
    };
    let attention = attention_weights(&dropped, &mask, &params.attention)?;
    let code = code_vector(&dropped, &attention);
    let probs = predict_proba(&code, params);
    Ok(ForwardTrace {
        dim: d,
        contexts: contexts.to_vec(),
        mask,
        combined,
        dropout,
        dropped,
        attention,
        code_vector: code,
        probs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    type NoRng = rand_chacha::ChaCha8Rng;

    fn tiny_params() -> ModelParams {
        let mut p = ModelParams::zeros(4, 3, 2);
        p.value_embeddings.row_mut(2).copy_from_slice(&[1.0, 0.0]);
        p.value_embeddings.row_mut(3).copy_from_slice(&[2.0, 2.0]);
        p.path_embeddings.row_mut(2).copy_from_slice(&[0.0, 1.0]);
        p
    }

    #[test]
    fn embedding_concatenates_in_order() {
        let p = tiny_params();
        let (c, real) = embed_context([2, 2, 3], &p).unwrap();
        assert!(real);
        assert_eq!(c, vec![1.0, 0.0, 0.0, 1.0, 2.0, 2.0]);
        let (c, _) = embed_context([3, 2, 3], &p).unwrap();
        assert_eq!(c[..2], c[4..]);
        let (c, real) = embed_context([0, 0, 0], &p).unwrap();
        assert!(!real);
        assert!(c.iter().all(|&x| x == 0.0));
        assert_eq!(embed_context([4, 0, 0], &p), Err(ModelError::IndexOutOfRange { table: "value", id: 4, len: 4 }));
        assert!(embed_context([2, 3, 2], &p).is_err());
    }

    #[test]
    fn combine_zero_and_saturation() {
        let mut p = ModelParams::zeros(2, 2, 2);
        assert_eq!(combine(&[0.0; 6], &p), vec![0.0, 0.0]);
        // W picks the first d coordinates.
        for i in 0..2 {
            p.transform.data[i * 2 + i] = 1.0;
        }
        let out = combine(&[50.0, 60.0, -3.0, 4.0, 1.0, 1.0], &p);
        assert!(out.iter().all(|&x| x > 1.0 - 1e-12 && x <= 1.0));
    }

    #[test]
    fn combine_matches_scalar_loop() {
        let p = init_params(3, 3, 3, 5);
        let c: Vec<f64> = (0..9).map(|i| (i as f64 - 4.0) * 0.3).collect();
        let got = combine(&c, &p);
        for i in 0..3 {
            let mut z = 0.0;
            for k in 0..9 {
                z += p.w(i, k) * c[k];
            }
            assert!((got[i] - z.tanh()).abs() < 1e-14);
        }
    }

    #[test]
    fn attention_cases() {
        let a = [1.0, 0.0];
        assert_eq!(attention_weights(&[0.3, 0.7], &[true], &a).unwrap(), vec![1.0]);
        let same = [0.2, -0.1].repeat(4);
        for w in attention_weights(&same, &[true; 4], &a).unwrap() {
            assert!((w - 0.25).abs() < 1e-15);
        }
        let w = attention_weights(&[0.0, 0.0, 3f64.ln(), 0.0], &[true, true], &a).unwrap();
        assert!((w[0] - 0.25).abs() < 1e-15 && (w[1] - 0.75).abs() < 1e-15);
        let w = attention_weights(&[5.0, 0.0, 1.0, 0.0], &[false, true], &a).unwrap();
        assert_eq!(w, vec![0.0, 1.0]);
        assert_eq!(attention_weights(&[1.0, 0.0], &[false], &a), Err(ModelError::AllMasked));
    }

    #[test]
    fn pooling_cases() {
        assert_eq!(code_vector(&[0.1, 0.2], &[1.0]), vec![0.1, 0.2]);
        let v = code_vector(&[0.4, -0.2, 0.4, -0.2], &[0.3, 0.7]);
        assert!((v[0] - 0.4).abs() < 1e-15 && (v[1] + 0.2).abs() < 1e-15);
        assert_eq!(code_vector(&[1.0, 0.0, 0.0, 1.0], &[0.25, 0.75]), vec![0.25, 0.75]);
    }

    #[test]
    fn label_distribution_cases() {
        let mut p = ModelParams::zeros(2, 2, 2);
        p.tag_embeddings.row_mut(0).copy_from_slice(&[0.3, 0.3]);
        p.tag_embeddings.row_mut(1).copy_from_slice(&[0.3, 0.3]);
        assert_eq!(predict_proba(&[1.0, -2.0], &p), [0.5, 0.5]);
        p.tag_embeddings.row_mut(1).copy_from_slice(&[1.0, 5.0]);
        assert_eq!(predict_proba(&[0.0, 0.0], &p), [0.5, 0.5]);
        // logits (1, 1 + ln 9)
        p.tag_embeddings.row_mut(0).copy_from_slice(&[1.0, 0.0]);
        p.tag_embeddings.row_mut(1).copy_from_slice(&[1.0 + 9f64.ln(), 0.0]);
        let q = predict_proba(&[1.0, 0.0], &p);
        assert!((q[0] - 0.1).abs() < 1e-15 && (q[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn loss_values() {
        assert_eq!(loss(&[0.0, 1.0], Label::Vuln), 0.0);
        assert!((loss(&[0.5, 0.5], Label::Safe) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((loss(&[0.1, 0.9], Label::Vuln) - 0.105_360_515_657_826_3).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_safe() {
        assert_eq!(predict_label(&[0.5, 0.5]), Label::Safe);
        assert_eq!(predict_label(&[0.1, 0.9]), Label::Vuln);
        assert_eq!(predict_label(&[0.6, 0.4]), Label::Safe);
    }

    #[test]
    fn forward_normalizes() {
        let p = init_params(6, 5, 8, 3);
        let t = forward::<NoRng>(&p, &[[2, 3, 4], [5, 2, 2], [0, 0, 0]], None).unwrap();
        assert!((t.attention.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(t.attention[2], 0.0);
        assert!((t.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(t.combined.iter().all(|x| x.abs() < 1.0));
        assert!(matches!(forward::<NoRng>(&p, &[[0, 0, 0]], None), Err(ModelError::AllMasked)));
    }
}
