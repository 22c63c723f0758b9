use rand::Rng;

/// Per-coordinate multipliers: `0` for dropped coordinates, `1/(1-rate)`
/// for survivors, `1` everywhere in inference mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub scale: Vec<f64>,
}

impl DropoutMask {
    pub fn identity(len: usize) -> Self {
        Self { scale: vec![1.0; len] }
    }

    pub fn is_identity(&self) -> bool {
        self.scale.iter().all(|&s| s == 1.0)
    }
}

/// Inverted dropout. In training mode every coordinate is zeroed
/// independently with probability `rate`; survivors are scaled so the
/// expectation is unchanged.
pub fn apply_dropout<R: Rng + ?Sized>(
    values: &[f64],
    rate: f64,
    rng: &mut R,
    training: bool,
) -> (Vec<f64>, DropoutMask) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must lie in [0, 1)");
    if !training || rate == 0.0 {
        return (values.to_vec(), DropoutMask::identity(values.len()));
    }
    let keep = 1.0 / (1.0 - rate);
    let scale: Vec<f64> = (0..values.len()).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect();
    let out = values.iter().zip(&scale).map(|(v, s)| v * s).collect();
    (out, DropoutMask { scale })
}
