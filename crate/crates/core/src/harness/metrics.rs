use serde::{Deserialize, Serialize};

use crate::corpus::Label;

/// Binary confusion counts and derived scores, with `vuln` as the positive
/// class. Any ratio with a zero denominator is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `100 * num / den` rounded half-up to two decimals, in exact integer
/// arithmetic so values like 59.555 never fall on the wrong side.
fn percent(num: u64, den: u64) -> f64 {
    if den == 0 {
        return 0.0;
    }
    let (num, den) = (num as u128, den as u128);
    let hundredths = (num * 20_000 + den) / (2 * den);
    hundredths as f64 / 100.0
}

impl Metrics {
    pub fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        Self {
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            // 2pr/(p+r) reduces to 2tp/(2tp+fp+fn), which is also 0 when p+r=0.
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
            tp,
            fp,
            tn,
            fn_,
        }
    }

    pub fn from_predictions(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
        for (truth, predicted) in pairs {
            match (truth, predicted) {
                (Label::Vuln, Label::Vuln) => tp += 1,
                (Label::Safe, Label::Vuln) => fp += 1,
                (Label::Safe, Label::Safe) => tn += 1,
                (Label::Vuln, Label::Safe) => fn_ += 1,
            }
        }
        Self::from_counts(tp, fp, tn, fn_)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Accuracy, precision, recall and F1 as percentages with two decimals.
    pub fn percentages(&self) -> Percentages {
        let (tp, fp, tn, fn_) = (self.tp, self.fp, self.tn, self.fn_);
        Percentages {
            accuracy: percent(tp + tn, self.total()),
            precision: percent(tp, tp + fp),
            recall: percent(tp, tp + fn_),
            f1: percent(2 * tp, 2 * tp + fp + fn_),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentages {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn crafted_confusion() {
        let m = Metrics::from_counts(3, 1, 4, 2);
        assert!((m.accuracy - 0.7).abs() < 5e-5);
        assert!((m.precision - 0.75).abs() < 5e-5);
        assert!((m.recall - 0.6).abs() < 5e-5);
        assert!((m.f1 - 0.6667).abs() < 5e-5);
        let p = m.percentages();
        assert_eq!((p.accuracy, p.precision, p.recall, p.f1), (70.0, 75.0, 60.0, 66.67));
    }

    #[test]
    fn zero_denominators() {
        let m = Metrics::from_counts(0, 0, 5, 0);
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 0.0, 0.0, 0.0));
        let m = Metrics::from_counts(0, 0, 0, 0);
        assert_eq!(m.accuracy, 0.0);
        let m = Metrics::from_counts(4, 0, 6, 0);
        assert_eq!((m.accuracy, m.f1), (1.0, 1.0));
    }

    #[test]
    fn half_up_rounding() {
        // 1/8 = 12.5% exactly, 1/16 = 6.25%, 1/32 = 3.125% -> 3.13
        assert_eq!(percent(1, 8), 12.5);
        assert_eq!(percent(1, 32), 3.13);
        assert_eq!(percent(2, 3), 66.67);
        assert_eq!(percent(1, 3), 33.33);
        // 11911/20000 = 59.555% sits exactly on the boundary
        assert_eq!(percent(11911, 20000), 59.56);
    }

    #[test]
    fn predictions_fill_the_matrix() {
        use Label::*;
        let m = Metrics::from_predictions([(Vuln, Vuln), (Safe, Vuln), (Safe, Safe), (Vuln, Safe), (Vuln, Vuln)]);
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (2, 1, 1, 1));
    }

    proptest! {
        #[test]
        fn matches_textbook_formulas(tp in 0u64..50, fp in 0u64..50, tn in 0u64..50, fn_ in 0u64..50) {
            let m = Metrics::from_counts(tp, fp, tn, fn_);
            let total = (tp + fp + tn + fn_) as f64;
            if total > 0.0 {
                prop_assert!((m.accuracy - (tp + tn) as f64 / total).abs() < 1e-12);
            }
            let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            prop_assert!((m.precision - p).abs() < 1e-12);
            prop_assert!((m.recall - r).abs() < 1e-12);
            prop_assert!((m.f1 - f).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&m.f1));
        }
    }
}
