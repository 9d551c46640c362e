use serde::{Deserialize, Serialize};

use super::HarnessError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn from_predictions(truth: &[bool], predicted: &[bool]) -> Result<Self, HarnessError> {
        if truth.len() != predicted.len() {
            return Err(HarnessError::InvalidArgument(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut c = ConfusionCounts::default();
        for (t, p) in truth.iter().zip(predicted) {
            match (t, p) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    /// Counts with the classes exchanged.
    pub fn swapped(&self) -> Self {
        ConfusionCounts { tp: self.tn, fp: self.fn_, tn: self.tp, fn_: self.fp }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Scores {
    pub positive: f64,
    pub negative: f64,
    /// Class-population-weighted mean of the two.
    pub weighted: f64,
}

/// Per-class F1 and their population-weighted mean. A class whose F1
/// denominator vanishes scores 0.
pub fn f1_weighted(c: &ConfusionCounts) -> Result<F1Scores, HarnessError> {
    let total = c.total();
    if total == 0 {
        return Err(HarnessError::NoSamples);
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let positive = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    let negative = ratio(2 * c.tn, 2 * c.tn + c.fp + c.fn_);
    let weighted = ((c.tp + c.fn_) as f64 * positive + (c.tn + c.fp) as f64 * negative) / total as f64;
    Ok(F1Scores { positive, negative, weighted })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_examples() {
        let perfect = f1_weighted(&ConfusionCounts::new(5, 0, 3, 0)).unwrap();
        assert_eq!((perfect.positive, perfect.negative, perfect.weighted), (1.0, 1.0, 1.0));
        let even = f1_weighted(&ConfusionCounts::new(1, 1, 1, 1)).unwrap();
        assert_eq!((even.positive, even.negative, even.weighted), (0.5, 0.5, 0.5));
        let always = f1_weighted(&ConfusionCounts::new(142, 83, 0, 0)).unwrap();
        assert_eq!(always.negative, 0.0);
        assert!((always.positive - 284.0 / 367.0).abs() < 1e-15);
        assert!((always.weighted - 0.4884).abs() <= 5e-5);
    }

    #[test]
    fn empty_counts_are_rejected() {
        assert!(matches!(f1_weighted(&ConfusionCounts::default()), Err(HarnessError::NoSamples)));
    }

    #[test]
    fn counting_predictions() {
        let c = ConfusionCounts::from_predictions(&[true, true, false, false], &[true, false, true, false]).unwrap();
        assert_eq!(c, ConfusionCounts::new(1, 1, 1, 1));
        assert!(ConfusionCounts::from_predictions(&[true], &[]).is_err());
    }
}
