//! Cleartext counterparts of secure training.
//!
//! The fixed-point simulator performs the same ring arithmetic as the
//! secure trainer with every truncation replaced by the exact reference, so
//! under exact truncation both produce identical weights. The float variant
//! runs the same update rule in double precision.

use serde::{Deserialize, Serialize};

use super::cv::{fold_plans, CvConfig, Fold};
use super::metrics::{f1_weighted, ConfusionCounts, F1Scores};
use super::report::{CvReport, FoldResult};
use super::{HarnessError, LabeledDataset};
use crate::nonlinear::{cross_entropy, cross_entropy_fixed, sigmoid, SigmoidTable};
use crate::numeric::{trunc_exact_ref, FixedPointParams, RingElement};
use crate::trainer::{class_weights, ClassWeighting, Coefficients, FixedModel, StopPolicy, TrainingConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleVariant {
    Float,
    Fixed,
}

impl std::fmt::Display for OracleVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OracleVariant::Float => "float",
            OracleVariant::Fixed => "fixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloatModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// A cleartext training run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRun<M> {
    pub model: M,
    pub losses: Vec<f64>,
    pub epochs: u32,
    pub stopped_early: bool,
}

/// Decoded model and training-set score of either variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleOutput {
    pub variant: OracleVariant,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub losses: Vec<f64>,
    pub epochs: u32,
    pub stopped_early: bool,
    pub training_counts: ConfusionCounts,
    pub training_f1: F1Scores,
}

fn encode_rows(rows: &[Vec<f64>], params: &FixedPointParams) -> Result<Vec<Vec<RingElement>>, HarnessError> {
    rows.iter()
        .map(|r| r.iter().map(|x| params.encode(*x)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()
        .map_err(|e| HarnessError::Trainer(e.into()))
}

/// Loop that stops on the configured policy. `step` evaluates one epoch,
/// returns its loss when computed, and applies the update when asked.
fn run_epochs(cfg: &TrainingConfig, mut step: impl FnMut(bool) -> Result<Option<f64>, HarnessError>) -> Result<(Vec<f64>, u32, bool), HarnessError> {
    let mut losses = Vec::new();
    let mut epochs = 0;
    for _ in 0..cfg.stop.max_epochs() {
        let threshold = match cfg.stop {
            StopPolicy::LossThreshold { threshold, .. } => Some(threshold),
            StopPolicy::Fixed { .. } => None,
        };
        let loss = step(false)?;
        if let Some(loss) = loss {
            losses.push(loss);
            if threshold.is_some_and(|t| loss < t) {
                return Ok((losses, epochs, true));
            }
        }
        step(true)?;
        epochs += 1;
    }
    Ok((losses, epochs, false))
}

struct FixedSimulator {
    params: FixedPointParams,
    table: SigmoidTable,
    coeffs: Coefficients,
    rows: Vec<Vec<RingElement>>,
    labels: Vec<RingElement>,
    sample_weights: Option<Vec<RingElement>>,
}

impl FixedSimulator {
    fn new(data: &LabeledDataset, cfg: &TrainingConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let params = cfg.fixed_point;
        let f = params.frac_bits();
        let labels: Vec<RingElement> =
            data.labels().iter().map(|y| if *y { params.one() } else { RingElement::ZERO }).collect();
        let sample_weights = match cfg.class_weighting {
            ClassWeighting::Off => None,
            ClassWeighting::Balanced => {
                let (base, delta) = class_weights(data.n(), data.positives(), &params)?;
                Some(labels.iter().map(|y| base + trunc_exact_ref(*y * delta, f)).collect())
            }
        };
        Ok(FixedSimulator {
            params,
            table: SigmoidTable::new(&params).map_err(|e| HarnessError::Trainer(e.into()))?,
            coeffs: Coefficients::new(cfg, data.n())?,
            rows: encode_rows(data.features(), &params)?,
            labels,
            sample_weights,
        })
    }

    fn probabilities(&self, model: &FixedModel) -> Vec<RingElement> {
        predict_raw(&self.table, self.params.frac_bits(), model, &self.rows)
    }

    fn errors(&self, p: &[RingElement]) -> Vec<RingElement> {
        let f = self.params.frac_bits();
        let raw = p.iter().zip(&self.labels).map(|(p, y)| *p - *y);
        match &self.sample_weights {
            None => raw.collect(),
            Some(w) => raw.zip(w).map(|(e, w)| trunc_exact_ref(e * *w, f)).collect(),
        }
    }

    fn gradient(&self, errors: &[RingElement]) -> (Vec<RingElement>, RingElement) {
        let f = self.coeffs.frac_bits;
        let d = self.rows[0].len();
        let scale = |v: RingElement| trunc_exact_ref(v * self.coeffs.inverse_n, self.coeffs.mean_shift);
        let grad = (0..d)
            .map(|j| {
                let sum: RingElement = self.rows.iter().zip(errors).map(|(r, e)| r[j] * *e).sum();
                scale(trunc_exact_ref(sum, f))
            })
            .collect();
        (grad, scale(errors.iter().copied().sum()))
    }
}

fn predict_raw(table: &SigmoidTable, f: u32, model: &FixedModel, rows: &[Vec<RingElement>]) -> Vec<RingElement> {
    rows.iter()
        .map(|r| {
            let dot: RingElement = r.iter().zip(&model.weights).map(|(x, w)| *x * *w).sum();
            table.eval_fixed(trunc_exact_ref(dot, f) + model.bias)
        })
        .collect()
}

/// Single-machine fixed-point training, bit-identical to secure training
/// under exact truncation.
pub fn train_fixed(data: &LabeledDataset, cfg: &TrainingConfig) -> Result<OracleRun<FixedModel>, HarnessError> {
    let sim = FixedSimulator::new(data, cfg)?;
    let f = sim.params.frac_bits();
    let c = sim.coeffs;
    let d = data.d();
    let mut model = FixedModel::zeros(d);
    let mut velocity = vec![RingElement::ZERO; d + 1];
    let mut p = Vec::new();
    let (losses, epochs, stopped_early) = run_epochs(cfg, |apply| {
        if !apply {
            p = sim.probabilities(&model);
            if !cfg.computes_loss() {
                return Ok(None);
            }
            let loss = cross_entropy_fixed(&p, &sim.labels, &sim.params).map_err(|e| HarnessError::Trainer(e.into()))?;
            return Ok(Some(sim.params.decode(loss)));
        }
        let (mut grad, grad_bias) = sim.gradient(&sim.errors(&p));
        grad.push(grad_bias);
        for (v, g) in velocity.iter_mut().zip(&grad) {
            *v = trunc_exact_ref(*v * c.momentum, f) + *g;
        }
        let steps: Vec<RingElement> = velocity.iter().map(|v| trunc_exact_ref(*v * c.learning_rate, f)).collect();
        for (w, s) in model.weights.iter_mut().zip(&steps) {
            *w = *w - *s;
        }
        model.bias = model.bias - steps[d];
        Ok(None)
    })?;
    Ok(OracleRun { model, losses, epochs, stopped_early })
}

/// Fixed-point gradient of the mean cross-entropy at `model`, as computed
/// by one secure training step under exact truncation.
pub fn fixed_gradient(
    data: &LabeledDataset,
    model: &FixedModel,
    cfg: &TrainingConfig,
) -> Result<(Vec<RingElement>, RingElement), HarnessError> {
    let sim = FixedSimulator::new(data, cfg)?;
    if model.weights.len() != data.d() {
        return Err(HarnessError::InvalidArgument(format!(
            "model has {} weights for {} features",
            model.weights.len(),
            data.d()
        )));
    }
    let p = sim.probabilities(model);
    Ok(sim.gradient(&sim.errors(&p)))
}

/// Fixed-point probabilities of `rows` under `model`.
pub fn predict_fixed(model: &FixedModel, rows: &[Vec<f64>], params: &FixedPointParams) -> Result<Vec<RingElement>, HarnessError> {
    let table = SigmoidTable::new(params).map_err(|e| HarnessError::Trainer(e.into()))?;
    Ok(predict_raw(&table, params.frac_bits(), model, &encode_rows(rows, params)?))
}

pub fn predict_float(model: &FloatModel, rows: &[Vec<f64>]) -> Vec<f64> {
    rows.iter()
        .map(|r| sigmoid(r.iter().zip(&model.weights).map(|(x, w)| x * w).sum::<f64>() + model.bias))
        .collect()
}

/// Double-precision training with the same update rule and stopping policy.
pub fn train_float(data: &LabeledDataset, cfg: &TrainingConfig) -> Result<OracleRun<FloatModel>, HarnessError> {
    cfg.validate()?;
    let (n, d) = (data.n(), data.d());
    let labels = data.label_values();
    let weights: Vec<f64> = match cfg.class_weighting {
        ClassWeighting::Off => vec![1.0; n],
        ClassWeighting::Balanced => {
            let (pos, neg) = (data.positives(), data.negatives());
            if pos == 0 || neg == 0 {
                return Err(HarnessError::Trainer(crate::trainer::TrainerError::SingleClass { positives: pos, n }));
            }
            labels.iter().map(|y| n as f64 / (2.0 * if *y == 1.0 { pos } else { neg } as f64)).collect()
        }
    };
    let mut model = FloatModel { weights: vec![0.0; d], bias: 0.0 };
    let mut velocity = vec![0.0; d + 1];
    let mut p = Vec::new();
    let tiny = 1e-15;
    let (losses, epochs, stopped_early) = run_epochs(cfg, |apply| {
        if !apply {
            p = predict_float(&model, data.features());
            if !cfg.computes_loss() {
                return Ok(None);
            }
            let clamped: Vec<f64> = p.iter().map(|v| v.clamp(tiny, 1.0 - tiny)).collect();
            return Ok(Some(cross_entropy(&clamped, &labels)));
        }
        let errors: Vec<f64> = p.iter().zip(&labels).zip(&weights).map(|((p, y), w)| (p - y) * w).collect();
        let mut grad: Vec<f64> = (0..d)
            .map(|j| data.features().iter().zip(&errors).map(|(r, e)| r[j] * e).sum::<f64>() / n as f64)
            .collect();
        grad.push(errors.iter().sum::<f64>() / n as f64);
        for (v, g) in velocity.iter_mut().zip(&grad) {
            *v = cfg.momentum * *v + g;
        }
        for (w, v) in model.weights.iter_mut().zip(&velocity) {
            *w -= cfg.learning_rate * v;
        }
        model.bias -= cfg.learning_rate * velocity[d];
        Ok(None)
    })?;
    Ok(OracleRun { model, losses, epochs, stopped_early })
}

enum Trained {
    Float(FloatModel),
    Fixed(FixedModel),
}

impl Trained {
    fn classify(&self, rows: &[Vec<f64>], threshold: f64, params: &FixedPointParams) -> Result<Vec<bool>, HarnessError> {
        match self {
            Trained::Float(m) => Ok(predict_float(m, rows).iter().map(|p| *p >= threshold).collect()),
            Trained::Fixed(m) => {
                let cut = params.encode(threshold).map_err(|e| HarnessError::Trainer(e.into()))?;
                Ok(predict_fixed(m, rows, params)?.iter().map(|p| (*p - cut).signed() >= 0).collect())
            }
        }
    }
}

/// Classify `test` with a model trained on `train` by either variant.
fn oracle_fold(
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &TrainingConfig,
    threshold: f64,
    variant: OracleVariant,
) -> Result<(Vec<bool>, OracleOutput), HarnessError> {
    let params = cfg.fixed_point;
    let (trained, weights, bias, losses, epochs, stopped_early) = match variant {
        OracleVariant::Float => {
            let run = train_float(train, cfg)?;
            let (w, b) = (run.model.weights.clone(), run.model.bias);
            (Trained::Float(run.model), w, b, run.losses, run.epochs, run.stopped_early)
        }
        OracleVariant::Fixed => {
            let run = train_fixed(train, cfg)?;
            let (w, b) = (run.model.weights_f64(&params), run.model.bias_f64(&params));
            (Trained::Fixed(run.model), w, b, run.losses, run.epochs, run.stopped_early)
        }
    };
    let train_pred = trained.classify(train.features(), threshold, &params)?;
    let training_counts = ConfusionCounts::from_predictions(train.labels(), &train_pred)?;
    let out = OracleOutput {
        variant,
        weights,
        bias,
        losses,
        epochs,
        stopped_early,
        training_counts,
        training_f1: f1_weighted(&training_counts)?,
    };
    Ok((trained.classify(test.features(), threshold, &params)?, out))
}

/// Train on the whole dataset and score the training set.
pub fn plaintext_oracle(
    data: &LabeledDataset,
    cfg: &TrainingConfig,
    threshold: f64,
    variant: OracleVariant,
) -> Result<OracleOutput, HarnessError> {
    Ok(oracle_fold(data, data, cfg, threshold, variant)?.1)
}

/// Cross-validated cleartext baseline over the same folds as [`super::run_cv`].
pub fn oracle_cv(data: &LabeledDataset, cv: &CvConfig, variant: OracleVariant) -> Result<CvReport, HarnessError> {
    let plans = fold_plans(data, cv)?;
    let mut folds = Vec::with_capacity(plans.len());
    for fold in plans.iter().flat_map(|p| p.folds()) {
        let Fold { repeat, index, ref train, ref test } = fold;
        let start = std::time::Instant::now();
        let result = (|| {
            let (train_set, test_set) = (data.subset(train)?, data.subset(test)?);
            let (pred, out) = oracle_fold(&train_set, &test_set, &cv.training, cv.threshold, variant)?;
            let counts = ConfusionCounts::from_predictions(test_set.labels(), &pred)?;
            Ok::<_, HarnessError>((counts, out))
        })();
        let (counts, out) = result.map_err(|e| HarnessError::Fold { fold: folds.len(), source: Box::new(e) })?;
        folds.push(FoldResult::cleartext(repeat, index, counts, out.epochs, out.stopped_early, start.elapsed())?);
    }
    CvReport::new(cv, &format!("oracle-{variant}"), folds, Vec::new())
}
