use std::time::{Duration, Instant};

use serde::Serialize;

use super::{required_pairs, ClassWeighting, StopPolicy, TrainerError, TrainingConfig};
use crate::nonlinear::{loss_shares, mean_extra_bits, neg_inverse, SigmoidTable};
use crate::numeric::{FixedPointParams, RingElement};
use crate::rss::{PreprocessingBudget, RepShare, Session, ShareVector, TruncMode};
use crate::transport::PartyId;

/// Features and labels held in shares. Dimensions are public.
#[derive(Debug, Clone)]
pub struct SecretDataset {
    rows: Vec<Vec<RepShare>>,
    labels: ShareVector,
    d: usize,
}

impl SecretDataset {
    /// Share a dataset owned by `dealer`. The dealer passes the rows and
    /// labels, the others `None`; all pass the same dimensions.
    pub fn share(
        s: &mut Session,
        dealer: PartyId,
        data: Option<(&[Vec<f64>], &[f64])>,
        n: usize,
        d: usize,
    ) -> Result<Self, TrainerError> {
        if n == 0 || d == 0 {
            return Err(TrainerError::EmptyDataset);
        }
        let f = s.params().frac_bits();
        let mut flat = None;
        let mut labels = None;
        if s.id() == dealer {
            let (rows, ys) = data.ok_or_else(|| TrainerError::InvalidConfig("dealer must supply the dataset".into()))?;
            if rows.len() != n {
                return Err(TrainerError::DimensionMismatch { expected: n, got: rows.len() });
            }
            if ys.len() != n {
                return Err(TrainerError::DimensionMismatch { expected: n, got: ys.len() });
            }
            if let Some(row) = rows.iter().find(|r| r.len() != d) {
                return Err(TrainerError::DimensionMismatch { expected: d, got: row.len() });
            }
            if let Some((row, value)) = ys.iter().enumerate().find(|(_, y)| **y != 0.0 && **y != 1.0) {
                return Err(TrainerError::NonBinaryLabel { row, value: *value });
            }
            flat = Some(rows.concat());
            labels = Some(ys);
        }
        let features = s.share_fixed(dealer, flat.as_deref(), n * d)?;
        let labels = s.share_fixed(dealer, labels, n)?;
        debug_assert_eq!(labels.scale(), f);
        let rows = features.elems().chunks_exact(d).map(<[RepShare]>::to_vec).collect();
        Ok(SecretDataset { rows, labels, d })
    }

    /// Assemble from existing shares. Labels must encode 0 or 1 at scale f.
    pub fn from_shares(rows: Vec<Vec<RepShare>>, labels: ShareVector) -> Result<Self, TrainerError> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || d == 0 {
            return Err(TrainerError::EmptyDataset);
        }
        if labels.len() != rows.len() {
            return Err(TrainerError::DimensionMismatch { expected: rows.len(), got: labels.len() });
        }
        if let Some(row) = rows.iter().find(|r| r.len() != d) {
            return Err(TrainerError::DimensionMismatch { expected: d, got: row.len() });
        }
        Ok(SecretDataset { rows, labels, d })
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self, TrainerError> {
        let n = self.n();
        if let Some(bad) = indices.iter().find(|i| **i >= n) {
            return Err(TrainerError::DimensionMismatch { expected: n, got: *bad + 1 });
        }
        let rows = indices.iter().map(|i| self.rows[*i].clone()).collect();
        let labels = ShareVector::new(indices.iter().map(|i| self.labels.elems()[*i]).collect(), self.labels.scale());
        Self::from_shares(rows, labels)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> &[Vec<RepShare>] {
        &self.rows
    }

    pub fn labels(&self) -> &ShareVector {
        &self.labels
    }

    fn columns(&self) -> Vec<Vec<RepShare>> {
        (0..self.d).map(|j| self.rows.iter().map(|r| r[j]).collect()).collect()
    }
}

/// Model state in shares, all at scale f.
#[derive(Debug, Clone)]
pub struct ModelShares {
    pub weights: ShareVector,
    pub bias: RepShare,
    pub velocity: ShareVector,
    pub bias_velocity: RepShare,
}

impl ModelShares {
    pub fn zeros(d: usize, frac_bits: u32) -> Self {
        ModelShares {
            weights: ShareVector::new(vec![RepShare::ZERO; d], frac_bits),
            bias: RepShare::ZERO,
            velocity: ShareVector::new(vec![RepShare::ZERO; d], frac_bits),
            bias_velocity: RepShare::ZERO,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

/// Cleartext model in raw fixed-point units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FixedModel {
    pub weights: Vec<RingElement>,
    pub bias: RingElement,
}

impl FixedModel {
    pub fn zeros(d: usize) -> Self {
        FixedModel { weights: vec![RingElement::ZERO; d], bias: RingElement::ZERO }
    }

    pub fn weights_f64(&self, params: &FixedPointParams) -> Vec<f64> {
        self.weights.iter().map(|w| params.decode(*w)).collect()
    }

    pub fn bias_f64(&self, params: &FixedPointParams) -> f64 {
        params.decode(self.bias)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ModelShares,
    /// Opened loss of every evaluated epoch, before its update. Empty unless
    /// the configuration computes the loss.
    pub losses: Vec<f64>,
    /// Weight updates applied.
    pub epochs: u32,
    /// The loss threshold was reached before the cap.
    pub stopped_early: bool,
    /// Wall-clock time spent generating masks.
    pub preprocessing_time: Duration,
}

/// Public constants of the update rule in raw units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Coefficients {
    pub frac_bits: u32,
    pub learning_rate: RingElement,
    pub momentum: RingElement,
    /// round(2^mean_shift / n).
    pub inverse_n: RingElement,
    pub mean_shift: u32,
}

impl Coefficients {
    pub fn new(cfg: &TrainingConfig, n: usize) -> Result<Self, TrainerError> {
        let params = &cfg.fixed_point;
        let f = params.frac_bits();
        Ok(Coefficients {
            frac_bits: f,
            learning_rate: params.encode(cfg.learning_rate)?,
            momentum: params.encode(cfg.momentum)?,
            inverse_n: -neg_inverse(n, f),
            mean_shift: f + mean_extra_bits(f),
        })
    }
}

/// Per-sample error weights for the balanced mode as (weight of class 0,
/// weight of class 1 minus weight of class 0).
pub(crate) fn class_weights(
    n: usize,
    positives: usize,
    params: &FixedPointParams,
) -> Result<(RingElement, RingElement), TrainerError> {
    if positives == 0 || positives >= n {
        return Err(TrainerError::SingleClass { positives, n });
    }
    let weight = |count: usize| params.encode(n as f64 / (2.0 * count as f64));
    let negative = weight(n - positives)?;
    Ok((negative, weight(positives)? - negative))
}

/// Masks consumed by [`predict`] on `n` rows.
pub fn predict_budget(params: &FixedPointParams, n: usize, mode: TruncMode) -> Result<PreprocessingBudget, TrainerError> {
    let mut b = SigmoidTable::new(params)?.budget(n, mode);
    b.add_trunc(mode, params.frac_bits(), n);
    Ok(b)
}

fn check_dims(model: &ModelShares, rows: &[Vec<RepShare>]) -> Result<(), TrainerError> {
    let d = model.dim();
    if model.velocity.len() != d {
        return Err(TrainerError::DimensionMismatch { expected: d, got: model.velocity.len() });
    }
    match rows.iter().find(|r| r.len() != d) {
        Some(r) => Err(TrainerError::DimensionMismatch { expected: d, got: r.len() }),
        None => Ok(()),
    }
}

/// sigmoid(X w + b) with masks already in the pool.
fn forward(
    s: &mut Session,
    table: &SigmoidTable,
    rows: &[Vec<RepShare>],
    model: &ModelShares,
) -> Result<Vec<RepShare>, TrainerError> {
    let f = s.params().frac_bits();
    let w = model.weights.elems();
    let pairs: Vec<(&[RepShare], &[RepShare])> = rows.iter().map(|r| (&r[..], w)).collect();
    let products = s.dot_many(&pairs)?;
    let z: Vec<RepShare> = s.trunc_many(&products, f)?.into_iter().map(|z| z + model.bias).collect();
    Ok(table.eval_shares(s, &z)?)
}

/// Probabilities sigmoid(X w + b) at scale f. Provisions its own masks.
pub fn predict(s: &mut Session, model: &ModelShares, rows: &[Vec<RepShare>]) -> Result<ShareVector, TrainerError> {
    check_dims(model, rows)?;
    let params = *s.params();
    if model.weights.scale() != params.frac_bits() {
        return Err(crate::rss::RssError::ScaleMismatch { left: model.weights.scale(), right: params.frac_bits() }.into());
    }
    let mode = s.trunc_mode();
    s.preprocess(&predict_budget(&params, rows.len(), mode)?)?;
    let table = SigmoidTable::new(&params)?;
    let p = forward(s, &table, rows, model)?;
    Ok(ShareVector::new(p, params.frac_bits()))
}

/// Open [p >= threshold] for each probability; nothing else is revealed.
pub fn classify(s: &mut Session, p: &ShareVector, threshold: f64) -> Result<Vec<bool>, TrainerError> {
    let params = *s.params();
    let f = params.frac_bits();
    if p.scale() != f {
        return Err(crate::rss::RssError::ScaleMismatch { left: p.scale(), right: f }.into());
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(TrainerError::InvalidConfig(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    if p.is_empty() {
        return Ok(Vec::new());
    }
    let width = f + 1;
    let mut budget = PreprocessingBudget::new();
    budget.add_compare(width, p.len());
    s.preprocess(&budget)?;
    let cut = params.encode(threshold)?;
    let diffs: Vec<RepShare> = p.elems().iter().map(|x| s.add_public(*x, -cut)).collect();
    let below = s.ltz_many(&diffs, width)?;
    let opened = s.open_many(&below)?;
    Ok(opened.iter().map(|b| *b == RingElement::ZERO).collect())
}

/// Reveal the weights and bias to all parties.
pub fn open_model(s: &mut Session, model: &ModelShares) -> Result<FixedModel, TrainerError> {
    let mut all = model.weights.elems().to_vec();
    all.push(model.bias);
    let mut opened = s.open_many(&all)?;
    let bias = opened.pop().unwrap_or(RingElement::ZERO);
    Ok(FixedModel { weights: opened, bias })
}

/// Train from zero weights with the full batch every epoch.
///
/// Masks are generated per epoch in two phases, forward and update, so an
/// early stop wastes none. The session's truncation mode is switched to the
/// configured one for the duration.
pub fn train(s: &mut Session, data: &SecretDataset, cfg: &TrainingConfig) -> Result<TrainOutput, TrainerError> {
    cfg.validate()?;
    if *s.params() != cfg.fixed_point {
        return Err(TrainerError::InvalidConfig(format!(
            "session uses {} fractional bits, configuration {}",
            s.params().frac_bits(),
            cfg.fixed_point.frac_bits()
        )));
    }
    let previous = s.trunc_mode();
    s.set_trunc_mode(cfg.truncation);
    let out = train_inner(s, data, cfg);
    s.set_trunc_mode(previous);
    out
}

fn train_inner(s: &mut Session, data: &SecretDataset, cfg: &TrainingConfig) -> Result<TrainOutput, TrainerError> {
    let params = cfg.fixed_point;
    let f = params.frac_bits();
    let (n, d) = (data.n(), data.d());
    let budget = required_pairs(n, d, cfg)?;
    let coeffs = Coefficients::new(cfg, n)?;
    let table = SigmoidTable::new(&params)?;
    let labels = data.labels().elems();

    let mut preprocessing_time = Duration::ZERO;
    let mut provision = |s: &mut Session, b: &PreprocessingBudget| {
        let start = Instant::now();
        let out = s.preprocess(b);
        preprocessing_time += start.elapsed();
        out
    };
    provision(s, &budget.setup)?;
    let sample_weights = match cfg.class_weighting {
        ClassWeighting::Off => None,
        ClassWeighting::Balanced => Some(balanced_weights(s, labels, &params)?),
    };

    let columns = data.columns();
    let mut model = ModelShares::zeros(d, f);
    let mut losses = Vec::new();
    let mut epochs = 0;
    let mut stopped_early = false;
    for _ in 0..cfg.stop.max_epochs() {
        provision(s, &budget.forward)?;
        let p = forward(s, &table, data.rows(), &model)?;
        if cfg.computes_loss() {
            let loss = loss_shares(s, &p, labels)?;
            let loss = params.decode(s.open(loss)?);
            log::debug!("epoch {epochs}: loss {loss:.6}");
            losses.push(loss);
            if let StopPolicy::LossThreshold { threshold, .. } = cfg.stop {
                if loss < threshold {
                    stopped_early = true;
                    break;
                }
            }
        }
        provision(s, &budget.update)?;
        let mut errors: Vec<RepShare> = p.iter().zip(labels).map(|(p, y)| *p - *y).collect();
        if let Some(weights) = &sample_weights {
            let weighted = s.mul_many(&errors, weights)?;
            errors = s.trunc_many(&weighted, f)?;
        }
        update(s, &coeffs, &columns, &errors, &mut model)?;
        epochs += 1;
    }
    Ok(TrainOutput { model, losses, epochs, stopped_early, preprocessing_time })
}

/// Open the positive count and form n / (2 n_class) per sample.
fn balanced_weights(
    s: &mut Session,
    labels: &[RepShare],
    params: &FixedPointParams,
) -> Result<Vec<RepShare>, TrainerError> {
    let f = params.frac_bits();
    let n = labels.len();
    let total = s.open(labels.iter().copied().sum())?;
    let raw = total.value();
    if raw & ((1u64 << f) - 1) != 0 || (raw >> f) as usize > n {
        return Err(TrainerError::NonBinaryLabel { row: 0, value: params.decode(total) });
    }
    let (base, delta) = class_weights(n, (raw >> f) as usize, params)?;
    let scaled: Vec<RepShare> = labels.iter().map(|y| *y * delta).collect();
    Ok(s.trunc_many(&scaled, f)?.into_iter().map(|w| s.add_public(w, base)).collect())
}

/// Gradient, momentum and step with masks already in the pool.
fn update(
    s: &mut Session,
    coeffs: &Coefficients,
    columns: &[Vec<RepShare>],
    errors: &[RepShare],
    model: &mut ModelShares,
) -> Result<(), TrainerError> {
    let f = coeffs.frac_bits;
    let d = columns.len();
    let pairs: Vec<(&[RepShare], &[RepShare])> = columns.iter().map(|c| (&c[..], errors)).collect();
    let sums = s.dot_many(&pairs)?;

    // feature sums and decayed velocity share one truncation batch
    let mut batch = sums;
    batch.extend(model.velocity.elems().iter().map(|v| *v * coeffs.momentum));
    batch.push(model.bias_velocity * coeffs.momentum);
    let rescaled = s.trunc_many(&batch, f)?;
    let (feature_sums, decayed) = rescaled.split_at(d);

    let mut totals: Vec<RepShare> = feature_sums.iter().map(|g| *g * coeffs.inverse_n).collect();
    totals.push(errors.iter().copied().sum::<RepShare>() * coeffs.inverse_n);
    let grad = s.trunc_many(&totals, coeffs.mean_shift)?;

    let velocity: Vec<RepShare> = decayed.iter().zip(&grad).map(|(v, g)| *v + *g).collect();
    let scaled: Vec<RepShare> = velocity.iter().map(|v| *v * coeffs.learning_rate).collect();
    let steps = s.trunc_many(&scaled, f)?;

    let weights: Vec<RepShare> = model.weights.elems().iter().zip(&steps).map(|(w, st)| *w - *st).collect();
    model.weights = ShareVector::new(weights, f);
    model.bias = model.bias - steps[d];
    model.velocity = ShareVector::new(velocity[..d].to_vec(), f);
    model.bias_velocity = velocity[d];
    Ok(())
}
