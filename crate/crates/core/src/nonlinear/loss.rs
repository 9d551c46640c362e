use super::log::LogTable;
use super::NonlinearError;
use crate::numeric::{trunc_exact_ref, FixedPointParams, RingElement};
use crate::rss::{PreprocessingBudget, RepShare, RssError, Session, ShareVector, TruncMode};

/// Extra fractional bits on the public 1/n factor, bounded so the scaled sum
/// stays below 2^60.
pub(crate) fn mean_extra_bits(f: u32) -> u32 {
    f.min(56u32.saturating_sub(2 * f))
}

pub(crate) fn neg_inverse(n: usize, f: u32) -> RingElement {
    let bits = f + mean_extra_bits(f);
    RingElement::from_signed(-(2f64.powi(bits as i32) / n as f64).round() as i64)
}

/// Masks consumed by [`cross_entropy_loss`] on `n` predictions.
pub fn loss_budget(params: &FixedPointParams, n: usize, mode: TruncMode) -> Result<PreprocessingBudget, NonlinearError> {
    let f = params.frac_bits();
    let mut b = LogTable::new(params)?.budget(2 * n, mode);
    if n > 0 {
        b.add_trunc(mode, f, 1).add_trunc(mode, f + mean_extra_bits(f), 1);
    }
    Ok(b)
}

pub(crate) fn loss_shares(s: &mut Session, ps: &[RepShare], ys: &[RepShare]) -> Result<RepShare, NonlinearError> {
    let n = ps.len();
    if n != ys.len() {
        return Err(RssError::LengthMismatch { left: n, right: ys.len() }.into());
    }
    if n == 0 {
        return Err(RssError::InvalidParameter("loss of an empty batch".into()).into());
    }
    let params = *s.params();
    let f = params.frac_bits();
    let one = s.public(params.one());
    let mut args = ps.to_vec();
    args.extend(ps.iter().map(|p| one - *p));
    let logs = LogTable::new(&params)?.eval_shares(s, &args)?;
    let mut weights = ys.to_vec();
    weights.extend(ys.iter().map(|y| one - *y));
    let total = s.dot(&weights, &logs)?;
    let total = s.trunc(total, f)?;
    let scaled = total * neg_inverse(n, f);
    Ok(s.trunc(scaled, f + mean_extra_bits(f))?)
}

/// Share of the mean binary cross-entropy -(1/n) sum[y ln p + (1-y) ln(1-p)]
/// at scale f. Predictions must lie in [2^-f, 1 - 2^-f].
pub fn cross_entropy_loss(s: &mut Session, p: &ShareVector, y: &ShareVector) -> Result<RepShare, NonlinearError> {
    let f = s.params().frac_bits();
    for v in [p, y] {
        if v.scale() != f {
            return Err(RssError::ScaleMismatch { left: v.scale(), right: f }.into());
        }
    }
    loss_shares(s, p.elems(), y.elems())
}

/// Cleartext twin of [`cross_entropy_loss`] under exact truncation.
pub fn cross_entropy_fixed(
    p: &[RingElement],
    y: &[RingElement],
    params: &FixedPointParams,
) -> Result<RingElement, NonlinearError> {
    if p.len() != y.len() {
        return Err(RssError::LengthMismatch { left: p.len(), right: y.len() }.into());
    }
    if p.is_empty() {
        return Err(RssError::InvalidParameter("loss of an empty batch".into()).into());
    }
    let f = params.frac_bits();
    let table = LogTable::new(params)?;
    let one = params.one();
    let total: RingElement = p
        .iter()
        .zip(y)
        .map(|(pi, yi)| *yi * table.eval_fixed(*pi) + (one - *yi) * table.eval_fixed(one - *pi))
        .sum();
    let total = trunc_exact_ref(total, f);
    Ok(trunc_exact_ref(total * neg_inverse(p.len(), f), f + mean_extra_bits(f)))
}

/// Mean binary cross-entropy in double precision.
pub fn cross_entropy(p: &[f64], y: &[f64]) -> f64 {
    let n = p.len() as f64;
    -p.iter()
        .zip(y)
        .map(|(p, y)| y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        .sum::<f64>()
        / n
}
