//! Logistic function as an odd-symmetric piecewise-linear spline.
//!
//! For t = min(|x|, 12) the spline approximates sigmoid(t) - 1/2 with
//! non-negative slopes, so the result is monotone and the reflection
//! sigma(x) + sigma(-x) = 1 holds exactly. Knots are spaced so every segment
//! has the same chord sag; the values are the minimax fit for those knots.

use super::{ApproxSpec, NonlinearError};
use crate::numeric::{trunc_exact_ref, FixedPointParams, RingElement};
use crate::rss::{PreprocessingBudget, RepShare, Session, ShareVector, TruncMode, TRUNC_INPUT_BITS};

/// Knot positions in 64ths.
const KNOTS_64THS: [i64; 25] = [0, 22, 36, 48, 59, 70, 80, 90, 101, 111, 122, 133, 145, 158, 171, 186, 202, 220, 240, 264, 293, 330, 381, 467, 768];

/// Spline values at the knots, in units of 1 (offset from 1/2).
const KNOT_VALUES: [f64; 25] = [
    0.0,
    0.08530954405062206,
    0.13705743039311863,
    0.17936885183831078,
    0.21547914200263796,
    0.2492956029621184,
    0.277283238980106,
    0.30338218620429247,
    0.329019326758753,
    0.3500452255700355,
    0.3707477186955754,
    0.38878945261099723,
    0.4061982102308186,
    0.421973878445495,
    0.43555490149116705,
    0.44819986196480804,
    0.45936267393744157,
    0.4688741773044893,
    0.4772310199373653,
    0.4842523893008024,
    0.489886710018231,
    0.49443506030715856,
    0.4974406267773779,
    0.49953119561435233,
    0.4999286072499317,
];

/// Saturation point of the spline.
pub const SIGMOID_CLAMP: f64 = 12.0;

/// Extra fractional bits carried by the slope coefficients.
pub const SLOPE_BITS: u32 = 24;

/// Width of the sign tests on the raw input; inputs need |x| < 2^61 - 12.
pub const SIGN_WIDTH: u32 = 61;

/// Largest supported precision: the spline sum needs f - 1 + 24 < 61.
pub const SIGMOID_MAX_FRAC_BITS: u32 = TRUNC_INPUT_BITS - SLOPE_BITS;

/// The spline in raw fixed-point units for one precision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SigmoidTable {
    frac_bits: u32,
    /// Interior knots, ascending.
    knots: Vec<i64>,
    /// Slope of the first segment, scaled by 2^SLOPE_BITS.
    base_slope: i64,
    /// Slope change at each interior knot.
    kinks: Vec<i64>,
    clamp: i64,
    half: i64,
}

impl SigmoidTable {
    pub fn new(params: &FixedPointParams) -> Result<Self, NonlinearError> {
        let f = params.frac_bits();
        if f > SIGMOID_MAX_FRAC_BITS {
            return Err(NonlinearError::UnsupportedPrecision { frac_bits: f, max: SIGMOID_MAX_FRAC_BITS });
        }
        let scale = params.scale();
        let cap = (1i64 << (f - 1)) - 1;
        let raw_knots: Vec<i64> = KNOTS_64THS.iter().map(|k| ((*k as f64) / 64.0 * scale).round() as i64).collect();
        let raw_values: Vec<i64> = KNOT_VALUES.iter().map(|v| ((v * scale).round() as i64).min(cap)).collect();
        let slopes: Vec<i64> = (0..KNOTS_64THS.len() - 1)
            .map(|k| {
                let dv = (raw_values[k + 1] - raw_values[k]) as f64;
                let dk = (raw_knots[k + 1] - raw_knots[k]).max(1) as f64;
                (dv * 2f64.powi(SLOPE_BITS as i32) / dk).round() as i64
            })
            .collect();
        let kinks = slopes.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(SigmoidTable {
            frac_bits: f,
            knots: raw_knots[1..raw_knots.len() - 1].to_vec(),
            base_slope: slopes[0],
            kinks,
            clamp: raw_knots[raw_knots.len() - 1],
            half: 1i64 << (f - 1),
        })
    }

    pub fn interior_knots(&self) -> usize {
        self.knots.len()
    }

    /// Secure multiplications per evaluated input.
    pub(crate) fn multiplications_per_input(&self) -> u64 {
        self.knots.len() as u64 + 2
    }

    fn knot_width(&self) -> u32 {
        self.frac_bits + 5
    }

    /// Masks consumed by `n` evaluations.
    pub fn budget(&self, n: usize, mode: TruncMode) -> PreprocessingBudget {
        let mut b = PreprocessingBudget::new();
        b.add_compare(SIGN_WIDTH, 3 * n)
            .add_compare(self.knot_width(), self.knots.len() * n)
            .add_trunc(mode, SLOPE_BITS, n);
        b
    }

    /// Cleartext evaluation with the exact same arithmetic as the secure
    /// protocol under exact truncation.
    pub fn eval_fixed(&self, x: RingElement) -> RingElement {
        let r = RingElement::from_signed;
        let xv = x.signed();
        let neg = (xv < 0) as i64;
        let below_hi = (xv < self.clamp) as i64;
        let below_lo = (xv < -self.clamp) as i64;
        let inside = below_hi - below_lo;
        let sign = inside - 2 * (neg - below_lo);
        let t = r(sign) * x + r(self.clamp) * r(1 - inside);
        let mut acc = r(self.base_slope) * t;
        for (k, kink) in self.knots.iter().zip(&self.kinks) {
            let d = t - r(*k);
            if d.signed() >= 0 {
                acc += r(*kink) * d;
            }
        }
        let g = trunc_exact_ref(acc, SLOPE_BITS);
        r(self.half) + g - r(2 * neg) * g
    }

    /// Secure evaluation of a batch at scale f.
    pub fn eval_shares(&self, s: &mut Session, xs: &[RepShare]) -> Result<Vec<RepShare>, NonlinearError> {
        let n = xs.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let r = RingElement::from_signed;
        let one = s.public(RingElement::ONE);
        let clamp = r(self.clamp);

        let mut probes = Vec::with_capacity(3 * n);
        probes.extend_from_slice(xs);
        probes.extend(xs.iter().map(|x| s.add_public(*x, -clamp)));
        probes.extend(xs.iter().map(|x| s.add_public(*x, clamp)));
        let signs = s.ltz_many(&probes, SIGN_WIDTH)?;
        let (neg, rest) = signs.split_at(n);
        let (below_hi, below_lo) = rest.split_at(n);

        let inside: Vec<RepShare> = below_hi.iter().zip(below_lo).map(|(a, b)| *a - *b).collect();
        let sign: Vec<RepShare> = (0..n)
            .map(|i| inside[i] - (neg[i] - below_lo[i]) * RingElement(2))
            .collect();
        let signed_x = s.mul_many(&sign, xs)?;
        let t: Vec<RepShare> = (0..n).map(|i| signed_x[i] + (one - inside[i]) * clamp).collect();

        let m = self.knots.len();
        let mut diffs = Vec::with_capacity(m * n);
        for ti in &t {
            for k in &self.knots {
                diffs.push(s.add_public(*ti, -r(*k)));
            }
        }
        let before = s.ltz_many(&diffs, self.knot_width())?;
        let past: Vec<RepShare> = before.iter().map(|b| one - *b).collect();
        let relu = s.mul_many(&past, &diffs)?;

        let sums: Vec<RepShare> = (0..n)
            .map(|i| {
                let mut acc = t[i] * r(self.base_slope);
                for (k, kink) in self.kinks.iter().enumerate() {
                    acc += relu[i * m + k] * r(*kink);
                }
                acc
            })
            .collect();
        let g = s.trunc_many(&sums, SLOPE_BITS)?;
        let flip = s.mul_many(neg, &g)?;
        Ok((0..n)
            .map(|i| s.add_public(g[i] - flip[i] * RingElement(2), r(self.half)))
            .collect())
    }
}

/// Masks consumed by [`sigmoid_secure`] on `n` inputs.
pub fn sigmoid_budget(params: &FixedPointParams, n: usize, mode: TruncMode) -> Result<PreprocessingBudget, NonlinearError> {
    Ok(SigmoidTable::new(params)?.budget(n, mode))
}

/// Secure logistic function on values at scale f.
pub fn sigmoid_secure(s: &mut Session, x: &ShareVector, spec: &ApproxSpec) -> Result<ShareVector, NonlinearError> {
    let params = *s.params();
    spec.check_sigmoid(&params)?;
    if x.scale() != params.frac_bits() {
        return Err(crate::rss::RssError::ScaleMismatch { left: x.scale(), right: params.frac_bits() }.into());
    }
    let table = SigmoidTable::new(&params)?;
    let out = table.eval_shares(s, x.elems())?;
    Ok(ShareVector::new(out, params.frac_bits()))
}

/// Cleartext fixed-point logistic function, bit-identical to the secure
/// version under exact truncation.
pub fn sigmoid_fixed(x: RingElement, params: &FixedPointParams) -> Result<RingElement, NonlinearError> {
    Ok(SigmoidTable::new(params)?.eval_fixed(x))
}

/// 1 / (1 + e^-x) in double precision.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
