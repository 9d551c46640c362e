//! Natural logarithm on (0, 1].
//!
//! The input is scaled into [1/2, 1] by a power of two read off a thermometer
//! of sign tests, then ln(1 + u) = u q(u) is evaluated in Horner form.

use super::{ApproxSpec, NonlinearError};
use crate::numeric::{trunc_exact_ref, FixedPointParams, RingElement};
use crate::rss::{PreprocessingBudget, RepShare, Session, ShareVector, TruncMode};

/// Monomial coefficients of q(u) = ln(1 + u) / u on [-1/2, 0], lowest first.
const Q_COEFFS: [f64; 7] = [
    1.0000009823755391,
    -0.49981506938823544,
    0.3389498888912555,
    -0.18720224092429577,
    0.5240135116191948,
    0.6401686306978416,
    0.9920756604227019,
];

/// Largest supported precision: Horner products reach 2^(2f+1).
pub const LOG_MAX_FRAC_BITS: u32 = 29;

/// Raw-unit constants for one precision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogTable {
    frac_bits: u32,
    coeffs: Vec<i64>,
    ln2: i64,
}

impl LogTable {
    pub fn new(params: &FixedPointParams) -> Result<Self, NonlinearError> {
        let f = params.frac_bits();
        if !(2..=LOG_MAX_FRAC_BITS).contains(&f) {
            return Err(NonlinearError::UnsupportedPrecision { frac_bits: f, max: LOG_MAX_FRAC_BITS });
        }
        let scale = params.scale();
        Ok(LogTable {
            frac_bits: f,
            coeffs: Q_COEFFS.iter().map(|c| (c * scale).round() as i64).collect(),
            ln2: (std::f64::consts::LN_2 * scale).round() as i64,
        })
    }

    /// Thermometer levels: j = 1..f-1 tests p < 2^(f-j).
    fn levels(&self) -> u32 {
        self.frac_bits - 1
    }

    fn width(&self) -> u32 {
        self.frac_bits + 1
    }

    /// Secure multiplications per evaluated input.
    pub(crate) fn multiplications_per_input(&self) -> u64 {
        self.degree() as u64 + 1
    }

    fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Masks consumed by `n` evaluations.
    pub fn budget(&self, n: usize, mode: TruncMode) -> PreprocessingBudget {
        let mut b = PreprocessingBudget::new();
        b.add_compare(self.width(), self.levels() as usize * n)
            .add_trunc(mode, self.frac_bits, (self.degree() + 1) * n);
        b
    }

    /// Cleartext twin of [`Self::eval_shares`] under exact truncation.
    pub fn eval_fixed(&self, p: RingElement) -> RingElement {
        let f = self.frac_bits;
        let r = RingElement::from_signed;
        let mut exponent = 0i64;
        let mut mult = 1i64;
        for j in 1..=self.levels() {
            if p.signed() < (1i64 << (f - j)) {
                exponent += 1;
                mult += 1i64 << (j - 1);
            }
        }
        let u = p * r(mult) - r(1i64 << f);
        let d = self.degree();
        let mut acc = r(self.coeffs[d]);
        for k in (0..d).rev() {
            acc = trunc_exact_ref(acc * u, f) + r(self.coeffs[k]);
        }
        trunc_exact_ref(acc * u, f) - r(exponent) * r(self.ln2)
    }

    /// Secure evaluation of a batch at scale f. Inputs must decode into
    /// [2^-f, 1].
    pub fn eval_shares(&self, s: &mut Session, ps: &[RepShare]) -> Result<Vec<RepShare>, NonlinearError> {
        let n = ps.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let f = self.frac_bits;
        let r = RingElement::from_signed;
        let levels = self.levels() as usize;
        let mut probes = Vec::with_capacity(levels * n);
        for p in ps {
            for j in 1..=self.levels() {
                probes.push(s.add_public(*p, -r(1i64 << (f - j))));
            }
        }
        let below = s.ltz_many(&probes, self.width())?;
        let mut exponent = Vec::with_capacity(n);
        let mut mult = Vec::with_capacity(n);
        for row in below.chunks_exact(levels) {
            exponent.push(row.iter().copied().sum::<RepShare>());
            let m: RepShare = row
                .iter()
                .enumerate()
                .map(|(j, b)| *b * RingElement::pow2(j as u32))
                .sum();
            mult.push(s.add_public(m, RingElement::ONE));
        }
        let scaled = s.mul_many(ps, &mult)?;
        let u: Vec<RepShare> = scaled.iter().map(|m| s.add_public(*m, -r(1i64 << f))).collect();

        let d = self.degree();
        let first: Vec<RepShare> = u.iter().map(|x| *x * r(self.coeffs[d])).collect();
        let mut acc = s.trunc_many(&first, f)?;
        for k in (1..d).rev() {
            acc = acc.iter().map(|a| s.add_public(*a, r(self.coeffs[k]))).collect();
            let prod = s.mul_many(&acc, &u)?;
            acc = s.trunc_many(&prod, f)?;
        }
        acc = acc.iter().map(|a| s.add_public(*a, r(self.coeffs[0]))).collect();
        let prod = s.mul_many(&acc, &u)?;
        let poly = s.trunc_many(&prod, f)?;
        Ok(poly
            .iter()
            .zip(&exponent)
            .map(|(v, e)| *v - *e * r(self.ln2))
            .collect())
    }
}

/// Masks consumed by [`log_secure`] on `n` inputs.
pub fn log_budget(params: &FixedPointParams, n: usize, mode: TruncMode) -> Result<PreprocessingBudget, NonlinearError> {
    Ok(LogTable::new(params)?.budget(n, mode))
}

/// Secure natural logarithm of values at scale f in [2^-f, 1].
pub fn log_secure(s: &mut Session, p: &ShareVector, spec: &ApproxSpec) -> Result<ShareVector, NonlinearError> {
    let params = *s.params();
    spec.check_log(&params)?;
    if p.scale() != params.frac_bits() {
        return Err(crate::rss::RssError::ScaleMismatch { left: p.scale(), right: params.frac_bits() }.into());
    }
    let out = LogTable::new(&params)?.eval_shares(s, p.elems())?;
    Ok(ShareVector::new(out, params.frac_bits()))
}

/// Cleartext fixed-point logarithm, bit-identical to the secure version under
/// exact truncation.
pub fn log_fixed(p: RingElement, params: &FixedPointParams) -> Result<RingElement, NonlinearError> {
    Ok(LogTable::new(params)?.eval_fixed(p))
}
