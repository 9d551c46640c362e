use serde::{Deserialize, Serialize};

use super::{NumericError, RingElement};

/// Ring width in bits. Fixed: every share lives in Z_{2^64}.
pub const RING_BITS: u32 = 64;

pub const MIN_FRAC_BITS: u32 = 1;
pub const MAX_FRAC_BITS: u32 = 40;
pub const DEFAULT_FRAC_BITS: u32 = 16;

/// Fixed-point layout: a real x is stored as the integer nearest to x * 2^f.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointParams {
    frac_bits: u32,
}

impl Default for FixedPointParams {
    fn default() -> Self {
        FixedPointParams {
            frac_bits: DEFAULT_FRAC_BITS,
        }
    }
}

impl FixedPointParams {
    pub fn new(frac_bits: u32) -> Result<Self, NumericError> {
        if !(MIN_FRAC_BITS..=MAX_FRAC_BITS).contains(&frac_bits) {
            return Err(NumericError::InvalidPrecision {
                frac_bits,
                min: MIN_FRAC_BITS,
                max: MAX_FRAC_BITS,
            });
        }
        Ok(FixedPointParams { frac_bits })
    }

    #[inline]
    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    #[inline]
    pub fn ring_bits(&self) -> u32 {
        RING_BITS
    }

    /// Largest representable magnitude, 2^(k-f-1).
    pub fn integer_bound(&self) -> f64 {
        2f64.powi((RING_BITS - self.frac_bits - 1) as i32)
    }

    /// 2^f as a float.
    pub fn scale(&self) -> f64 {
        2f64.powi(self.frac_bits as i32)
    }

    /// Raw encoding of 1.0.
    pub fn one(&self) -> RingElement {
        RingElement::pow2(self.frac_bits)
    }

    pub fn encode(&self, x: f64) -> Result<RingElement, NumericError> {
        encode(x, self)
    }

    pub fn decode(&self, e: RingElement) -> f64 {
        decode(e, self)
    }
}

/// round(x * 2^f) mod 2^64, ties away from zero.
pub fn encode(x: f64, p: &FixedPointParams) -> Result<RingElement, NumericError> {
    let bound = p.integer_bound();
    if !x.is_finite() || x.abs() >= bound {
        return Err(NumericError::OutOfRange { value: x, bound });
    }
    // f64::round rounds half away from zero.
    let raw = (x * p.scale()).round() as i64;
    Ok(RingElement::from_signed(raw))
}

pub fn decode(e: RingElement, p: &FixedPointParams) -> f64 {
    e.signed() as f64 / p.scale()
}

/// Round-to-nearest division by 2^bits of the signed value, ties toward +inf.
///
/// Requires |value| < 2^62 so the rounding offset cannot wrap.
pub fn trunc_exact_ref(e: RingElement, bits: u32) -> RingElement {
    if bits == 0 {
        return e;
    }
    let v = e.signed() as i128 + (1i128 << (bits - 1));
    RingElement::from_signed((v >> bits) as i64)
}

/// Probabilistic truncation: floor(value / 2^bits) plus one with probability
/// equal to the discarded fraction, decided by `coin` in [0, 1).
pub fn trunc_prob_ref(e: RingElement, bits: u32, coin: f64) -> RingElement {
    if bits == 0 {
        return e;
    }
    let v = e.signed();
    let floor = v >> bits;
    let frac = (v - (floor << bits)) as f64 / 2f64.powi(bits as i32);
    let up = if coin < frac { 1 } else { 0 };
    RingElement::from_signed(floor + up)
}

/// Exact floor(value / 2^bits) of the signed value.
pub fn floor_shift(e: RingElement, bits: u32) -> RingElement {
    RingElement::from_signed(e.signed() >> bits)
}

/// Raw product of two fixed-point values at scale 2^(2f): the low 64 bits of
/// the 128-bit integer product.
pub fn raw_product(a: RingElement, b: RingElement) -> RingElement {
    let wide = (a.signed() as i128) * (b.signed() as i128);
    RingElement(wide as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn p16() -> FixedPointParams {
        FixedPointParams::default()
    }

    #[test]
    fn precision_bounds_enforced() {
        assert!(FixedPointParams::new(0).is_err());
        assert!(FixedPointParams::new(41).is_err());
        assert_eq!(FixedPointParams::new(40).unwrap().frac_bits(), 40);
        assert_eq!(p16().integer_bound(), 2f64.powi(47));
    }

    #[test]
    fn encode_examples() {
        let p = p16();
        assert_eq!(encode(1.5, &p).unwrap(), RingElement(98304));
        assert_eq!(encode(-0.25, &p).unwrap(), RingElement(0u64.wrapping_sub(16384)));
        assert_eq!(encode(0.0, &p).unwrap(), RingElement::ZERO);
        assert_eq!(encode(0.0, &FixedPointParams::new(3).unwrap()).unwrap(), RingElement::ZERO);
        // ties away from zero
        assert_eq!(encode(0.5 / 65536.0, &p).unwrap(), RingElement(1));
        assert_eq!(encode(-0.5 / 65536.0, &p).unwrap(), RingElement::from_signed(-1));
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let p = p16();
        let err = encode(2f64.powi(47), &p).unwrap_err();
        assert!(err.to_string().contains("140737488355328"), "{err}");
        assert!(encode(f64::NAN, &p).is_err());
        assert!(encode(-2f64.powi(48), &p).is_err());
    }

    #[test]
    fn decode_examples() {
        let p = p16();
        assert_eq!(decode(RingElement(98304), &p), 1.5);
        assert_eq!(decode(RingElement(0u64.wrapping_sub(16384)), &p), -0.25);
        assert!((decode(encode(0.1, &p).unwrap(), &p) - 0.1).abs() <= 2f64.powi(-17));
    }

    #[test]
    fn exact_truncation_examples() {
        let p = p16();
        let a = encode(1.5, &p).unwrap();
        assert_eq!(trunc_exact_ref(raw_product(a, a), 16), encode(2.25, &p).unwrap());
        assert_eq!(trunc_exact_ref(RingElement(98304), 16), RingElement(2));
        // ties go toward +inf: -1.5 -> -1, -1.5001 -> -2
        assert_eq!(trunc_exact_ref(RingElement::from_signed(-98304), 16), RingElement::from_signed(-1));
        assert_eq!(trunc_exact_ref(RingElement::from_signed(-98305), 16), RingElement::from_signed(-2));
        assert_eq!(trunc_exact_ref(RingElement::from_signed(-98303), 16), RingElement::from_signed(-1));
        assert_eq!(trunc_exact_ref(RingElement::from_signed(-32768), 16), RingElement::ZERO);
        assert_eq!(trunc_exact_ref(RingElement::from_signed(-32769), 16), RingElement::from_signed(-1));
    }

    #[test]
    fn probabilistic_truncation_examples() {
        let p = p16();
        let three = encode(3.0, &p).unwrap();
        for coin in [0.0, 0.3, 0.999_999] {
            assert_eq!(trunc_prob_ref(three, 16, coin), RingElement(3));
        }
        let v = RingElement::from_signed(-98304); // -1.5
        for coin in [0.0, 0.49, 0.5, 0.99] {
            let out = trunc_prob_ref(v, 16, coin).signed();
            assert!(out == -2 || out == -1);
        }
    }

    #[test]
    fn probabilistic_truncation_mean_half_fraction() {
        // value 5.5 at integer scale: floor 5, fractional mass 0.5
        let v = encode(5.5, &p16()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let trials = 100_000;
        let sum: i64 = (0..trials).map(|_| trunc_prob_ref(v, 16, rng.gen()).signed()).sum();
        let mean = sum as f64 / trials as f64;
        let sigma = (0.25f64 / trials as f64).sqrt();
        assert!((mean - 5.5).abs() <= 3.0 * sigma, "mean {mean}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]
        #[test]
        fn encode_decode_roundtrip(x in -1.0e9f64..1.0e9) {
            let p = p16();
            let err = (decode(encode(x, &p).unwrap(), &p) - x).abs();
            prop_assert!(err <= 2f64.powi(-17) + x.abs() * f64::EPSILON);
        }

        #[test]
        fn truncated_product_close_to_real_product(x in -3.0e4f64..3.0e4, y in -3.0e4f64..3.0e4) {
            let p = p16();
            prop_assume!((x * y).abs() < p.integer_bound() / 4.0);
            let prod = trunc_exact_ref(raw_product(encode(x, &p).unwrap(), encode(y, &p).unwrap()), 16);
            // encoding error of each factor propagates through the other factor
            let slack = 2f64.powi(-16) + (x.abs() + y.abs() + 1.0) * 2f64.powi(-17);
            prop_assert!((decode(prod, &p) - x * y).abs() <= slack);
        }

        #[test]
        fn truncated_product_small_operands_within_one_ulp(x in -8.0f64..8.0, y in -8.0f64..8.0) {
            let p = p16();
            let (ex, ey) = (encode(x, &p).unwrap(), encode(y, &p).unwrap());
            let (dx, dy) = (decode(ex, &p), decode(ey, &p));
            let prod = trunc_exact_ref(raw_product(ex, ey), 16);
            prop_assert!((decode(prod, &p) - dx * dy).abs() <= 2f64.powi(-16));
        }

        #[test]
        fn probabilistic_output_has_two_point_support(v in -(1i64 << 60)..(1i64 << 60), coin in 0.0f64..1.0) {
            let e = RingElement::from_signed(v);
            let out = trunc_prob_ref(e, 16, coin).signed();
            let floor = v >> 16;
            prop_assert!(out == floor || out == floor + 1);
        }
    }
}
