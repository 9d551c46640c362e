use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// An element of the ring Z_{2^64}.
///
/// All arithmetic wraps. The signed view is two's complement, so values at or
/// above 2^63 stand for negative numbers.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RingElement(pub u64);

/// Serialized width of one ring element on the wire.
pub const RING_BYTES: usize = 8;

impl RingElement {
    pub const ZERO: RingElement = RingElement(0);
    pub const ONE: RingElement = RingElement(1);

    #[inline]
    pub const fn new(value: u64) -> Self {
        RingElement(value)
    }

    #[inline]
    pub const fn from_signed(value: i64) -> Self {
        RingElement(value as u64)
    }

    #[inline]
    pub const fn value(self) -> u64 {
        self.0
    }

    /// Two's complement interpretation.
    #[inline]
    pub const fn signed(self) -> i64 {
        self.0 as i64
    }

    /// 2^exp as a ring element (exp < 64).
    #[inline]
    pub const fn pow2(exp: u32) -> Self {
        RingElement(1u64 << exp)
    }

    /// Bit `i` of the unsigned representative.
    #[inline]
    pub const fn bit(self, i: u32) -> bool {
        (self.0 >> i) & 1 == 1
    }

    pub fn to_le_bytes(self) -> [u8; RING_BYTES] {
        self.0.to_le_bytes()
    }

    pub fn from_le_bytes(bytes: [u8; RING_BYTES]) -> Self {
        RingElement(u64::from_le_bytes(bytes))
    }
}

/// Concatenate little-endian encodings, no padding.
pub fn encode_elements(elems: &[RingElement]) -> Vec<u8> {
    let mut out = Vec::with_capacity(elems.len() * RING_BYTES);
    for e in elems {
        out.extend_from_slice(&e.to_le_bytes());
    }
    out
}

/// Inverse of [`encode_elements`]; `None` when the length is not a multiple of 8.
pub fn decode_elements(bytes: &[u8]) -> Option<Vec<RingElement>> {
    if bytes.len() % RING_BYTES != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(RING_BYTES)
            .map(|c| RingElement::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    )
}

impl fmt::Debug for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R({})", self.signed())
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for RingElement {
    fn from(v: u64) -> Self {
        RingElement(v)
    }
}

impl From<i64> for RingElement {
    fn from(v: i64) -> Self {
        RingElement(v as u64)
    }
}

impl Add for RingElement {
    type Output = RingElement;
    #[inline]
    fn add(self, rhs: RingElement) -> RingElement {
        RingElement(self.0.wrapping_add(rhs.0))
    }
}

impl Sub for RingElement {
    type Output = RingElement;
    #[inline]
    fn sub(self, rhs: RingElement) -> RingElement {
        RingElement(self.0.wrapping_sub(rhs.0))
    }
}

impl Mul for RingElement {
    type Output = RingElement;
    #[inline]
    fn mul(self, rhs: RingElement) -> RingElement {
        RingElement(self.0.wrapping_mul(rhs.0))
    }
}

impl Neg for RingElement {
    type Output = RingElement;
    #[inline]
    fn neg(self) -> RingElement {
        RingElement(self.0.wrapping_neg())
    }
}

impl AddAssign for RingElement {
    #[inline]
    fn add_assign(&mut self, rhs: RingElement) {
        self.0 = self.0.wrapping_add(rhs.0);
    }
}

impl SubAssign for RingElement {
    #[inline]
    fn sub_assign(&mut self, rhs: RingElement) {
        self.0 = self.0.wrapping_sub(rhs.0);
    }
}

impl MulAssign for RingElement {
    #[inline]
    fn mul_assign(&mut self, rhs: RingElement) {
        self.0 = self.0.wrapping_mul(rhs.0);
    }
}

impl Sum for RingElement {
    fn sum<I: Iterator<Item = RingElement>>(iter: I) -> RingElement {
        iter.fold(RingElement::ZERO, |a, b| a + b)
    }
}

impl<'a> Sum<&'a RingElement> for RingElement {
    fn sum<I: Iterator<Item = &'a RingElement>>(iter: I) -> RingElement {
        iter.fold(RingElement::ZERO, |a, b| a + *b)
    }
}
