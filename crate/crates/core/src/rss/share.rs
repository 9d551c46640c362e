use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::RssError;
use crate::numeric::RingElement;

/// Party i's view of a replicated sharing: `lo` is s_i and `hi` is s_{i+1}.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepShare {
    pub lo: RingElement,
    pub hi: RingElement,
}

impl RepShare {
    pub const ZERO: RepShare = RepShare {
        lo: RingElement::ZERO,
        hi: RingElement::ZERO,
    };

    pub fn new(lo: RingElement, hi: RingElement) -> Self {
        RepShare { lo, hi }
    }
}

impl Add for RepShare {
    type Output = RepShare;
    #[inline]
    fn add(self, rhs: RepShare) -> RepShare {
        RepShare {
            lo: self.lo + rhs.lo,
            hi: self.hi + rhs.hi,
        }
    }
}

impl Sub for RepShare {
    type Output = RepShare;
    #[inline]
    fn sub(self, rhs: RepShare) -> RepShare {
        RepShare {
            lo: self.lo - rhs.lo,
            hi: self.hi - rhs.hi,
        }
    }
}

impl Neg for RepShare {
    type Output = RepShare;
    #[inline]
    fn neg(self) -> RepShare {
        RepShare {
            lo: -self.lo,
            hi: -self.hi,
        }
    }
}

impl AddAssign for RepShare {
    #[inline]
    fn add_assign(&mut self, rhs: RepShare) {
        *self = *self + rhs;
    }
}

impl SubAssign for RepShare {
    #[inline]
    fn sub_assign(&mut self, rhs: RepShare) {
        *self = *self - rhs;
    }
}

/// Multiplication by a public ring constant.
impl Mul<RingElement> for RepShare {
    type Output = RepShare;
    #[inline]
    fn mul(self, c: RingElement) -> RepShare {
        RepShare {
            lo: self.lo * c,
            hi: self.hi * c,
        }
    }
}

impl std::iter::Sum for RepShare {
    fn sum<I: Iterator<Item = RepShare>>(iter: I) -> RepShare {
        iter.fold(RepShare::ZERO, |a, b| a + b)
    }
}

/// Split `secret` into three additive shares and hand party i the pair
/// (s_i, s_{i+1}).
pub fn share<R: RngCore + ?Sized>(secret: RingElement, rng: &mut R) -> [RepShare; 3] {
    let s0 = RingElement(rng.next_u64());
    let s1 = RingElement(rng.next_u64());
    let s2 = secret - s0 - s1;
    [
        RepShare::new(s0, s1),
        RepShare::new(s1, s2),
        RepShare::new(s2, s0),
    ]
}

/// Sum the three additive shares after checking replication consistency.
pub fn reconstruct(shares: &[RepShare; 3]) -> Result<RingElement, RssError> {
    for i in 0..3 {
        if shares[i].hi != shares[(i + 1) % 3].lo {
            return Err(RssError::InconsistentShares { index: i });
        }
    }
    Ok(shares[0].lo + shares[1].lo + shares[2].lo)
}

/// A batch of shares at one fixed-point scale (in fractional bits).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShareVector {
    elems: Vec<RepShare>,
    scale: u32,
}

impl ShareVector {
    pub fn new(elems: Vec<RepShare>, scale: u32) -> Self {
        ShareVector { elems, scale }
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elems(&self) -> &[RepShare] {
        &self.elems
    }

    pub fn into_elems(self) -> Vec<RepShare> {
        self.elems
    }

    fn check_compatible(&self, other: &ShareVector) -> Result<(), RssError> {
        if self.scale != other.scale {
            return Err(RssError::ScaleMismatch {
                left: self.scale,
                right: other.scale,
            });
        }
        if self.len() != other.len() {
            return Err(RssError::LengthMismatch {
                left: self.len(),
                right: other.len(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &ShareVector) -> Result<ShareVector, RssError> {
        self.check_compatible(other)?;
        let elems = self.elems.iter().zip(&other.elems).map(|(a, b)| *a + *b).collect();
        Ok(ShareVector::new(elems, self.scale))
    }

    pub fn sub(&self, other: &ShareVector) -> Result<ShareVector, RssError> {
        self.check_compatible(other)?;
        let elems = self.elems.iter().zip(&other.elems).map(|(a, b)| *a - *b).collect();
        Ok(ShareVector::new(elems, self.scale))
    }

    /// Multiply every element by a public integer; the scale is unchanged.
    pub fn mul_public(&self, c: RingElement) -> ShareVector {
        ShareVector::new(self.elems.iter().map(|a| *a * c).collect(), self.scale)
    }
}
