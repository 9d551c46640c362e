//! Truncation by a masked opening.
//!
//! With z = x + 2^61 (+ 2^(m-1) for rounding) in [0, 2^62) and c = z + r
//! opened, floor(z / 2^m) = (c >> m) - (r >> m) - [c mod 2^m < r mod 2^m]
//! + 2^(64-m) [z + r wrapped]. The wrap happened iff c < 2^62 and r's top bit
//! is set. The exact mode computes the borrow bracket; the probabilistic mode
//! drops it, which adds one with probability (z mod 2^m) / 2^m.

use super::{RepShare, RssError, Session, ShareVector, TruncMode};
use crate::numeric::RingElement;

/// Inputs must satisfy |x| < 2^61 - 2^(m-1).
pub const TRUNC_INPUT_BITS: u32 = 61;

impl Session {
    /// Truncate every element by `bits` with the session's mode.
    pub fn trunc_many(&mut self, xs: &[RepShare], bits: u32) -> Result<Vec<RepShare>, RssError> {
        let mode = self.trunc_mode();
        self.trunc_many_with(xs, bits, mode)
    }

    pub fn trunc_many_with(
        &mut self,
        xs: &[RepShare],
        bits: u32,
        mode: TruncMode,
    ) -> Result<Vec<RepShare>, RssError> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let pairs = self.pools.take_trunc(mode, bits, xs.len())?;
        let mut offset = RingElement::pow2(TRUNC_INPUT_BITS);
        if mode == TruncMode::Exact {
            offset += RingElement::pow2(bits - 1);
        }
        let masked: Vec<RepShare> = xs
            .iter()
            .zip(&pairs)
            .map(|(x, p)| self.add_public(*x + p.r_big, offset))
            .collect();
        let opened = self.open_many(&masked)?;
        let borrow = match mode {
            TruncMode::Exact => {
                let low_mask = (1u64 << bits) - 1;
                let cs: Vec<u64> = opened.iter().map(|c| c.0 & low_mask).collect();
                let refs: Vec<&[RepShare]> = pairs.iter().map(|p| &p.low_bits[..]).collect();
                self.lt_public_bits(&cs, &refs, bits)?
            }
            TruncMode::Probabilistic => vec![RepShare::ZERO; xs.len()],
        };
        let wrap_weight = RingElement::pow2(64 - bits);
        let unshift = RingElement::pow2(TRUNC_INPUT_BITS - bits);
        let out = opened
            .iter()
            .zip(pairs.iter().zip(&borrow))
            .map(|(c, (p, b))| {
                let wrapped = if c.0 < (1u64 << 62) { p.msb * wrap_weight } else { RepShare::ZERO };
                let public = RingElement(c.0 >> bits) - unshift;
                self.add_public(wrapped - p.r_small - *b, public)
            })
            .collect();
        *self.counts.truncations.entry(bits).or_default() += xs.len() as u64;
        Ok(out)
    }

    pub fn trunc(&mut self, x: RepShare, bits: u32) -> Result<RepShare, RssError> {
        Ok(self.trunc_many(&[x], bits)?[0])
    }

    /// Rescale by `bits` with the session's mode.
    pub fn trunc_vec(&mut self, x: &ShareVector, bits: u32) -> Result<ShareVector, RssError> {
        if bits > x.scale() {
            return Err(RssError::InvalidParameter(format!(
                "cannot drop {bits} bits from a value at scale {}",
                x.scale()
            )));
        }
        let out = self.trunc_many(x.elems(), bits)?;
        Ok(ShareVector::new(out, x.scale() - bits))
    }

    /// Exact rescaling from 2f to f.
    pub fn trunc_exact(&mut self, x: &ShareVector) -> Result<ShareVector, RssError> {
        self.trunc_fixed(x, TruncMode::Exact)
    }

    /// Probabilistic rescaling from 2f to f.
    pub fn trunc_prob(&mut self, x: &ShareVector) -> Result<ShareVector, RssError> {
        self.trunc_fixed(x, TruncMode::Probabilistic)
    }

    fn trunc_fixed(&mut self, x: &ShareVector, mode: TruncMode) -> Result<ShareVector, RssError> {
        let f = self.params().frac_bits();
        if x.scale() != 2 * f {
            return Err(RssError::ScaleMismatch { left: x.scale(), right: 2 * f });
        }
        let out = self.trunc_many_with(x.elems(), f, mode)?;
        Ok(ShareVector::new(out, f))
    }
}
