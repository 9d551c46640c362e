//! Sign tests over shares: a masked opening followed by a bitwise
//! comparison of the public value against the mask's shared bits.

use super::preprocessing::check_width;
use super::{RepShare, RssError, Session};
use crate::numeric::RingElement;

impl Session {
    /// [c < b] for each public `c` and secret `b` given as `nbits` shared bits
    /// (least significant first). Only the low `nbits` bits of `c` are read.
    ///
    /// Suffix products of the per-bit equality indicators are formed by a
    /// doubling scan, then the first differing position is selected with one
    /// dot product.
    pub(crate) fn lt_public_bits(
        &mut self,
        cs: &[u64],
        bits: &[&[RepShare]],
        nbits: u32,
    ) -> Result<Vec<RepShare>, RssError> {
        let m = nbits as usize;
        let n = cs.len();
        if m == 0 || n == 0 {
            return Ok(vec![RepShare::ZERO; n]);
        }
        let one = self.public(RingElement::ONE);
        let len = m - 1;
        // eq[i][t] covers bit t + 1
        let mut eq: Vec<Vec<RepShare>> = cs
            .iter()
            .zip(bits)
            .map(|(c, b)| {
                (1..m)
                    .map(|j| if (c >> j) & 1 == 1 { b[j] } else { one - b[j] })
                    .collect()
            })
            .collect();
        let mut offset = 1;
        while offset < len {
            let span = len - offset;
            let mut left = Vec::with_capacity(n * span);
            let mut right = Vec::with_capacity(n * span);
            for row in &eq {
                left.extend_from_slice(&row[..span]);
                right.extend_from_slice(&row[offset..]);
            }
            let prod = self.mul_many(&left, &right)?;
            for (row, chunk) in eq.iter_mut().zip(prod.chunks_exact(span)) {
                row[..span].copy_from_slice(chunk);
            }
            offset *= 2;
        }
        // eq[i][j] is now the product over bits j+1..m-1
        let mut out: Vec<RepShare> = cs
            .iter()
            .zip(bits)
            .map(|(c, b)| if (c >> (m - 1)) & 1 == 0 { b[m - 1] } else { RepShare::ZERO })
            .collect();
        if len > 0 {
            let mut lhs: Vec<Vec<RepShare>> = Vec::with_capacity(n);
            let mut rhs: Vec<Vec<RepShare>> = Vec::with_capacity(n);
            for ((c, b), row) in cs.iter().zip(bits).zip(&eq) {
                let sel: Vec<usize> = (0..len).filter(|j| (c >> j) & 1 == 0).collect();
                lhs.push(sel.iter().map(|j| b[*j]).collect());
                rhs.push(sel.iter().map(|j| row[*j]).collect());
            }
            let pairs: Vec<(&[RepShare], &[RepShare])> =
                lhs.iter().zip(&rhs).map(|(a, b)| (&a[..], &b[..])).collect();
            let dots = self.dot_many(&pairs)?;
            for (o, d) in out.iter_mut().zip(dots) {
                *o += d;
            }
        }
        Ok(out)
    }

    /// Shares of [x < 0] for inputs with -2^width <= x < 2^width.
    pub fn ltz_many(&mut self, xs: &[RepShare], width: u32) -> Result<Vec<RepShare>, RssError> {
        check_width(width)?;
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let masks = self.pools.take_compare(width, xs.len())?;
        let offset = RingElement::pow2(width);
        let masked: Vec<RepShare> = xs
            .iter()
            .zip(&masks)
            .map(|(x, m)| self.add_public(*x + m.r, offset))
            .collect();
        let opened = self.open_many(&masked)?;
        let low_mask = (1u64 << width) - 1;
        let cs: Vec<u64> = opened.iter().map(|c| c.0 & low_mask).collect();
        let bit_refs: Vec<&[RepShare]> = masks.iter().map(|m| &m.bits[..width as usize]).collect();
        let borrow = self.lt_public_bits(&cs, &bit_refs, width)?;
        let tops: Vec<RepShare> = masks.iter().map(|m| m.bits[width as usize]).collect();
        let both = self.mul_many(&tops, &borrow)?;
        let one = self.public(RingElement::ONE);
        let two = RingElement(2);
        let out = opened
            .iter()
            .zip(tops.iter().zip(&borrow).zip(&both))
            .map(|(c, ((t, b), tb))| {
                let v = *t + *b - *tb * two;
                let bit = if c.bit(width) { one - v } else { v };
                one - bit
            })
            .collect();
        *self.counts.comparisons.entry(width).or_default() += xs.len() as u64;
        Ok(out)
    }

    pub fn ltz(&mut self, x: RepShare, width: u32) -> Result<RepShare, RssError> {
        Ok(self.ltz_many(&[x], width)?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rss::{run_sessions, PreprocessingBudget};
    use proptest::prelude::*;

    fn run_lt(cs: Vec<u64>, bs: Vec<u64>, nbits: u32) -> Vec<u64> {
        let out = run_sessions(31, |s| {
            let mut flat = Vec::new();
            for b in &bs {
                for j in 0..nbits {
                    flat.push(s.public(RingElement((b >> j) & 1)));
                }
            }
            let rows: Vec<&[RepShare]> = flat.chunks_exact(nbits.max(1) as usize).collect();
            let lt = s.lt_public_bits(&cs, &rows, nbits)?;
            s.open_many(&lt)
        })
        .unwrap();
        out[0].iter().map(|e| e.0).collect()
    }

    #[test]
    fn bitwise_less_than_exhaustive_small() {
        for nbits in 1..=4u32 {
            let mut cs = Vec::new();
            let mut bs = Vec::new();
            for c in 0..(1u64 << nbits) {
                for b in 0..(1u64 << nbits) {
                    cs.push(c);
                    bs.push(b);
                }
            }
            let got = run_lt(cs.clone(), bs.clone(), nbits);
            for ((c, b), g) in cs.iter().zip(&bs).zip(got) {
                assert_eq!(g, (c < b) as u64, "nbits {nbits} c {c} b {b}");
            }
        }
    }

    #[test]
    fn sign_test_at_boundaries() {
        let width = 20u32;
        let vals: Vec<i64> = vec![0, -1, 1, -(1 << 20), (1 << 20) - 1, -5, 5, 123_456, -123_456];
        let out = run_sessions(32, |s| {
            let mut budget = PreprocessingBudget::new();
            budget.add_compare(width, vals.len());
            s.preprocess(&budget)?;
            let xs: Vec<RepShare> = vals.iter().map(|v| s.public(RingElement::from_signed(*v))).collect();
            let r = s.ltz_many(&xs, width)?;
            s.open_many(&r)
        })
        .unwrap();
        for (v, got) in vals.iter().zip(&out[0]) {
            assert_eq!(got.0, (*v < 0) as u64, "value {v}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn bitwise_less_than_random(pairs in proptest::collection::vec((any::<u64>(), any::<u64>()), 1..40), nbits in 1u32..=62) {
            let mask = (1u64 << nbits) - 1;
            let cs: Vec<u64> = pairs.iter().map(|p| p.0 & mask).collect();
            let bs: Vec<u64> = pairs.iter().map(|p| p.1 & mask).collect();
            let got = run_lt(cs.clone(), bs.clone(), nbits);
            for ((c, b), g) in cs.iter().zip(&bs).zip(got) {
                prop_assert_eq!(g, (c < b) as u64);
            }
        }

        #[test]
        fn sign_test_random(vals in proptest::collection::vec(-(1i64 << 60)..(1i64 << 60), 1..30)) {
            let out = run_sessions(33, |s| {
                let mut budget = PreprocessingBudget::new();
                budget.add_compare(61, vals.len());
                s.preprocess(&budget)?;
                let xs: Vec<RepShare> = vals.iter().map(|v| s.public(RingElement::from_signed(*v))).collect();
                let r = s.ltz_many(&xs, 61)?;
                s.open_many(&r)
            })
            .unwrap();
            for (v, got) in vals.iter().zip(&out[0]) {
                prop_assert_eq!(got.0, (*v < 0) as u64);
            }
        }
    }
}
