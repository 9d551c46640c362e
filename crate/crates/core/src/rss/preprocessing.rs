//! Input-independent masks for truncation and sign tests, generated in a
//! batch ahead of the online phase and consumed in FIFO order.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{OpCounts, RepShare, RssError, Session};
use crate::numeric::{RingElement, RING_BITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruncMode {
    /// Deterministic round-half-up.
    Exact,
    /// Floor or floor + 1, unbiased.
    Probabilistic,
}

impl std::fmt::Display for TruncMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TruncMode::Exact => "exact",
            TruncMode::Probabilistic => "probabilistic",
        })
    }
}

impl std::str::FromStr for TruncMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(TruncMode::Exact),
            "probabilistic" | "prob" => Ok(TruncMode::Probabilistic),
            other => Err(format!("unknown truncation mode {other:?}")),
        }
    }
}

/// Mask for truncating by `bits`.
///
/// `r_big` shares r = sum 2^j b_j over 64 random bits, `r_small` shares
/// floor(r / 2^bits), `msb` shares b_63. Exact pairs also carry the low bits
/// b_0..b_{bits-1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncPair {
    pub bits: u32,
    pub r_big: RepShare,
    pub r_small: RepShare,
    pub msb: RepShare,
    pub low_bits: Vec<RepShare>,
}

/// Mask for a sign test of width K: bits b_0..b_K and
/// r = sum_{j<=K} 2^j b_j + 2^(K+1) R with R uniform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompareMask {
    pub width: u32,
    pub r: RepShare,
    pub bits: Vec<RepShare>,
}

/// Cost of one truncation batch, in communication rounds and multiplications
/// per element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TruncCost {
    pub preprocessing_rounds: u32,
    pub online_rounds: u32,
    pub preprocessing_multiplications: u32,
    pub online_multiplications: u32,
}

impl TruncCost {
    pub fn total_rounds(&self) -> u32 {
        self.preprocessing_rounds + self.online_rounds
    }
}

/// Rounds of the bitwise less-than on `bits` public/secret bit pairs.
pub(crate) fn lt_rounds(bits: u32) -> u32 {
    if bits <= 1 {
        0
    } else {
        scan_stages(bits - 1) + 1
    }
}

/// Multiplications (dot products counted as one) of the bitwise less-than.
pub(crate) fn lt_multiplications(bits: u32) -> u32 {
    if bits <= 1 {
        return 0;
    }
    let len = bits - 1;
    let mut muls = 0;
    let mut offset = 1;
    while offset < len {
        muls += len - offset;
        offset *= 2;
    }
    muls + 1
}

/// ceil(log2(len)) doubling stages of a prefix scan over `len` items.
pub(crate) fn scan_stages(len: u32) -> u32 {
    if len <= 1 {
        0
    } else {
        32 - (len - 1).leading_zeros()
    }
}

impl TruncMode {
    pub fn cost(self, bits: u32) -> TruncCost {
        let pre = TruncCost {
            preprocessing_rounds: 2,
            online_rounds: 1,
            preprocessing_multiplications: 2 * RING_BITS,
            online_multiplications: 0,
        };
        match self {
            TruncMode::Probabilistic => pre,
            TruncMode::Exact => TruncCost {
                online_rounds: 1 + lt_rounds(bits),
                online_multiplications: lt_multiplications(bits),
                ..pre
            },
        }
    }
}

/// Counts of masks needed by a computation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PreprocessingBudget {
    pub trunc: BTreeMap<(TruncMode, u32), usize>,
    pub compare: BTreeMap<u32, usize>,
}

impl PreprocessingBudget {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_trunc(&mut self, mode: TruncMode, bits: u32, count: usize) -> &mut Self {
        if count > 0 {
            *self.trunc.entry((mode, bits)).or_default() += count;
        }
        self
    }

    pub fn add_compare(&mut self, width: u32, count: usize) -> &mut Self {
        if count > 0 {
            *self.compare.entry(width).or_default() += count;
        }
        self
    }

    pub fn merge(&mut self, other: &PreprocessingBudget) -> &mut Self {
        for (k, v) in &other.trunc {
            *self.trunc.entry(*k).or_default() += v;
        }
        for (k, v) in &other.compare {
            *self.compare.entry(*k).or_default() += v;
        }
        self
    }

    /// `self` repeated `times` times.
    pub fn times(&self, times: usize) -> PreprocessingBudget {
        PreprocessingBudget {
            trunc: self.trunc.iter().map(|(k, v)| (*k, v * times)).collect(),
            compare: self.compare.iter().map(|(k, v)| (*k, v * times)).collect(),
        }
    }

    pub fn total_truncations(&self) -> usize {
        self.trunc.values().sum()
    }

    pub fn total_comparisons(&self) -> usize {
        self.compare.values().sum()
    }

    /// Random shared bits needed to produce all masks.
    pub fn random_bits(&self) -> usize {
        let t: usize = self.trunc.values().map(|c| c * RING_BITS as usize).sum();
        let c: usize = self.compare.iter().map(|(w, c)| c * (*w as usize + 1)).sum();
        t + c
    }

    pub fn is_empty(&self) -> bool {
        self.trunc.is_empty() && self.compare.is_empty()
    }

    /// Operations performed by [`Session::preprocess`] on this budget.
    pub fn generation_counts(&self) -> OpCounts {
        let bits = self.random_bits() as u64;
        OpCounts { random_bits: bits, multiplications: 2 * bits, ..Default::default() }
    }

    /// Operations performed when every mask in this budget is consumed.
    pub fn consumption_counts(&self) -> OpCounts {
        let mut c = OpCounts::default();
        let lt = |c: &mut OpCounts, bits: u32, count: u64| {
            if bits >= 2 {
                c.multiplications += count * (lt_multiplications(bits) as u64 - 1);
                c.dot_products += count;
            }
        };
        for (&(mode, bits), &count) in &self.trunc {
            let count = count as u64;
            c.opened += count;
            *c.truncations.entry(bits).or_default() += count;
            if mode == TruncMode::Exact {
                lt(&mut c, bits, count);
            }
        }
        for (&width, &count) in &self.compare {
            let count = count as u64;
            c.opened += count;
            c.multiplications += count;
            *c.comparisons.entry(width).or_default() += count;
            lt(&mut c, width, count);
        }
        c
    }
}

#[derive(Debug, Default)]
pub(crate) struct Pools {
    trunc: BTreeMap<(TruncMode, u32), VecDeque<TruncPair>>,
    compare: BTreeMap<u32, VecDeque<CompareMask>>,
}

impl Pools {
    pub(crate) fn take_trunc(
        &mut self,
        mode: TruncMode,
        bits: u32,
        count: usize,
    ) -> Result<Vec<TruncPair>, RssError> {
        let pool = self.trunc.entry((mode, bits)).or_default();
        if pool.len() < count {
            return Err(RssError::PoolExhausted {
                kind: format!("{mode} truncation by {bits} bits"),
                requested: count,
                available: pool.len(),
            });
        }
        Ok(pool.drain(..count).collect())
    }

    pub(crate) fn take_compare(&mut self, width: u32, count: usize) -> Result<Vec<CompareMask>, RssError> {
        let pool = self.compare.entry(width).or_default();
        if pool.len() < count {
            return Err(RssError::PoolExhausted {
                kind: format!("sign test of width {width}"),
                requested: count,
                available: pool.len(),
            });
        }
        Ok(pool.drain(..count).collect())
    }

    fn remaining(&self) -> PreprocessingBudget {
        PreprocessingBudget {
            trunc: self
                .trunc
                .iter()
                .filter(|(_, v)| !v.is_empty())
                .map(|(k, v)| (*k, v.len()))
                .collect(),
            compare: self
                .compare
                .iter()
                .filter(|(_, v)| !v.is_empty())
                .map(|(k, v)| (*k, v.len()))
                .collect(),
        }
    }
}

fn weighted_sum(bits: &[RepShare]) -> RepShare {
    bits.iter()
        .enumerate()
        .map(|(j, b)| *b * RingElement::pow2(j as u32))
        .sum()
}

fn check_trunc_bits(bits: u32) -> Result<(), RssError> {
    if !(1..=60).contains(&bits) {
        return Err(RssError::InvalidParameter(format!(
            "truncation shift {bits} outside 1..=60"
        )));
    }
    Ok(())
}

pub(crate) fn check_width(width: u32) -> Result<(), RssError> {
    if !(1..=62).contains(&width) {
        return Err(RssError::InvalidParameter(format!(
            "comparison width {width} outside 1..=62"
        )));
    }
    Ok(())
}

impl Session {
    fn build_trunc_pair(mode: TruncMode, bits: u32, rb: &[RepShare]) -> TruncPair {
        TruncPair {
            bits,
            r_big: weighted_sum(rb),
            r_small: weighted_sum(&rb[bits as usize..]),
            msb: rb[RING_BITS as usize - 1],
            low_bits: match mode {
                TruncMode::Exact => rb[..bits as usize].to_vec(),
                TruncMode::Probabilistic => Vec::new(),
            },
        }
    }

    /// Produce `count` truncation masks without adding them to the pool.
    pub fn generate_trunc_pairs(
        &mut self,
        count: usize,
        bits: u32,
        mode: TruncMode,
    ) -> Result<Vec<TruncPair>, RssError> {
        check_trunc_bits(bits)?;
        let rb = self.random_bits(count * RING_BITS as usize)?;
        Ok(rb
            .chunks_exact(RING_BITS as usize)
            .map(|c| Self::build_trunc_pair(mode, bits, c))
            .collect())
    }

    /// Produce `count` sign-test masks without adding them to the pool.
    pub fn generate_compare_masks(&mut self, count: usize, width: u32) -> Result<Vec<CompareMask>, RssError> {
        check_width(width)?;
        let per = width as usize + 1;
        let rb = self.random_bits(count * per)?;
        Ok(rb.chunks_exact(per).map(|c| self.build_compare_mask(width, c)).collect())
    }

    fn build_compare_mask(&mut self, width: u32, bits: &[RepShare]) -> CompareMask {
        let high = self.random_share() * RingElement::pow2(width + 1);
        CompareMask {
            width,
            r: weighted_sum(bits) + high,
            bits: bits.to_vec(),
        }
    }

    /// Generate everything in `budget` with one batch of random bits (two
    /// rounds) and append it to the pools.
    pub fn preprocess(&mut self, budget: &PreprocessingBudget) -> Result<(), RssError> {
        for (_, bits) in budget.trunc.keys() {
            check_trunc_bits(*bits)?;
        }
        for w in budget.compare.keys() {
            check_width(*w)?;
        }
        let rb = self.random_bits(budget.random_bits())?;
        let mut cursor = 0usize;
        for (&(mode, bits), &count) in &budget.trunc {
            let pool = self.pools.trunc.entry((mode, bits)).or_default();
            for _ in 0..count {
                let chunk = &rb[cursor..cursor + RING_BITS as usize];
                pool.push_back(Self::build_trunc_pair(mode, bits, chunk));
                cursor += RING_BITS as usize;
            }
        }
        for (&width, &count) in &budget.compare {
            let per = width as usize + 1;
            let mut masks = Vec::with_capacity(count);
            for _ in 0..count {
                masks.push(self.build_compare_mask(width, &rb[cursor..cursor + per]));
                cursor += per;
            }
            self.pools.compare.entry(width).or_default().extend(masks);
        }
        debug_assert_eq!(cursor, rb.len());
        Ok(())
    }

    /// Masks still unused.
    pub fn pool_remaining(&self) -> PreprocessingBudget {
        self.pools.remaining()
    }

    /// Add externally generated pairs to the pool.
    pub fn add_trunc_pairs(&mut self, mode: TruncMode, pairs: Vec<TruncPair>) {
        for p in pairs {
            self.pools.trunc.entry((mode, p.bits)).or_default().push_back(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rss::run_sessions;

    #[test]
    fn cost_metric_orders_modes() {
        let e = TruncMode::Exact.cost(16);
        let p = TruncMode::Probabilistic.cost(16);
        assert_eq!(p.online_rounds, 1);
        assert_eq!(e.online_rounds, 1 + 4 + 1);
        assert!(p.total_rounds() < e.total_rounds());
        assert!(p.online_multiplications < e.online_multiplications);
        assert_eq!(lt_multiplications(16), (14 + 13 + 11 + 7) + 1);
        assert_eq!(scan_stages(1), 0);
        assert_eq!(scan_stages(2), 1);
        assert_eq!(scan_stages(15), 4);
        assert_eq!(scan_stages(16), 4);
        assert_eq!(scan_stages(17), 5);
    }

    #[test]
    fn generated_pairs_satisfy_the_invariant() {
        for mode in [TruncMode::Exact, TruncMode::Probabilistic] {
            let out = run_sessions(21, |s| {
                let pairs = s.generate_trunc_pairs(50, 16, mode)?;
                let mut flat = Vec::new();
                for p in &pairs {
                    flat.extend([p.r_big, p.r_small, p.msb]);
                    flat.extend(&p.low_bits);
                }
                s.open_many(&flat)
            })
            .unwrap();
            let per = 3 + if mode == TruncMode::Exact { 16 } else { 0 };
            for chunk in out[0].chunks_exact(per) {
                let r = chunk[0].0;
                assert_eq!(chunk[1].0, r >> 16);
                assert_eq!(chunk[2].0, r >> 63);
                for (j, b) in chunk[3..].iter().enumerate() {
                    assert_eq!(b.0, (r >> j) & 1);
                }
            }
        }
    }

    #[test]
    fn zero_pairs_cost_nothing() {
        let out = run_sessions(22, |s| {
            let pairs = s.generate_trunc_pairs(0, 16, TruncMode::Exact)?;
            Ok((pairs.len(), *s.stats()))
        })
        .unwrap();
        for (n, stats) in out {
            assert_eq!(n, 0);
            assert_eq!(stats.messages_sent(), 0);
        }
    }

    #[test]
    fn pools_are_consumed_in_lockstep() {
        let out = run_sessions(23, |s| {
            let mut budget = PreprocessingBudget::new();
            budget.add_trunc(TruncMode::Probabilistic, 16, 5).add_compare(20, 3);
            s.preprocess(&budget)?;
            s.pools.take_trunc(TruncMode::Probabilistic, 16, 2)?;
            s.pools.take_compare(20, 3)?;
            let err = s.pools.take_compare(20, 1).unwrap_err();
            assert!(matches!(err, RssError::PoolExhausted { .. }));
            Ok((s.pool_remaining(), s.randomness_counter()))
        })
        .unwrap();
        assert!(out.iter().all(|o| o == &out[0]));
        assert_eq!(out[0].0.trunc[&(TruncMode::Probabilistic, 16)], 3);
        assert!(out[0].0.compare.is_empty());
    }
}
