use std::collections::BTreeMap;

use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use super::preprocessing::Pools;
use super::prg::{private_rng, CorrelatedRandomness, SessionSeeds};
use super::{share, RepShare, RssError, ShareVector, TruncMode};
use crate::numeric::{decode_elements, encode_elements, FixedPointParams, RingElement};
use crate::transport::{CommStats, Network, PartyId};

/// Instrumented operation counts, per party.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct OpCounts {
    /// Elements revealed by openings.
    pub opened: u64,
    pub multiplications: u64,
    pub dot_products: u64,
    pub random_bits: u64,
    /// Truncations keyed by shift amount, both modes together.
    pub truncations: BTreeMap<u32, u64>,
    /// Sign tests keyed by input width.
    pub comparisons: BTreeMap<u32, u64>,
}

impl OpCounts {
    /// Accumulate `other` into `self`.
    pub fn add(&mut self, other: &OpCounts) -> &mut Self {
        self.opened += other.opened;
        self.multiplications += other.multiplications;
        self.dot_products += other.dot_products;
        self.random_bits += other.random_bits;
        for (k, v) in &other.truncations {
            *self.truncations.entry(*k).or_default() += v;
        }
        for (k, v) in &other.comparisons {
            *self.comparisons.entry(*k).or_default() += v;
        }
        self
    }

    /// `self` repeated `times` times.
    pub fn times(&self, times: u64) -> OpCounts {
        OpCounts {
            opened: self.opened * times,
            multiplications: self.multiplications * times,
            dot_products: self.dot_products * times,
            random_bits: self.random_bits * times,
            truncations: self.truncations.iter().map(|(k, v)| (*k, v * times)).collect(),
            comparisons: self.comparisons.iter().map(|(k, v)| (*k, v * times)).collect(),
        }
    }
}

/// One party's protocol endpoint: network, correlated randomness, and
/// preprocessed material. Single-owner; every call is a lock-step step that
/// the other two parties must mirror.
pub struct Session {
    net: Network,
    params: FixedPointParams,
    cr: CorrelatedRandomness,
    private: ChaCha12Rng,
    pub(crate) pools: Pools,
    pub(crate) counts: OpCounts,
    trunc_mode: TruncMode,
    check_opens: bool,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id())
            .field("params", &self.params)
            .field("trunc_mode", &self.trunc_mode)
            .field("counts", &self.counts)
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn new(net: Network, seeds: &SessionSeeds, params: FixedPointParams) -> Self {
        Session {
            net,
            params,
            cr: CorrelatedRandomness::new(&seeds.own, &seeds.next),
            private: private_rng(&seeds.private),
            pools: Pools::default(),
            counts: OpCounts::default(),
            trunc_mode: TruncMode::Probabilistic,
            check_opens: false,
        }
    }

    pub fn with_trunc_mode(mut self, mode: TruncMode) -> Self {
        self.trunc_mode = mode;
        self
    }

    pub fn id(&self) -> PartyId {
        self.net.id()
    }

    pub fn params(&self) -> &FixedPointParams {
        &self.params
    }

    pub fn trunc_mode(&self) -> TruncMode {
        self.trunc_mode
    }

    pub fn set_trunc_mode(&mut self, mode: TruncMode) {
        self.trunc_mode = mode;
    }

    pub fn stats(&self) -> &CommStats {
        self.net.stats()
    }

    pub fn counts(&self) -> &OpCounts {
        &self.counts
    }

    pub fn randomness_counter(&self) -> u64 {
        self.cr.counter()
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn into_network(self) -> Network {
        self.net
    }

    /// When on, openings also send the `hi` share backwards and verify that
    /// both copies of the missing share agree. Doubles opening traffic.
    pub fn set_open_check(&mut self, on: bool) {
        self.check_opens = on;
    }

    /// Sharing of a public constant: it sits in share index 0.
    pub fn public(&self, c: RingElement) -> RepShare {
        match self.id() {
            PartyId::P0 => RepShare::new(c, RingElement::ZERO),
            PartyId::P2 => RepShare::new(RingElement::ZERO, c),
            _ => RepShare::ZERO,
        }
    }

    pub fn add_public(&self, x: RepShare, c: RingElement) -> RepShare {
        x + self.public(c)
    }

    /// Free replicated sharing of a uniform unknown value.
    pub fn random_share(&mut self) -> RepShare {
        self.cr.random_share()
    }

    fn send_elems(&mut self, to: PartyId, elems: &[RingElement]) -> Result<(), RssError> {
        self.net.send(to, &encode_elements(elems))?;
        Ok(())
    }

    fn recv_elems(&mut self, from: PartyId, expected: usize) -> Result<Vec<RingElement>, RssError> {
        let payload = self.net.recv(from)?;
        match decode_elements(&payload) {
            Some(v) if v.len() == expected => Ok(v),
            _ => Err(RssError::MalformedMessage {
                from,
                expected: expected * 8,
                got: payload.len(),
            }),
        }
    }

    /// Inputs owned by `dealer`. The dealer passes `Some(values)`, the others
    /// pass `None`; every party passes the same `len`. One round.
    pub fn share_input(
        &mut self,
        dealer: PartyId,
        values: Option<&[RingElement]>,
        len: usize,
    ) -> Result<Vec<RepShare>, RssError> {
        if len == 0 {
            return Ok(Vec::new());
        }
        let me = self.id();
        if me == dealer {
            let values = values.ok_or_else(|| {
                RssError::InvalidParameter("dealer must supply input values".into())
            })?;
            if values.len() != len {
                return Err(RssError::LengthMismatch { left: values.len(), right: len });
            }
            let mut mine = Vec::with_capacity(len);
            let mut outgoing: [Vec<RingElement>; 3] = Default::default();
            for v in values {
                let shares = share(*v, &mut self.private);
                for p in me.peers() {
                    outgoing[p.index()].push(shares[p.index()].lo);
                    outgoing[p.index()].push(shares[p.index()].hi);
                }
                mine.push(shares[me.index()]);
            }
            for p in me.peers() {
                let msg = std::mem::take(&mut outgoing[p.index()]);
                self.send_elems(p, &msg)?;
            }
            self.net.mark_round();
            Ok(mine)
        } else {
            let flat = self.recv_elems(dealer, 2 * len)?;
            self.net.mark_round();
            Ok(flat.chunks_exact(2).map(|c| RepShare::new(c[0], c[1])).collect())
        }
    }

    /// Reveal every element to all parties. One round.
    pub fn open_many(&mut self, xs: &[RepShare]) -> Result<Vec<RingElement>, RssError> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let me = self.id();
        let los: Vec<RingElement> = xs.iter().map(|x| x.lo).collect();
        self.send_elems(me.next(), &los)?;
        if self.check_opens {
            let his: Vec<RingElement> = xs.iter().map(|x| x.hi).collect();
            self.send_elems(me.prev(), &his)?;
        }
        let missing = self.recv_elems(me.prev(), xs.len())?;
        if self.check_opens {
            let copy = self.recv_elems(me.next(), xs.len())?;
            if let Some(index) = missing.iter().zip(&copy).position(|(a, b)| a != b) {
                return Err(RssError::InconsistentShares { index });
            }
        }
        self.net.mark_round();
        self.counts.opened += xs.len() as u64;
        Ok(xs.iter().zip(missing).map(|(x, m)| x.lo + x.hi + m).collect())
    }

    pub fn open(&mut self, x: RepShare) -> Result<RingElement, RssError> {
        Ok(self.open_many(&[x])?[0])
    }

    /// Reshare locally computed additive terms: send ours backwards, receive
    /// the successor's. One round, one element per term.
    fn reshare(&mut self, terms: Vec<RingElement>) -> Result<Vec<RepShare>, RssError> {
        if terms.is_empty() {
            return Ok(Vec::new());
        }
        let me = self.id();
        self.send_elems(me.prev(), &terms)?;
        let theirs = self.recv_elems(me.next(), terms.len())?;
        self.net.mark_round();
        Ok(terms.into_iter().zip(theirs).map(|(a, b)| RepShare::new(a, b)).collect())
    }

    #[inline]
    fn cross(x: &RepShare, y: &RepShare) -> RingElement {
        x.lo * y.lo + x.lo * y.hi + x.hi * y.lo
    }

    /// Elementwise products at the sum of the input scales. One round.
    pub fn mul_many(&mut self, xs: &[RepShare], ys: &[RepShare]) -> Result<Vec<RepShare>, RssError> {
        if xs.len() != ys.len() {
            return Err(RssError::LengthMismatch { left: xs.len(), right: ys.len() });
        }
        let terms = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| Self::cross(x, y) + self.cr.zero_share())
            .collect();
        self.counts.multiplications += xs.len() as u64;
        self.reshare(terms)
    }

    pub fn mul(&mut self, x: RepShare, y: RepShare) -> Result<RepShare, RssError> {
        Ok(self.mul_many(&[x], &[y])?[0])
    }

    /// Several inner products in one round, one element each regardless of
    /// length.
    pub fn dot_many(&mut self, pairs: &[(&[RepShare], &[RepShare])]) -> Result<Vec<RepShare>, RssError> {
        let mut terms = Vec::with_capacity(pairs.len());
        for (xs, ys) in pairs {
            if xs.len() != ys.len() {
                return Err(RssError::LengthMismatch { left: xs.len(), right: ys.len() });
            }
            let acc: RingElement = xs.iter().zip(ys.iter()).map(|(x, y)| Self::cross(x, y)).sum();
            terms.push(acc + self.cr.zero_share());
        }
        self.counts.dot_products += pairs.len() as u64;
        self.reshare(terms)
    }

    pub fn dot(&mut self, xs: &[RepShare], ys: &[RepShare]) -> Result<RepShare, RssError> {
        if xs.is_empty() {
            return Err(RssError::InvalidParameter("dot product of empty vectors".into()));
        }
        Ok(self.dot_many(&[(xs, ys)])?[0])
    }

    /// Shared uniform bits in {0, 1} at integer scale. Two rounds for any
    /// count: each party contributes the bit it shares with one neighbour and
    /// the three are combined by XOR.
    pub fn random_bits(&mut self, count: usize) -> Result<Vec<RepShare>, RssError> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let me = self.id();
        let words = count.div_ceil(64);
        let mut own_bits = Vec::with_capacity(words);
        let mut next_bits = Vec::with_capacity(words);
        for _ in 0..words {
            let (a, b) = self.cr.raw_words();
            own_bits.push(a);
            next_bits.push(b);
        }
        let bit = |w: &[u64], j: usize| RingElement((w[j / 64] >> (j % 64)) & 1);
        // the contribution of stream k is a sharing with s_k = t_k
        let contribution = |k: PartyId, j: usize| -> RepShare {
            if k == me {
                RepShare::new(bit(&own_bits, j), RingElement::ZERO)
            } else if k == me.next() {
                RepShare::new(RingElement::ZERO, bit(&next_bits, j))
            } else {
                RepShare::ZERO
            }
        };
        let t0: Vec<RepShare> = (0..count).map(|j| contribution(PartyId::P0, j)).collect();
        let t1: Vec<RepShare> = (0..count).map(|j| contribution(PartyId::P1, j)).collect();
        let t2: Vec<RepShare> = (0..count).map(|j| contribution(PartyId::P2, j)).collect();
        let two = RingElement(2);
        let p01 = self.mul_many(&t0, &t1)?;
        let u: Vec<RepShare> = (0..count).map(|j| t0[j] + t1[j] - p01[j] * two).collect();
        let pu2 = self.mul_many(&u, &t2)?;
        self.counts.random_bits += count as u64;
        Ok((0..count).map(|j| u[j] + t2[j] - pu2[j] * two).collect())
    }

    pub fn open_vec(&mut self, xs: &ShareVector) -> Result<Vec<RingElement>, RssError> {
        self.open_many(xs.elems())
    }

    pub fn mul_vec(&mut self, xs: &ShareVector, ys: &ShareVector) -> Result<ShareVector, RssError> {
        if xs.len() != ys.len() {
            return Err(RssError::LengthMismatch { left: xs.len(), right: ys.len() });
        }
        let out = self.mul_many(xs.elems(), ys.elems())?;
        Ok(ShareVector::new(out, xs.scale() + ys.scale()))
    }

    pub fn dot_vec(&mut self, xs: &ShareVector, ys: &ShareVector) -> Result<ShareVector, RssError> {
        let out = self.dot(xs.elems(), ys.elems())?;
        Ok(ShareVector::new(vec![out], xs.scale() + ys.scale()))
    }

    /// Encode reals (dealer only) and share them at scale f.
    pub fn share_fixed(
        &mut self,
        dealer: PartyId,
        values: Option<&[f64]>,
        len: usize,
    ) -> Result<ShareVector, RssError> {
        let encoded = match values {
            Some(v) if self.id() == dealer => Some(
                v.iter()
                    .map(|x| self.params.encode(*x))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            _ => None,
        };
        let elems = self.share_input(dealer, encoded.as_deref(), len)?;
        Ok(ShareVector::new(elems, self.params.frac_bits()))
    }
}
