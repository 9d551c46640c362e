use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::RepShare;
use crate::numeric::RingElement;
use crate::transport::PartyId;

/// 128-bit PRG seed.
pub type Seed = [u8; 16];

fn rng_from(seed: &Seed) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..16].copy_from_slice(seed);
    ChaCha12Rng::from_seed(key)
}

/// Two keyed streams: `own` is shared with the predecessor, `next` with the
/// successor. Every draw advances both streams by one word, so the counter is
/// the same at all parties as long as they follow the same schedule.
pub struct CorrelatedRandomness {
    own: ChaCha12Rng,
    next: ChaCha12Rng,
    counter: u64,
}

impl std::fmt::Debug for CorrelatedRandomness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CorrelatedRandomness")
            .field("counter", &self.counter)
            .finish_non_exhaustive()
    }
}

impl CorrelatedRandomness {
    pub fn new(seed_own: &Seed, seed_next: &Seed) -> Self {
        CorrelatedRandomness {
            own: rng_from(seed_own),
            next: rng_from(seed_next),
            counter: 0,
        }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    fn draw(&mut self) -> (u64, u64) {
        self.counter += 1;
        (self.own.next_u64(), self.next.next_u64())
    }

    /// alpha_i with alpha_0 + alpha_1 + alpha_2 = 0.
    #[inline]
    pub fn zero_share(&mut self) -> RingElement {
        let (a, b) = self.draw();
        RingElement(a.wrapping_sub(b))
    }

    /// Replicated sharing of a uniform ring element nobody knows.
    #[inline]
    pub fn random_share(&mut self) -> RepShare {
        let (a, b) = self.draw();
        RepShare::new(RingElement(a), RingElement(b))
    }

    /// One raw word from each stream.
    #[inline]
    pub fn raw_words(&mut self) -> (u64, u64) {
        self.draw()
    }
}

/// Everything a party needs to seed its randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSeeds {
    pub own: Seed,
    pub next: Seed,
    /// Private randomness, used when this party deals input shares.
    pub private: Seed,
}

/// Deterministic seeds for all three parties from one master value.
pub fn derive_session_seeds(master: u64) -> [SessionSeeds; 3] {
    let mut rng = ChaCha12Rng::seed_from_u64(master);
    let mut draw = || {
        let mut s = [0u8; 16];
        rng.fill_bytes(&mut s);
        s
    };
    let streams = [draw(), draw(), draw()];
    let privates = [draw(), draw(), draw()];
    PartyId::ALL.map(|p| SessionSeeds {
        own: streams[p.index()],
        next: streams[p.next().index()],
        private: privates[p.index()],
    })
}

/// Seeds for an independent sub-session. Consistent inputs forked with the
/// same label stay consistent across parties.
pub fn fork_seeds(seeds: &SessionSeeds, label: u64) -> SessionSeeds {
    let fork = |seed: &Seed| {
        let mut key = [0u8; 32];
        key[..16].copy_from_slice(seed);
        key[16..24].copy_from_slice(&label.to_le_bytes());
        key[24] = 1;
        let mut out = [0u8; 16];
        ChaCha12Rng::from_seed(key).fill_bytes(&mut out);
        out
    };
    SessionSeeds { own: fork(&seeds.own), next: fork(&seeds.next), private: fork(&seeds.private) }
}

/// Fresh seeds from the operating system.
pub fn random_seed() -> Seed {
    let mut s = [0u8; 16];
    rand::rngs::OsRng.fill_bytes(&mut s);
    s
}

pub(crate) fn private_rng(seed: &Seed) -> ChaCha12Rng {
    rng_from(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trio(master: u64) -> [CorrelatedRandomness; 3] {
        derive_session_seeds(master).map(|s| CorrelatedRandomness::new(&s.own, &s.next))
    }

    #[test]
    fn zero_shares_telescope() {
        let mut cr = trio(11);
        for _ in 0..10_000 {
            let sum = cr[0].zero_share() + cr[1].zero_share() + cr[2].zero_share();
            assert_eq!(sum, RingElement::ZERO);
        }
        assert!(cr.iter().all(|c| c.counter() == 10_000));
    }

    #[test]
    fn random_shares_are_replicated() {
        let mut cr = trio(12);
        for _ in 0..100 {
            let s: Vec<RepShare> = cr.iter_mut().map(|c| c.random_share()).collect();
            for i in 0..3 {
                assert_eq!(s[i].hi, s[(i + 1) % 3].lo);
            }
        }
    }

    #[test]
    fn seeds_are_paired_around_the_ring() {
        let seeds = derive_session_seeds(3);
        for p in PartyId::ALL {
            assert_eq!(seeds[p.index()].next, seeds[p.next().index()].own);
        }
        assert_ne!(seeds[0].own, seeds[1].own);
    }
}
