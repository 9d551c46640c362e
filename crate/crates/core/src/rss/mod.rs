//! Replicated 2-of-3 secret sharing over Z_{2^64} and the semi-honest
//! protocols built on it.
//!
//! Wire payloads are concatenated little-endian ring elements.

mod compare;
mod preprocessing;
mod prg;
mod session;
mod share;
mod trunc;

use thiserror::Error;

pub use preprocessing::{CompareMask, PreprocessingBudget, TruncCost, TruncMode, TruncPair};
pub use prg::{derive_session_seeds, fork_seeds, random_seed, CorrelatedRandomness, Seed, SessionSeeds};
pub use session::{OpCounts, Session};
pub use share::{reconstruct, share, RepShare, ShareVector};
pub use trunc::TRUNC_INPUT_BITS;

use crate::numeric::{FixedPointParams, NumericError};
use crate::transport::{loopback_networks, run_trio, PartyId, TransportError, TrioError};

#[derive(Debug, Error)]
pub enum RssError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("scale mismatch: {left} vs {right} fractional bits")]
    ScaleMismatch { left: u32, right: u32 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("preprocessing pool exhausted for {kind}: requested {requested}, available {available}; run preprocessing first")]
    PoolExhausted {
        kind: String,
        requested: usize,
        available: usize,
    },
    #[error("inconsistent replicated shares at element {index}")]
    InconsistentShares { index: usize },
    #[error("malformed message from party {from}: expected {expected} bytes, got {got}")]
    MalformedMessage {
        from: PartyId,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Three sessions over fresh loopback networks with seeds derived from
/// `master_seed`.
pub fn loopback_sessions(
    master_seed: u64,
    params: FixedPointParams,
    mode: TruncMode,
) -> [Session; 3] {
    let seeds = derive_session_seeds(master_seed);
    let nets = loopback_networks();
    let mut i = 0;
    nets.map(|net| {
        let s = Session::new(net, &seeds[i], params).with_trunc_mode(mode);
        i += 1;
        s
    })
}

/// Run `body` at all three parties concurrently over loopback.
pub fn run_sessions_with<T, F>(
    master_seed: u64,
    params: FixedPointParams,
    mode: TruncMode,
    body: F,
) -> Result<[T; 3], TrioError<RssError>>
where
    T: Send,
    F: Fn(&mut Session) -> Result<T, RssError> + Sync,
{
    run_trio(loopback_sessions(master_seed, params, mode), |mut s| body(&mut s))
}

/// [`run_sessions_with`] at the default precision with exact truncation.
pub fn run_sessions<T, F>(master_seed: u64, body: F) -> Result<[T; 3], TrioError<RssError>>
where
    T: Send,
    F: Fn(&mut Session) -> Result<T, RssError> + Sync,
{
    run_sessions_with(master_seed, FixedPointParams::default(), TruncMode::Exact, body)
}
