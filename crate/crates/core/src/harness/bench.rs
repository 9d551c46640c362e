use serde::Serialize;

use super::HarnessError;
use crate::numeric::FixedPointParams;
use crate::rss::{run_sessions_with, TruncMode};

/// Traffic of one secure inner product, per party.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DotBench {
    pub length: usize,
    pub payload_bytes_sent: [u64; 3],
    /// Including frame headers.
    pub bytes_sent: [u64; 3],
    pub messages_sent: [u64; 3],
    pub rounds: [u64; 3],
}

/// Measure one dot product of each length on random shared vectors. The
/// inputs come from correlated randomness, so only the product is on the
/// wire.
pub fn dot_product_bytes(lengths: &[usize], seed: u64) -> Result<Vec<DotBench>, HarnessError> {
    let mut out = Vec::with_capacity(lengths.len());
    for &length in lengths {
        if length == 0 {
            return Err(HarnessError::InvalidArgument("dot product length must be positive".into()));
        }
        let runs = run_sessions_with(seed, FixedPointParams::default(), TruncMode::Probabilistic, |s| {
            let xs: Vec<_> = (0..length).map(|_| s.random_share()).collect();
            let ys: Vec<_> = (0..length).map(|_| s.random_share()).collect();
            let before = s.stats().clone();
            s.dot(&xs, &ys)?;
            Ok(s.stats().since(&before))
        })
        .map_err(|e| HarnessError::Rss(e.source))?;
        out.push(DotBench {
            length,
            payload_bytes_sent: runs.each_ref().map(|c| c.payload_bytes_sent()),
            bytes_sent: runs.each_ref().map(|c| c.bytes_sent()),
            messages_sent: runs.each_ref().map(|c| c.messages_sent()),
            rounds: runs.each_ref().map(|c| c.rounds),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_element_per_party_at_any_length() {
        let rows = dot_product_bytes(&[1, 100, 1000], 3).unwrap();
        for r in &rows {
            assert_eq!(r.payload_bytes_sent, [8; 3]);
            assert_eq!(r.rounds, [1; 3]);
        }
    }
}
