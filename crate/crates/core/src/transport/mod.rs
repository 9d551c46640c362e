//! Three-party full-mesh messaging.
//!
//! A [`Network`] holds one ordered, reliable channel to each of the two other
//! parties. Channels are either in-memory ([`loopback`]) or TCP ([`tcp`]); both
//! obey the same framing, FIFO ordering and byte accounting.

mod frame;
pub mod loopback;
pub mod tcp;

use std::fmt;
use std::io;
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use frame::{decode_frame, encode_frame, read_frame, write_frame, FRAME_HEADER_BYTES};
pub use loopback::{loopback_networks, loopback_trio, run_trio, TrioError};
pub use tcp::{
    connect_mesh, connect_mesh_on, Hello, Mesh, MeshConfig, PlainTcp, StreamWrapper,
    HELLO_BYTES, MAGIC, PROTOCOL_VERSION,
};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("party {0} disconnected")]
    PeerDisconnected(PartyId),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("party id collision: id {0} claimed twice")]
    IdCollision(PartyId),
    #[error("protocol version mismatch: ours {ours}, peer {theirs}")]
    VersionMismatch { ours: u16, theirs: u16 },
    #[error("bad handshake magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("session nonce mismatch with party {0}")]
    NonceMismatch(PartyId),
    #[error("expected party {expected}, peer announced {announced}")]
    UnexpectedPeer { expected: PartyId, announced: PartyId },
    #[error("invalid party id {0}")]
    InvalidParty(u8),
    #[error("no channel to party {0}")]
    NoChannel(PartyId),
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("payload of {0} bytes does not fit a frame")]
    FrameTooLarge(usize),
}

/// Party index in {0, 1, 2}.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct PartyId(u8);

impl PartyId {
    pub const P0: PartyId = PartyId(0);
    pub const P1: PartyId = PartyId(1);
    pub const P2: PartyId = PartyId(2);

    pub const ALL: [PartyId; 3] = [PartyId::P0, PartyId::P1, PartyId::P2];

    pub fn new(id: u8) -> Result<Self, TransportError> {
        if id < 3 {
            Ok(PartyId(id))
        } else {
            Err(TransportError::InvalidParty(id))
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// (i + 1) mod 3
    #[inline]
    pub fn next(self) -> PartyId {
        PartyId((self.0 + 1) % 3)
    }

    /// (i + 2) mod 3
    #[inline]
    pub fn prev(self) -> PartyId {
        PartyId((self.0 + 2) % 3)
    }

    pub fn peers(self) -> [PartyId; 2] {
        [self.next(), self.prev()]
    }
}

impl TryFrom<u8> for PartyId {
    type Error = TransportError;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        PartyId::new(v)
    }
}

impl From<PartyId> for u8 {
    fn from(p: PartyId) -> u8 {
        p.0
    }
}

impl fmt::Debug for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Traffic counters for one peer. `bytes_*` include the 4-byte frame header,
/// `payload_bytes_*` do not.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerStats {
    pub bytes_sent: u64,
    pub bytes_received: u64,
    pub payload_bytes_sent: u64,
    pub payload_bytes_received: u64,
    pub messages_sent: u64,
    pub messages_received: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommStats {
    pub per_peer: [PeerStats; 3],
    pub rounds: u64,
}

impl CommStats {
    pub fn peer(&self, p: PartyId) -> &PeerStats {
        &self.per_peer[p.index()]
    }

    pub fn bytes_sent(&self) -> u64 {
        self.per_peer.iter().map(|p| p.bytes_sent).sum()
    }

    pub fn bytes_received(&self) -> u64 {
        self.per_peer.iter().map(|p| p.bytes_received).sum()
    }

    pub fn payload_bytes_sent(&self) -> u64 {
        self.per_peer.iter().map(|p| p.payload_bytes_sent).sum()
    }

    pub fn payload_bytes_received(&self) -> u64 {
        self.per_peer.iter().map(|p| p.payload_bytes_received).sum()
    }

    pub fn messages_sent(&self) -> u64 {
        self.per_peer.iter().map(|p| p.messages_sent).sum()
    }

    /// Counter-wise difference `self - earlier`.
    pub fn since(&self, earlier: &CommStats) -> CommStats {
        let mut out = CommStats {
            rounds: self.rounds - earlier.rounds,
            ..CommStats::default()
        };
        for i in 0..3 {
            let (a, b) = (&self.per_peer[i], &earlier.per_peer[i]);
            out.per_peer[i] = PeerStats {
                bytes_sent: a.bytes_sent - b.bytes_sent,
                bytes_received: a.bytes_received - b.bytes_received,
                payload_bytes_sent: a.payload_bytes_sent - b.payload_bytes_sent,
                payload_bytes_received: a.payload_bytes_received - b.payload_bytes_received,
                messages_sent: a.messages_sent - b.messages_sent,
                messages_received: a.messages_received - b.messages_received,
            };
        }
        out
    }
}

/// Outgoing half of a channel.
pub(crate) trait FrameSink: Send {
    fn send_payload(&mut self, payload: &[u8]) -> Result<(), TransportError>;
}

/// Incoming frames arrive whole (header included) on an in-process queue,
/// fed either directly by the loopback peer or by a background TCP reader.
pub(crate) type Inbox = Receiver<Result<Vec<u8>, TransportError>>;

pub(crate) struct Link {
    pub(crate) sink: Box<dyn FrameSink>,
    pub(crate) inbox: Inbox,
}

/// One party's view of the mesh.
pub struct Network {
    id: PartyId,
    links: [Option<Link>; 3],
    stats: CommStats,
    recv_timeout: Option<Duration>,
}

impl fmt::Debug for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Network")
            .field("id", &self.id)
            .field("stats", &self.stats)
            .finish()
    }
}

impl Network {
    pub(crate) fn from_links(id: PartyId, links: [Option<Link>; 3]) -> Self {
        Network {
            id,
            links,
            stats: CommStats::default(),
            recv_timeout: None,
        }
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn stats(&self) -> &CommStats {
        &self.stats
    }

    /// `None` waits forever (the default once a session is established).
    pub fn set_recv_timeout(&mut self, timeout: Option<Duration>) {
        self.recv_timeout = timeout;
    }

    /// Count one protocol round.
    pub fn mark_round(&mut self) {
        self.stats.rounds += 1;
    }

    pub fn send(&mut self, to: PartyId, payload: &[u8]) -> Result<(), TransportError> {
        let link = self.links[to.index()]
            .as_mut()
            .ok_or(TransportError::NoChannel(to))?;
        link.sink.send_payload(payload)?;
        let s = &mut self.stats.per_peer[to.index()];
        s.bytes_sent += (payload.len() + FRAME_HEADER_BYTES) as u64;
        s.payload_bytes_sent += payload.len() as u64;
        s.messages_sent += 1;
        Ok(())
    }

    /// Next frame from `from`, in FIFO order.
    pub fn recv(&mut self, from: PartyId) -> Result<Vec<u8>, TransportError> {
        let link = self.links[from.index()]
            .as_mut()
            .ok_or(TransportError::NoChannel(from))?;
        let frame = match self.recv_timeout {
            None => link
                .inbox
                .recv()
                .map_err(|_| TransportError::PeerDisconnected(from))?,
            Some(t) => match link.inbox.recv_timeout(t) {
                Ok(frame) => frame,
                Err(RecvTimeoutError::Timeout) => {
                    return Err(TransportError::Timeout(format!(
                        "no frame from party {from} within {t:?}"
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(TransportError::PeerDisconnected(from))
                }
            },
        }?;
        let (payload, rest) = decode_frame(&frame)?;
        if !rest.is_empty() {
            return Err(TransportError::MalformedFrame(format!(
                "{} trailing bytes after payload",
                rest.len()
            )));
        }
        let s = &mut self.stats.per_peer[from.index()];
        s.bytes_received += frame.len() as u64;
        s.payload_bytes_received += payload.len() as u64;
        s.messages_received += 1;
        Ok(payload.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn party_index_arithmetic() {
        assert_eq!(PartyId::P0.next(), PartyId::P1);
        assert_eq!(PartyId::P2.next(), PartyId::P0);
        assert_eq!(PartyId::P0.prev(), PartyId::P2);
        assert_eq!(PartyId::P1.prev(), PartyId::P0);
        assert!(PartyId::new(3).is_err());
        for p in PartyId::ALL {
            assert_eq!(p.next().prev(), p);
        }
    }
}
