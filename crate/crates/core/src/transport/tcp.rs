//! TCP mesh with a fixed handshake.
//!
//! Party i dials every party j < i and accepts from every j > i. Each side
//! sends a [`Hello`]; the dialer speaks first. The seed field carries the
//! sender's own PRG seed when the receiver is its predecessor and zeros
//! otherwise, so each party learns exactly the seed it shares with its
//! successor.

use std::io::{self, BufWriter, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc::channel;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::{FrameSink, Link, Network, PartyId, TransportError, FRAME_HEADER_BYTES};

pub const MAGIC: [u8; 4] = *b"RSS1";
pub const PROTOCOL_VERSION: u16 = 1;
pub const HELLO_BYTES: usize = 4 + 2 + 1 + 32 + 16;

pub const DEFAULT_CONNECT_TIMEOUT: Duration = Duration::from_secs(30);

const POLL_INTERVAL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hello {
    pub version: u16,
    pub party: u8,
    pub nonce: [u8; 32],
    pub seed: [u8; 16],
}

impl Hello {
    pub fn to_bytes(&self) -> [u8; HELLO_BYTES] {
        let mut out = [0u8; HELLO_BYTES];
        out[..4].copy_from_slice(&MAGIC);
        out[4..6].copy_from_slice(&self.version.to_le_bytes());
        out[6] = self.party;
        out[7..39].copy_from_slice(&self.nonce);
        out[39..55].copy_from_slice(&self.seed);
        out
    }

    /// Parses the fixed layout; only the magic is checked here.
    pub fn from_bytes(bytes: &[u8; HELLO_BYTES]) -> Result<Self, TransportError> {
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(TransportError::BadMagic(magic));
        }
        Ok(Hello {
            version: u16::from_le_bytes([bytes[4], bytes[5]]),
            party: bytes[6],
            nonce: bytes[7..39].try_into().expect("32 bytes"),
            seed: bytes[39..55].try_into().expect("16 bytes"),
        })
    }
}

/// Hook for replacing the raw socket with an opaque channel (for example TLS).
pub trait StreamWrapper: Send + Sync {
    fn wrap(
        &self,
        stream: TcpStream,
        peer: PartyId,
    ) -> io::Result<(Box<dyn Read + Send>, Box<dyn Write + Send>)>;
}

/// Identity wrapper: the socket itself.
#[derive(Debug, Default, Clone, Copy)]
pub struct PlainTcp;

impl StreamWrapper for PlainTcp {
    fn wrap(
        &self,
        stream: TcpStream,
        _peer: PartyId,
    ) -> io::Result<(Box<dyn Read + Send>, Box<dyn Write + Send>)> {
        Ok((Box::new(stream.try_clone()?), Box::new(stream)))
    }
}

#[derive(Clone)]
pub struct MeshConfig {
    pub id: PartyId,
    pub listen: SocketAddr,
    /// Addresses indexed by party id; the entry for `id` itself is ignored.
    pub peers: [SocketAddr; 3],
    pub nonce: [u8; 32],
    /// Seed this party shares with its predecessor.
    pub own_seed: [u8; 16],
    pub version: u16,
    pub connect_timeout: Duration,
    pub recv_timeout: Option<Duration>,
    pub wrapper: Arc<dyn StreamWrapper>,
}

impl std::fmt::Debug for MeshConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeshConfig")
            .field("id", &self.id)
            .field("listen", &self.listen)
            .field("peers", &self.peers)
            .field("version", &self.version)
            .field("connect_timeout", &self.connect_timeout)
            .field("recv_timeout", &self.recv_timeout)
            .finish_non_exhaustive()
    }
}

impl MeshConfig {
    pub fn new(id: PartyId, peers: [SocketAddr; 3], nonce: [u8; 32], own_seed: [u8; 16]) -> Self {
        MeshConfig {
            id,
            listen: peers[id.index()],
            peers,
            nonce,
            own_seed,
            version: PROTOCOL_VERSION,
            connect_timeout: DEFAULT_CONNECT_TIMEOUT,
            recv_timeout: None,
            wrapper: Arc::new(PlainTcp),
        }
    }
}

/// An established mesh plus the seed learned from the successor.
#[derive(Debug)]
pub struct Mesh {
    pub network: Network,
    pub own_seed: [u8; 16],
    pub next_seed: [u8; 16],
}

pub fn connect_mesh(config: &MeshConfig) -> Result<Mesh, TransportError> {
    let listener = TcpListener::bind(config.listen)?;
    connect_mesh_on(listener, config)
}

/// As [`connect_mesh`] but on an already bound listener.
pub fn connect_mesh_on(listener: TcpListener, config: &MeshConfig) -> Result<Mesh, TransportError> {
    let deadline = Instant::now() + config.connect_timeout;
    let me = config.id;
    let mut streams: [Option<Handshaken>; 3] = Default::default();

    for peer in PartyId::ALL.into_iter().filter(|p| *p < me) {
        let stream = dial(config.peers[peer.index()], deadline)?;
        let mut hs = Handshaken::new(stream, peer, config)?;
        set_deadline(&hs.raw, deadline)?;
        hs.send_hello(config)?;
        let hello = hs.read_hello(config)?;
        if hello.party != u8::from(peer) {
            return Err(match PartyId::new(hello.party) {
                Ok(announced) if announced == me => TransportError::IdCollision(me),
                Ok(announced) => TransportError::UnexpectedPeer { expected: peer, announced },
                Err(e) => e,
            });
        }
        hs.peer_seed = hello.seed;
        streams[peer.index()] = Some(hs);
    }

    let expected = PartyId::ALL.iter().filter(|p| **p > me).count();
    listener.set_nonblocking(true)?;
    let mut accepted = 0;
    while accepted < expected {
        let stream = match listener.accept() {
            Ok((s, _)) => s,
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                if Instant::now() >= deadline {
                    return Err(TransportError::Timeout(format!(
                        "party {me} waited {:?} for {} inbound connection(s)",
                        config.connect_timeout,
                        expected - accepted
                    )));
                }
                thread::sleep(POLL_INTERVAL);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        stream.set_nonblocking(false)?;
        set_deadline(&stream, deadline)?;
        // peer identity is unknown until its hello arrives
        let mut hs = Handshaken::new(stream, me, config)?;
        let hello = hs.read_hello_unchecked()?;
        if hello.version != config.version {
            hs.peer = me.next();
            let _ = hs.send_hello(config);
            return Err(TransportError::VersionMismatch {
                ours: config.version,
                theirs: hello.version,
            });
        }
        let peer = PartyId::new(hello.party)?;
        if peer == me || streams[peer.index()].is_some() {
            return Err(TransportError::IdCollision(peer));
        }
        if peer < me {
            return Err(TransportError::UnexpectedPeer {
                expected: me.next().max(me.prev()),
                announced: peer,
            });
        }
        if hello.nonce != config.nonce {
            return Err(TransportError::NonceMismatch(peer));
        }
        hs.peer = peer;
        hs.peer_seed = hello.seed;
        hs.send_hello(config)?;
        streams[peer.index()] = Some(hs);
        accepted += 1;
    }

    let next_seed = streams[me.next().index()]
        .as_ref()
        .expect("successor connected")
        .peer_seed;
    let mut links: [Option<Link>; 3] = Default::default();
    for (i, slot) in streams.into_iter().enumerate() {
        if let Some(hs) = slot {
            hs.raw.set_read_timeout(None)?;
            links[i] = Some(hs.into_link());
        }
    }
    let mut network = Network::from_links(me, links);
    network.set_recv_timeout(config.recv_timeout);
    log::debug!("party {me} connected to both peers");
    Ok(Mesh {
        network,
        own_seed: config.own_seed,
        next_seed,
    })
}

fn dial(addr: SocketAddr, deadline: Instant) -> Result<TcpStream, TransportError> {
    loop {
        let remaining = deadline.saturating_duration_since(Instant::now());
        if remaining.is_zero() {
            return Err(TransportError::Timeout(format!("could not reach {addr}")));
        }
        match TcpStream::connect_timeout(&addr, remaining) {
            Ok(s) => return Ok(s),
            Err(e)
                if matches!(
                    e.kind(),
                    io::ErrorKind::ConnectionRefused
                        | io::ErrorKind::TimedOut
                        | io::ErrorKind::ConnectionReset
                ) =>
            {
                thread::sleep(POLL_INTERVAL.min(remaining));
            }
            Err(e) => return Err(e.into()),
        }
    }
}

fn set_deadline(stream: &TcpStream, deadline: Instant) -> io::Result<()> {
    let remaining = deadline
        .saturating_duration_since(Instant::now())
        .max(Duration::from_millis(1));
    stream.set_read_timeout(Some(remaining))
}

fn timeout_or_io(e: io::Error, what: &str) -> TransportError {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => {
            TransportError::Timeout(format!("handshake: {what}"))
        }
        _ => TransportError::Io(e),
    }
}

struct Handshaken {
    raw: TcpStream,
    reader: Box<dyn Read + Send>,
    writer: Box<dyn Write + Send>,
    peer: PartyId,
    peer_seed: [u8; 16],
}

impl Handshaken {
    fn new(raw: TcpStream, peer: PartyId, config: &MeshConfig) -> Result<Self, TransportError> {
        raw.set_nodelay(true)?;
        let (reader, writer) = config.wrapper.wrap(raw.try_clone()?, peer)?;
        Ok(Handshaken {
            raw,
            reader,
            writer,
            peer,
            peer_seed: [0; 16],
        })
    }

    fn send_hello(&mut self, config: &MeshConfig) -> Result<(), TransportError> {
        let seed = if self.peer == config.id.prev() {
            config.own_seed
        } else {
            [0; 16]
        };
        let hello = Hello {
            version: config.version,
            party: config.id.into(),
            nonce: config.nonce,
            seed,
        };
        self.writer.write_all(&hello.to_bytes())?;
        self.writer.flush()?;
        Ok(())
    }

    fn read_hello_unchecked(&mut self) -> Result<Hello, TransportError> {
        let mut buf = [0u8; HELLO_BYTES];
        self.reader
            .read_exact(&mut buf)
            .map_err(|e| timeout_or_io(e, "waiting for peer hello"))?;
        Hello::from_bytes(&buf)
    }

    fn read_hello(&mut self, config: &MeshConfig) -> Result<Hello, TransportError> {
        let hello = self.read_hello_unchecked()?;
        if hello.version != config.version {
            return Err(TransportError::VersionMismatch {
                ours: config.version,
                theirs: hello.version,
            });
        }
        if hello.nonce != config.nonce {
            return Err(TransportError::NonceMismatch(self.peer));
        }
        Ok(hello)
    }

    fn into_link(self) -> Link {
        let (tx, rx) = channel();
        let peer = self.peer;
        let mut reader = self.reader;
        thread::Builder::new()
            .name(format!("recv-from-{peer}"))
            .spawn(move || loop {
                match read_raw_frame(&mut reader) {
                    Ok(frame) => {
                        if tx.send(Ok(frame)).is_err() {
                            return;
                        }
                    }
                    Err(e) => {
                        let err = if e.kind() == io::ErrorKind::UnexpectedEof {
                            TransportError::PeerDisconnected(peer)
                        } else {
                            TransportError::Io(e)
                        };
                        let _ = tx.send(Err(err));
                        return;
                    }
                }
            })
            .expect("spawn receiver thread");
        Link {
            sink: Box::new(TcpSink {
                peer,
                raw: self.raw,
                writer: BufWriter::new(self.writer),
            }),
            inbox: rx,
        }
    }
}

/// Reads one whole frame, header included.
fn read_raw_frame<R: Read + ?Sized>(r: &mut R) -> io::Result<Vec<u8>> {
    let mut header = [0u8; FRAME_HEADER_BYTES];
    r.read_exact(&mut header)?;
    let len = u32::from_le_bytes(header) as usize;
    let mut frame = vec![0u8; FRAME_HEADER_BYTES + len];
    frame[..FRAME_HEADER_BYTES].copy_from_slice(&header);
    r.read_exact(&mut frame[FRAME_HEADER_BYTES..])?;
    Ok(frame)
}

struct TcpSink {
    peer: PartyId,
    raw: TcpStream,
    writer: BufWriter<Box<dyn Write + Send>>,
}

impl FrameSink for TcpSink {
    fn send_payload(&mut self, payload: &[u8]) -> Result<(), TransportError> {
        let disconnected = |_| TransportError::PeerDisconnected(self.peer);
        super::write_frame(&mut self.writer, payload).map_err(|e| match e {
            TransportError::Io(io) if io.kind() == io::ErrorKind::BrokenPipe => disconnected(io),
            other => other,
        })
    }
}

impl Drop for TcpSink {
    fn drop(&mut self) {
        let _ = self.writer.flush();
        // wakes our own receiver thread and signals EOF to the peer
        let _ = self.raw.shutdown(Shutdown::Both);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hello_layout_is_fixed() {
        let hello = Hello {
            version: 0x0102,
            party: 2,
            nonce: [0xAA; 32],
            seed: [0x55; 16],
        };
        let bytes = hello.to_bytes();
        assert_eq!(&bytes[..4], b"RSS1");
        assert_eq!(&bytes[4..6], &[0x02, 0x01]);
        assert_eq!(bytes[6], 2);
        assert_eq!(bytes.len(), 55);
        assert_eq!(Hello::from_bytes(&bytes).unwrap(), hello);
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(matches!(Hello::from_bytes(&bad), Err(TransportError::BadMagic(_))));
    }
}
