//! In-process mesh over `mpsc` channels, plus helpers that run one closure per
//! party on its own thread.

use std::sync::mpsc::{channel, Sender};
use std::thread;
use std::time::Instant;

use thiserror::Error;

use super::{encode_frame, CommStats, FrameSink, Link, Network, PartyId, TransportError};

struct ChannelSink {
    peer: PartyId,
    tx: Sender<Result<Vec<u8>, TransportError>>,
}

impl FrameSink for ChannelSink {
    fn send_payload(&mut self, payload: &[u8]) -> Result<(), TransportError> {
        let frame = encode_frame(payload)?;
        self.tx
            .send(Ok(frame))
            .map_err(|_| TransportError::PeerDisconnected(self.peer))
    }
}

/// Three fully connected in-memory networks, indexed by party.
pub fn loopback_networks() -> [Network; 3] {
    let mut links: [[Option<Link>; 3]; 3] = Default::default();
    // senders[i][j] carries frames i -> j; receivers[j][i] is j's inbox from i
    let mut senders: [[Option<Sender<_>>; 3]; 3] = Default::default();
    let mut receivers: [[Option<_>; 3]; 3] = Default::default();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                let (tx, rx) = channel();
                senders[i][j] = Some(tx);
                receivers[j][i] = Some(rx);
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                links[i][j] = Some(Link {
                    sink: Box::new(ChannelSink {
                        peer: PartyId::ALL[j],
                        tx: senders[i][j].take().expect("sender"),
                    }),
                    inbox: receivers[i][j].take().expect("receiver"),
                });
            }
        }
    }
    let [l0, l1, l2] = links;
    [
        Network::from_links(PartyId::P0, l0),
        Network::from_links(PartyId::P1, l1),
        Network::from_links(PartyId::P2, l2),
    ]
}

/// Failure of one party in a three-thread run.
#[derive(Debug, Error)]
#[error("party {party}: {source}")]
pub struct TrioError<E: std::error::Error + 'static> {
    pub party: PartyId,
    #[source]
    pub source: E,
}

/// Run `body` once per party on its own thread and collect the results.
///
/// When several parties fail, the earliest failure is reported: the others are
/// usually disconnects caused by it.
pub fn run_trio<S, T, E, F>(states: [S; 3], body: F) -> Result<[T; 3], TrioError<E>>
where
    S: Send,
    T: Send,
    E: std::error::Error + Send + 'static,
    F: Fn(S) -> Result<T, E> + Sync,
{
    let body = &body;
    let outcomes: Vec<(PartyId, Result<T, (Instant, E)>)> = thread::scope(|scope| {
        let handles: Vec<_> = states
            .into_iter()
            .zip(PartyId::ALL)
            .map(|(state, id)| {
                let handle = thread::Builder::new()
                    .name(format!("party-{id}"))
                    .spawn_scoped(scope, move || body(state).map_err(|e| (Instant::now(), e)))
                    .expect("spawn party thread");
                (id, handle)
            })
            .collect();
        handles
            .into_iter()
            .map(|(id, h)| match h.join() {
                Ok(r) => (id, r),
                Err(panic) => std::panic::resume_unwind(panic),
            })
            .collect()
    });

    let mut oks = Vec::with_capacity(3);
    let mut first_err: Option<(Instant, PartyId, E)> = None;
    for (id, r) in outcomes {
        match r {
            Ok(v) => oks.push(v),
            Err((at, e)) => {
                if first_err.as_ref().map_or(true, |(t, _, _)| at < *t) {
                    first_err = Some((at, id, e));
                }
            }
        }
    }
    if let Some((_, party, source)) = first_err {
        return Err(TrioError { party, source });
    }
    Ok(oks.try_into().unwrap_or_else(|_| unreachable!("three results")))
}

/// [`run_trio`] over fresh loopback networks, returning each party's traffic.
pub fn loopback_trio<T, E, F>(body: F) -> Result<[(T, CommStats); 3], TrioError<E>>
where
    T: Send,
    E: std::error::Error + Send + 'static,
    F: Fn(&mut Network) -> Result<T, E> + Sync,
{
    run_trio(loopback_networks(), |mut net| {
        let out = body(&mut net)?;
        Ok((out, *net.stats()))
    })
}
