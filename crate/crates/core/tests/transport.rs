mod common;

use std::net::{SocketAddr, TcpListener};
use std::time::Duration;

use rsstrain::numeric::{FixedPointParams, RingElement};
use rsstrain::rss::{RssError, TruncMode};
use rsstrain::transport::{connect_mesh_on, run_trio, MeshConfig, PartyId, TransportError, PROTOCOL_VERSION};

use common::{sessions, tcp_meshes, tcp_meshes_within, Wire};

const VERSIONS: [u16; 3] = [PROTOCOL_VERSION; 3];

#[test]
fn tcp_trio_passes_ids_forward() {
    let meshes = tcp_meshes([[1; 16], [2; 16], [3; 16]], VERSIONS).map(|m| m.expect("mesh").network);
    let out = run_trio(meshes, |mut net| {
        let me = net.id();
        net.send(me.next(), &[u8::from(me)])?;
        let got = net.recv(me.prev())?;
        Ok::<_, TransportError>((me, got))
    })
    .unwrap();
    for (me, got) in out {
        assert_eq!(got, vec![u8::from(me.prev())]);
    }
}

#[test]
fn handshake_hands_each_party_its_successor_seed() {
    let seeds = [[10; 16], [20; 16], [30; 16]];
    for (i, mesh) in tcp_meshes(seeds, VERSIONS).into_iter().enumerate() {
        let mesh = mesh.unwrap();
        assert_eq!(mesh.own_seed, seeds[i]);
        assert_eq!(mesh.next_seed, seeds[(i + 1) % 3]);
    }
}

#[test]
fn tcp_channels_are_fifo_under_bidirectional_traffic() {
    let meshes = tcp_meshes([[0; 16]; 3], VERSIONS).map(|m| m.expect("mesh").network);
    let frames = 2_000u32;
    let out = run_trio(meshes, |mut net| {
        let me = net.id();
        for i in 0..frames {
            for peer in me.peers() {
                let mut payload = i.to_le_bytes().to_vec();
                payload.resize(4 + (i as usize % 37), u8::from(me));
                net.send(peer, &payload)?;
            }
        }
        let mut ok = true;
        for i in 0..frames {
            for peer in me.peers() {
                let got = net.recv(peer)?;
                ok &= got[..4] == i.to_le_bytes() && got.len() == 4 + (i as usize % 37);
            }
        }
        Ok::<_, TransportError>(ok)
    })
    .unwrap();
    assert!(out.iter().all(|ok| *ok));
}

#[test]
fn duplicate_party_id_is_rejected() {
    let listeners: Vec<TcpListener> = (0..3).map(|_| TcpListener::bind("127.0.0.1:0").unwrap()).collect();
    let addrs: [SocketAddr; 3] = [0, 1, 2].map(|i| listeners[i].local_addr().unwrap());
    // the third process claims id 1, so party 0 receives two dials from "P1"
    let claimed = [PartyId::P0, PartyId::P1, PartyId::P1];
    let results: Vec<Result<_, TransportError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = listeners
            .into_iter()
            .zip(claimed)
            .map(|(listener, id)| {
                scope.spawn(move || {
                    let mut config = MeshConfig::new(id, addrs, [9; 32], [0; 16]);
                    config.connect_timeout = Duration::from_secs(3);
                    connect_mesh_on(listener, &config)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert!(
        matches!(results[0], Err(TransportError::IdCollision(p)) if p == PartyId::P1),
        "{:?}",
        results[0].as_ref().err()
    );
}

#[test]
fn protocol_version_mismatch_fails_the_handshake() {
    let versions = [PROTOCOL_VERSION, PROTOCOL_VERSION, PROTOCOL_VERSION + 1];
    let results = tcp_meshes_within([[0; 16]; 3], versions, Duration::from_secs(2));
    assert!(results.iter().all(|r| r.is_err()));
    // party 2 gives up after party 0 rejects it, so party 1 only sees a timeout
    for r in [&results[0], &results[2]] {
        assert!(matches!(r, Err(TransportError::VersionMismatch { .. })), "{:?}", r.as_ref().err());
    }
}

/// Payload accounting is 8 bytes per multiplication and per opened element,
/// and matches between loopback and TCP.
#[test]
fn payload_accounting_matches_across_transports() {
    let (muls, opens) = (37usize, 11usize);
    let measure = |wire: Wire| {
        let trio = sessions(wire, 77, FixedPointParams::default(), TruncMode::Exact);
        run_trio(trio, |mut s| {
            let xs: Vec<_> = (0..muls).map(|_| s.random_share()).collect();
            let ys = s.mul_many(&xs, &xs)?;
            s.open_many(&ys[..opens])?;
            let one = s.public(RingElement::ONE);
            for _ in 0..3 {
                s.mul(one, one)?;
            }
            Ok::<_, RssError>(*s.stats())
        })
        .unwrap()
    };
    let loopback = measure(Wire::Loopback);
    let tcp = measure(Wire::Tcp);
    for p in 0..3 {
        assert_eq!(loopback[p].payload_bytes_sent(), 8 * (muls + 3 + opens) as u64);
        assert_eq!(loopback[p], tcp[p], "party {p}");
    }
}
