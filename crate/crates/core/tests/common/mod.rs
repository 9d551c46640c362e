//! Shared fixtures for the integration test targets.
#![allow(dead_code)]

use std::net::{SocketAddr, TcpListener};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rsstrain::harness::{fixed_gradient, synthetic, LabeledDataset, SyntheticSpec};
use rsstrain::nonlinear::{cross_entropy, sigmoid};
use rsstrain::numeric::FixedPointParams;
use rsstrain::rss::{derive_session_seeds, RssError, Session, SessionSeeds, TruncMode};
use rsstrain::trainer::{open_model, train, FixedModel, SecretDataset, TrainOutput, TrainerError, TrainingConfig};
use rsstrain::transport::{connect_mesh_on, loopback_networks, run_trio, Mesh, MeshConfig, PartyId, TransportError};

pub const DEALER: PartyId = PartyId::P0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wire {
    Loopback,
    Tcp,
}

impl std::fmt::Display for Wire {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Wire::Loopback => "loopback",
            Wire::Tcp => "tcp",
        })
    }
}

/// Three meshes on ephemeral localhost ports, each announcing `own_seeds[i]`.
pub fn tcp_meshes(own_seeds: [[u8; 16]; 3], version: [u16; 3]) -> [Result<Mesh, TransportError>; 3] {
    tcp_meshes_within(own_seeds, version, std::time::Duration::from_secs(10))
}

pub fn tcp_meshes_within(
    own_seeds: [[u8; 16]; 3],
    version: [u16; 3],
    timeout: std::time::Duration,
) -> [Result<Mesh, TransportError>; 3] {
    let listeners: Vec<TcpListener> = (0..3).map(|_| TcpListener::bind("127.0.0.1:0").expect("bind")).collect();
    let addrs: Vec<SocketAddr> = listeners.iter().map(|l| l.local_addr().expect("addr")).collect();
    let addrs: [SocketAddr; 3] = addrs.try_into().expect("three addresses");
    std::thread::scope(|scope| {
        let handles: Vec<_> = listeners
            .into_iter()
            .enumerate()
            .map(|(i, listener)| {
                scope.spawn(move || {
                    let id = PartyId::new(i as u8).expect("party id");
                    let mut config = MeshConfig::new(id, addrs, [0x42; 32], own_seeds[i]);
                    config.version = version[i];
                    config.connect_timeout = timeout;
                    connect_mesh_on(listener, &config)
                })
            })
            .collect();
        let out: Vec<_> = handles.into_iter().map(|h| h.join().expect("mesh thread")).collect();
        out.try_into().map_err(|_| ()).expect("three meshes")
    })
}

pub fn sessions(wire: Wire, master: u64, params: FixedPointParams, mode: TruncMode) -> [Session; 3] {
    let seeds = derive_session_seeds(master);
    match wire {
        Wire::Loopback => loopback_networks().map(|net| {
            let i = net.id().index();
            Session::new(net, &seeds[i], params).with_trunc_mode(mode)
        }),
        Wire::Tcp => {
            let meshes = tcp_meshes(seeds.map(|s| s.own), [rsstrain::transport::PROTOCOL_VERSION; 3]);
            let mut i = 0;
            meshes.map(|mesh| {
                let mesh = mesh.expect("mesh");
                let mine = seeds[i];
                i += 1;
                assert_eq!(mesh.next_seed, mine.next, "handshake delivers the successor seed");
                let learned = SessionSeeds { own: mesh.own_seed, next: mesh.next_seed, private: mine.private };
                Session::new(mesh.network, &learned, params).with_trunc_mode(mode)
            })
        }
    }
}

pub fn to_rss(e: TrainerError) -> RssError {
    match e {
        TrainerError::Rss(e) => e,
        other => RssError::InvalidParameter(other.to_string()),
    }
}

pub fn share_dataset(s: &mut Session, data: &LabeledDataset) -> Result<SecretDataset, TrainerError> {
    let labels = data.label_values();
    let mine = (s.id() == DEALER).then_some((data.features(), &labels[..]));
    SecretDataset::share(s, DEALER, mine, data.n(), data.d())
}

/// Train on the wire and open the model; all three parties must agree.
pub fn secure_train(data: &LabeledDataset, cfg: &TrainingConfig, wire: Wire, master: u64) -> (FixedModel, TrainOutput) {
    let trio = sessions(wire, master, cfg.fixed_point, cfg.truncation);
    let out = run_trio(trio, |mut s| {
        let secret = share_dataset(&mut s, data).map_err(to_rss)?;
        let output = train(&mut s, &secret, cfg).map_err(to_rss)?;
        let model = open_model(&mut s, &output.model).map_err(to_rss)?;
        Ok::<_, RssError>((model, output))
    })
    .expect("secure training");
    let [a, b, c] = out;
    assert_eq!(a.0, b.0);
    assert_eq!(b.0, c.0);
    a
}

/// Norm-wise relative error between the fixed-point reference gradient and
/// a central finite difference of the double-precision loss, for instance
/// `index`: synthetic rows (n = 20, d = 5) at a model point drawn from
/// N(0, weight_scale^2). The loss is evaluated on the decoded rows and model.
pub fn gradient_check(index: u64, weight_scale: f64) -> f64 {
    let (n, d) = (20, 5);
    let cfg = TrainingConfig::default();
    let params = cfg.fixed_point;
    let data = synthetic(&SyntheticSpec::new(n, d, 1000 + index)).expect("dataset");
    let mut rng = ChaCha12Rng::seed_from_u64(index);
    let normal = Normal::new(0.0, weight_scale).expect("normal");
    let mut draw = || params.encode(normal.sample(&mut rng)).expect("encodable");
    let model = FixedModel { weights: (0..d).map(|_| draw()).collect(), bias: draw() };

    let (grad_w, grad_b) = fixed_gradient(&data, &model, &cfg).expect("gradient");
    let mut fixed: Vec<f64> = grad_w.iter().map(|g| params.decode(*g)).collect();
    fixed.push(params.decode(grad_b));

    let rows: Vec<Vec<f64>> = data
        .features()
        .iter()
        .map(|r| r.iter().map(|v| params.decode(params.encode(*v).expect("encodable"))).collect())
        .collect();
    let labels = data.label_values();
    let mut point = model.weights_f64(&params);
    point.push(model.bias_f64(&params));
    let loss = |theta: &[f64]| {
        let p: Vec<f64> = rows
            .iter()
            .map(|r| sigmoid(r.iter().zip(theta).map(|(x, w)| x * w).sum::<f64>() + theta[d]))
            .collect();
        cross_entropy(&p, &labels)
    };
    let step = 1e-6;
    let numeric: Vec<f64> = (0..=d)
        .map(|j| {
            let mut up = point.clone();
            let mut down = point.clone();
            up[j] += step;
            down[j] -= step;
            (loss(&up) - loss(&down)) / (2.0 * step)
        })
        .collect();
    let diff = fixed.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / norm
}

/// Weight scale of the gradient-check instances: z = x.w + b then has a
/// standard deviation near 1 on the synthetic rows.
pub const GRADIENT_CHECK_SCALE: f64 = 0.1;

/// Worst relative error over the first `count` gradient-check instances.
pub fn worst_gradient_error(count: u64) -> f64 {
    (0..count).map(|i| gradient_check(i, GRADIENT_CHECK_SCALE)).fold(0.0, f64::max)
}
