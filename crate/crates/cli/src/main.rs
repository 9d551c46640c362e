//! `rsstrain`: cross-validated secure logistic regression in one process or
//! across three networked parties, plus benchmarks and cleartext baselines.

use std::net::{SocketAddr, ToSocketAddrs};
use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rsstrain::harness::{
    dot_product_bytes, load_csv, oracle_cv, run_cv, run_cv_party, synthetic, CsvOptions, CvConfig, CvReport,
    LabeledDataset, OracleVariant, ReportOptions, SyntheticSpec, COORDINATOR,
};
use rsstrain::numeric::FixedPointParams;
use rsstrain::rss::{random_seed, SessionSeeds, TruncMode};
use rsstrain::trainer::{ClassWeighting, StopPolicy, TrainingConfig};
use rsstrain::transport::{connect_mesh, MeshConfig, PartyId};

#[derive(Debug, Parser)]
#[command(name = "rsstrain", version, about = "Three-party secure logistic regression training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cross-validate with all three parties in this process.
    Simulate(SimulateArgs),
    /// Run one party of a networked cross-validation over TCP.
    Party(PartyArgs),
    /// Bytes sent per party for one dot product at each length.
    Bench(BenchArgs),
    /// Cleartext baselines over the same folds.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Trunc {
    Exact,
    #[value(alias = "probabilistic")]
    Prob,
}

impl From<Trunc> for TruncMode {
    fn from(t: Trunc) -> Self {
        match t {
            Trunc::Exact => TruncMode::Exact,
            Trunc::Prob => TruncMode::Probabilistic,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct DataArgs {
    /// CSV with the label (0 or 1) in the first column.
    #[arg(long, env = "RSSTRAIN_DATA", conflicts_with = "synthetic")]
    data: Option<PathBuf>,
    /// Generate a separable dataset instead, as SAMPLESxFEATURES (e.g. 200x50).
    #[arg(long, env = "RSSTRAIN_SYNTHETIC", value_parser = parse_shape)]
    synthetic: Option<(usize, usize)>,
    /// Lines are variables and columns samples; the first line holds labels.
    #[arg(long, env = "RSSTRAIN_TRANSPOSE")]
    transpose: bool,
}

#[derive(Debug, Clone, Args)]
struct TrainArgs {
    /// Epochs to run, or the cap when --stop-loss is given.
    #[arg(long, env = "RSSTRAIN_EPOCHS", default_value_t = 100)]
    epochs: u32,
    /// Stop once the opened training loss falls below this value.
    #[arg(long, env = "RSSTRAIN_STOP_LOSS")]
    stop_loss: Option<f64>,
    #[arg(long, env = "RSSTRAIN_TRUNC", value_enum, default_value = "prob")]
    trunc: Trunc,
    #[arg(long, env = "RSSTRAIN_FRAC_BITS", default_value_t = 16)]
    frac_bits: u32,
    #[arg(long, env = "RSSTRAIN_LR", default_value_t = 0.1)]
    lr: f64,
    #[arg(long, env = "RSSTRAIN_MOMENTUM", default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, env = "RSSTRAIN_FOLDS", default_value_t = 5)]
    folds: usize,
    #[arg(long, env = "RSSTRAIN_REPEATS", default_value_t = 20)]
    repeats: usize,
    /// Seeds fold assignment, synthetic data and in-process randomness.
    #[arg(long, env = "RSSTRAIN_SEED", default_value_t = 0)]
    seed: u64,
    /// Weight each class's errors by n / (2 n_class).
    #[arg(long, env = "RSSTRAIN_BALANCED")]
    balanced: bool,
    /// Probability at or above which a sample is classified positive.
    #[arg(long, env = "RSSTRAIN_THRESHOLD", default_value_t = 0.5)]
    threshold: f64,
    /// Folds run concurrently (in-process modes only).
    #[arg(long, env = "RSSTRAIN_JOBS", default_value_t = 1)]
    jobs: usize,
    /// Open the loss every epoch (logged at debug level).
    #[arg(long, env = "RSSTRAIN_TRACK_LOSS")]
    track_loss: bool,
}

#[derive(Debug, Clone, Args)]
struct OutputArgs {
    /// Write the machine-readable report here.
    #[arg(long, env = "RSSTRAIN_JSON")]
    json: Option<PathBuf>,
    /// Keep wall-clock fields in the JSON report.
    #[arg(long, env = "RSSTRAIN_TIMING")]
    timing: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct PartyArgs {
    #[arg(long, env = "RSSTRAIN_ID", value_parser = clap::value_parser!(u8).range(0..3))]
    id: u8,
    /// Address this party listens on.
    #[arg(long, env = "RSSTRAIN_LISTEN")]
    listen: String,
    /// The other two parties' addresses, in increasing id order.
    #[arg(long, env = "RSSTRAIN_PEERS", value_delimiter = ',', required = true)]
    peers: Vec<String>,
    /// Seconds to wait for the other parties.
    #[arg(long, env = "RSSTRAIN_CONNECT_TIMEOUT", default_value_t = 30)]
    connect_timeout: u64,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, env = "RSSTRAIN_LENGTHS", value_delimiter = ',', default_value = "1,100,12634")]
    lengths: Vec<usize>,
    #[arg(long, env = "RSSTRAIN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "RSSTRAIN_JSON")]
    json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Variant {
    Float,
    Fixed,
    Both,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long, env = "RSSTRAIN_VARIANT", value_enum, default_value = "both")]
    variant: Variant,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_shape(text: &str) -> Result<(usize, usize), String> {
    let (n, d) = text.split_once(['x', 'X']).ok_or_else(|| format!("expected SAMPLESxFEATURES, got {text:?}"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(n)?, parse(d)?))
}

impl DataArgs {
    fn load(&self, seed: u64) -> Result<LabeledDataset> {
        match (&self.data, self.synthetic) {
            (Some(path), _) => {
                let options = CsvOptions { transpose: self.transpose, ..Default::default() };
                load_csv(path, &options).with_context(|| format!("loading {}", path.display()))
            }
            (None, Some((n, d))) => Ok(synthetic(&SyntheticSpec::new(n, d, seed))?),
            (None, None) => bail!("pass --data PATH or --synthetic NxD"),
        }
    }

    fn given(&self) -> bool {
        self.data.is_some() || self.synthetic.is_some()
    }
}

impl TrainArgs {
    fn cv_config(&self) -> Result<CvConfig> {
        let stop = match self.stop_loss {
            Some(threshold) => StopPolicy::loss_threshold(threshold, self.epochs),
            None => StopPolicy::fixed(self.epochs),
        };
        let training = TrainingConfig {
            learning_rate: self.lr,
            momentum: self.momentum,
            stop,
            truncation: self.trunc.into(),
            fixed_point: FixedPointParams::new(self.frac_bits)?,
            class_weighting: if self.balanced { ClassWeighting::Balanced } else { ClassWeighting::Off },
            seed: self.seed,
            track_loss: self.track_loss,
        };
        let cv = CvConfig { training, k: self.folds, repeats: self.repeats, threshold: self.threshold, jobs: self.jobs };
        cv.validate()?;
        Ok(cv)
    }
}

impl OutputArgs {
    fn emit(&self, report: &CvReport) -> Result<()> {
        print!("{}", report.table());
        if let Some(path) = &self.json {
            let json = report.to_json(&ReportOptions { include_timing: self.timing })?;
            std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
        }
        Ok(())
    }
}

fn resolve(addr: &str) -> Result<SocketAddr> {
    addr.to_socket_addrs()
        .with_context(|| format!("resolving {addr}"))?
        .next()
        .with_context(|| format!("{addr} resolves to no address"))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let cv = args.train.cv_config()?;
    let data = args.data.load(args.train.seed)?;
    log::info!("{} samples, {} features", data.n(), data.d());
    let report = run_cv(&data, &cv)?;
    args.output.emit(&report)
}

fn party(args: PartyArgs) -> Result<()> {
    let cv = args.train.cv_config()?;
    let id = PartyId::new(args.id)?;
    let data = if id == COORDINATOR {
        Some(args.data.load(args.train.seed).context("the coordinator (party 0) needs the dataset")?)
    } else {
        if args.data.given() {
            log::warn!("party {id} ignores the dataset; party 0 deals all inputs");
        }
        None
    };
    if args.peers.len() != 2 {
        bail!("--peers needs exactly two addresses, got {}", args.peers.len());
    }
    let mut peers = args.peers.iter().map(|p| resolve(p)).collect::<Result<Vec<_>>>()?.into_iter();
    let listen = resolve(&args.listen)?;
    let mut addrs = [listen; 3];
    for p in PartyId::ALL.into_iter().filter(|p| *p != id) {
        addrs[p.index()] = peers.next().context("--peers needs two addresses")?;
    }
    // parties started with different seeds refuse each other at the handshake
    let mut nonce = [0u8; 32];
    nonce[..8].copy_from_slice(&args.train.seed.to_le_bytes());
    let mut config = MeshConfig::new(id, addrs, nonce, random_seed());
    config.connect_timeout = Duration::from_secs(args.connect_timeout);
    let mesh = connect_mesh(&config)?;
    let seeds = SessionSeeds { own: mesh.own_seed, next: mesh.next_seed, private: random_seed() };
    let (report, _) = run_cv_party(mesh.network, data.as_ref(), &cv, &seeds)?;
    args.output.emit(&report)
}

fn bench(args: BenchArgs) -> Result<()> {
    ensure!(!args.lengths.is_empty(), "--lengths needs at least one value");
    let rows = dot_product_bytes(&args.lengths, args.seed)?;
    println!("{:>8} {:>28} {:>28} {:>8}", "length", "payload bytes sent (P0,P1,P2)", "bytes incl. framing", "rounds");
    for r in &rows {
        let triple = |v: [u64; 3]| format!("{}, {}, {}", v[0], v[1], v[2]);
        println!(
            "{:>8} {:>28} {:>28} {:>8}",
            r.length,
            triple(r.payload_bytes_sent),
            triple(r.bytes_sent),
            r.rounds[0]
        );
    }
    let constant = rows.iter().all(|r| r.payload_bytes_sent == rows[0].payload_bytes_sent);
    println!("per-party payload identical across lengths: {}", if constant { "yes" } else { "no" });
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&rows)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<()> {
    let cv = args.train.cv_config()?;
    let data = args.data.load(args.train.seed)?;
    let variants: &[OracleVariant] = match args.variant {
        Variant::Float => &[OracleVariant::Float],
        Variant::Fixed => &[OracleVariant::Fixed],
        Variant::Both => &[OracleVariant::Float, OracleVariant::Fixed],
    };
    let reports = variants.iter().map(|v| oracle_cv(&data, &cv, *v)).collect::<Result<Vec<_>, _>>()?;
    for report in &reports {
        print!("{}", report.table());
    }
    if let Some(path) = &args.output.json {
        let options = ReportOptions { include_timing: args.output.timing };
        let values = reports
            .iter()
            .map(|r| Ok(serde_json::from_str::<serde_json::Value>(&r.to_json(&options)?)?))
            .collect::<Result<Vec<_>>>()?;
        std::fs::write(path, serde_json::to_string_pretty(&values)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Simulate(args) => simulate(args),
        Command::Party(args) => party(args),
        Command::Bench(args) => bench(args),
        Command::Oracle(args) => oracle(args),
    }
}
