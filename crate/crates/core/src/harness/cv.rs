use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use super::metrics::ConfusionCounts;
use super::report::{CvReport, FoldResult, FoldTiming, PartyComm};
use super::{HarnessError, LabeledDataset};
use crate::rss::{derive_session_seeds, fork_seeds, Session, SessionSeeds};
use crate::trainer::{classify, predict, train, SecretDataset, TrainingConfig};
use crate::transport::{loopback_networks, run_trio, CommStats, Network, PartyId};

/// The party that owns the data and plans the folds.
pub const COORDINATOR: PartyId = PartyId::P0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub training: TrainingConfig,
    pub k: usize,
    pub repeats: usize,
    /// Probability at or above which a sample is classified positive.
    pub threshold: f64,
    /// Folds run concurrently in loopback mode, each in its own session.
    #[serde(default = "one")]
    pub jobs: usize,
}

fn one() -> usize {
    1
}

impl CvConfig {
    pub fn new(training: TrainingConfig) -> Self {
        CvConfig { training, k: 5, repeats: 20, threshold: 0.5, jobs: 1 }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.training.validate()?;
        if self.k < 2 {
            return Err(HarnessError::InvalidArgument(format!("need at least 2 folds, got {}", self.k)));
        }
        if self.repeats == 0 || self.jobs == 0 {
            return Err(HarnessError::InvalidArgument("repeats and jobs must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(HarnessError::InvalidArgument(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMode {
    Loopback,
    Networked,
}

/// Fold index of every sample for one repeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub repeat: usize,
    pub k: usize,
    pub assignment: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub repeat: usize,
    pub index: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl FoldPlan {
    pub fn folds(&self) -> Vec<Fold> {
        (0..self.k)
            .map(|index| {
                let (test, train): (Vec<usize>, Vec<usize>) =
                    (0..self.assignment.len()).partition(|i| self.assignment[*i] == index);
                Fold { repeat: self.repeat, index, train, test }
            })
            .collect()
    }
}

/// Fewest samples per class: every training split must keep both classes.
pub const MIN_CLASS_SIZE: usize = 2;

/// Per repeat, shuffle with a seeded generator and deal each class round
/// robin, continuing the count from one class to the next. A class with
/// fewer than `k` samples leaves some test folds without it.
pub fn stratified_kfold(labels: &[bool], k: usize, repeats: usize, seed: u64) -> Result<Vec<FoldPlan>, HarnessError> {
    if k < 2 || k > labels.len() {
        return Err(HarnessError::InvalidArgument(format!("cannot split {} samples into {k} folds", labels.len())));
    }
    for class in [true, false] {
        let count = labels.iter().filter(|y| **y == class).count();
        if count < MIN_CLASS_SIZE {
            return Err(HarnessError::ClassTooSmall { class: u8::from(class), count, min: MIN_CLASS_SIZE });
        }
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut plans = Vec::with_capacity(repeats);
    for repeat in 0..repeats {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(&mut rng);
        let mut assignment = vec![0; labels.len()];
        let mut next = 0;
        for class in [true, false] {
            for i in order.iter().filter(|i| labels[**i] == class) {
                assignment[*i] = next % k;
                next += 1;
            }
        }
        plans.push(FoldPlan { repeat, k, assignment });
    }
    Ok(plans)
}

pub(crate) fn fold_plans(data: &LabeledDataset, cv: &CvConfig) -> Result<Vec<FoldPlan>, HarnessError> {
    cv.validate()?;
    stratified_kfold(data.labels(), cv.k, cv.repeats, cv.training.seed)
}

/// Session seeds of fold `fold` derived from a party's base seeds.
pub fn fold_seeds(base: &SessionSeeds, fold: usize) -> SessionSeeds {
    fork_seeds(base, fold as u64)
}

/// Public shape of one fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct FoldShape {
    n_train: usize,
    n_test: usize,
    d: usize,
}

/// What one party learns from a fold.
struct FoldOutcome {
    counts: ConfusionCounts,
    epochs: u32,
    stopped_early: bool,
    timing: FoldTiming,
    comm: CommStats,
}

fn encode_counts(c: &ConfusionCounts) -> Vec<u8> {
    [c.tp, c.fp, c.tn, c.fn_].iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn decode_counts(bytes: &[u8]) -> Result<ConfusionCounts, HarnessError> {
    if bytes.len() != 32 {
        return Err(HarnessError::InvalidArgument(format!("confusion counts message of {} bytes", bytes.len())));
    }
    let v: Vec<u64> = bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok(ConfusionCounts::new(v[0], v[1], v[2], v[3]))
}

/// Share, train, classify and score one fold. Only the coordinator passes
/// the data; it sends the resulting counts to the others.
fn secure_fold(
    s: &mut Session,
    data: Option<&LabeledDataset>,
    fold: &Fold,
    shape: FoldShape,
    cv: &CvConfig,
) -> Result<FoldOutcome, HarnessError> {
    let before = s.stats().clone();
    let start = Instant::now();
    let split = match data {
        Some(data) => Some((data.subset(&fold.train)?, data.subset(&fold.test)?)),
        None => None,
    };
    let train_values = split.as_ref().map(|(t, _)| t.label_values());
    let train_data = split.as_ref().zip(train_values.as_ref()).map(|((t, _), y)| (t.features(), &y[..]));
    let secret = SecretDataset::share(s, COORDINATOR, train_data, shape.n_train, shape.d)?;
    let test_flat = split.as_ref().map(|(_, t)| t.features().concat());
    let test = s.share_fixed(COORDINATOR, test_flat.as_deref(), shape.n_test * shape.d)?;
    let test_rows: Vec<Vec<_>> = test.elems().chunks_exact(shape.d).map(<[_]>::to_vec).collect();
    let shared = Instant::now();

    let out = train(s, &secret, &cv.training)?;
    let trained = Instant::now();

    let previous = s.trunc_mode();
    s.set_trunc_mode(cv.training.truncation);
    let labels = predict(s, &out.model, &test_rows).and_then(|p| classify(s, &p, cv.threshold));
    s.set_trunc_mode(previous);
    let labels = labels?;
    let classified = Instant::now();

    let counts = match &split {
        Some((_, test)) => {
            let counts = ConfusionCounts::from_predictions(test.labels(), &labels)?;
            for peer in s.id().peers() {
                s.network_mut().send(peer, &encode_counts(&counts))?;
            }
            counts
        }
        None => decode_counts(&s.network_mut().recv(COORDINATOR)?)?,
    };
    let seconds = |d: Duration| d.as_secs_f64();
    let training = trained - shared;
    Ok(FoldOutcome {
        counts,
        epochs: out.epochs,
        stopped_early: out.stopped_early,
        timing: FoldTiming {
            share_seconds: seconds(shared - start),
            preprocessing_seconds: seconds(out.preprocessing_time),
            online_seconds: seconds(training.saturating_sub(out.preprocessing_time)),
            training_seconds: seconds(training),
            classify_seconds: seconds(classified - trained),
            total_seconds: seconds(start.elapsed()),
        },
        comm: s.stats().since(&before),
    })
}

fn shape_of(fold: &Fold, d: usize) -> FoldShape {
    FoldShape { n_train: fold.train.len(), n_test: fold.test.len(), d }
}

fn fold_result(fold: &Fold, outcome: &FoldOutcome, comm: Vec<PartyComm>) -> Result<FoldResult, HarnessError> {
    FoldResult::secure(
        fold.repeat,
        fold.index,
        outcome.counts,
        outcome.epochs,
        outcome.stopped_early,
        outcome.timing.clone(),
        comm,
    )
}

/// Cross-validate with all three parties in this process.
pub fn run_cv(data: &LabeledDataset, cv: &CvConfig) -> Result<CvReport, HarnessError> {
    let folds: Vec<Fold> = fold_plans(data, cv)?.iter().flat_map(FoldPlan::folds).collect();
    let base = derive_session_seeds(cv.training.seed);
    let params = cv.training.fixed_point;
    let results: Mutex<Vec<Option<Result<FoldResult, HarnessError>>>> =
        Mutex::new((0..folds.len()).map(|_| None).collect());
    let cursor = AtomicUsize::new(0);
    let worker = || loop {
        let number = cursor.fetch_add(1, Ordering::Relaxed);
        let Some(fold) = folds.get(number) else { break };
        let shape = shape_of(fold, data.d());
        let sessions = loopback_networks().map(|net| {
            let seeds = fold_seeds(&base[net.id().index()], number);
            Session::new(net, &seeds, params).with_trunc_mode(cv.training.truncation)
        });
        let outcome = run_trio(sessions, |mut s| {
            let mine = (s.id() == COORDINATOR).then_some(data);
            secure_fold(&mut s, mine, fold, shape, cv)
        });
        let result = outcome
            .map_err(|e| e.source)
            .and_then(|all| {
                let comm = all.iter().enumerate().map(|(p, o)| PartyComm::from_stats(p as u8, &o.comm)).collect();
                fold_result(fold, &all[COORDINATOR.index()], comm)
            })
            .map_err(|e| HarnessError::Fold { fold: number, source: Box::new(e) });
        log::info!("fold {number} of {} done", folds.len());
        results.lock().expect("result lock")[number] = Some(result);
    };
    std::thread::scope(|scope| {
        for _ in 0..cv.jobs.min(folds.len()).max(1) {
            scope.spawn(&worker);
        }
    });
    let results = results.into_inner().expect("result lock");
    let folds = results.into_iter().map(|r| r.expect("every fold ran")).collect::<Result<Vec<_>, _>>()?;
    let comm = PartyComm::totals(&folds);
    CvReport::new(cv, "mpc-loopback", folds, comm)
}

/// Fold plan and configuration announced by the coordinator.
#[derive(Debug, Serialize, Deserialize)]
struct PlanMessage {
    config: CvConfig,
    d: usize,
    plans: Vec<FoldPlan>,
}

/// Cross-validate as one networked party. The coordinator passes the data,
/// plans the folds and announces the plan; every party must run the same
/// configuration. `seeds` are the party's base seeds from the mesh handshake.
pub fn run_cv_party(
    mut net: Network,
    data: Option<&LabeledDataset>,
    cv: &CvConfig,
    seeds: &SessionSeeds,
) -> Result<(CvReport, Network), HarnessError> {
    cv.validate()?;
    let me = net.id();
    let (plans, d) = if me == COORDINATOR {
        let data = data.ok_or_else(|| HarnessError::InvalidArgument("the coordinator needs the dataset".into()))?;
        let plans = fold_plans(data, cv)?;
        let message = serde_json::to_vec(&PlanMessage { config: cv.clone(), d: data.d(), plans: plans.clone() })
            .map_err(|e| HarnessError::InvalidArgument(e.to_string()))?;
        for peer in me.peers() {
            net.send(peer, &message)?;
        }
        (plans, data.d())
    } else {
        let message: PlanMessage = serde_json::from_slice(&net.recv(COORDINATOR)?)
            .map_err(|e| HarnessError::InvalidArgument(format!("bad fold plan from the coordinator: {e}")))?;
        if message.config != *cv {
            return Err(HarnessError::InvalidArgument(
                "configuration differs from the coordinator's; launch all parties with identical flags".into(),
            ));
        }
        (message.plans, message.d)
    };
    let folds: Vec<Fold> = plans.iter().flat_map(FoldPlan::folds).collect();
    let params = cv.training.fixed_point;
    let mut results = Vec::with_capacity(folds.len());
    for (number, fold) in folds.iter().enumerate() {
        let mut s = Session::new(net, &fold_seeds(seeds, number), params).with_trunc_mode(cv.training.truncation);
        let mine = if me == COORDINATOR { data } else { None };
        let outcome = secure_fold(&mut s, mine, fold, shape_of(fold, d), cv)
            .map_err(|e| HarnessError::Fold { fold: number, source: Box::new(e) })?;
        net = s.into_network();
        let comm = vec![PartyComm::from_stats(me.index() as u8, &outcome.comm)];
        results.push(fold_result(fold, &outcome, comm)?);
        log::info!("fold {number} of {} done", folds.len());
    }
    let comm = PartyComm::totals(&results);
    Ok((CvReport::new(cv, "mpc-networked", results, comm)?, net))
}
