//! Acceptance suite: one PASS, FAIL or SKIP line per criterion. Exits
//! non-zero when any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rsstrain::harness::{
    dot_product_bytes, f1_weighted, load_csv, run_cv, synthetic, train_fixed, ConfusionCounts, CsvOptions, CvConfig,
    SyntheticSpec,
};
use rsstrain::nonlinear::{log_budget, log_secure, sigmoid, sigmoid_budget, sigmoid_secure, ApproxSpec};
use rsstrain::numeric::{floor_shift, trunc_exact_ref, FixedPointParams, RingElement};
use rsstrain::rss::{run_sessions_with, PreprocessingBudget, RepShare, TruncMode};
use rsstrain::trainer::{StopPolicy, TrainingConfig};

use common::{secure_train, worst_gradient_error, Wire, DEALER};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Verdict;

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn random_elems(count: usize, seed: u64) -> Vec<RingElement> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..count).map(|_| RingElement(rng.gen())).collect()
}

fn protocol_correctness() -> Verdict {
    let start = Instant::now();
    let pairs = 10_000;
    let inputs = random_elems(2 * pairs, 1);
    let (dots, len) = (1_000, 10);
    let vectors = random_elems(2 * dots * len, 2);
    let out = run_sessions_with(3, FixedPointParams::default(), TruncMode::Exact, |s| {
        let mine = (s.id() == DEALER).then_some(&inputs[..]);
        let shared = s.share_input(DEALER, mine, inputs.len())?;
        let (a, b) = shared.split_at(pairs);
        let products = s.mul_many(a, b)?;
        let products = s.open_many(&products)?;

        let mine = (s.id() == DEALER).then_some(&vectors[..]);
        let shared = s.share_input(DEALER, mine, vectors.len())?;
        let (xs, ys) = shared.split_at(dots * len);
        let pairs: Vec<(&[RepShare], &[RepShare])> =
            xs.chunks(len).zip(ys.chunks(len)).collect();
        let dot = s.dot_many(&pairs)?;
        let dot = s.open_many(&dot)?;
        let elementwise = s.mul_many(xs, ys)?;
        let elementwise = s.open_many(&elementwise)?;
        Ok((products, dot, elementwise))
    })
    .expect("protocol run");
    let elapsed = start.elapsed().as_secs_f64();
    let (products, dot, elementwise) = &out[0];
    let mul_errors = (0..pairs).filter(|i| products[*i] != inputs[*i] * inputs[pairs + i]).count();
    let dot_errors = (0..dots)
        .filter(|j| {
            let sum = elementwise[j * len..(j + 1) * len].iter().fold(RingElement::ZERO, |acc, v| acc + *v);
            dot[*j] != sum
        })
        .count();
    verdict(
        mul_errors == 0 && dot_errors == 0 && elapsed < 30.0,
        format!("{mul_errors}/{pairs} wrong products, {dot_errors}/{dots} wrong dots, {elapsed:.2} s (limit 30 s)"),
    )
}

fn constant_communication() -> Verdict {
    let rows = dot_product_bytes(&[1, 100, 12_634], 4).expect("bench");
    let same = rows.iter().all(|r| r.payload_bytes_sent == rows[0].payload_bytes_sent);
    let summary: Vec<String> = rows.iter().map(|r| format!("len {}: {:?} B", r.length, r.payload_bytes_sent)).collect();
    verdict(same, summary.join("; "))
}

fn truncation_contracts() -> Verdict {
    let f = 16;
    let count = 10_000;
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    // operands below 2^27 in magnitude keep products under 2^54
    let operands: Vec<RingElement> =
        (0..2 * count).map(|_| RingElement::from_signed(rng.gen_range(-(1i64 << 27)..(1i64 << 27)))).collect();
    let trials = 100_000;
    let value = RingElement::from_signed((-1234i64 << f) - 19_661);
    let out = run_sessions_with(6, FixedPointParams::default(), TruncMode::Exact, |s| {
        let mine = (s.id() == DEALER).then_some(&operands[..]);
        let shared = s.share_input(DEALER, mine, operands.len())?;
        let (a, b) = shared.split_at(count);
        let products = s.mul_many(a, b)?;
        let mut budget = PreprocessingBudget::new();
        budget.add_trunc(TruncMode::Exact, f, count).add_trunc(TruncMode::Probabilistic, f, trials);
        s.preprocess(&budget)?;
        let exact = s.trunc_many_with(&products, f, TruncMode::Exact)?;
        let exact = s.open_many(&exact)?;
        let repeated = vec![s.public(value); trials];
        let prob = s.trunc_many_with(&repeated, f, TruncMode::Probabilistic)?;
        let prob = s.open_many(&prob)?;
        Ok((exact, prob))
    })
    .expect("truncation run");
    let (exact, prob) = &out[0];
    let exact_errors =
        (0..count).filter(|i| exact[*i] != trunc_exact_ref(operands[*i] * operands[count + i], f)).count();
    let floor = floor_shift(value, f);
    let outside = prob.iter().filter(|v| **v != floor && **v != floor + RingElement::ONE).count();
    let ups = prob.iter().filter(|v| **v == floor + RingElement::ONE).count() as f64;
    let frac = (value.0 & ((1 << f) - 1)) as f64 / (1u64 << f) as f64;
    let mean_offset = ups / trials as f64;
    let sigma = (frac * (1.0 - frac) / trials as f64).sqrt();
    let z = (mean_offset - frac) / sigma;
    verdict(
        exact_errors == 0 && outside == 0 && z.abs() <= 4.0,
        format!(
            "exact {exact_errors}/{count} mismatches; probabilistic {outside}/{trials} outside {{floor, floor+1}}, \
             mean offset {mean_offset:.5} vs {frac:.5} ({z:+.2} sigma, limit 4)"
        ),
    )
}

fn nonlinear_accuracy() -> Verdict {
    let p = FixedPointParams::default();
    let grid: Vec<f64> = (0..4097).map(|i| -8.0 + 16.0 * i as f64 / 4096.0).collect();
    let logs: Vec<f64> = (0..4097).map(|i| 2f64.powf(-16.0 * (1.0 - i as f64 / 4096.0))).collect();
    let out = run_sessions_with(7, p, TruncMode::Exact, |s| {
        let mut budget = sigmoid_budget(&p, grid.len(), TruncMode::Exact).expect("budget");
        budget.merge(&log_budget(&p, logs.len(), TruncMode::Exact).expect("budget"));
        s.preprocess(&budget)?;
        let x = s.share_fixed(DEALER, (s.id() == DEALER).then_some(&grid[..]), grid.len())?;
        let y = sigmoid_secure(s, &x, &ApproxSpec::sigmoid(&p)).expect("sigmoid");
        let q = s.share_fixed(DEALER, (s.id() == DEALER).then_some(&logs[..]), logs.len())?;
        let l = log_secure(s, &q, &ApproxSpec::log(&p)).expect("log");
        Ok((s.open_vec(&y)?, s.open_vec(&l)?))
    })
    .expect("nonlinear run");
    let (ys, ls) = &out[0];
    let sig_err = grid.iter().zip(ys).map(|(x, y)| (p.decode(*y) - sigmoid(*x)).abs()).fold(0.0, f64::max);
    let log_err = logs
        .iter()
        .zip(ls)
        .map(|(v, l)| (p.decode(*l) - p.decode(p.encode(*v).unwrap()).ln()).abs())
        .fold(0.0, f64::max);
    verdict(
        sig_err <= 2f64.powi(-10) && log_err <= 2f64.powi(-8),
        format!("sigmoid max error {sig_err:.2e} (limit {:.2e}), log max error {log_err:.2e} (limit {:.2e})",
            2f64.powi(-10), 2f64.powi(-8)),
    )
}

fn oracle_equivalence() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for (n, d, epochs) in [(20, 5, 20), (100, 200, 10)] {
        let data = synthetic(&SyntheticSpec::new(n, d, 11)).expect("data");
        let cfg = TrainingConfig { stop: StopPolicy::fixed(epochs), truncation: TruncMode::Exact, ..Default::default() };
        let oracle = train_fixed(&data, &cfg).expect("oracle").model;
        for wire in [Wire::Loopback, Wire::Tcp] {
            let (model, _) = secure_train(&data, &cfg, wire, 12);
            let same = model == oracle;
            ok &= same;
            notes.push(format!("({n},{d}) {wire}: {}", if same { "identical" } else { "DIFFERENT" }));
        }
    }
    verdict(ok, notes.join(", "))
}

fn gradient_validity() -> Verdict {
    let worst = worst_gradient_error(20);
    verdict(worst <= 1e-3, format!("worst relative error over 20 instances {worst:.2e} (limit 1e-3)"))
}

fn desk_scale_learning() -> Verdict {
    let data = synthetic(&SyntheticSpec::new(200, 50, 13)).expect("data");
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get()).min(4);
    let training = TrainingConfig { stop: StopPolicy::fixed(100), ..Default::default() };
    let cv = CvConfig { repeats: 1, jobs, ..CvConfig::new(training) };
    let start = Instant::now();
    let fixed = run_cv(&data, &cv).expect("cv");
    let elapsed = start.elapsed().as_secs_f64();

    let stop = StopPolicy::loss_threshold(1e-4, 500);
    let threshold_cv = CvConfig { training: TrainingConfig { stop, ..cv.training.clone() }, ..cv.clone() };
    let early = run_cv(&data, &threshold_cv).expect("cv");
    let stopped = early.folds.iter().all(|f| f.stopped_early && f.epochs < 500);
    verdict(
        fixed.mean_weighted_f1 >= 0.98 && stopped && elapsed < 60.0,
        format!(
            "Fixed(100) F1 {:.4} (limit 0.98) in {elapsed:.1} s with {jobs} job(s) (limit 60 s); \
             loss threshold stopped every fold: {stopped} (mean {:.1} epochs, cap 500)",
            fixed.mean_weighted_f1, early.mean_epochs
        ),
    )
}

fn reproduce(var: &str, epochs: u32, target: f64, tolerance: f64) -> Option<String> {
    let path = std::env::var_os(var)?;
    let transpose = std::env::var(format!("{var}_TRANSPOSE")).is_ok_and(|v| v == "1" || v == "true");
    let data = match load_csv(&path, &CsvOptions { transpose, ..Default::default() }) {
        Ok(d) => d,
        Err(e) => return Some(format!("FAIL {var}: {e}")),
    };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let training = TrainingConfig { stop: StopPolicy::fixed(epochs), ..Default::default() };
    let cv = CvConfig { jobs, ..CvConfig::new(training) };
    Some(match run_cv(&data, &cv) {
        Ok(report) => {
            let ok = (report.mean_weighted_f1 - target).abs() <= tolerance;
            format!(
                "{} {var}: F1 {:.3} ± {:.3} (target {target} ± {tolerance}), {:.1} s per fold",
                if ok { "PASS" } else { "FAIL" },
                report.mean_weighted_f1,
                report.std_weighted_f1,
                report.mean_total_seconds
            )
        }
        Err(e) => format!("FAIL {var}: {e}"),
    })
}

fn published_scores() -> Verdict {
    let runs: Vec<String> = [("RSSTRAIN_GSE2034", 200, 0.674, 0.05), ("RSSTRAIN_BCTCGA", 100, 0.994, 0.02)]
        .iter()
        .filter_map(|(var, epochs, target, tol)| reproduce(var, *epochs, *target, *tol))
        .collect();
    if runs.is_empty() {
        return Verdict::Skip("set RSSTRAIN_GSE2034 and/or RSSTRAIN_BCTCGA to CSV paths to run".into());
    }
    verdict(runs.iter().all(|r| r.starts_with("PASS")), runs.join("; "))
}

fn f1_arithmetic() -> Verdict {
    let cases = [
        ((5, 0, 7, 0), Ratio::from_integer(1u64)),
        ((1, 1, 1, 1), Ratio::new(1, 2)),
        ((142, 83, 0, 0), Ratio::new(142, 225) * Ratio::new(284, 367)),
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for ((tp, fp, tn, fn_), exact) in cases {
        let got = f1_weighted(&ConfusionCounts::new(tp, fp, tn, fn_)).expect("f1").weighted;
        let want = *exact.numer() as f64 / *exact.denom() as f64;
        ok &= (got - want).abs() <= f64::EPSILON;
        notes.push(format!("{got:.4}"));
    }
    let gse = f1_weighted(&ConfusionCounts::new(142, 83, 0, 0)).expect("f1");
    ok &= (gse.weighted - 0.4884).abs() <= 5e-5 && gse.negative == 0.0;
    verdict(ok, format!("weighted F1 {}", notes.join(", ")))
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("protocol correctness", protocol_correctness),
        ("constant communication", constant_communication),
        ("truncation contracts", truncation_contracts),
        ("nonlinear accuracy", nonlinear_accuracy),
        ("oracle equivalence", oracle_equivalence),
        ("gradient validity", gradient_validity),
        ("learning at desk scale", desk_scale_learning),
        ("published scores (user data)", published_scores),
        ("F1 arithmetic", f1_arithmetic),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (number, (name, check)) in criteria.iter().enumerate() {
        let label = format!("{}. {name}", number + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Verdict::Fail(message)
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Verdict::Pass(detail) => println!("PASS {label}: {detail} [{secs:.1} s]"),
            Verdict::Skip(detail) => println!("SKIP {label}: {detail}"),
            Verdict::Fail(detail) => {
                failures += 1;
                println!("FAIL {label}: {detail} [{secs:.1} s]");
            }
        }
    }
    if failures > 0 {
        println!("acceptance: {failures} criterion/criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all evaluated criteria passed");
}
