use rsstrain::nonlinear::{
    cross_entropy, cross_entropy_loss, log_budget, log_fixed, log_secure, loss_budget, sigmoid,
    sigmoid_budget, sigmoid_fixed, sigmoid_secure, ApproxSpec,
};
use rsstrain::numeric::{decode, encode, FixedPointParams, RingElement};
use rsstrain::rss::{run_sessions_with, ShareVector, TruncMode};
use rsstrain::transport::PartyId;

fn params() -> FixedPointParams {
    FixedPointParams::default()
}

fn secure_sigmoid(xs: &[f64], mode: TruncMode) -> Vec<RingElement> {
    let p = params();
    let out = run_sessions_with(101, p, mode, |s| {
        let budget = sigmoid_budget(&p, xs.len(), mode).unwrap();
        s.preprocess(&budget)?;
        let mine = (s.id() == PartyId::P0).then_some(xs);
        let x = s.share_fixed(PartyId::P0, mine, xs.len())?;
        let y = sigmoid_secure(s, &x, &ApproxSpec::sigmoid(&p)).unwrap();
        assert!(s.pool_remaining().is_empty());
        s.open_vec(&y)
    })
    .unwrap();
    out[0].clone()
}

fn secure_log(ps: &[f64]) -> Vec<RingElement> {
    let p = params();
    let out = run_sessions_with(102, p, TruncMode::Exact, |s| {
        s.preprocess(&log_budget(&p, ps.len(), TruncMode::Exact).unwrap())?;
        let mine = (s.id() == PartyId::P1).then_some(ps);
        let x = s.share_fixed(PartyId::P1, mine, ps.len())?;
        let y = log_secure(s, &x, &ApproxSpec::log(&p)).unwrap();
        s.open_vec(&y)
    })
    .unwrap();
    out[2].clone()
}

#[test]
fn secure_sigmoid_equals_cleartext_twin() {
    let p = params();
    let xs: Vec<f64> = (-300..=300).map(|k| k as f64 / 20.0).chain([0.0, 1e-5, -1e-5, 40.0, -40.0]).collect();
    let got = secure_sigmoid(&xs, TruncMode::Exact);
    for (x, g) in xs.iter().zip(&got) {
        let want = sigmoid_fixed(encode(*x, &p).unwrap(), &p).unwrap();
        assert_eq!(*g, want, "x = {x}");
    }
}

#[test]
fn secure_sigmoid_examples() {
    let p = params();
    let got = secure_sigmoid(&[0.0, 2.0], TruncMode::Exact);
    assert!((decode(got[0], &p) - 0.5).abs() <= 2f64.powi(-10));
    assert!((decode(got[1], &p) - 0.880797).abs() <= 2f64.powi(-10));
}

#[test]
fn probabilistic_sigmoid_stays_accurate() {
    let p = params();
    let xs: Vec<f64> = (-80..=80).map(|k| k as f64 / 10.0).collect();
    let got = secure_sigmoid(&xs, TruncMode::Probabilistic);
    for (x, g) in xs.iter().zip(&got) {
        let v = decode(*g, &p);
        assert!((v - sigmoid(*x)).abs() <= 2f64.powi(-10) + 2f64.powi(-16), "x {x} v {v}");
        assert!((2f64.powi(-16)..=1.0 - 2f64.powi(-16)).contains(&v));
    }
}

#[test]
fn secure_log_equals_cleartext_twin() {
    let p = params();
    let ps: Vec<f64> = (1..=64).map(|k| k as f64 / 64.0).chain([2f64.powi(-16), 0.1, 0.25, 0.4, 0.2, 0.5, 0.8]).collect();
    let got = secure_log(&ps);
    for (x, g) in ps.iter().zip(&got) {
        let e = encode(*x, &p).unwrap();
        assert_eq!(*g, log_fixed(e, &p).unwrap(), "p = {x}");
        assert!((decode(*g, &p) - x.ln()).abs() <= 2f64.powi(-8));
    }
}

#[test]
fn log_functional_equation() {
    let p = params();
    let ps = [0.1, 0.2, 0.25, 0.5, 0.4, 0.8, 1.0];
    let got: Vec<f64> = secure_log(&ps).iter().map(|g| decode(*g, &p)).collect();
    assert!(got[6].abs() <= 2f64.powi(-8));
    assert!((got[3] + 0.693147).abs() <= 2f64.powi(-8));
    for (a, b) in [(0, 1), (2, 3), (4, 5)] {
        assert!((got[b] - got[a] - std::f64::consts::LN_2).abs() <= 2f64.powi(-7));
    }
}

fn secure_loss(pv: &[f64], yv: &[f64], mode: TruncMode) -> f64 {
    let p = params();
    let n = pv.len();
    let out = run_sessions_with(103, p, mode, |s| {
        s.preprocess(&loss_budget(&p, n, mode).unwrap())?;
        let dealer = PartyId::P0;
        let probs = s.share_fixed(dealer, (s.id() == dealer).then_some(pv), n)?;
        let labels = s.share_fixed(dealer, (s.id() == dealer).then_some(yv), n)?;
        let l = cross_entropy_loss(s, &probs, &labels).unwrap();
        s.open(l)
    })
    .unwrap();
    decode(out[0], &p)
}

#[test]
fn loss_contracts() {
    let eps = 2f64.powi(-16);
    let perfect = secure_loss(&[1.0 - eps, eps, 1.0 - eps], &[1.0, 0.0, 1.0], TruncMode::Exact);
    assert!(perfect >= -2f64.powi(-7));
    assert!(perfect <= 2.0 * (1.0 - eps).ln().abs() + 2f64.powi(-7));

    let constant = secure_loss(&[0.5; 10], &[1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0], TruncMode::Exact);
    assert!((constant - std::f64::consts::LN_2).abs() <= 2f64.powi(-7));
}

#[test]
fn loss_matches_double_precision() {
    let n = 100;
    let pv: Vec<f64> = (0..n).map(|i| 0.02 + 0.96 * ((i * 37 % 100) as f64 / 100.0)).collect();
    let yv: Vec<f64> = (0..n).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
    let p = params();
    let decoded: Vec<f64> = pv.iter().map(|x| decode(encode(*x, &p).unwrap(), &p)).collect();
    let want = cross_entropy(&decoded, &yv);
    for mode in [TruncMode::Exact, TruncMode::Probabilistic] {
        let got = secure_loss(&pv, &yv, mode);
        assert!((got - want).abs() <= 1e-2, "{mode}: {got} vs {want}");
    }
}

#[test]
fn scale_mismatch_is_rejected() {
    let p = params();
    let out = run_sessions_with(104, p, TruncMode::Exact, |s| {
        let x = ShareVector::new(vec![s.public(RingElement::ONE)], 32);
        Ok(sigmoid_secure(s, &x, &ApproxSpec::sigmoid(&p)).is_err())
    })
    .unwrap();
    assert!(out.iter().all(|r| *r));
}
