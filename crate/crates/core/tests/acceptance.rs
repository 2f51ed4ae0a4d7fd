//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line before
//! asserting, so `cargo test --test acceptance -- --nocapture` gives a
//! one-line-per-criterion summary.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use snaipw::audit::{calibration_bins, calibration_verdict, contract_report, predictability_audit, Status};
use snaipw::inference::{qv_report, sample_variance};
use snaipw::mc_engine::{mcse, run_design, McConfig, Method};
use snaipw::nuisance::{fit_forward, fit_leaky_full, zero_nuisance, LearnerConfig};
use snaipw::scoring::score_series;
use snaipw::simlab::{
    generate_mislogged, generate_trial, oracle_gap, second_moment_contribution, Design, DesignParams, DesignSpec,
    PolicyKind,
};

const SEED: u64 = 20_251_014;

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn verdict(id: u32, name: &str, ok: bool, details: String, elapsed: Duration, budget: Duration) {
    let within = elapsed <= budget;
    let status = if ok && within { "PASS" } else { "FAIL" };
    println!(
        "[{status}] criterion {id:>2}: {name} | {details} | {:.1}s (budget {}s)",
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    assert!(ok, "criterion {id} ({name}) failed: {details}");
    assert!(within, "criterion {id} ({name}) exceeded its runtime budget");
}

#[test]
fn criterion_01_quadratic_variation_identity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let len = rng.random_range(2..=5000usize);
        let loc: f64 = rng.random_range(-50.0..50.0);
        let scale: f64 = 10f64.powf(rng.random_range(-3.0..3.0));
        let values: Vec<f64> = (0..len)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                loc + scale * z
            })
            .collect();
        let theta0: f64 = loc + scale * rng.random_range(-3.0..3.0);
        let v = sample_variance(&values).unwrap();
        let q: f64 = values.iter().map(|p| (p - theta0) * (p - theta0)).sum();
        let n = len as f64;
        let lhs = (n - 1.0) * v.v_hat;
        let rhs = q - n * (v.theta_hat - theta0).powi(2);
        worst = worst.max((lhs - rhs).abs() / q.max(1.0));
        let rep = qv_report(&values, theta0).unwrap();
        worst = worst.max(rep.identity_residual.abs() / rep.q_t.max(1.0));
    }
    verdict(
        1,
        "(n_eff-1)V = Q - n_eff(theta-theta0)^2",
        worst <= 1e-9,
        format!("max scaled residual {worst:.3e} <= 1e-9 over 1000 series"),
        start.elapsed(),
        Duration::from_secs(5),
    );
}

/// `E[(φ−θ0)²]` by summing over `A ∈ {0,1}` with the Gaussian residual
/// moments `E[ε_a] = 0`, `E[ε_a²] = σ_a²` taken analytically.
fn enumerated_second_moment(pi: f64, s0: f64, s1: f64, b0: f64, b1: f64, tau: f64, theta0: f64) -> f64 {
    // A = 1: φ − θ0 = c1 + ε1/π
    let c1 = tau - theta0 + b1 - b0 - b1 / pi;
    // A = 0: φ − θ0 = c0 − ε0/(1−π)
    let c0 = tau - theta0 + b1 - b0 + b0 / (1.0 - pi);
    pi * (c1 * c1 + s1 / (pi * pi)) + (1.0 - pi) * (c0 * c0 + s0 / ((1.0 - pi) * (1.0 - pi)))
}

#[test]
fn criterion_02_variance_decomposition() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let pi = rng.random_range(0.05..=0.95);
        let s0 = rng.random_range(0.0..10.0);
        let s1 = rng.random_range(0.0..10.0);
        let b0 = rng.random_range(-3.0..3.0);
        let b1 = rng.random_range(-3.0..3.0);
        let tau = rng.random_range(-2.0..2.0);
        let theta0 = rng.random_range(-2.0..2.0);
        let e = enumerated_second_moment(pi, s0, s1, b0, b1, tau, theta0);
        let f = second_moment_contribution(pi, s0, s1, b0, b1, tau, theta0);
        worst = worst.max((e - f).abs() / e.abs().max(1.0));
    }
    verdict(
        2,
        "four-term conditional second moment",
        worst <= 1e-12,
        format!("max relative gap {worst:.3e} <= 1e-12 over 1000 grid points"),
        start.elapsed(),
        Duration::from_secs(5),
    );
}

#[test]
fn criterion_03_martingale_difference() {
    let start = Instant::now();
    let n = 500;
    let reps = 2000u64;
    let indices = [51usize, 137, 250, 401, 500];
    let mut sums = [0.0f64; 5];
    let mut sq = [0.0f64; 5];
    for rep in 0..reps {
        let trial = generate_trial(&DesignSpec::new(Design::C2, n, SEED, rep)).unwrap();
        let (fits, _) = fit_forward(&trial.log, &trial.plan, &LearnerConfig::linear()).unwrap();
        let s = score_series(&trial.log, &trial.plan, &fits).unwrap();
        for (j, &t) in indices.iter().enumerate() {
            let v = s.value_at(t).unwrap();
            sums[j] += v;
            sq[j] += v * v;
        }
    }
    let r = reps as f64;
    let mut ok = true;
    let mut parts = Vec::new();
    for j in 0..indices.len() {
        let mean = sums[j] / r;
        let se = ((sq[j] / r - mean * mean) * r / (r - 1.0) / r).sqrt();
        ok &= mean.abs() <= 4.0 * se;
        parts.push(format!("t={}: {:+.3}/{:.3}", indices[j], mean, se));
    }
    verdict(
        3,
        "forward scores are centered at theta0 (C2)",
        ok,
        format!("mean/se {}", parts.join(", ")),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_04_design_b_stabilization() {
    let start = Instant::now();
    let mut cfg = McConfig::new(Design::B, vec![1000], 500, SEED);
    cfg.workers = workers();
    let table = run_design(&cfg).unwrap();
    let sn = table.row(1000, Method::Sn, None).unwrap();
    let fv = table.row(1000, Method::FixedV, None).unwrap();
    let band = 3.0 * mcse(0.95, 500);
    let rel = (sn.avg_length - fv.avg_length).abs() / fv.avg_length;
    let ok = (sn.coverage - 0.95).abs() <= band && rel <= 0.02;
    verdict(
        4,
        "Design B SN coverage and length vs Fixed-V",
        ok,
        format!(
            "SN coverage {:.3} in 0.95±{band:.4}; lengths SN {:.3} / Fixed-V {:.3}, rel diff {rel:.4} <= 0.02",
            sn.coverage, sn.avg_length, fv.avg_length
        ),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

#[test]
fn criterion_05_design_a_conditional_coverage() {
    let start = Instant::now();
    let mut cfg = McConfig::new(Design::A, vec![1000], 1000, SEED);
    cfg.methods = vec![Method::Sn, Method::FixedV];
    cfg.workers = workers();
    let table = run_design(&cfg).unwrap();
    let get = |m, g| table.row(1000, m, Some(g)).map(|r| r.coverage).unwrap();
    let (fv_low, fv_high) = (get(Method::FixedV, 0.2), get(Method::FixedV, 0.8));
    let (sn_low, sn_high) = (get(Method::Sn, 0.2), get(Method::Sn, 0.8));
    let in_band = |c: f64| (0.93..=0.97).contains(&c);
    let ok = fv_low <= 0.92 && fv_high >= 0.975 && in_band(sn_low) && in_band(sn_high);
    verdict(
        5,
        "Design A coverage by regime",
        ok,
        format!(
            "Fixed-V pi=0.2 {fv_low:.3} (<=0.92), pi=0.8 {fv_high:.3} (>=0.975); SN {sn_low:.3} / {sn_high:.3} in [0.93,0.97]"
        ),
        start.elapsed(),
        Duration::from_secs(120),
    );
}

#[test]
fn criterion_06_variance_ratio_modes() {
    let start = Instant::now();
    let reps = 500;
    let mut cfg = McConfig::new(Design::A, vec![1000], reps, SEED);
    cfg.workers = workers();
    let hist = snaipw::mc_engine::variance_ratio_histogram(&cfg, 1000, 30).unwrap();
    let exact = hist.values.iter().all(|&v| v == 16.25 || v == 46.25);
    let high = hist.values.iter().filter(|&&v| v == 16.25).count() as f64 / reps as f64;
    let consistent = hist
        .values
        .iter()
        .zip(&hist.regimes)
        .all(|(&v, g)| (v == 16.25) == (*g == Some(0.8)));
    let band = 3.0 * mcse(0.5, reps);
    let ok = exact && consistent && (high - 0.5).abs() <= band;
    verdict(
        6,
        "Design A variance ratio in {16.25, 46.25}",
        ok,
        format!("all exact: {exact}; share at 16.25 = {high:.3}, |share-0.5| <= {band:.4}"),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_07_design_d_mislogging() {
    let start = Instant::now();
    let mut cfg = McConfig::new(Design::D, vec![1000], 500, SEED);
    if let DesignParams::D(d) = &mut cfg.params {
        d.policy = PolicyKind::EpsGreedy { epsilon: 0.1 };
    }
    cfg.methods = vec![Method::SnAipw, Method::SnIpwAssume0p5];
    cfg.workers = workers();
    let table = run_design(&cfg).unwrap();
    let aipw = table.row(1000, Method::SnAipw, None).unwrap();
    let bad = table.row(1000, Method::SnIpwAssume0p5, None).unwrap();
    let ok = bad.coverage <= 0.10 && bad.bias.abs() >= 0.5 && (0.93..=0.97).contains(&aipw.coverage);
    verdict(
        7,
        "Design D analysis-time mis-logging",
        ok,
        format!(
            "Assume0p5 coverage {:.3} (<=0.10), bias {:.3} (|.|>=0.5); SN-AIPW coverage {:.3} in [0.93,0.97]",
            bad.coverage, bad.bias, aipw.coverage
        ),
        start.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_08_design_c1_leakage() {
    let start = Instant::now();
    let mut cfg = McConfig::new(Design::C1, vec![250], 500, SEED);
    cfg.methods = vec![Method::SnAipwPredictable, Method::SnAipwLeakyFull];
    cfg.workers = workers();
    let table = run_design(&cfg).unwrap();
    let pred = table.row(250, Method::SnAipwPredictable, None).unwrap();
    let leak = table.row(250, Method::SnAipwLeakyFull, None).unwrap();
    let ok = pred.coverage >= 0.93 && leak.coverage <= 0.90 && leak.reject_rate >= 2.0 * pred.reject_rate;
    verdict(
        8,
        "Design C1 predictable vs leaky nuisance",
        ok,
        format!(
            "predictable coverage {:.3} (>=0.93), reject {:.3}; leaky coverage {:.3} (<=0.90), reject {:.3} (>=2x)",
            pred.coverage, pred.reject_rate, leak.coverage, leak.reject_rate
        ),
        start.elapsed(),
        Duration::from_secs(180),
    );
}

#[test]
fn criterion_09_design_c2_precision_ordering() {
    let start = Instant::now();
    let mut cfg = McConfig::new(Design::C2, vec![5000], 200, SEED);
    cfg.workers = workers();
    let table = run_design(&cfg).unwrap();
    let row = |m| table.row(5000, m, None).unwrap();
    let (o, w, m, i) = (
        row(Method::SnAipwOracle),
        row(Method::SnAipwWellSpec),
        row(Method::SnAipwMisspec),
        row(Method::SnIpw),
    );
    let rel = |r: &snaipw::mc_engine::McRow| r.mean_v_hat / o.mean_v_hat;
    let ordered = rel(o) <= rel(w) && rel(w) <= rel(m) && rel(m) <= rel(i);
    let ratio = rel(i);
    let covs = [o.coverage, w.coverage, m.coverage, i.coverage];
    let ok = ordered && (3.5..=4.5).contains(&ratio) && covs.iter().all(|c| (0.92..=0.98).contains(c));
    verdict(
        9,
        "Design C2 precision ordering",
        ok,
        format!(
            "rel V: well {:.3}, mis {:.3}, ipw {:.3} (in [3.5,4.5]); coverages {:.3}/{:.3}/{:.3}/{:.3}",
            rel(w),
            rel(m),
            ratio,
            covs[0],
            covs[1],
            covs[2],
            covs[3]
        ),
        start.elapsed(),
        Duration::from_secs(300),
    );
}

fn mean_sq_gap(n: usize, reps: u64) -> f64 {
    let total: f64 = (0..reps)
        .map(|rep| {
            let trial = generate_trial(&DesignSpec::new(Design::C2, n, SEED, rep)).unwrap();
            let (fits, _) = fit_forward(&trial.log, &trial.plan, &LearnerConfig::linear()).unwrap();
            oracle_gap(&trial, &trial.plan, &fits).unwrap().powi(2)
        })
        .sum();
    total / reps as f64
}

#[test]
fn criterion_10_oracle_equivalence() {
    let start = Instant::now();
    let small = mean_sq_gap(500, 200);
    let large = mean_sq_gap(5000, 200);
    verdict(
        10,
        "oracle gap shrinks with n (C2 well-specified)",
        large < 0.5 * small,
        format!("mean sq gap n=500 {small:.4}, n=5000 {large:.4} (< half)"),
        start.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_11_audit_fault_injection() {
    let start = Instant::now();
    let bad = generate_mislogged(&DesignSpec::new(Design::B, 10_000, SEED, 0), 0.8, 0.5).unwrap();
    let cal = calibration_verdict(&calibration_bins(&bad.log, 10, 50).unwrap());

    let clean = generate_trial(&DesignSpec::new(Design::B, 1000, SEED, 1)).unwrap();
    let eps = clean.spec.params.overlap_epsilon();
    let clean_ledger = snaipw::nuisance::FitLedger::for_fixed(&clean.plan, zero_nuisance().mode());
    let clean_report = contract_report(&clean.log, &clean.plan, &clean_ledger, eps, 1000, 10, 50);
    let clean_ok = clean_report.verdicts.iter().all(|v| v.status == Status::Pass);

    let c2 = generate_trial(&DesignSpec::new(Design::C2, 1000, SEED, 2)).unwrap();
    let (_, leaky) = fit_leaky_full(&c2.log, &c2.plan, &LearnerConfig::linear()).unwrap();
    let leak = predictability_audit(&leaky, &c2.plan).unwrap();

    let ok = cal.status == Status::Warn && leak.status == Status::Fail && clean_ok;
    verdict(
        11,
        "audit fault injection",
        ok,
        format!(
            "mis-logged calibration {}, leaky predictability {}, clean design B all pass: {clean_ok}",
            cal.status, leak.status
        ),
        start.elapsed(),
        Duration::from_secs(10),
    );
}

fn simulate(out: &Path, workers: usize) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_snaipw"))
        .args(["simulate", "--design", "C2", "--n", "500,1000", "--R", "40", "--seed", "7"])
        .args(["--workers", &workers.to_string(), "--name", "det", "--out"])
        .arg(out)
        .env_remove("SNAIPW_SEED")
        .status()
        .unwrap();
    assert!(status.success());
    std::fs::read(out.join("simulate/det/table.csv")).unwrap()
}

#[test]
fn criterion_12_determinism_across_workers() {
    let start = Instant::now();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let one = simulate(a.path(), 1);
    let four = simulate(b.path(), 4);
    verdict(
        12,
        "simulate is bit-identical for 1 and 4 workers",
        one == four && !one.is_empty(),
        format!("table.csv {} bytes, identical: {}", one.len(), one == four),
        start.elapsed(),
        Duration::from_secs(60),
    );
}
