//! Simulated adaptive experiments (Designs A, B, C1, C2, D) with their true
//! regression functions, conditional variances and target `θ0`.
//!
//! Each replication draws from four independent substreams: covariates,
//! outcome noise, assignment uniforms and policy randomness. Noise is drawn
//! for both arms on every unit so that the outcome stream never depends on
//! past assignments.

pub mod rng;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::experiment_log::{make_forward_plan, ExperimentLog, ForwardPlan, ScoredRule, UnitRecord};
use crate::inference::{compensated_sum, estimate};
use crate::nuisance::{
    fit_forward_block, oracle_nuisance, ClampBounds, FeatureMap, LearnerConfig, ModelPair, NuisanceFitSet,
    NuisanceMode, OracleFn,
};
use crate::scoring::score_series;

pub use rng::{fixed_stream, substream, StreamRole};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Design {
    A = 1,
    B = 2,
    C1 = 3,
    C2 = 4,
    D = 5,
}

impl Design {
    pub const ALL: [Design; 5] = [Design::A, Design::B, Design::C1, Design::C2, Design::D];
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Design::A => "A",
            Design::B => "B",
            Design::C1 => "C1",
            Design::C2 => "C2",
            Design::D => "D",
        })
    }
}

impl FromStr for Design {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(Design::A),
            "B" => Ok(Design::B),
            "C1" => Ok(Design::C1),
            "C2" => Ok(Design::C2),
            "D" => Ok(Design::D),
            _ => Err(SimError::UnknownDesign(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    /// Greedy arm gets `1 − ε/2`; ties (`τ̂ = 0`) go to arm 1.
    EpsGreedy { epsilon: f64 },
    /// `π = expit(τ̂ / T)`.
    Softmax { temperature: f64 },
}

impl FromStr for PolicyKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eps-greedy" | "eps_greedy" | "epsilon-greedy" => Ok(PolicyKind::EpsGreedy { epsilon: 0.1 }),
            "softmax" => Ok(PolicyKind::Softmax { temperature: 0.5 }),
            other => Err(SimError::InvalidParameter(format!("unknown policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsA {
    pub n0: usize,
    pub burn_pi: f64,
    pub pi_high: f64,
    pub pi_low: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub v_fix: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsB {
    pub pi: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub v_fix: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsC1 {
    pub p: usize,
    pub k: usize,
    pub burn_pi: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub tau0: f64,
    pub delta: f64,
    pub t_df: f64,
    /// Ridge penalty of the predictable learner (also drives the policy).
    pub ridge_lambda: f64,
    /// Ridge penalty of the full-sample leaky learner on the richer map.
    pub leaky_lambda: f64,
    pub clamp: f64,
    /// `m0(x) = c[0]·sin(x1) + c[1]·x2² + c[2]·x3 + c[3]·x4·x5`.
    pub m0_coefs: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsC2 {
    pub p: usize,
    pub rho: f64,
    pub pi: f64,
    pub k: usize,
    pub tau: f64,
    /// 0-based columns of the misspecified learner.
    pub misspec_cols: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsD {
    pub p: usize,
    pub rho: f64,
    pub n0: usize,
    pub block: usize,
    pub burn_pi: f64,
    pub policy: PolicyKind,
    pub clip_lo: f64,
    pub clip_hi: f64,
    pub clamp: f64,
    pub naive_folds: usize,
    pub theta0_draws: usize,
    pub theta0_seed: u64,
}

/// Fully explicit per-design parameters; the resolved value is what gets
/// persisted with every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design")]
pub enum DesignParams {
    A(ParamsA),
    B(ParamsB),
    C1(ParamsC1),
    C2(ParamsC2),
    D(ParamsD),
}

impl DesignParams {
    pub fn defaults(design: Design) -> Self {
        match design {
            Design::A => DesignParams::A(ParamsA {
                n0: 50,
                burn_pi: 0.5,
                pi_high: 0.8,
                pi_low: 0.2,
                sigma0: 1.0,
                sigma1: 3.0,
                v_fix: 31.25,
            }),
            Design::B => DesignParams::B(ParamsB {
                pi: 0.6,
                sigma0: 1.0,
                sigma1: 3.0,
                v_fix: 17.5,
            }),
            Design::C1 => DesignParams::C1(ParamsC1 {
                p: 20,
                k: 5,
                burn_pi: 0.5,
                epsilon: 0.1,
                lambda: 2.5,
                tau0: 0.0,
                delta: 0.2,
                t_df: 30.0,
                ridge_lambda: 1.0,
                leaky_lambda: 1e-3,
                clamp: 50.0,
                m0_coefs: [1.0, 0.5, -0.5, 0.25],
            }),
            Design::C2 => DesignParams::C2(ParamsC2 {
                p: 5,
                rho: 0.5,
                pi: 0.5,
                k: 10,
                tau: 0.0,
                misspec_cols: vec![0],
            }),
            Design::D => DesignParams::D(ParamsD {
                p: 10,
                rho: 0.3,
                n0: 100,
                block: 100,
                burn_pi: 0.5,
                policy: PolicyKind::EpsGreedy { epsilon: 0.1 },
                clip_lo: 0.05,
                clip_hi: 0.95,
                clamp: 50.0,
                naive_folds: 5,
                theta0_draws: 1_000_000,
                theta0_seed: 20_240_601,
            }),
        }
    }

    pub fn design(&self) -> Design {
        match self {
            DesignParams::A(_) => Design::A,
            DesignParams::B(_) => Design::B,
            DesignParams::C1(_) => Design::C1,
            DesignParams::C2(_) => Design::C2,
            DesignParams::D(_) => Design::D,
        }
    }

    /// Covariate dimension.
    pub fn dim(&self) -> usize {
        match self {
            DesignParams::A(_) | DesignParams::B(_) => 0,
            DesignParams::C1(c) => c.p,
            DesignParams::C2(c) => c.p,
            DesignParams::D(d) => d.p,
        }
    }

    /// Design-declared overlap bound, used by the audit.
    pub fn overlap_epsilon(&self) -> f64 {
        match self {
            DesignParams::A(a) => a.pi_low.min(1.0 - a.pi_high).min(a.burn_pi.min(1.0 - a.burn_pi)),
            DesignParams::B(b) => b.pi.min(1.0 - b.pi),
            DesignParams::C1(c) => c.epsilon,
            DesignParams::C2(c) => c.pi.min(1.0 - c.pi),
            DesignParams::D(d) => d.clip_lo.min(1.0 - d.clip_hi),
        }
    }

    /// Default fixed long-run variance for the Fixed-V interval.
    pub fn v_fix(&self) -> Option<f64> {
        match self {
            DesignParams::A(a) => Some(a.v_fix),
            DesignParams::B(b) => Some(b.v_fix),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub n: usize,
    pub master_seed: u64,
    pub rep: u64,
    pub params: DesignParams,
}

fn prob_ok(p: f64) -> bool {
    p > 0.0 && p < 1.0
}

impl DesignSpec {
    pub fn new(design: Design, n: usize, master_seed: u64, rep: u64) -> Self {
        Self {
            n,
            master_seed,
            rep,
            params: DesignParams::defaults(design),
        }
    }

    pub fn design(&self) -> Design {
        self.params.design()
    }

    pub fn with_rep(&self, rep: u64) -> Self {
        Self { rep, ..self.clone() }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidParameter(msg));
        let n = self.n;
        match &self.params {
            DesignParams::A(a) => {
                if a.n0 < 2 || n < a.n0 + 2 {
                    return bad(format!("design A needs n0 >= 2 and n >= n0 + 2 (n = {n}, n0 = {})", a.n0));
                }
                if ![a.burn_pi, a.pi_high, a.pi_low].into_iter().all(prob_ok) {
                    return bad("design A propensities must lie in (0,1)".into());
                }
                if !(a.sigma0 > 0.0 && a.sigma1 > 0.0 && a.v_fix > 0.0) {
                    return bad("design A scales and v_fix must be positive".into());
                }
            }
            DesignParams::B(b) => {
                if n < 2 || !prob_ok(b.pi) || !(b.sigma0 > 0.0 && b.sigma1 > 0.0 && b.v_fix > 0.0) {
                    return bad(format!("design B needs n >= 2, pi in (0,1), positive scales (n = {n}, pi = {})", b.pi));
                }
            }
            DesignParams::C1(c) => {
                if c.k < 2 || n < 2 * c.k {
                    return bad(format!("design C1 needs K >= 2 and n >= 2K (n = {n}, K = {})", c.k));
                }
                if c.p < 5 {
                    return bad("design C1 needs p >= 5".into());
                }
                if !(c.epsilon > 0.0 && c.epsilon < 0.5) || !prob_ok(c.burn_pi) {
                    return bad("design C1 epsilon must lie in (0, 0.5)".into());
                }
                if c.t_df <= 2.0 || c.ridge_lambda < 0.0 || c.leaky_lambda < 0.0 || !(c.clamp > 0.0) {
                    return bad("design C1 needs t_df > 2, non-negative ridge penalties, positive clamp".into());
                }
            }
            DesignParams::C2(c) => {
                if c.k < 2 || n < 2 * c.k || c.p < 2 || !prob_ok(c.pi) || !(c.rho.abs() < 1.0) {
                    return bad(format!("design C2 needs K >= 2, n >= 2K, p >= 2, |rho| < 1 (n = {n}, K = {})", c.k));
                }
                if c.misspec_cols.iter().any(|&j| j >= c.p) {
                    return bad("design C2 misspecified columns exceed p".into());
                }
            }
            DesignParams::D(d) => {
                if d.p < 5 || d.n0 < 2 || d.block == 0 || n < d.n0 + 2 || !(d.rho.abs() < 1.0) {
                    return bad(format!("design D needs p >= 5, n0 >= 2, block >= 1, n >= n0 + 2 (n = {n})"));
                }
                if !(0.0 < d.clip_lo && d.clip_lo < d.clip_hi && d.clip_hi < 1.0) || !prob_ok(d.burn_pi) {
                    return bad("design D clip bounds must satisfy 0 < lo < hi < 1".into());
                }
                match d.policy {
                    PolicyKind::EpsGreedy { epsilon } if !(epsilon > 0.0 && epsilon <= 1.0) => {
                        return bad("epsilon-greedy needs epsilon in (0, 1]".into())
                    }
                    PolicyKind::Softmax { temperature } if !(temperature > 0.0) => {
                        return bad("softmax temperature must be positive".into())
                    }
                    _ => {}
                }
                if d.naive_folds < 2 || d.theta0_draws == 0 {
                    return bad("design D needs naive_folds >= 2 and theta0_draws >= 1".into());
                }
            }
        }
        Ok(())
    }

    /// Forward plan the design prescribes.
    pub fn plan(&self) -> Result<ForwardPlan, SimError> {
        let plan = match &self.params {
            DesignParams::A(a) => crate::experiment_log::make_burnin_plan(self.n, a.n0),
            DesignParams::B(_) => ForwardPlan::all_scored(self.n),
            DesignParams::C1(c) => make_forward_plan(self.n, c.k),
            DesignParams::C2(c) => make_forward_plan(self.n, c.k),
            DesignParams::D(d) => ForwardPlan::sized_blocks(self.n, d.n0, d.block),
        };
        plan.map_err(|e| SimError::InvalidParameter(e.to_string()))
    }
}

pub fn expit(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// True outcome model of a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub theta0: f64,
    pub params: DesignParams,
}

impl Truth {
    pub fn for_params(params: &DesignParams) -> Self {
        let theta0 = match params {
            DesignParams::A(_) | DesignParams::B(_) => 0.0,
            DesignParams::C1(c) => c.tau0,
            DesignParams::C2(c) => c.tau,
            DesignParams::D(d) => design_d_theta0(d),
        };
        Self {
            theta0,
            params: params.clone(),
        }
    }

    pub fn m0(&self, x: &[f64]) -> f64 {
        match &self.params {
            DesignParams::A(_) | DesignParams::B(_) => 0.0,
            DesignParams::C1(c) => {
                let m = c.m0_coefs;
                m[0] * x[0].sin() + m[1] * x[1] * x[1] + m[2] * x[2] + m[3] * x[3] * x[4]
            }
            DesignParams::C2(_) => x[0] + x[1],
            DesignParams::D(_) => 0.8 * x[0] + 0.5 * x[1] * x[1] - 0.5 * x[2].cos() + 0.25 * x[3],
        }
    }

    pub fn tau(&self, x: &[f64]) -> f64 {
        match &self.params {
            DesignParams::A(_) | DesignParams::B(_) => 0.0,
            DesignParams::C1(c) => c.tau0 + c.delta * x[0].sin(),
            DesignParams::C2(c) => c.tau,
            DesignParams::D(_) => design_d_tau(x),
        }
    }

    pub fn m(&self, x: &[f64]) -> (f64, f64) {
        let m0 = self.m0(x);
        (m0, m0 + self.tau(x))
    }

    /// `(σ0²(x), σ1²(x))`.
    pub fn sigma_sq(&self, x: &[f64]) -> (f64, f64) {
        match &self.params {
            DesignParams::A(a) => (a.sigma0 * a.sigma0, a.sigma1 * a.sigma1),
            DesignParams::B(b) => (b.sigma0 * b.sigma0, b.sigma1 * b.sigma1),
            // t errors are rescaled to unit variance
            DesignParams::C1(_) | DesignParams::C2(_) => (1.0, 1.0),
            DesignParams::D(_) => {
                let s = 1.0 + 0.5 * x[0].abs();
                (s * s, s * s)
            }
        }
    }

    pub fn oracle_fn(&self) -> OracleFn {
        let truth = self.clone();
        Arc::new(move |x: &[f64]| truth.m(x))
    }
}

fn design_d_tau(x: &[f64]) -> f64 {
    0.5 * x[0] + 0.5 * x[1].sin() + 0.25 * f64::from(u8::from(x[2] > 0.0)) - 0.25 * x[3] * x[4]
}

type Theta0Cache = Mutex<HashMap<(u64, usize, u64, usize), f64>>;

fn theta0_cache() -> &'static Theta0Cache {
    static CACHE: OnceLock<Theta0Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `E[τ(X)]` for Design D by Monte Carlo over the covariate law, computed
/// once per parameter set and cached.
pub fn design_d_theta0(d: &ParamsD) -> f64 {
    let key = (d.theta0_seed, d.theta0_draws, d.rho.to_bits(), d.p);
    // held across the computation so concurrent replications wait instead of
    // repeating it
    let mut cache = theta0_cache().lock().unwrap_or_else(|e| e.into_inner());
    if let Some(v) = cache.get(&key) {
        return *v;
    }
    let mut rng = fixed_stream(d.theta0_seed, b"theta0-D");
    let mut x = vec![0.0; d.p];
    let v = compensated_sum((0..d.theta0_draws).map(|_| {
        ar1_covariates(&mut rng, d.rho, &mut x);
        design_d_tau(&x)
    })) / d.theta0_draws as f64;
    cache.insert(key, v);
    v
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Stationary Gaussian AR(1) vector: `Cov(x_i, x_j) = ρ^{|i−j|}`.
fn ar1_covariates(rng: &mut ChaCha8Rng, rho: f64, x: &mut [f64]) {
    let s = (1.0 - rho * rho).sqrt();
    let mut prev = 0.0;
    for (j, xj) in x.iter_mut().enumerate() {
        let z = std_normal(rng);
        *xj = if j == 0 { z } else { rho * prev + s * z };
        prev = *xj;
    }
}

/// One simulated experiment.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub spec: DesignSpec,
    pub log: ExperimentLog,
    pub plan: ForwardPlan,
    pub truth: Truth,
    /// Post-burn-in propensity in Design A.
    pub regime: Option<f64>,
    /// Burn-in IPW estimate in Design A.
    pub burn_estimate: Option<f64>,
    /// Propensities actually used by the randomization device.
    pub executed_pi: Vec<f64>,
}

impl TrialData {
    pub fn oracle_fits(&self) -> NuisanceFitSet {
        oracle_nuisance(self.truth.oracle_fn())
    }

    pub fn is_mislogged(&self) -> bool {
        self.log.records().iter().zip(&self.executed_pi).any(|(r, &p)| r.pi != p)
    }
}

/// Learner that drives the adaptive policy of C1 and D, and the predictable
/// nuisance fits scored for them.
pub fn policy_learner(params: &DesignParams) -> Option<LearnerConfig> {
    match params {
        DesignParams::C1(c) => Some(
            LearnerConfig::ridge(FeatureMap::Raw, c.ridge_lambda).with_clamp(Some(ClampBounds::new(-c.clamp, c.clamp))),
        ),
        DesignParams::D(d) => Some(LearnerConfig::linear().with_clamp(Some(ClampBounds::new(-d.clamp, d.clamp)))),
        _ => None,
    }
}

/// IPW estimate over the burn-in units.
pub fn burn_in_estimate(records: &[UnitRecord]) -> f64 {
    let terms = records.iter().map(|r| {
        if r.a == 1 {
            r.y / r.pi
        } else {
            -r.y / (1.0 - r.pi)
        }
    });
    compensated_sum(terms) / records.len() as f64
}

struct Streams {
    covariates: ChaCha8Rng,
    outcomes: ChaCha8Rng,
    assignment: ChaCha8Rng,
}

impl Streams {
    fn new(spec: &DesignSpec) -> Self {
        let s = |role| substream(spec.master_seed, spec.design(), spec.rep, role);
        Self {
            covariates: s(StreamRole::Covariates),
            outcomes: s(StreamRole::Outcomes),
            assignment: s(StreamRole::Assignment),
        }
    }
}

fn draw_x(params: &DesignParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = vec![0.0; params.dim()];
    match params {
        DesignParams::A(_) | DesignParams::B(_) => {}
        DesignParams::C1(_) => x.iter_mut().for_each(|v| *v = std_normal(rng)),
        DesignParams::C2(c) => ar1_covariates(rng, c.rho, &mut x),
        DesignParams::D(d) => ar1_covariates(rng, d.rho, &mut x),
    }
    x
}

/// Noise for both arms, `(ε0, ε1)`.
fn draw_noise(params: &DesignParams, t_dist: Option<&StudentT<f64>>, x: &[f64], rng: &mut ChaCha8Rng) -> (f64, f64) {
    match params {
        DesignParams::A(a) => (a.sigma0 * std_normal(rng), a.sigma1 * std_normal(rng)),
        DesignParams::B(b) => (b.sigma0 * std_normal(rng), b.sigma1 * std_normal(rng)),
        DesignParams::C1(c) => {
            let t = t_dist.expect("t distribution for C1");
            let scale = (c.t_df / (c.t_df - 2.0)).sqrt();
            (t.sample(rng) / scale, t.sample(rng) / scale)
        }
        DesignParams::C2(_) => (std_normal(rng), std_normal(rng)),
        DesignParams::D(_) => {
            let s = 1.0 + 0.5 * x[0].abs();
            (s * std_normal(rng), s * std_normal(rng))
        }
    }
}

fn d_policy(d: &ParamsD, tau_hat: f64) -> f64 {
    let raw = match d.policy {
        PolicyKind::EpsGreedy { epsilon } => {
            if tau_hat >= 0.0 {
                1.0 - epsilon / 2.0
            } else {
                epsilon / 2.0
            }
        }
        PolicyKind::Softmax { temperature } => expit(tau_hat / temperature),
    };
    raw.clamp(d.clip_lo, d.clip_hi)
}

/// Generates one replication. Propensities at `t` depend only on units
/// before `t` and on `X_t`.
pub fn generate_trial(spec: &DesignSpec) -> Result<TrialData, SimError> {
    generate_inner(spec, None)
}

/// Design B stream whose randomization device runs at `executed` while the
/// log records `logged`. Used as a fault-injection fixture.
pub fn generate_mislogged(spec: &DesignSpec, executed: f64, logged: f64) -> Result<TrialData, SimError> {
    if spec.design() != Design::B {
        return Err(SimError::InvalidParameter("mis-logged streams are generated from design B".into()));
    }
    if !prob_ok(executed) || !prob_ok(logged) {
        return Err(SimError::InvalidParameter("propensities must lie in (0,1)".into()));
    }
    generate_inner(spec, Some((executed, logged)))
}

fn generate_inner(spec: &DesignSpec, fault: Option<(f64, f64)>) -> Result<TrialData, SimError> {
    spec.validate()?;
    let plan = spec.plan()?;
    let params = &spec.params;
    let truth = Truth::for_params(params);
    let mut streams = Streams::new(spec);
    let t_dist = match params {
        DesignParams::C1(c) => Some(StudentT::new(c.t_df).map_err(|e| SimError::InvalidParameter(e.to_string()))?),
        _ => None,
    };
    let learner = policy_learner(params);
    let n = spec.n;
    let mut records: Vec<UnitRecord> = Vec::with_capacity(n);
    let mut executed_pi = Vec::with_capacity(n);
    let mut regime = None;
    let mut burn_estimate = None;
    let mut pair: Option<ModelPair> = None;
    let mut current_block = 0;

    for t in 1..=n {
        let x = draw_x(params, &mut streams.covariates);
        let (e0, e1) = draw_noise(params, t_dist.as_ref(), &x, &mut streams.outcomes);
        let block = plan.block_of(t);
        if block != current_block {
            current_block = block;
            if block >= 2 {
                if let Some(cfg) = &learner {
                    let (p, _) = fit_forward_block(&records, block, cfg)
                        .map_err(|e| SimError::InvalidParameter(format!("policy fit failed: {e}")))?;
                    pair = Some(p);
                }
            }
        }
        let pi = match params {
            DesignParams::A(a) => {
                if t <= a.n0 {
                    a.burn_pi
                } else {
                    let r = *regime.get_or_insert_with(|| {
                        let est = burn_in_estimate(&records[..a.n0]);
                        burn_estimate = Some(est);
                        if est >= 0.0 {
                            a.pi_high
                        } else {
                            a.pi_low
                        }
                    });
                    r
                }
            }
            DesignParams::B(b) => fault.map_or(b.pi, |f| f.0),
            DesignParams::C1(c) => {
                if block == 1 {
                    c.burn_pi
                } else {
                    let clamp = learner.as_ref().and_then(|l| l.clamp);
                    let tau_hat = pair.as_ref().expect("policy pair").effect(&x, clamp);
                    c.epsilon + (1.0 - 2.0 * c.epsilon) * expit(c.lambda * tau_hat)
                }
            }
            DesignParams::C2(c) => c.pi,
            DesignParams::D(d) => {
                if block == 1 {
                    d.burn_pi
                } else {
                    let clamp = learner.as_ref().and_then(|l| l.clamp);
                    d_policy(d, pair.as_ref().expect("policy pair").effect(&x, clamp))
                }
            }
        };
        let u: f64 = streams.assignment.random();
        let a = u8::from(u < pi);
        let (m0, m1) = truth.m(&x);
        let y = if a == 1 { m1 + e1 } else { m0 + e0 };
        executed_pi.push(pi);
        let logged = fault.map_or(pi, |f| f.1);
        records.push(UnitRecord { t, x, a, y, pi: logged });
    }

    let log = ExperimentLog::with_dimension(records, params.dim())
        .map_err(|e| SimError::InvalidParameter(format!("generated log failed validation: {e}")))?;
    Ok(TrialData {
        spec: spec.clone(),
        log,
        plan,
        truth,
        regime,
        burn_estimate,
        executed_pi,
    })
}

/// Re-derives `A_t = 1{U_t < π_t}` from the assignment substream.
pub fn replay_assignments(spec: &DesignSpec, executed_pi: &[f64]) -> Vec<u8> {
    let mut rng = substream(spec.master_seed, spec.design(), spec.rep, StreamRole::Assignment);
    executed_pi
        .iter()
        .map(|&pi| {
            let u: f64 = rng.random();
            u8::from(u < pi)
        })
        .collect()
}

/// `E[(φ_t − θ0)² | ℱ_{t−1}, X_t]` for an AIPW score with nuisance bias
/// `b_a = m̂_a(x) − m_a*(x)`.
pub fn second_moment_contribution(
    pi: f64,
    sigma0_sq: f64,
    sigma1_sq: f64,
    b0: f64,
    b1: f64,
    tau: f64,
    theta0: f64,
) -> f64 {
    let d = tau - theta0;
    let aug = b1 / pi + b0 / (1.0 - pi);
    d * d + sigma1_sq / pi + sigma0_sq / (1.0 - pi) + pi * (1.0 - pi) * aug * aug
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVarianceTrace {
    /// `(t, E[ξ_t² | ℱ_{t−1}])` over the scored set.
    pub contributions: Vec<(usize, f64)>,
    /// Running `V_𝒯²` after each scored unit.
    pub running: Vec<f64>,
    pub v_sq: f64,
    pub n_eff: usize,
    /// `V_𝒯² / n_eff`.
    pub ratio: f64,
}

fn check_truth(trial: &TrialData, fits: &NuisanceFitSet) -> Result<(), SimError> {
    if matches!(fits.mode(), NuisanceMode::LeakyFull | NuisanceMode::NaiveCrossFit) {
        return Err(SimError::TruthUnavailable(format!(
            "conditional moments are undefined for non-predictable `{}` fits",
            fits.mode()
        )));
    }
    if trial.is_mislogged() {
        return Err(SimError::TruthUnavailable("logged propensities differ from executed ones".into()));
    }
    Ok(())
}

pub fn oracle_variance_trace(
    trial: &TrialData,
    plan: &ForwardPlan,
    fits: &NuisanceFitSet,
) -> Result<OracleVarianceTrace, SimError> {
    check_truth(trial, fits)?;
    let truth = &trial.truth;
    let mut contributions = Vec::with_capacity(plan.scored.len());
    let mut running = Vec::with_capacity(plan.scored.len());
    let mut acc = crate::inference::CompensatedSum::default();
    for &t in &plan.scored {
        let r = trial
            .log
            .get(t)
            .ok_or_else(|| SimError::TruthUnavailable(format!("scored unit {t} is not in the log")))?;
        let (h0, h1) = fits
            .predict(t, plan.block_of(t), &r.x)
            .map_err(|e| SimError::TruthUnavailable(e.to_string()))?;
        let (m0, m1) = truth.m(&r.x);
        let (s0, s1) = truth.sigma_sq(&r.x);
        let c = second_moment_contribution(r.pi, s0, s1, h0 - m0, h1 - m1, truth.tau(&r.x), truth.theta0);
        acc.add(c);
        contributions.push((t, c));
        running.push(acc.value());
    }
    let v_sq = acc.value();
    let n_eff = contributions.len();
    Ok(OracleVarianceTrace {
        contributions,
        running,
        v_sq,
        n_eff,
        ratio: v_sq / n_eff as f64,
    })
}

/// `√n_eff · (θ̂(fits) − θ̂(oracle))` on the same realized log.
pub fn oracle_gap(trial: &TrialData, plan: &ForwardPlan, fits: &NuisanceFitSet) -> Result<f64, SimError> {
    check_truth(trial, fits)?;
    let series = |f: &NuisanceFitSet| -> Result<f64, SimError> {
        let s = score_series(&trial.log, plan, f).map_err(|e| SimError::TruthUnavailable(e.to_string()))?;
        estimate(&s.values()).map_err(|e| SimError::TruthUnavailable(e.to_string()))
    };
    let theta = series(fits)?;
    let theta_star = if fits.mode() == NuisanceMode::Oracle {
        theta
    } else {
        series(&trial.oracle_fits())?
    };
    Ok((plan.n_eff() as f64).sqrt() * (theta - theta_star))
}

/// Checks the scored set a design declares.
pub fn expected_rule(design: Design) -> ScoredRule {
    match design {
        Design::B => ScoredRule::All,
        _ => ScoredRule::ExcludeFirstBlock,
    }
}
