//! `snaipw` command line: `simulate`, `infer`, `audit`, `reproduce`.
//!
//! Every run writes `config.json` into `<out>/<subcommand>/<name>/` before
//! computing anything. Passing that file back through `--config` replays the
//! run. Exit codes: 0 success, 1 audit failure or runtime error, 2 config
//! error, 3 contract failure under `--enforce-contract`, 4 unreadable input.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::audit::{contract_report, ContractReport};
use crate::error::{Error, LogError};
use crate::experiment_log::{load_log, make_burnin_plan, make_forward_plan, ExperimentLog, ForwardPlan, LogFormat};
use crate::inference::{fixed_v_interval, qv_report, sn_interval, Critical, InferenceReport, QvReport};
use crate::mc_engine::{run_design, variance_ratio_histogram, McConfig, McTable, Method};
use crate::nuisance::{
    fit_forward, fit_leaky_full, fit_naive_cross_fit, zero_nuisance, ClampBounds, FeatureMap, FitLedger, LearnerConfig,
    NuisanceFitSet, NuisanceMode,
};
use crate::scoring::score_series;
use crate::simlab::{generate_mislogged, generate_trial, policy_learner, Design, DesignParams, PolicyKind};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Contract(String),
    Input(String),
    AuditFailed,
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Contract(_) => 3,
            CliError::Input(_) => 4,
            CliError::AuditFailed | CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Contract(m) => write!(f, "contract failure: {m}"),
            CliError::Input(m) => write!(f, "unreadable input: {m}"),
            CliError::AuditFailed => f.write_str("audit failed"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Sim(_) | Error::Inference(_) => CliError::Config(e.to_string()),
            Error::Log(LogError::InvalidPlan(_)) => CliError::Config(e.to_string()),
            Error::Log(_) | Error::Io { .. } => CliError::Input(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "snaipw", version, about = "Self-normalized AIPW inference for adaptive experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Monte Carlo coverage study for one design.
    Simulate(SimulateArgs),
    /// Interval from a logged experiment.
    Infer(InferArgs),
    /// Logging-contract checks on a logged experiment.
    Audit(AuditArgs),
    /// Rerun the parameter grid behind one published table or figure.
    Reproduce(ReproduceArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Root output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Run name; defaults to a timestamp.
    #[arg(long)]
    pub name: Option<String>,
}

impl OutputArgs {
    fn run_dir(&self, subcommand: &str) -> CliResult<PathBuf> {
        let name = self.name.clone().unwrap_or_else(|| {
            let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
            format!("{}-{:09}", now.as_secs(), now.subsec_nanos())
        });
        let dir = self.out.join(subcommand).join(name);
        fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// A, B, C1, C2 or D.
    #[arg(long)]
    pub design: Option<String>,
    /// Horizons, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    pub n: Vec<usize>,
    /// Replications per horizon.
    #[arg(long = "R", default_value_t = 500)]
    pub reps: usize,
    #[arg(long, env = "SNAIPW_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Method labels, comma separated; defaults to the design's table.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Design D policy: eps-greedy or softmax.
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub v_fix: Option<f64>,
    /// Histogram bins for the Design A variance ratio.
    #[arg(long, default_value_t = 40)]
    pub hist_bins: usize,
    /// Also write replication 0 at the first horizon as a log with its plan
    /// and ledgers.
    #[arg(long)]
    pub dump_trial: bool,
    /// Design B fault injection for the dumped trial: EXECUTED,LOGGED.
    #[arg(long, value_delimiter = ',')]
    pub mislog: Option<Vec<f64>>,
    /// Replay a config.json written by an earlier run.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip, default = "default_output")]
    pub output: OutputArgs,
}

fn default_output() -> OutputArgs {
    OutputArgs {
        out: PathBuf::from("out"),
        name: None,
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PlanArgs {
    /// forward, burnin or all.
    #[arg(long)]
    pub plan: Option<String>,
    /// Number of forward blocks.
    #[arg(long)]
    pub k: Option<usize>,
    /// Burn-in length.
    #[arg(long)]
    pub n0: Option<usize>,
    /// Plan JSON as written by `simulate --dump-trial`.
    #[arg(long)]
    pub plan_file: Option<PathBuf>,
}

impl PlanArgs {
    fn resolve(&self, n: usize) -> CliResult<ForwardPlan> {
        if let Some(path) = &self.plan_file {
            let text = read_input(path)?;
            let plan: ForwardPlan =
                serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            return Ok(plan);
        }
        let plan = match self.plan.as_deref() {
            Some("forward") => {
                let k = self.k.ok_or_else(|| CliError::Config("--plan forward needs --k".into()))?;
                make_forward_plan(n, k)
            }
            Some("burnin") => {
                let n0 = self.n0.ok_or_else(|| CliError::Config("--plan burnin needs --n0".into()))?;
                make_burnin_plan(n, n0)
            }
            Some("all") => ForwardPlan::all_scored(n),
            Some(other) => return Err(CliError::Config(format!("unknown plan `{other}`"))),
            None => return Err(CliError::Config("specify --plan or --plan-file".into())),
        };
        plan.map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct InferArgs {
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub plan: PlanArgs,
    /// forward, zero, leaky or naive.
    #[arg(long, default_value = "forward")]
    pub nuisance: String,
    /// raw, constant, rich, or subset:<0-based cols>.
    #[arg(long, default_value = "raw")]
    pub feature_map: String,
    #[arg(long, default_value_t = 1e-8)]
    pub ridge_lambda: f64,
    /// Symmetric prediction clamp.
    #[arg(long)]
    pub clamp: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// sn or fixed-v.
    #[arg(long, default_value = "sn")]
    pub interval: String,
    /// z or t.
    #[arg(long, default_value = "z")]
    pub critical: String,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub v_fix: Option<f64>,
    /// Also report realized quadratic variation about this value.
    #[arg(long)]
    pub theta0: Option<f64>,
    /// Exit 3 when any contract check fails.
    #[arg(long)]
    pub enforce_contract: bool,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Declared horizon; defaults to the plan's horizon.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub n_bins: usize,
    #[arg(long, default_value_t = 50)]
    pub n_min: usize,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip, default = "default_output")]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct AuditArgs {
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Fit ledger in JSONL.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Declared horizon n.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub n_bins: usize,
    #[arg(long, default_value_t = 50)]
    pub n_min: usize,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip, default = "default_output")]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ReproduceArgs {
    /// Table number, 2 to 8.
    #[arg(long)]
    pub table: Option<u32>,
    /// Figure number (1).
    #[arg(long)]
    pub figure: Option<u32>,
    /// Replications; defaults to 500, or 1000 with --full.
    #[arg(long = "R")]
    pub reps: Option<usize>,
    #[arg(long)]
    pub full: bool,
    #[arg(long, env = "SNAIPW_SEED", default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    #[command(flatten)]
    #[serde(skip, default = "default_output")]
    pub output: OutputArgs,
}

#[derive(Serialize)]
struct Echo<'a, A: Serialize, R: Serialize> {
    command: &'a str,
    args: &'a A,
    resolved: R,
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_echo<A: Serialize, R: Serialize>(dir: &Path, command: &str, args: &A, resolved: R) -> CliResult<()> {
    let echo = Echo { command, args, resolved };
    let text = serde_json::to_string_pretty(&echo).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&dir.join("config.json"), &text)
}

fn read_input(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Restores the `args` object of an earlier run's config.json.
fn replay<A: for<'de> Deserialize<'de>>(path: &Path, command: &str) -> CliResult<A> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if value.get("command").and_then(|c| c.as_str()) != Some(command) {
        return Err(CliError::Config(format!("{} is not a `{command}` config", path.display())));
    }
    serde_json::from_value(value["args"].clone()).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl SimulateArgs {
    pub fn resolve(&self) -> CliResult<McConfig> {
        let design: Design = self
            .design
            .as_deref()
            .ok_or_else(|| CliError::Config("--design is required".into()))?
            .parse()
            .map_err(config_err)?;
        let mut cfg = McConfig::new(design, self.n.clone(), self.reps, self.seed);
        cfg.workers = self.workers;
        cfg.alpha = self.alpha;
        cfg.v_fix = self.v_fix;
        if !self.methods.is_empty() {
            cfg.methods = self
                .methods
                .iter()
                .map(|m| m.parse::<Method>())
                .collect::<Result<_, _>>()
                .map_err(config_err)?;
        }
        if let Some(policy) = &self.policy {
            let DesignParams::D(d) = &mut cfg.params else {
                return Err(CliError::Config("--policy applies to design D only".into()));
            };
            d.policy = policy.parse::<PolicyKind>().map_err(config_err)?;
        }
        if self.mislog.is_some() && (design != Design::B || !self.dump_trial) {
            return Err(CliError::Config("--mislog needs --design B and --dump-trial".into()));
        }
        if let Some(m) = &self.mislog {
            if m.len() != 2 || m.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
                return Err(CliError::Config("--mislog takes EXECUTED,LOGGED in (0, 1)".into()));
            }
        }
        if self.hist_bins == 0 {
            return Err(CliError::Config("--hist-bins must be at least 1".into()));
        }
        cfg.validate().map_err(CliError::from)?;
        Ok(cfg)
    }
}

fn write_table(dir: &Path, table: &McTable) -> CliResult<()> {
    write_file(&dir.join("table.csv"), &table.to_csv())?;
    write_file(&dir.join("table.json"), &table.to_json())
}

fn dump_trial(dir: &Path, cfg: &McConfig, mislog: Option<&[f64]>) -> CliResult<()> {
    let spec = cfg.spec(cfg.ns[0], 0);
    let trial = match mislog {
        Some(m) => generate_mislogged(&spec, m[0], m[1]),
        None => generate_trial(&spec),
    }
    .map_err(|e| CliError::from(Error::from(e)))?;
    trial
        .log
        .save(&dir.join("trial_log.jsonl"), LogFormat::Jsonl)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let plan = serde_json::to_string_pretty(&trial.plan).map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&dir.join("trial_plan.json"), &plan)?;
    let forward = match policy_learner(&trial.spec.params) {
        Some(cfg) => fit_forward(&trial.log, &trial.plan, &cfg).map(|f| f.1),
        None if trial.log.dim() > 0 => fit_forward(&trial.log, &trial.plan, &LearnerConfig::linear()).map(|f| f.1),
        None => Ok(FitLedger::for_fixed(&trial.plan, NuisanceMode::Zero)),
    }
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&dir.join("trial_ledger.jsonl"), &forward.to_jsonl())?;
    let (_, leaky) = fit_leaky_full(&trial.log, &trial.plan, &LearnerConfig::linear().with_clamp(None))
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    write_file(&dir.join("trial_ledger_leaky.jsonl"), &leaky.to_jsonl())
}

pub fn cmd_simulate(args: SimulateArgs) -> CliResult<PathBuf> {
    let mut args = args;
    if let Some(path) = args.config.clone() {
        let output = args.output.clone();
        args = replay(&path, "simulate")?;
        args.output = output;
    }
    let cfg = args.resolve()?;
    let dir = args.output.run_dir("simulate")?;
    write_echo(&dir, "simulate", &args, &cfg)?;
    let table = run_design(&cfg).map_err(CliError::from)?;
    write_table(&dir, &table)?;
    if cfg.design() == Design::A {
        let hist = variance_ratio_histogram(&cfg, cfg.ns[0], args.hist_bins).map_err(CliError::from)?;
        write_file(&dir.join("histogram.csv"), &hist.to_csv())?;
    }
    if args.dump_trial {
        dump_trial(&dir, &cfg, args.mislog.as_deref())?;
    }
    print!("{}", table.render());
    println!("wrote {}", dir.display());
    Ok(dir)
}

fn parse_feature_map(s: &str) -> CliResult<FeatureMap> {
    match s {
        "raw" => Ok(FeatureMap::Raw),
        "constant" => Ok(FeatureMap::Constant),
        "rich" => Ok(FeatureMap::RawSquaresSin),
        other => match other.strip_prefix("subset:") {
            Some(cols) => {
                let cols = cols
                    .split(',')
                    .map(|c| c.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| CliError::Config(format!("bad subset column: {e}")))?;
                Ok(FeatureMap::Subset { cols })
            }
            None => Err(CliError::Config(format!("unknown feature map `{other}`"))),
        },
    }
}

fn load(path: Option<&PathBuf>) -> CliResult<ExperimentLog> {
    let path = path.ok_or_else(|| CliError::Config("--log is required".into()))?;
    load_log(path, LogFormat::from_path(path)).map_err(|e| CliError::Input(e.to_string()))
}

#[derive(Serialize)]
struct InferResolved<'a> {
    n: usize,
    plan: &'a ForwardPlan,
    learner: Option<&'a LearnerConfig>,
    horizon: usize,
}

#[derive(Serialize, Deserialize)]
pub struct InferOutput {
    pub nuisance: NuisanceMode,
    pub report: InferenceReport,
    pub qv: Option<QvReport>,
    pub contract: Option<ContractReport>,
}

pub fn cmd_infer(args: InferArgs) -> CliResult<PathBuf> {
    let mut args = args;
    if let Some(path) = args.config.clone() {
        let output = args.output.clone();
        args = replay(&path, "infer")?;
        args.output = output;
    }
    let mode: NuisanceMode = args.nuisance.parse().map_err(CliError::Config)?;
    let critical: Critical = args.critical.parse().map_err(config_err)?;
    if !matches!(args.interval.as_str(), "sn" | "fixed-v") {
        return Err(CliError::Config(format!("unknown interval `{}`", args.interval)));
    }
    if args.interval == "fixed-v" && args.v_fix.is_none() {
        return Err(CliError::Config("--interval fixed-v needs --v-fix".into()));
    }
    if !(args.epsilon > 0.0 && args.epsilon < 0.5) {
        return Err(CliError::Config("--epsilon must lie in (0, 0.5)".into()));
    }
    let learner = LearnerConfig::ridge(parse_feature_map(&args.feature_map)?, args.ridge_lambda)
        .with_clamp(args.clamp.map(|c| ClampBounds::new(-c.abs(), c.abs())));
    let log = load(args.log.as_ref())?;
    let plan = args.plan.resolve(log.len())?;
    let horizon = args.horizon.unwrap_or(plan.n);
    let dir = args.output.run_dir("infer")?;
    let uses_learner = matches!(mode, NuisanceMode::Forward | NuisanceMode::LeakyFull | NuisanceMode::NaiveCrossFit);
    write_echo(
        &dir,
        "infer",
        &args,
        InferResolved {
            n: log.len(),
            plan: &plan,
            learner: uses_learner.then_some(&learner),
            horizon,
        },
    )?;

    let fit_err = |e: crate::error::FitError| CliError::Config(e.to_string());
    let (fits, ledger): (NuisanceFitSet, FitLedger) = match mode {
        NuisanceMode::Forward => fit_forward(&log, &plan, &learner).map_err(fit_err)?,
        NuisanceMode::LeakyFull => fit_leaky_full(&log, &plan, &learner).map_err(fit_err)?,
        NuisanceMode::NaiveCrossFit => {
            if args.folds < 2 {
                return Err(CliError::Config("--folds must be at least 2".into()));
            }
            fit_naive_cross_fit(&log, &plan, &learner, args.folds).map_err(fit_err)?
        }
        NuisanceMode::Zero => (zero_nuisance(), FitLedger::for_fixed(&plan, NuisanceMode::Zero)),
        NuisanceMode::Oracle => {
            return Err(CliError::Config("oracle nuisance needs the true regression; not available from a log".into()))
        }
    };
    write_file(&dir.join("ledger.jsonl"), &ledger.to_jsonl())?;

    let contract = contract_report(&log, &plan, &ledger, args.epsilon, horizon, args.n_bins, args.n_min);
    write_file(&dir.join("contract.json"), &serde_json::to_string_pretty(&contract).unwrap())?;
    if args.enforce_contract && contract.any_fail() {
        eprint!("{}", contract.render());
        return Err(CliError::Contract("contract checks failed; no interval reported".into()));
    }

    let scores = score_series(&log, &plan, &fits).map_err(fit_err)?;
    write_file(&dir.join("scores.csv"), &scores.to_csv())?;
    let values = scores.values();
    let report = match args.interval.as_str() {
        "fixed-v" => fixed_v_interval(&values, args.v_fix.unwrap_or_default(), args.alpha),
        _ => sn_interval(&values, args.alpha, critical),
    }
    .map_err(config_err)?;
    let qv = match args.theta0 {
        Some(theta0) => Some(qv_report(&values, theta0).map_err(config_err)?),
        None => None,
    };
    let out = InferOutput {
        nuisance: mode,
        report,
        qv,
        contract: Some(contract),
    };
    write_file(&dir.join("report.json"), &serde_json::to_string_pretty(&out).unwrap())?;
    println!("{}", out.report.summary());
    if let Some(q) = &out.qv {
        println!(
            "qv: theta0 = {}, Q = {:.6}, S = {:.6}, identity residual = {:.3e}",
            q.theta0, q.q_t, q.s_t, q.identity_residual
        );
    }
    Ok(dir)
}

#[derive(Serialize)]
struct AuditResolved<'a> {
    n: usize,
    plan: &'a ForwardPlan,
    horizon: usize,
}

pub fn cmd_audit(args: AuditArgs) -> CliResult<PathBuf> {
    let mut args = args;
    if let Some(path) = args.config.clone() {
        let output = args.output.clone();
        args = replay(&path, "audit")?;
        args.output = output;
    }
    if !(args.epsilon > 0.0 && args.epsilon < 0.5) {
        return Err(CliError::Config("--epsilon must lie in (0, 0.5)".into()));
    }
    if args.n_bins == 0 || args.n_min == 0 {
        return Err(CliError::Config("--n-bins and --n-min must be at least 1".into()));
    }
    let horizon = args
        .horizon
        .ok_or_else(|| CliError::Config("--horizon (declared n) is required".into()))?;
    let ledger_path = args
        .ledger
        .clone()
        .ok_or_else(|| CliError::Config("--ledger is required".into()))?;
    let log = load(args.log.as_ref())?;
    let ledger = FitLedger::from_jsonl(&read_input(&ledger_path)?).map_err(|e| CliError::Input(e.to_string()))?;
    let plan = args.plan.resolve(log.len())?;
    let dir = args.output.run_dir("audit")?;
    write_echo(
        &dir,
        "audit",
        &args,
        AuditResolved {
            n: log.len(),
            plan: &plan,
            horizon,
        },
    )?;
    let report = contract_report(&log, &plan, &ledger, args.epsilon, horizon, args.n_bins, args.n_min);
    write_file(&dir.join("audit.json"), &serde_json::to_string_pretty(&report).unwrap())?;
    print!("{}", report.render());
    if report.any_fail() {
        return Err(CliError::AuditFailed);
    }
    Ok(dir)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReproduceTarget {
    pub label: String,
    pub config: McConfig,
    /// Histogram instead of a table.
    pub histogram: Option<(usize, usize)>,
}

const N_GRID: [usize; 5] = [250, 500, 1000, 2000, 5000];

/// Parameter grid for a published table or figure.
pub fn reproduce_target(table: Option<u32>, figure: Option<u32>, reps: usize, seed: u64) -> CliResult<ReproduceTarget> {
    let base = |design, ns: &[usize], methods: Vec<Method>| {
        let mut c = McConfig::new(design, ns.to_vec(), reps, seed);
        c.methods = methods;
        c
    };
    let (label, config, histogram) = match (table, figure) {
        (Some(2), None) => (
            "table2",
            base(Design::A, &N_GRID[..4], vec![Method::Sn, Method::FixedV]),
            None,
        ),
        (Some(3), None) => (
            "table3",
            base(Design::A, &N_GRID, Method::defaults_for(Design::A)),
            None,
        ),
        (Some(4), None) => ("table4", base(Design::B, &N_GRID, Method::defaults_for(Design::B)), None),
        (Some(5), None) => ("table5", base(Design::C1, &N_GRID, Method::defaults_for(Design::C1)), None),
        (Some(6), None) => ("table6", base(Design::C2, &[5000], Method::defaults_for(Design::C2)), None),
        (Some(t @ (7 | 8)), None) => {
            let mut c = base(Design::D, &N_GRID, Method::defaults_for(Design::D));
            if let DesignParams::D(d) = &mut c.params {
                d.policy = if t == 7 {
                    PolicyKind::EpsGreedy { epsilon: 0.1 }
                } else {
                    PolicyKind::Softmax { temperature: 0.5 }
                };
            }
            (if t == 7 { "table7" } else { "table8" }, c, None)
        }
        (None, Some(1)) => ("figure1", base(Design::A, &[1000], vec![Method::Sn]), Some((1000, 40))),
        (Some(t), None) => return Err(CliError::Config(format!("no grid for table {t}; tables 2 to 8 are available"))),
        (None, Some(f)) => return Err(CliError::Config(format!("no grid for figure {f}; only figure 1 is available"))),
        _ => return Err(CliError::Config("give exactly one of --table or --figure".into())),
    };
    Ok(ReproduceTarget {
        label: label.into(),
        config,
        histogram,
    })
}

pub fn cmd_reproduce(args: ReproduceArgs) -> CliResult<PathBuf> {
    let reps = args.reps.unwrap_or(if args.full { 1000 } else { 500 });
    let mut target = reproduce_target(args.table, args.figure, reps, args.seed)?;
    target.config.workers = args.workers;
    target.config.validate().map_err(CliError::from)?;
    let mut output = args.output.clone();
    if output.name.is_none() {
        output.name = Some(target.label.clone());
    }
    let dir = output.run_dir("reproduce")?;
    write_echo(&dir, "reproduce", &args, &target)?;
    match target.histogram {
        Some((n, bins)) => {
            let hist = variance_ratio_histogram(&target.config, n, bins).map_err(CliError::from)?;
            write_file(&dir.join("histogram.csv"), &hist.to_csv())?;
            for b in hist.bins.iter().filter(|b| b.count > 0) {
                println!("[{:.4}, {:.4}] {}", b.lo, b.hi, b.count);
            }
        }
        None => {
            let table = run_design(&target.config).map_err(CliError::from)?;
            write_table(&dir, &table)?;
            print!("{}", table.render());
        }
    }
    println!("wrote {}", dir.display());
    Ok(dir)
}

pub fn run(cli: Cli) -> CliResult<PathBuf> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    }
}

/// Parses arguments, runs, and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(_) => 0,
        Err(e) => {
            if !matches!(e, CliError::AuditFailed) {
                eprintln!("{e}");
            }
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::SimError;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Contract(String::new()).exit_code(), 3);
        assert_eq!(CliError::Input(String::new()).exit_code(), 4);
        assert_eq!(CliError::AuditFailed.exit_code(), 1);
        assert_eq!(
            CliError::from(Error::from(SimError::UnknownDesign("Z".into()))).exit_code(),
            2
        );
    }

    #[test]
    fn reproduce_grids() {
        let t = reproduce_target(Some(6), None, 10, 1).unwrap();
        assert_eq!(t.config.ns, vec![5000]);
        assert_eq!(t.config.design(), Design::C2);
        let t = reproduce_target(Some(8), None, 10, 1).unwrap();
        assert!(matches!(
            t.config.params,
            DesignParams::D(ParamsDView { policy: PolicyKind::Softmax { .. }, .. })
        ));
        assert!(reproduce_target(Some(1), None, 10, 1).is_err());
        assert!(reproduce_target(None, None, 10, 1).is_err());
        assert!(reproduce_target(None, Some(1), 10, 1).unwrap().histogram.is_some());
        for t in 2..=8 {
            reproduce_target(Some(t), None, 10, 1).unwrap().config.validate().unwrap();
        }
    }

    use crate::simlab::ParamsD as ParamsDView;

    #[test]
    fn feature_maps_parse() {
        assert_eq!(parse_feature_map("subset:0,2").unwrap(), FeatureMap::Subset { cols: vec![0, 2] });
        assert_eq!(parse_feature_map("rich").unwrap(), FeatureMap::RawSquaresSin);
        assert!(parse_feature_map("poly").is_err());
    }

    #[test]
    fn simulate_args_resolution_errors() {
        let parse = |extra: &[&str]| {
            let mut argv = vec!["snaipw", "simulate"];
            argv.extend_from_slice(extra);
            match Cli::try_parse_from(argv).unwrap().command {
                Command::Simulate(a) => a.resolve(),
                _ => unreachable!(),
            }
        };
        assert!(parse(&["--design", "B", "--R", "3"]).is_ok());
        assert!(matches!(parse(&[]), Err(CliError::Config(_))));
        assert!(matches!(parse(&["--design", "Q"]), Err(CliError::Config(_))));
        assert!(matches!(parse(&["--design", "B", "--policy", "softmax"]), Err(CliError::Config(_))));
        assert!(matches!(parse(&["--design", "B", "--methods", "SN-AIPW"]), Err(CliError::Config(_))));
        assert!(matches!(parse(&["--design", "A", "--R", "0"]), Err(CliError::Config(_))));
    }
}
