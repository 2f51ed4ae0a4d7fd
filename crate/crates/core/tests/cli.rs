use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use snaipw::audit::{ContractReport, Status};
use snaipw::cli::InferOutput;

fn snaipw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snaipw"))
        .args(args)
        .env_remove("SNAIPW_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Simulates one small design and dumps replication 0.
fn dump(root: &Path, design: &str, n: &str, name: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec![
        "simulate", "--design", design, "--n", n, "--R", "4", "--seed", "11", "--out", s(root), "--name", name,
        "--dump-trial",
    ];
    args.extend_from_slice(extra);
    let out = snaipw(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    root.join("simulate").join(name)
}

#[test]
fn simulate_writes_outputs_and_replays_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = dump(tmp.path(), "A", "300", "a", &["--hist-bins", "8"]);
    for f in ["config.json", "table.csv", "table.json", "histogram.csv", "trial_log.jsonl", "trial_plan.json"] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    let csv = fs::read_to_string(dir.join("table.csv")).unwrap();
    assert!(csv.starts_with("design,n,n_eff,method,coverage,mcse,avg_length,bias,reject_rate,regime"));
    assert_eq!(fs::read_to_string(dir.join("histogram.csv")).unwrap().lines().count(), 9);

    let cfg = dir.join("config.json");
    let out = snaipw(&["simulate", "--config", s(&cfg), "--out", s(tmp.path()), "--name", "replay"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let replayed = tmp.path().join("simulate/replay");
    assert_eq!(fs::read(dir.join("table.csv")).unwrap(), fs::read(replayed.join("table.csv")).unwrap());
    assert_eq!(fs::read(dir.join("trial_log.jsonl")).unwrap(), fs::read(replayed.join("trial_log.jsonl")).unwrap());
}

#[test]
fn seed_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_snaipw"));
        cmd.args(["simulate", "--design", "B", "--n", "100", "--R", "5", "--out", s(tmp.path()), "--name", name]);
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        cmd.env_remove("SNAIPW_SEED");
        if let Some(e) = env {
            cmd.env("SNAIPW_SEED", e);
        }
        assert!(cmd.output().unwrap().status.success());
        fs::read_to_string(tmp.path().join("simulate").join(name).join("table.csv")).unwrap()
    };
    let from_env = run("env", Some("99"), None);
    let from_flag = run("flag", None, Some("99"));
    let other = run("other", None, Some("98"));
    assert_eq!(from_env, from_flag);
    assert_ne!(from_env, other);
}

#[test]
fn infer_on_dumped_log() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = dump(tmp.path(), "C2", "500", "c2", &[]);
    let log = dir.join("trial_log.jsonl");
    let out = snaipw(&[
        "infer", "--log", s(&log), "--plan", "forward", "--k", "10", "--theta0", "0", "--critical", "t",
        "--enforce-contract", "--out", s(tmp.path()), "--name", "fwd",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run = tmp.path().join("infer/fwd");
    for f in ["config.json", "report.json", "scores.csv", "ledger.jsonl", "contract.json"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    let report: InferOutput = serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.report.n_eff, 450);
    let qv = report.qv.unwrap();
    assert!(qv.identity_residual.abs() < 1e-9);
    assert_eq!(fs::read_to_string(run.join("scores.csv")).unwrap().lines().count(), 451);

    // replaying the echoed config gives the same report
    let out = snaipw(&["infer", "--config", s(&run.join("config.json")), "--out", s(tmp.path()), "--name", "again"]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        fs::read(run.join("report.json")).unwrap(),
        fs::read(tmp.path().join("infer/again/report.json")).unwrap()
    );

    // a leaky fit is refused under the contract
    let out = snaipw(&[
        "infer", "--log", s(&log), "--plan", "forward", "--k", "10", "--nuisance", "leaky", "--enforce-contract",
        "--out", s(tmp.path()), "--name", "leaky",
    ]);
    assert_eq!(code(&out), 3);
    assert!(!tmp.path().join("infer/leaky/report.json").exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("predictability"));

    // without enforcement it still reports, and the contract file shows the failure
    let out = snaipw(&[
        "infer", "--log", s(&log), "--plan", "forward", "--k", "10", "--nuisance", "leaky", "--out",
        s(tmp.path()), "--name", "leaky2",
    ]);
    assert_eq!(code(&out), 0);
    let contract: ContractReport =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("infer/leaky2/contract.json")).unwrap()).unwrap();
    assert_eq!(contract.status_of("predictability"), Some(Status::Fail));
}

#[test]
fn audit_verdicts_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let clean = dump(tmp.path(), "B", "2000", "clean", &[]);
    let audit = |dir: &Path, ledger: &str, eps: &str, horizon: &str, name: &str| {
        snaipw(&[
            "audit", "--log", s(&dir.join("trial_log.jsonl")), "--ledger", s(&dir.join(ledger)), "--plan-file",
            s(&dir.join("trial_plan.json")), "--epsilon", eps, "--horizon", horizon, "--out", s(tmp.path()),
            "--name", name,
        ])
    };
    let out = audit(&clean, "trial_ledger.jsonl", "0.3", "2000", "clean");
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report: ContractReport =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("audit/clean/audit.json")).unwrap()).unwrap();
    assert!(report.verdicts.iter().all(|v| v.status == Status::Pass));

    assert_eq!(code(&audit(&clean, "trial_ledger_leaky.jsonl", "0.3", "2000", "leaky")), 1);
    assert_eq!(code(&audit(&clean, "trial_ledger.jsonl", "0.3", "5000", "early")), 1);

    let mis = dump(tmp.path(), "B", "10000", "mis", &["--mislog", "0.8,0.5"]);
    let out = audit(&mis, "trial_ledger.jsonl", "0.1", "10000", "mis");
    assert_eq!(code(&out), 0);
    let report: ContractReport =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("audit/mis/audit.json")).unwrap()).unwrap();
    assert_eq!(report.status_of("propensity_calibration"), Some(Status::Warn));
    assert!(String::from_utf8_lossy(&out.stdout).contains("WARN"));
}

#[test]
fn config_and_input_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = s(tmp.path());
    assert_eq!(code(&snaipw(&["simulate", "--design", "Z", "--out", out_dir])), 2);
    assert_eq!(code(&snaipw(&["simulate", "--out", out_dir])), 2);
    assert_eq!(code(&snaipw(&["simulate", "--design", "B", "--R", "0", "--out", out_dir])), 2);
    assert_eq!(code(&snaipw(&["simulate", "--design", "A", "--methods", "SN-AIPW", "--out", out_dir])), 2);
    assert_eq!(code(&snaipw(&["simulate", "--design", "B", "--bogus"])), 2);
    assert_eq!(code(&snaipw(&["reproduce", "--table", "9", "--out", out_dir])), 2);

    let missing = tmp.path().join("nope.jsonl");
    let out = snaipw(&["infer", "--log", s(&missing), "--plan", "all", "--nuisance", "zero", "--out", out_dir]);
    assert_eq!(code(&out), 4);

    let garbage = tmp.path().join("bad.csv");
    fs::write(&garbage, "t,x1,a,y,pi\n1,0.0,1,2.0,1.5\n").unwrap();
    let out = snaipw(&["infer", "--log", s(&garbage), "--plan", "all", "--nuisance", "zero", "--out", out_dir]);
    assert_eq!(code(&out), 4);

    let ok = tmp.path().join("ok.csv");
    let mut text = String::from("t,x1,a,y,pi\n");
    for t in 1..=30 {
        text += &format!("{t},0.{t},{},{t}.0,0.5\n", t % 2);
    }
    fs::write(&ok, text).unwrap();
    let out = snaipw(&["infer", "--log", s(&ok), "--nuisance", "zero", "--out", out_dir]);
    assert_eq!(code(&out), 2, "plan is required");
    let out = snaipw(&["infer", "--log", s(&ok), "--plan", "all", "--nuisance", "oracle", "--out", out_dir]);
    assert_eq!(code(&out), 2);
    let out = snaipw(&["infer", "--log", s(&ok), "--plan", "all", "--nuisance", "zero", "--out", out_dir]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("n_eff = 30"));
}

#[test]
fn reproduce_writes_named_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = snaipw(&["reproduce", "--figure", "1", "--R", "20", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("reproduce/figure1");
    assert!(dir.join("config.json").exists());
    let hist = fs::read_to_string(dir.join("histogram.csv")).unwrap();
    let total: usize = hist.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 20);
}
