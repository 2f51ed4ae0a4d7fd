//! Time-ordered experiment logs and forward block plans.
//!
//! A log is the stream of `(t, x, a, y, pi)` records in arrival order. The
//! prefix ordering of records stands in for the information available before
//! each unit; nothing richer about the platform's randomization is stored.
//!
//! Two on-disk formats are supported:
//!
//! * JSONL, one object per line: `{"t":1,"x":[0.5],"a":1,"y":2.0,"pi":0.5}`
//! * CSV with header `t,x1,..,xp,a,y,pi` (`t,a,y,pi` when there are no covariates)
//!
//! Reals are written with 17 significant digits so that save/load is exact.

use std::fmt::Write as _;
use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::LogError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    /// 1-based arrival index.
    pub t: usize,
    pub x: Vec<f64>,
    pub a: u8,
    pub y: f64,
    /// Executed propensity passed to the randomization device.
    pub pi: f64,
}

impl UnitRecord {
    pub fn treated(&self) -> bool {
        self.a == 1
    }

    fn check(&self, row: usize, p: Option<usize>) -> Result<(), LogError> {
        if self.a > 1 {
            return Err(LogError::NonBinaryTreatment {
                row,
                value: self.a.to_string(),
            });
        }
        if !self.y.is_finite() {
            return Err(LogError::NonFinite {
                row,
                field: "y".into(),
            });
        }
        if !self.pi.is_finite() {
            return Err(LogError::NonFinite {
                row,
                field: "pi".into(),
            });
        }
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(LogError::PropensityOutOfRange { row, pi: self.pi });
        }
        if let Some(j) = self.x.iter().position(|v| !v.is_finite()) {
            return Err(LogError::NonFinite {
                row,
                field: format!("x{}", j + 1),
            });
        }
        if let Some(p) = p {
            if self.x.len() != p {
                return Err(LogError::DimensionMismatch {
                    row,
                    expected: p,
                    found: self.x.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Jsonl,
    Csv,
}

impl LogFormat {
    /// Guess from the file extension; anything that is not `.csv` is JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => LogFormat::Csv,
            _ => LogFormat::Jsonl,
        }
    }
}

impl std::str::FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(LogFormat::Jsonl),
            "csv" => Ok(LogFormat::Csv),
            other => Err(format!("unknown log format `{other}` (expected jsonl or csv)")),
        }
    }
}

/// Validated, time-ordered experiment log. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentLog {
    records: Vec<UnitRecord>,
    p: usize,
}

impl ExperimentLog {
    /// Validates every record: `t = 1..n` without gaps, shared dimension,
    /// binary `a`, finite values and `pi` strictly inside (0, 1).
    pub fn new(records: Vec<UnitRecord>) -> Result<Self, LogError> {
        let p = records.first().map(|r| r.x.len()).unwrap_or(0);
        Self::with_dimension(records, p)
    }

    pub fn with_dimension(records: Vec<UnitRecord>, p: usize) -> Result<Self, LogError> {
        for (i, r) in records.iter().enumerate() {
            let row = i + 1;
            r.check(row, Some(p))?;
            if r.t != row {
                return Err(LogError::TimeOrder {
                    row,
                    expected: row,
                    found: r.t,
                });
            }
        }
        Ok(Self { records, p })
    }

    pub fn records(&self) -> &[UnitRecord] {
        &self.records
    }

    /// Record at 1-based time `t`.
    pub fn get(&self, t: usize) -> Option<&UnitRecord> {
        t.checked_sub(1).and_then(|i| self.records.get(i))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn into_records(self) -> Vec<UnitRecord> {
        self.records
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * (48 + 24 * self.p));
        for r in &self.records {
            out.push_str("{\"t\":");
            let _ = write!(out, "{}", r.t);
            out.push_str(",\"x\":[");
            for (j, v) in r.x.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                out.push_str(&fmt_real(*v));
            }
            let _ = writeln!(
                out,
                "],\"a\":{},\"y\":{},\"pi\":{}}}",
                r.a,
                fmt_real(r.y),
                fmt_real(r.pi)
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push('t');
        for j in 1..=self.p {
            let _ = write!(out, ",x{j}");
        }
        out.push_str(",a,y,pi\n");
        for r in &self.records {
            let _ = write!(out, "{}", r.t);
            for v in &r.x {
                out.push(',');
                out.push_str(&fmt_real(*v));
            }
            let _ = writeln!(out, ",{},{},{}", r.a, fmt_real(r.y), fmt_real(r.pi));
        }
        out
    }

    pub fn save(&self, path: &Path, format: LogFormat) -> Result<(), LogError> {
        let body = match format {
            LogFormat::Jsonl => self.to_jsonl(),
            LogFormat::Csv => self.to_csv(),
        };
        fs::write(path, body).map_err(|source| LogError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn parse_jsonl(text: &str) -> Result<Self, LogError> {
        let mut records = Vec::new();
        let mut p = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let row = records.len() + 1;
            let rec = parse_json_record(line, row)?;
            let dim = *p.get_or_insert(rec.x.len());
            rec.check(row, Some(dim))?;
            if rec.t != row {
                return Err(LogError::TimeOrder {
                    row,
                    expected: row,
                    found: rec.t,
                });
            }
            records.push(rec);
        }
        Ok(Self {
            records,
            p: p.unwrap_or(0),
        })
    }

    pub fn parse_csv(text: &str) -> Result<Self, LogError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| LogError::Malformed {
                row: 0,
                field: "header".into(),
                reason: e.to_string(),
            })?
            .iter()
            .map(str::to_owned)
            .collect();
        let p = check_csv_header(&header)?;
        let mut records = Vec::new();
        for result in reader.records() {
            let row = records.len() + 1;
            let fields = result.map_err(|e| LogError::Malformed {
                row,
                field: "record".into(),
                reason: e.to_string(),
            })?;
            if fields.len() != header.len() {
                return Err(LogError::DimensionMismatch {
                    row,
                    expected: p,
                    found: fields.len().saturating_sub(4),
                });
            }
            let t = parse_index(&fields[0], row)?;
            let x = (0..p)
                .map(|j| parse_real(&fields[1 + j], row, &header[1 + j]))
                .collect::<Result<Vec<_>, _>>()?;
            let a = parse_treatment(&fields[p + 1], row)?;
            let y = parse_real(&fields[p + 2], row, "y")?;
            let pi = parse_real(&fields[p + 3], row, "pi")?;
            let rec = UnitRecord { t, x, a, y, pi };
            rec.check(row, Some(p))?;
            if rec.t != row {
                return Err(LogError::TimeOrder {
                    row,
                    expected: row,
                    found: rec.t,
                });
            }
            records.push(rec);
        }
        Ok(Self { records, p })
    }
}

/// Reads and validates a log file.
pub fn load_log(path: &Path, format: LogFormat) -> Result<ExperimentLog, LogError> {
    let text = fs::read_to_string(path).map_err(|source| LogError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        LogFormat::Jsonl => ExperimentLog::parse_jsonl(&text),
        LogFormat::Csv => ExperimentLog::parse_csv(&text),
    }
}

/// 17 significant digits, enough for an exact f64 round-trip.
pub(crate) fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_json_record(line: &str, row: usize) -> Result<UnitRecord, LogError> {
    let malformed = |field: &str, reason: String| LogError::Malformed {
        row,
        field: field.into(),
        reason,
    };
    let value: Value =
        serde_json::from_str(line).map_err(|e| malformed("record", e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| malformed("record", "expected a JSON object".into()))?;
    let get = |key: &str| {
        obj.get(key)
            .ok_or_else(|| malformed(key, "missing".into()))
    };

    let t_val = get("t")?;
    let t = t_val
        .as_u64()
        .filter(|&t| t >= 1)
        .ok_or_else(|| malformed("t", format!("expected a positive integer, got {t_val}")))?
        as usize;

    let x = get("x")?
        .as_array()
        .ok_or_else(|| malformed("x", "expected an array".into()))?
        .iter()
        .enumerate()
        .map(|(j, v)| {
            v.as_f64()
                .ok_or_else(|| malformed(&format!("x{}", j + 1), format!("expected a number, got {v}")))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let a_val = get("a")?;
    let a = match a_val.as_u64() {
        Some(0) => 0,
        Some(1) => 1,
        _ => {
            return Err(LogError::NonBinaryTreatment {
                row,
                value: a_val.to_string(),
            })
        }
    };

    let num = |key: &str| {
        let v = get(key)?;
        v.as_f64()
            .ok_or_else(|| malformed(key, format!("expected a number, got {v}")))
    };
    Ok(UnitRecord {
        t,
        x,
        a,
        y: num("y")?,
        pi: num("pi")?,
    })
}

fn check_csv_header(header: &[String]) -> Result<usize, LogError> {
    let bad = |reason: String| LogError::Malformed {
        row: 0,
        field: "header".into(),
        reason,
    };
    if header.len() < 4 {
        return Err(bad(format!("expected `t,x1..xp,a,y,pi`, got {} columns", header.len())));
    }
    let p = header.len() - 4;
    let mut expected = vec!["t".to_string()];
    expected.extend((1..=p).map(|j| format!("x{j}")));
    expected.extend(["a", "y", "pi"].map(String::from));
    if header != expected.as_slice() {
        return Err(bad(format!(
            "expected `{}`, got `{}`",
            expected.join(","),
            header.join(",")
        )));
    }
    Ok(p)
}

fn parse_index(s: &str, row: usize) -> Result<usize, LogError> {
    s.parse::<usize>()
        .ok()
        .filter(|&t| t >= 1)
        .ok_or_else(|| LogError::Malformed {
            row,
            field: "t".into(),
            reason: format!("expected a positive integer, got `{s}`"),
        })
}

fn parse_treatment(s: &str, row: usize) -> Result<u8, LogError> {
    match s {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(LogError::NonBinaryTreatment {
            row,
            value: other.to_string(),
        }),
    }
}

fn parse_real(s: &str, row: usize, field: &str) -> Result<f64, LogError> {
    let v = s.parse::<f64>().map_err(|e| LogError::Malformed {
        row,
        field: field.into(),
        reason: format!("`{s}`: {e}"),
    })?;
    if !v.is_finite() {
        return Err(LogError::NonFinite {
            row,
            field: field.into(),
        });
    }
    Ok(v)
}

/// How the scored set was derived from the blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoredRule {
    /// `{1..n} \ I_1`: the first block is burn-in/training only.
    ExcludeFirstBlock,
    /// Every unit is scored. Only sound with nuisances that use no data
    /// (zero or oracle), as in the constant-propensity benchmark.
    All,
}

/// Contiguous block partition of `1..=n` plus the deterministic scored set.
///
/// `block_bounds` holds `K + 1` cut points `0 = c_0 < c_1 < .. < c_K = n`;
/// block `k` (1-based) is `c_{k-1}+1 ..= c_k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardPlan {
    pub n: usize,
    pub block_bounds: Vec<usize>,
    pub scored: Vec<usize>,
    pub n_eff: usize,
    pub rule: ScoredRule,
}

impl ForwardPlan {
    /// Builds a plan from cut points, deriving the scored set from `rule`.
    pub fn from_bounds(block_bounds: Vec<usize>, rule: ScoredRule) -> Result<Self, LogError> {
        let bad = |m: String| Err(LogError::InvalidPlan(m));
        if block_bounds.len() < 2 {
            return bad("need at least one block".into());
        }
        if block_bounds[0] != 0 {
            return bad("first cut point must be 0".into());
        }
        if block_bounds.windows(2).any(|w| w[1] <= w[0]) {
            return bad("cut points must be strictly increasing (no empty blocks)".into());
        }
        let n = *block_bounds.last().expect("nonempty");
        let start = match rule {
            ScoredRule::ExcludeFirstBlock => block_bounds[1] + 1,
            ScoredRule::All => 1,
        };
        let scored: Vec<usize> = (start..=n).collect();
        Ok(Self {
            n,
            n_eff: scored.len(),
            block_bounds,
            scored,
            rule,
        })
    }

    /// Number of blocks `K`.
    pub fn k(&self) -> usize {
        self.block_bounds.len() - 1
    }

    pub fn n_eff(&self) -> usize {
        self.n_eff
    }

    /// Units of 1-based block `k`.
    pub fn block(&self, k: usize) -> RangeInclusive<usize> {
        assert!(k >= 1 && k <= self.k(), "block {k} out of range 1..={}", self.k());
        self.block_bounds[k - 1] + 1..=self.block_bounds[k]
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.block_bounds.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// 1-based block containing unit `t`.
    pub fn block_of(&self, t: usize) -> usize {
        assert!(t >= 1 && t <= self.n, "unit {t} outside 1..={}", self.n);
        self.block_bounds.partition_point(|&c| c < t)
    }

    pub fn is_scored(&self, t: usize) -> bool {
        self.scored.binary_search(&t).is_ok()
    }

    /// Sorted ids of blocks containing at least one scored unit.
    pub fn scored_blocks(&self) -> Vec<usize> {
        let mut blocks: Vec<usize> = self.scored.iter().map(|&t| self.block_of(t)).collect();
        blocks.dedup();
        blocks
    }

    /// The scored set the declared rule implies for these blocks.
    pub fn expected_scored(&self) -> Vec<usize> {
        let start = match self.rule {
            ScoredRule::ExcludeFirstBlock => self.block_bounds.get(1).map_or(1, |c| c + 1),
            ScoredRule::All => 1,
        };
        (start..=self.n).collect()
    }

    /// Single block, every unit scored.
    pub fn all_scored(n: usize) -> Result<Self, LogError> {
        if n == 0 {
            return Err(LogError::InvalidPlan("horizon must be positive".into()));
        }
        Self::from_bounds(vec![0, n], ScoredRule::All)
    }

    /// Burn-in of `n0` units followed by blocks of `block_size` (the last may
    /// be shorter); the burn-in is not scored.
    pub fn sized_blocks(n: usize, n0: usize, block_size: usize) -> Result<Self, LogError> {
        if n0 == 0 || n0 >= n {
            return Err(LogError::InvalidPlan(format!(
                "burn-in n0 = {n0} must satisfy 1 <= n0 < n = {n}"
            )));
        }
        if block_size == 0 {
            return Err(LogError::InvalidPlan("block size must be positive".into()));
        }
        let mut bounds = vec![0, n0];
        let mut c = n0;
        while c < n {
            c = (c + block_size).min(n);
            bounds.push(c);
        }
        Self::from_bounds(bounds, ScoredRule::ExcludeFirstBlock)
    }
}

/// `k` contiguous blocks whose sizes differ by at most one, the earliest
/// blocks taking the remainder. The first block is not scored.
pub fn make_forward_plan(n: usize, k: usize) -> Result<ForwardPlan, LogError> {
    if k < 2 {
        return Err(LogError::InvalidPlan(format!("need k >= 2 blocks, got {k}")));
    }
    if n < k {
        return Err(LogError::InvalidPlan(format!("horizon n = {n} smaller than k = {k}")));
    }
    let base = n / k;
    let extra = n % k;
    let mut bounds = Vec::with_capacity(k + 1);
    bounds.push(0);
    let mut c = 0;
    for i in 0..k {
        c += base + usize::from(i < extra);
        bounds.push(c);
    }
    ForwardPlan::from_bounds(bounds, ScoredRule::ExcludeFirstBlock)
}

/// Burn-in block `1..=n0` and one scored block `n0+1..=n`.
pub fn make_burnin_plan(n: usize, n0: usize) -> Result<ForwardPlan, LogError> {
    if n0 < 2 || n0 >= n {
        return Err(LogError::InvalidPlan(format!(
            "burn-in n0 = {n0} must satisfy 2 <= n0 < n = {n}"
        )));
    }
    ForwardPlan::from_bounds(vec![0, n0, n], ScoredRule::ExcludeFirstBlock)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: usize, x: Vec<f64>, a: u8, y: f64, pi: f64) -> UnitRecord {
        UnitRecord { t, x, a, y, pi }
    }

    #[test]
    fn minimal_jsonl_record() {
        let log = ExperimentLog::parse_jsonl(r#"{"t":1, "x":[0.0], "a":1, "y":2.0, "pi":0.5}"#).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.dim(), 1);
        assert_eq!(log.records()[0], rec(1, vec![0.0], 1, 2.0, 0.5));
    }

    #[test]
    fn propensity_at_boundary_is_rejected() {
        let err = ExperimentLog::parse_jsonl(r#"{"t":1,"x":[],"a":1,"y":2.0,"pi":1.0}"#).unwrap_err();
        assert!(matches!(err, LogError::PropensityOutOfRange { row: 1, .. }));
        assert!(err.to_string().contains("propensity out of open interval"));
        let err = ExperimentLog::parse_jsonl(r#"{"t":1,"x":[],"a":0,"y":2.0,"pi":0}"#).unwrap_err();
        assert!(matches!(err, LogError::PropensityOutOfRange { .. }));
    }

    #[test]
    fn csv_disorder_reports_row() {
        let text = "t,x1,a,y,pi\n1,0.1,1,2.0,0.5\n3,0.2,0,1.0,0.5\n2,0.3,1,0.5,0.5\n";
        let err = ExperimentLog::parse_csv(text).unwrap_err();
        assert!(matches!(err, LogError::TimeOrder { row: 2, found: 3, .. }));
        assert!(err.to_string().contains("time index gap/disorder at row 2"));
    }

    #[test]
    fn rejects_bad_fields() {
        let err = ExperimentLog::parse_jsonl(r#"{"t":1,"x":[],"a":2,"y":2.0,"pi":0.5}"#).unwrap_err();
        assert!(matches!(err, LogError::NonBinaryTreatment { row: 1, .. }));

        let err = ExperimentLog::parse_csv("t,a,y,pi\n1,1,NaN,0.5\n").unwrap_err();
        assert!(matches!(err, LogError::NonFinite { row: 1, ref field } if field == "y"));

        let text = "{\"t\":1,\"x\":[1.0],\"a\":1,\"y\":2.0,\"pi\":0.5}\n{\"t\":2,\"x\":[1.0,2.0],\"a\":1,\"y\":2.0,\"pi\":0.5}";
        let err = ExperimentLog::parse_jsonl(text).unwrap_err();
        assert!(matches!(err, LogError::DimensionMismatch { row: 2, expected: 1, found: 2 }));

        let err = ExperimentLog::parse_jsonl(r#"{"t":1,"x":[],"a":1,"pi":0.5}"#).unwrap_err();
        assert!(matches!(err, LogError::Malformed { row: 1, ref field, .. } if field == "y"));

        let err = ExperimentLog::parse_csv("t,x2,a,y,pi\n").unwrap_err();
        assert!(matches!(err, LogError::Malformed { row: 0, .. }));
    }

    #[test]
    fn empty_covariates_round_trip_csv() {
        let log = ExperimentLog::new(vec![rec(1, vec![], 1, -3.25, 0.6), rec(2, vec![], 0, 0.1, 0.6)]).unwrap();
        let csv = log.to_csv();
        assert!(csv.starts_with("t,a,y,pi\n"));
        assert_eq!(ExperimentLog::parse_csv(&csv).unwrap(), log);
        assert_eq!(ExperimentLog::parse_jsonl(&log.to_jsonl()).unwrap(), log);
    }

    #[test]
    fn forward_plan_even_split() {
        let plan = make_forward_plan(10, 5).unwrap();
        assert_eq!(plan.block_sizes(), vec![2; 5]);
        assert_eq!(plan.scored, (3..=10).collect::<Vec<_>>());
        assert_eq!(plan.n_eff(), 8);
    }

    #[test]
    fn forward_plan_table_horizon() {
        let plan = make_forward_plan(250, 5).unwrap();
        assert_eq!(plan.n_eff(), 200);
        assert_eq!(plan.scored, (51..=250).collect::<Vec<_>>());
    }

    #[test]
    fn forward_plan_remainder_goes_early() {
        let plan = make_forward_plan(11, 5).unwrap();
        assert_eq!(plan.block_sizes(), vec![3, 2, 2, 2, 2]);
        assert_eq!(plan.n_eff(), 8);
        assert_eq!(plan.block(2), 4..=5);
        assert_eq!(plan.block_of(3), 1);
        assert_eq!(plan.block_of(4), 2);
        assert_eq!(plan.block_of(11), 5);
    }

    #[test]
    fn forward_plan_errors() {
        assert!(make_forward_plan(3, 5).is_err());
        assert!(make_forward_plan(10, 1).is_err());
    }

    #[test]
    fn burnin_plans() {
        assert_eq!(make_burnin_plan(250, 50).unwrap().n_eff(), 200);
        assert_eq!(make_burnin_plan(1000, 100).unwrap().n_eff(), 900);
        let tiny = make_burnin_plan(5, 4).unwrap();
        assert_eq!(tiny.scored, vec![5]);
        assert_eq!(tiny.n_eff(), 1);
        assert!(make_burnin_plan(5, 5).is_err());
        assert!(make_burnin_plan(5, 1).is_err());
    }

    #[test]
    fn sized_blocks_plan() {
        let plan = ForwardPlan::sized_blocks(250, 100, 100).unwrap();
        assert_eq!(plan.block_sizes(), vec![100, 100, 50]);
        assert_eq!(plan.n_eff(), 150);
        assert_eq!(plan.scored_blocks(), vec![2, 3]);
        let all = ForwardPlan::all_scored(7).unwrap();
        assert_eq!(all.n_eff(), 7);
        assert_eq!(all.scored_blocks(), vec![1]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_log() -> impl Strategy<Value = ExperimentLog> {
            (0usize..4, 1usize..30).prop_flat_map(|(p, n)| {
                proptest::collection::vec(
                    (
                        proptest::collection::vec(-1e6f64..1e6, p),
                        0u8..2,
                        -1e9f64..1e9,
                        1e-9f64..(1.0 - 1e-9),
                    ),
                    n,
                )
                .prop_map(move |rows| {
                    let records = rows
                        .into_iter()
                        .enumerate()
                        .map(|(i, (x, a, y, pi))| UnitRecord { t: i + 1, x, a, y, pi })
                        .collect();
                    ExperimentLog::with_dimension(records, p).unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn save_load_is_bit_exact(log in arb_log()) {
                let j = ExperimentLog::parse_jsonl(&log.to_jsonl()).unwrap();
                let c = ExperimentLog::parse_csv(&log.to_csv()).unwrap();
                for (a, b) in log.records().iter().zip(j.records()) {
                    prop_assert_eq!(a.y.to_bits(), b.y.to_bits());
                    prop_assert_eq!(a.pi.to_bits(), b.pi.to_bits());
                }
                prop_assert_eq!(&j, &log);
                prop_assert_eq!(&c, &log);
            }

            #[test]
            fn plans_partition_the_horizon(n in 2usize..500, k in 2usize..20) {
                prop_assume!(k <= n);
                let plan = make_forward_plan(n, k).unwrap();
                let sizes = plan.block_sizes();
                prop_assert_eq!(sizes.iter().sum::<usize>(), n);
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
                prop_assert!(plan.scored.iter().all(|t| !plan.block(1).contains(t)));
                prop_assert_eq!(plan.n_eff(), n - sizes[0]);
            }
        }
    }
}
