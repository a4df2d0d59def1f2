//! Command drivers shared by the binary and the integration tests.

use std::collections::BTreeMap;
use std::time::Instant;

use qrn_core::suite::{self, CriterionOutcome};

use crate::config::{ConfigError, ExperimentConfig, Kind};
use crate::experiments::Plan;
use crate::report::ExperimentReport;

/// Caps the global rayon pool from the value of `QRN_THREADS`.
pub fn configure_threads(value: Option<&str>) -> Result<(), ConfigError> {
    let Some(raw) = value.map(str::trim).filter(|v| !v.is_empty()) else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::Invalid(format!("QRN_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::Invalid(format!("cannot size the thread pool: {e}")))
}

pub struct Finished {
    pub report: ExperimentReport,
    pub artifacts: Vec<(String, String)>,
    pub format: String,
    pub output: Option<String>,
}

/// Validates the config fully, then runs it.
pub fn run_experiment(kind: Kind, file: Option<&str>, overrides: &[(String, String)]) -> Result<Finished, ConfigError> {
    let pairs = match file {
        Some(text) => crate::config::parse_pairs(text)?,
        None => Vec::new(),
    };
    let cfg = ExperimentConfig::resolve(kind, &pairs, overrides)?;
    let plan = Plan::build(&cfg)?;
    let start = Instant::now();
    let outcome = plan.run();
    let report = ExperimentReport::new(kind.name(), cfg.echo(), &outcome.records, start.elapsed().as_secs_f64());
    Ok(Finished {
        report,
        artifacts: outcome.artifacts,
        format: cfg.format().to_string(),
        output: cfg.output().map(str::to_string),
    })
}

/// Parses `1,3,5-7` into criterion ids.
pub fn parse_criteria(spec: &str) -> Result<Vec<u32>, ConfigError> {
    let bad = || ConfigError::Invalid(format!("cannot parse criteria list {spec:?}"));
    let known = suite::criteria().len() as u32;
    let mut ids = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (lo, hi): (u32, u32) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
            None => {
                let k: u32 = part.parse().map_err(|_| bad())?;
                (k, k)
            }
        };
        if lo == 0 || hi > known || lo > hi {
            return Err(ConfigError::Invalid(format!("criteria must lie in 1..={known}, got {part:?}")));
        }
        ids.extend(lo..=hi);
    }
    ids.sort_unstable();
    ids.dedup();
    if ids.is_empty() {
        return Err(bad());
    }
    Ok(ids)
}

pub struct SelftestRun {
    pub report: ExperimentReport,
    pub outcomes: Vec<CriterionOutcome>,
}

impl SelftestRun {
    /// Every check passed and every criterion met its runtime budget.
    pub fn passed(&self) -> bool {
        self.report.passed() && self.outcomes.iter().all(|o| o.within_budget())
    }
}

/// Runs the selected criteria twice and appends the determinism record.
pub fn selftest(seed: u64, only: Option<&[u32]>) -> SelftestRun {
    let start = Instant::now();
    let selected: Vec<_> =
        suite::criteria().into_iter().filter(|c| only.map_or(true, |ids| ids.contains(&c.id))).collect();
    let first: Vec<CriterionOutcome> = selected.iter().map(|c| c.run(seed)).collect();
    let second: Vec<CriterionOutcome> = selected.iter().map(|c| c.run(seed)).collect();
    let mut records = suite::records(&first);
    let (a, b) = (suite::body(&first), suite::body(&second));
    records.push(match (a, b) {
        (Ok(a), Ok(b)) => suite::determinism_record(&a, &b),
        (Err(e), _) | (_, Err(e)) => {
            qrn_core::CheckRecord::new("c13/determinism", -1.0, false).with_detail(e.to_string())
        }
    });
    let mut config = BTreeMap::from([("seed".to_string(), seed.to_string())]);
    let ids: Vec<String> = selected.iter().map(|c| c.id.to_string()).collect();
    config.insert("criteria".into(), ids.join(","));
    let report = ExperimentReport::new("selftest", config, &records, start.elapsed().as_secs_f64());
    SelftestRun { report, outcomes: first }
}
