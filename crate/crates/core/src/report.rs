//! Margin records shared by every verifier.

use serde::{Deserialize, Serialize};

use crate::tol;

/// Per-sample margins `bound − achieved` for one theorem check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem_id: String,
    pub per_sample_margin: Vec<f64>,
    pub passed: bool,
    pub worst_margin: f64,
}

impl TheoremReport {
    /// `passed` holds iff every margin is at least `−1e-9`.
    pub fn from_margins(theorem_id: impl Into<String>, per_sample_margin: Vec<f64>) -> Self {
        let worst_margin = per_sample_margin.iter().copied().fold(f64::INFINITY, f64::min);
        let passed = per_sample_margin.iter().all(|&m| m >= -tol::BOUND_SLACK);
        Self { theorem_id: theorem_id.into(), per_sample_margin, passed, worst_margin }
    }

    /// Concatenates the margins of several reports under one id.
    pub fn merge(theorem_id: impl Into<String>, reports: &[TheoremReport]) -> Self {
        let margins = reports.iter().flat_map(|r| r.per_sample_margin.iter().copied()).collect();
        Self::from_margins(theorem_id, margins)
    }
}

/// One line of an experiment report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub margin: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckRecord {
    pub fn new(id: impl Into<String>, margin: f64, passed: bool) -> Self {
        Self { id: id.into(), margin, passed, detail: String::new() }
    }

    /// Pass iff `margin ≥ −1e-9`.
    pub fn from_margin(id: impl Into<String>, margin: f64) -> Self {
        Self::new(id, margin, margin >= -tol::BOUND_SLACK)
    }

    pub fn from_report(report: &TheoremReport) -> Self {
        Self::new(report.theorem_id.clone(), report.worst_margin, report.passed)
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}
