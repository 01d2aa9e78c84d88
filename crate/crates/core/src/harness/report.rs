//! Structured experiment reports.
//!
//! Result bodies (CSV rows and the report JSON) are byte deterministic for a
//! fixed config and seed; wall-clock data lives in a separate provenance
//! document so re-runs can be compared byte for byte.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::mkv_solver::PicardRun;
use crate::transport::PathCloud;

#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub estimate: f64,
    pub stderr: f64,
    pub repetitions: usize,
    /// Wall clock; excluded from the deterministic body, emitted in provenance.
    #[serde(skip)]
    pub runtime_ms: u128,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub subcommand: String,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub rows: Vec<ReportRow>,
    pub diagnostics: BTreeMap<String, String>,
}

impl RunReport {
    pub fn new(subcommand: &str, seed: u64, config_hash: String) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            seed,
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            rows: Vec::new(),
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn diagnostic(&mut self, key: &str, value: impl ToString) {
        self.diagnostics.insert(key.to_string(), value.to_string());
    }

    /// Deterministic CSV body: one row per ladder rung.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,estimate,stderr,repetitions\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.n, row.estimate, row.stderr, row.repetitions
            ));
        }
        out
    }

    /// Deterministic JSON body with rows and diagnostics.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Non-deterministic sidecar: timestamp and per-row wall clock.
    pub fn provenance_json(&self) -> String {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        let provenance = Provenance {
            subcommand: &self.subcommand,
            seed: self.seed,
            config_hash: &self.config_hash,
            version: &self.version,
            unix_millis: timestamp,
            row_runtime_ms: self.rows.iter().map(|r| r.runtime_ms).collect(),
        };
        serde_json::to_string_pretty(&provenance).expect("provenance serializes")
    }
}

#[derive(Serialize)]
struct Provenance<'a> {
    subcommand: &'a str,
    seed: u64,
    config_hash: &'a str,
    version: &'a str,
    unix_millis: u128,
    row_runtime_ms: Vec<u128>,
}

/// Residual history of a Picard solve: deterministic CSV body.
pub fn residuals_csv(run: &PicardRun) -> String {
    let mut out = String::from("iter,residual\n");
    for (i, r) in run.residuals.iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, r));
    }
    out
}

/// Per-step empirical means and `p'`-moment of a path cloud:
/// columns `t, mean_1..mean_K, p_moment`.
pub fn means_csv(cloud: &PathCloud, p_prime: f64) -> String {
    let dim = cloud.dim();
    let mut header = String::from("t");
    for k in 1..=dim {
        header.push_str(&format!(",mean_{k}"));
    }
    header.push_str(",p_moment\n");
    let mut out = header;
    let dt = cloud.horizon() / cloud.steps() as f64;
    for m in 0..=cloud.steps() {
        let marginal = cloud.marginal(m);
        let mean = marginal.mean();
        out.push_str(&format!("{}", m as f64 * dt));
        for k in 0..dim {
            out.push_str(&format!(",{}", mean.coords[k]));
        }
        let moment = marginal.moment(p_prime).expect("p' >= 1 by validation");
        out.push_str(&format!(",{moment}\n"));
    }
    out
}

/// Sample mean and standard error (zero for a single value).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    assert!(n > 0, "no repetitions");
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}
