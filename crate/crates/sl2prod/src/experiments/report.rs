//! Structured experiment reports: JSON documents and flat CSV tables.
//! Field order is fixed by the struct layout, and wall-clock data is
//! dropped under deterministic mode, so identical configs produce
//! byte-identical bodies.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::measures::ProbeReport;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One estimated quantity at one grid point.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Record {
    /// Grid coordinates, e.g. "n=250" or "n=400,x=2".
    pub point: String,
    pub metric: String,
    pub estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    pub count: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Record {
    pub fn new(point: impl Into<String>, metric: impl Into<String>, estimate: f64, std_error: Option<f64>, count: u64) -> Record {
        assert!(estimate.is_finite(), "report estimates must be finite");
        Record {
            point: point.into(),
            metric: metric.into(),
            estimate,
            std_error,
            count,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Record {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictStatus {
    Pass,
    Fail,
    /// The schedule violates the measures condition; the check is a
    /// baseline, not a failure of the theory.
    Degenerate,
    /// Hypotheses of the checked statement were not met, or the
    /// statistic was unbounded; nothing can be concluded.
    Inconclusive,
}

/// Outcome of one named check against a pinned threshold.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Verdict {
    pub name: String,
    pub status: VerdictStatus,
    /// Hard verdicts are pathwise zero-violation assertions; a failed
    /// hard verdict flips the process exit code.
    pub hard: bool,
    /// Human-readable statement of the threshold used.
    pub threshold: String,
    pub observed: f64,
}

impl Verdict {
    pub fn soft(name: impl Into<String>, status: VerdictStatus, threshold: impl Into<String>, observed: f64) -> Verdict {
        Verdict {
            name: name.into(),
            status,
            hard: false,
            threshold: threshold.into(),
            observed: if observed.is_finite() { observed } else { 0.0 },
        }
    }

    pub fn hard(name: impl Into<String>, violations: u64) -> Verdict {
        Verdict {
            name: name.into(),
            status: if violations == 0 { VerdictStatus::Pass } else { VerdictStatus::Fail },
            hard: true,
            threshold: "zero violations".to_string(),
            observed: violations as f64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RngProvenance {
    pub seed: u64,
    pub algorithm: String,
}

/// Full result of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub experiment: String,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeReport>,
    pub records: Vec<Record>,
    pub verdicts: Vec<Verdict>,
    pub hard_violations: u64,
    pub rng: RngProvenance,
    /// Absent under deterministic mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_ms: Option<u64>,
}

impl Report {
    pub fn new(experiment: &str, config: &ExperimentConfig) -> Report {
        // The worker count steers execution, never content; normalizing
        // it in the echo keeps deterministic bodies byte-identical at any
        // parallelism.
        let mut echo = config.clone();
        echo.workers = 0;
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            experiment: experiment.to_string(),
            config: echo,
            probe: None,
            records: Vec::new(),
            verdicts: Vec::new(),
            hard_violations: 0,
            rng: RngProvenance {
                seed: config.seed,
                algorithm: "splitmix64-counter".to_string(),
            },
            wall_clock_ms: None,
        }
    }

    /// Record elapsed time unless the config asks for deterministic
    /// bodies.
    pub fn finish_clock(&mut self, started: std::time::Instant) {
        if !self.config.deterministic {
            self.wall_clock_ms = Some(started.elapsed().as_millis() as u64);
        }
    }

    /// Count of failed hard verdicts.
    pub fn failed_hard_verdicts(&self) -> usize {
        self.verdicts
            .iter()
            .filter(|v| v.hard && v.status == VerdictStatus::Fail)
            .count()
    }

    pub fn all_hard_passed(&self) -> bool {
        self.failed_hard_verdicts() == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Flat CSV: one row per record, then one row per verdict.
    /// Columns: kind, point, metric, estimate, std_error, count, status,
    /// detail.
    pub fn to_csv(&self) -> String {
        fn esc(s: &str) -> String {
            if s.contains(',') || s.contains('"') || s.contains('\n') {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        }
        let mut out = String::from("kind,point,metric,estimate,std_error,count,status,detail\n");
        for r in &self.records {
            out.push_str(&format!(
                "estimate,{},{},{},{},{},,{}\n",
                esc(&r.point),
                esc(&r.metric),
                r.estimate,
                r.std_error.map(|s| s.to_string()).unwrap_or_default(),
                r.count,
                esc(r.note.as_deref().unwrap_or("")),
            ));
        }
        for v in &self.verdicts {
            let status = match v.status {
                VerdictStatus::Pass => "pass",
                VerdictStatus::Fail => "fail",
                VerdictStatus::Degenerate => "degenerate",
                VerdictStatus::Inconclusive => "inconclusive",
            };
            out.push_str(&format!(
                "verdict,,{},{},,,{},{}\n",
                esc(&v.name),
                v.observed,
                status,
                esc(&v.threshold),
            ));
        }
        out
    }
}
