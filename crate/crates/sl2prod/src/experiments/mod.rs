//! Orchestrated Monte Carlo experiments. Each runner takes a validated
//! [`ExperimentConfig`], spends its trial budget through the chunked
//! parallel engine, and emits a [`Report`] whose estimates carry standard
//! errors and whose verdicts name the thresholds they were checked
//! against.
//!
//! Hard pathwise assertions (nonnegativity of the subadditivity
//! discrepancy, the Theta bound on it, the geometric expansion lemma)
//! permit zero violations and flip the process exit code; statistical
//! verdicts are reported with their slack and never abort a run.

mod charfn;
mod config;
mod discrepancy;
mod engine;
mod growth;
mod projective;
mod report;

pub use charfn::{run_cf_contraction, run_cf_perturbation};
pub use config::{
    validate_config, ConfigError, ExperimentConfig, Thresholds, DEFAULT_SEED,
};
pub use discrepancy::{run_r_moments, run_r_tail};
pub use engine::{effective_workers, run_chunked, CHUNKS};
pub use growth::{run_clt, run_lln, run_simulate, run_variance_growth};
pub use projective::{
    run_atom_dissolving, run_rank_one_variance, run_regularity, run_theta_lemma,
};
pub use report::{Record, Report, RngProvenance, Verdict, VerdictStatus};

use crate::measures::ProbeReport;
use std::fmt;

/// Domain tags separating the random streams of different experiments
/// run under one master seed. Grid-point substreams shift these by the
/// point index in the upper bits.
pub mod domains {
    pub const SIMULATE: u64 = 1;
    pub const LLN: u64 = 2;
    pub const VAR: u64 = 3;
    pub const CLT: u64 = 4;
    pub const R_MOMENTS: u64 = 5;
    pub const R_TAIL: u64 = 6;
    pub const REGULARITY: u64 = 7;
    pub const ATOMS: u64 = 8;
    pub const CF_CONTRACTION: u64 = 9;
    pub const CF_PERTURBATION: u64 = 10;
    pub const THETA: u64 = 11;
    pub const RANK_ONE: u64 = 12;
    pub const PROBE: u64 = 100;

    /// Substream for grid point `k` of an experiment domain.
    pub fn at(domain: u64, k: usize) -> u64 {
        domain | ((k as u64 + 1) << 16)
    }
}

#[derive(Debug)]
pub enum ExperimentError {
    Config(ConfigError),
    /// The schedule fails the measures-condition probe in a way that
    /// makes this experiment's quantity meaningless.
    Refused { reason: String, probe: ProbeReport },
    Stats(crate::stats::StatsError),
}

impl fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExperimentError::Config(e) => write!(f, "config error: {e}"),
            ExperimentError::Refused { reason, probe } => write!(
                f,
                "schedule refused: {reason} (probe dispersion {:.4} -> {:.4}, log-norm mean {:.4})",
                probe.initial_dispersion, probe.final_dispersion, probe.log_norm_mean
            ),
            ExperimentError::Stats(e) => write!(f, "statistics error: {e}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<ConfigError> for ExperimentError {
    fn from(e: ConfigError) -> Self {
        ExperimentError::Config(e)
    }
}

impl From<crate::stats::StatsError> for ExperimentError {
    fn from(e: crate::stats::StatsError) -> Self {
        ExperimentError::Stats(e)
    }
}
