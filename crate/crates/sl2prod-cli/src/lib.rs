//! Command-line driver: resolve a schedule from a preset or a JSON
//! config, apply flag overrides, dispatch the experiment, and write the
//! report as JSON or CSV.
//!
//! Exit codes: 0 when the experiment ran and every hard assertion
//! passed, 1 when a hard pathwise assertion failed, 2 on configuration
//! errors (malformed config, unknown preset, refused schedule).

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use sl2prod::experiments::{
    self, validate_config, ExperimentConfig, ExperimentError, Report,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_HARD_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "sl2prod",
    version,
    about = "Monte Carlo experiments on non-stationary random products of SL(2,R) matrices",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Moment summary of the log-norm process xi_n
    Simulate(RunArgs),
    /// Law of large numbers: linear growth of L_n = E xi_n
    Lln(RunArgs),
    /// Linear variance growth of xi_n
    Var(RunArgs),
    /// Central limit theorem check (KS distance to the normal)
    Clt(RunArgs),
    /// Boundedness of the discrepancy moments E R^k
    Rmoments(RunArgs),
    /// Power-law tail of the discrepancy R
    Rtail(RunArgs),
    /// Log-Holder regularity of projective hitting probabilities
    Regularity(RunArgs),
    /// Atom dissolving of pushed-forward point masses on RP1
    Atoms(RunArgs),
    /// Contraction of the non-Gaussianity functional under sums
    CfContraction(RunArgs),
    /// Stability of the non-Gaussianity functional under the split
    /// perturbation
    CfPerturbation(RunArgs),
    /// Geometric expansion-loss lemma (zero violations)
    ThetaCheck(RunArgs),
    /// Rank-one block variance floor
    RankOne(RunArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Built-in schedule preset (rot-hyp, bernoulli-2x2, drift,
    /// degenerate-rotation, commuting-diag)
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// JSON config document path
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single product length (shorthand for --n-grid N)
    #[arg(long, conflicts_with = "n_grid")]
    n: Option<usize>,
    /// Comma-separated ascending product lengths
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    /// Monte Carlo trials per grid point
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed (defaults to a fixed constant, not wall clock)
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = auto)
    #[arg(long)]
    workers: Option<usize>,
    /// Report output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Exclude wall-clock data so report bodies are byte-identical
    #[arg(long)]
    deterministic: bool,
}

impl RunArgs {
    fn resolve_config(&self) -> Result<ExperimentConfig, String> {
        let mut cfg = if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            validate_config(&text).map_err(|e| e.to_string())?
        } else {
            let name = self.preset.as_deref().unwrap_or("rot-hyp");
            ExperimentConfig::for_preset(name).map_err(|e| e.to_string())?
        };
        if let Some(n) = self.n {
            cfg.n_grid = vec![n];
        }
        if let Some(grid) = &self.n_grid {
            cfg.n_grid = grid.clone();
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        if self.deterministic {
            cfg.deterministic = true;
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    fn emit(&self, report: &Report) -> Result<(), String> {
        let body = match self.format {
            Format::Json => report.to_json(),
            Format::Csv => report.to_csv(),
        };
        match &self.out {
            Some(path) => std::fs::write(path, body.as_bytes())
                .map_err(|e| format!("cannot write report {}: {e}", path.display())),
            None => {
                println!("{body}");
                Ok(())
            }
        }
    }
}

fn dispatch(command: &Command) -> (&RunArgs, fn(&ExperimentConfig) -> Result<Report, ExperimentError>) {
    match command {
        Command::Simulate(a) => (a, experiments::run_simulate),
        Command::Lln(a) => (a, experiments::run_lln),
        Command::Var(a) => (a, experiments::run_variance_growth),
        Command::Clt(a) => (a, experiments::run_clt),
        Command::Rmoments(a) => (a, experiments::run_r_moments),
        Command::Rtail(a) => (a, experiments::run_r_tail),
        Command::Regularity(a) => (a, experiments::run_regularity),
        Command::Atoms(a) => (a, experiments::run_atom_dissolving),
        Command::CfContraction(a) => (a, experiments::run_cf_contraction),
        Command::CfPerturbation(a) => (a, experiments::run_cf_perturbation),
        Command::ThetaCheck(a) => (a, experiments::run_theta_lemma),
        Command::RankOne(a) => (a, experiments::run_rank_one_variance),
    }
}

/// Run the CLI on explicit arguments and return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            eprint!("{e}");
            return EXIT_CONFIG;
        }
    };

    let (args, runner) = dispatch(&cli.command);
    let cfg = match args.resolve_config() {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_CONFIG;
        }
    };

    match runner(&cfg) {
        Ok(report) => {
            if let Err(msg) = args.emit(&report) {
                eprintln!("error: {msg}");
                return EXIT_CONFIG;
            }
            if report.all_hard_passed() {
                EXIT_OK
            } else {
                eprintln!(
                    "error: {} hard assertion(s) failed; see report verdicts",
                    report.failed_hard_verdicts()
                );
                EXIT_HARD_FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

/// Rendered help text; every subcommand must appear here.
pub fn help_text() -> String {
    Cli::command().render_help().to_string()
}
