//! Growth-law experiments on the log-norm process: the law of large
//! numbers for L_n = E xi_n, linear variance growth, the empirical
//! central limit theorem, and a plain moment summary.

use super::config::ExperimentConfig;
use super::domains;
use super::report::{Record, Report, Verdict, VerdictStatus};
use super::{engine, ExperimentError};
use crate::cocycle::simulate_xi_grid;
use crate::measures::{probe_schedule, ProbeClass, ProbeReport};
use crate::rng::CounterRng;
use crate::stats::{jackknife_se, EmpiricalSample, MomentAccumulator};

/// Spec-pinned slack for the variance positivity check, in SEs.
const VAR_POSITIVITY_SE: f64 = 4.0;
/// A sample with variance below this is degenerate (deterministic
/// schedule).
const DEGENERATE_VAR: f64 = 1e-20;

pub(super) fn run_probe(cfg: &ExperimentConfig) -> ProbeReport {
    let mut rng = CounterRng::for_trial(cfg.seed, domains::PROBE, 0);
    probe_schedule(&cfg.schedule, 32, 50, &mut rng)
}

/// Per-chunk and merged moment accumulators of xi at every grid length.
struct GridMoments {
    chunk_accs: Vec<Vec<MomentAccumulator>>,
    merged: Vec<MomentAccumulator>,
}

fn xi_grid_moments(cfg: &ExperimentConfig, domain: u64) -> GridMoments {
    let grid = cfg.n_grid.clone();
    let chunk_accs = engine::run_chunked(cfg.trials, cfg.workers, |range| {
        let mut accs = vec![MomentAccumulator::new(); grid.len()];
        for trial in range {
            let mut rng = CounterRng::for_trial(cfg.seed, domain, trial);
            let xs = simulate_xi_grid(&cfg.schedule, &grid, &mut rng);
            for (acc, x) in accs.iter_mut().zip(&xs) {
                acc.push(*x).expect("finite log-norm");
            }
        }
        accs
    });
    let merged = (0..grid.len())
        .map(|k| {
            chunk_accs
                .iter()
                .fold(MomentAccumulator::new(), |m, accs| MomentAccumulator::merge(&m, &accs[k]))
        })
        .collect();
    GridMoments { chunk_accs, merged }
}

/// Delete-one-chunk jackknife SE of the sample variance at grid index k.
fn variance_jackknife_se(gm: &GridMoments, k: usize) -> f64 {
    if gm.chunk_accs.len() < 2 {
        return 0.0;
    }
    let reps: Vec<f64> = (0..gm.chunk_accs.len())
        .map(|skip| {
            gm.chunk_accs
                .iter()
                .enumerate()
                .filter(|(c, _)| *c != skip)
                .fold(MomentAccumulator::new(), |m, (_, accs)| {
                    MomentAccumulator::merge(&m, &accs[k])
                })
                .sample_variance()
        })
        .collect();
    jackknife_se(&reps)
}

/// Plain Monte Carlo summary of xi_n over the grid: mean, variance,
/// skewness. No verdicts.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let mut report = Report::new("simulate", cfg);
    report.probe = Some(run_probe(cfg));
    let gm = xi_grid_moments(cfg, domains::SIMULATE);
    for (k, &n) in cfg.n_grid.iter().enumerate() {
        let acc = &gm.merged[k];
        let point = format!("n={n}");
        report.records.push(Record::new(
            &point,
            "mean_xi",
            acc.mean(),
            Some(acc.std_error_of_mean()),
            acc.count(),
        ));
        report.records.push(Record::new(
            &point,
            "var_xi",
            acc.sample_variance(),
            Some(variance_jackknife_se(&gm, k)),
            acc.count(),
        ));
        report.records.push(Record::new(&point, "skewness_xi", acc.skewness(), None, acc.count()));
    }
    report.finish_clock(started);
    Ok(report)
}

/// Law of large numbers: L_n grows at least linearly and the normalized
/// dispersion of xi_n shrinks. Refuses isometric schedules, whose norms
/// never grow.
pub fn run_lln(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let probe = run_probe(cfg);
    if probe.classification == ProbeClass::Isometric {
        return Err(ExperimentError::Refused {
            reason: "isometric action: letter log-norms vanish, measures condition violated"
                .to_string(),
            probe,
        });
    }
    let mut report = Report::new("lln", cfg);
    report.probe = Some(probe);

    let gm = xi_grid_moments(cfg, domains::LLN);
    let slack = cfg.thresholds.se_slack;
    let mut fitted_lower = f64::INFINITY;
    let mut dispersions = Vec::with_capacity(cfg.n_grid.len());
    for (k, &n) in cfg.n_grid.iter().enumerate() {
        let acc = &gm.merged[k];
        let point = format!("n={n}");
        let se = acc.std_error_of_mean();
        let dispersion = acc.sample_variance().sqrt() / n as f64;
        dispersions.push(dispersion);
        fitted_lower = fitted_lower.min((acc.mean() - slack * se) / n as f64);
        report.records.push(Record::new(&point, "mean_xi", acc.mean(), Some(se), acc.count()));
        report.records.push(Record::new(
            &point,
            "mean_xi_per_n",
            acc.mean() / n as f64,
            Some(se / n as f64),
            acc.count(),
        ));
        report.records.push(Record::new(
            &point,
            "dispersion_per_n",
            dispersion,
            None,
            acc.count(),
        ));
    }

    report.verdicts.push(Verdict::soft(
        "lln-linear-growth",
        if fitted_lower > 0.0 { VerdictStatus::Pass } else { VerdictStatus::Fail },
        format!("min over grid of (mean_xi - {slack}*SE)/n > 0"),
        fitted_lower,
    ));

    let d_first = dispersions[0];
    let d_last = *dispersions.last().expect("nonempty grid");
    let (status, observed) = if d_first < 1e-12 && d_last < 1e-12 {
        // Deterministic schedule: dispersion identically zero.
        (VerdictStatus::Pass, 0.0)
    } else if d_first < 1e-12 {
        (VerdictStatus::Fail, f64::MAX)
    } else {
        let ratio = d_last / d_first;
        (if ratio <= 0.9 { VerdictStatus::Pass } else { VerdictStatus::Fail }, ratio)
    };
    report.verdicts.push(Verdict::soft(
        "lln-dispersion-shrinks",
        status,
        "sd(xi_n)/n at last grid point at most 0.9 of first (0 allowed when both vanish)",
        if observed.is_finite() { observed } else { 1e300 },
    ));

    report.finish_clock(started);
    Ok(report)
}

/// Linear variance growth C1 n <= Var xi_n <= C2 n, checked as
/// positivity of Var/n at 4 SE and a bounded max/min band ratio.
pub fn run_variance_growth(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let mut report = Report::new("var", cfg);
    report.probe = Some(run_probe(cfg));

    let gm = xi_grid_moments(cfg, domains::VAR);
    let burn_in = cfg.thresholds.var_burn_in;
    let mut c1 = f64::INFINITY;
    let mut c2: f64 = 0.0;
    let mut min_margin = f64::INFINITY;
    let mut max_var: f64 = 0.0;
    for (k, &n) in cfg.n_grid.iter().enumerate() {
        let acc = &gm.merged[k];
        let var = acc.sample_variance();
        let se = variance_jackknife_se(&gm, k);
        max_var = max_var.max(var);
        let point = format!("n={n}");
        report.records.push(Record::new(&point, "var_xi", var, Some(se), acc.count()));
        report.records.push(Record::new(
            &point,
            "var_xi_per_n",
            var / n as f64,
            Some(se / n as f64),
            acc.count(),
        ));
        if n >= burn_in {
            c1 = c1.min(var / n as f64);
            c2 = c2.max(var / n as f64);
        }
        min_margin = min_margin.min(var - VAR_POSITIVITY_SE * se);
    }
    report.records.push(Record::new("grid", "fitted_c1", if c1.is_finite() { c1 } else { 0.0 }, None, cfg.trials));
    report.records.push(Record::new("grid", "fitted_c2", c2, None, cfg.trials));

    if max_var < DEGENERATE_VAR {
        let v = Verdict {
            name: "variance-linear-growth".to_string(),
            status: VerdictStatus::Degenerate,
            hard: false,
            threshold: "degenerate (measures condition violated): Var xi identically 0".to_string(),
            observed: max_var,
        };
        report.verdicts.push(v);
    } else {
        report.verdicts.push(Verdict::soft(
            "variance-lower-positive",
            if min_margin > 0.0 { VerdictStatus::Pass } else { VerdictStatus::Fail },
            format!("Var xi_n - {VAR_POSITIVITY_SE}*SE > 0 at every grid length"),
            min_margin,
        ));
        let ratio = c2 / c1;
        report.verdicts.push(Verdict::soft(
            "variance-band",
            if ratio <= cfg.thresholds.var_band_ratio {
                VerdictStatus::Pass
            } else {
                VerdictStatus::Fail
            },
            format!(
                "max/min of Var xi_n / n over grid (n >= {burn_in}) <= {}",
                cfg.thresholds.var_band_ratio
            ),
            ratio,
        ));
    }

    report.finish_clock(started);
    Ok(report)
}

/// Per-grid-length samples of xi in trial order, plus chunk boundaries
/// for jackknife resampling.
fn xi_grid_samples(cfg: &ExperimentConfig, domain: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let grid = cfg.n_grid.clone();
    let chunks = engine::run_chunked(cfg.trials, cfg.workers, |range| {
        let mut per_n: Vec<Vec<f64>> = vec![Vec::with_capacity((range.end - range.start) as usize); grid.len()];
        for trial in range.clone() {
            let mut rng = CounterRng::for_trial(cfg.seed, domain, trial);
            let xs = simulate_xi_grid(&cfg.schedule, &grid, &mut rng);
            for (store, x) in per_n.iter_mut().zip(&xs) {
                store.push(*x);
            }
        }
        per_n
    });
    let mut sizes = Vec::with_capacity(chunks.len());
    let mut merged: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.trials as usize); grid.len()];
    for chunk in chunks {
        sizes.push(chunk[0].len());
        for (store, part) in merged.iter_mut().zip(chunk) {
            store.extend(part);
        }
    }
    (merged, sizes)
}

/// Empirical CLT: the plug-in standardized xi_n should be close to the
/// standard normal in Kolmogorov-Smirnov distance.
pub fn run_clt(cfg: &ExperimentConfig) -> Result<Report, ExperimentError> {
    cfg.validate()?;
    let started = std::time::Instant::now();
    let mut report = Report::new("clt", cfg);
    report.probe = Some(run_probe(cfg));

    let (samples, chunk_sizes) = xi_grid_samples(cfg, domains::CLT);
    for (k, &n) in cfg.n_grid.iter().enumerate() {
        let point = format!("n={n}");
        let raw = &samples[k];
        let sample = EmpiricalSample::new(raw.clone()).expect("finite non-empty xi sample");
        if sample.sd().powi(2) < DEGENERATE_VAR {
            report.verdicts.push(Verdict {
                name: format!("clt-ks@{point}"),
                status: VerdictStatus::Degenerate,
                hard: false,
                threshold: "degenerate sample: zero variance".to_string(),
                observed: 0.0,
            });
            report.records.push(Record::new(&point, "sd_xi", 0.0, None, raw.len() as u64));
            continue;
        }
        let std = sample.standardized().expect("non-degenerate here");
        let ks = std.ks_distance();

        // Delete-one-chunk jackknife of the KS statistic, restandardizing
        // each replicate.
        let mut reps = Vec::with_capacity(chunk_sizes.len());
        let mut start = 0usize;
        for &size in &chunk_sizes {
            let mut kept = Vec::with_capacity(raw.len() - size);
            kept.extend_from_slice(&raw[..start]);
            kept.extend_from_slice(&raw[start + size..]);
            start += size;
            if kept.is_empty() {
                continue;
            }
            let rep = EmpiricalSample::new(kept)
                .expect("finite")
                .standardized()
                .map(|s| s.ks_distance())
                .unwrap_or(1.0);
            reps.push(rep);
        }
        let se = jackknife_se(&reps);

        report.records.push(Record::new(&point, "ks_distance", ks, Some(se), raw.len() as u64));
        report.records.push(Record::new(&point, "skewness_xi", {
            let mut acc = MomentAccumulator::new();
            for &x in raw {
                acc.push(x).expect("finite");
            }
            acc.skewness()
        }, None, raw.len() as u64));
        report.records.push(Record::new(&point, "mean_xi", sample.mean(), None, raw.len() as u64));
        report.records.push(Record::new(&point, "sd_xi", sample.sd(), None, raw.len() as u64));

        report.verdicts.push(Verdict::soft(
            format!("clt-ks@{point}"),
            if ks <= cfg.thresholds.ks_max { VerdictStatus::Pass } else { VerdictStatus::Fail },
            format!("KS distance to N(0,1) <= {}", cfg.thresholds.ks_max),
            ks,
        ));
    }

    report.finish_clock(started);
    Ok(report)
}
