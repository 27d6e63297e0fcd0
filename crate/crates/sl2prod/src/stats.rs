//! Streaming moments, empirical-distribution diagnostics and the
//! characteristic-function machinery: Kolmogorov-Smirnov distance to the
//! standard normal, tail probabilities, empirical characteristic
//! functions on symmetric grids, and the non-Gaussianity functional
//!
//! ```text
//! N_rho(eta) = sup_{0 < |t| < rho} |log(phi_eta(t) e^{t^2/2})| / |t|^3
//! ```
//!
//! which is zero exactly for a standard Gaussian. The complex logarithm
//! is taken along the continuous branch starting from log 1 = 0 at t = 0,
//! realized by unwrapping the phase outward from the grid center.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum StatsError {
    NonFinite,
    EmptySample,
    DegenerateSample,
    BadGrid(String),
    /// Adjacent grid points differ in phase by more than pi/2; the grid
    /// is too coarse to define the continuous logarithm branch.
    PhaseJump { at_t: f64 },
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::NonFinite => write!(f, "non-finite value"),
            StatsError::EmptySample => write!(f, "empty sample"),
            StatsError::DegenerateSample => write!(f, "degenerate sample (zero variance)"),
            StatsError::BadGrid(msg) => write!(f, "bad grid: {msg}"),
            StatsError::PhaseJump { at_t } => {
                write!(f, "phase jump over pi/2 near t = {at_t}: grid too coarse")
            }
        }
    }
}

impl std::error::Error for StatsError {}

/// One-pass accumulator for count, mean and the second and third central
/// moment sums. Mergeable, so Monte Carlo workers can combine partial
/// results in a fixed order.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct MomentAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
    m3: f64,
}

impl MomentAccumulator {
    pub const fn new() -> Self {
        MomentAccumulator { count: 0, mean: 0.0, m2: 0.0, m3: 0.0 }
    }

    pub fn push(&mut self, x: f64) -> Result<(), StatsError> {
        if !x.is_finite() {
            return Err(StatsError::NonFinite);
        }
        let n1 = self.count as f64;
        self.count += 1;
        let n = self.count as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let term1 = delta * delta_n * n1;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
        self.mean += delta_n;
        Ok(())
    }

    /// Combination identical (within rounding) to pushing the
    /// concatenated stream.
    pub fn merge(a: &MomentAccumulator, b: &MomentAccumulator) -> MomentAccumulator {
        if a.count == 0 {
            return *b;
        }
        if b.count == 0 {
            return *a;
        }
        let na = a.count as f64;
        let nb = b.count as f64;
        let n = na + nb;
        let delta = b.mean - a.mean;
        let mean = (na * a.mean + nb * b.mean) / n;
        let m2 = a.m2 + b.m2 + delta * delta * na * nb / n;
        let m3 = a.m3
            + b.m3
            + delta * delta * delta * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * b.m2 - nb * a.m2) / n;
        MomentAccumulator { count: a.count + b.count, mean, m2, m3 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance m2 / n.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2 / self.count as f64).max(0.0)
        }
    }

    /// Unbiased sample variance m2 / (n - 1).
    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_error_of_mean(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.sample_variance() / self.count as f64).sqrt()
        }
    }

    /// Third central moment m3 / n.
    pub fn third_central_moment(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m3 / self.count as f64
        }
    }

    pub fn skewness(&self) -> f64 {
        let var = self.variance();
        if var <= 0.0 {
            0.0
        } else {
            self.third_central_moment() / var.powf(1.5)
        }
    }
}

/// A sample held as a sorted vector of finite reals.
#[derive(Debug, Clone)]
pub struct EmpiricalSample {
    values: Vec<f64>,
}

impl EmpiricalSample {
    pub fn new(mut values: Vec<f64>) -> Result<Self, StatsError> {
        if values.is_empty() {
            return Err(StatsError::EmptySample);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite);
        }
        values.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
        Ok(EmpiricalSample { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population standard deviation.
    pub fn sd(&self) -> f64 {
        let m = self.mean();
        (self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64)
            .sqrt()
    }

    /// Mean absolute third power; the empirical C_X of the cubic
    /// characteristic-function bounds.
    pub fn abs_third_moment(&self) -> f64 {
        self.values.iter().map(|v| v.abs().powi(3)).sum::<f64>() / self.values.len() as f64
    }

    /// Plug-in standardization by sample mean and population SD.
    pub fn standardized(&self) -> Result<EmpiricalSample, StatsError> {
        let m = self.mean();
        let sd = self.sd();
        if sd <= 0.0 || !sd.is_finite() {
            return Err(StatsError::DegenerateSample);
        }
        Ok(EmpiricalSample { values: self.values.iter().map(|v| (v - m) / sd).collect() })
    }

    /// Kolmogorov-Smirnov distance of the sample against the standard
    /// normal: sup_i max(i/N - Phi(x_i), Phi(x_i) - (i-1)/N). The caller
    /// standardizes first.
    pub fn ks_distance(&self) -> f64 {
        let n = self.values.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in self.values.iter().enumerate() {
            let phi = normal_cdf(x);
            d = d.max((i + 1) as f64 / n - phi).max(phi - i as f64 / n);
        }
        d
    }

    /// Fraction of values strictly greater than x.
    pub fn tail_prob(&self, x: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v <= x);
        (self.values.len() - idx) as f64 / self.values.len() as f64
    }

    /// Empirical characteristic function on the grid.
    pub fn empirical_cf(&self, grid: &[f64]) -> Result<CharFnGrid, StatsError> {
        empirical_cf_of(&self.values, grid)
    }
}

/// Standard normal CDF by the Abramowitz-Stegun 26.2.17 rational
/// approximation; absolute error below 7.5e-8, which keeps KS values
/// reproducible across platforms at the documented 1e-7 tolerance.
pub fn normal_cdf(x: f64) -> f64 {
    if x < 0.0 {
        return 1.0 - normal_cdf(-x);
    }
    const P: f64 = 0.231_641_9;
    const B1: f64 = 0.319_381_530;
    const B2: f64 = -0.356_563_782;
    const B3: f64 = 1.781_477_937;
    const B4: f64 = -1.821_255_978;
    const B5: f64 = 1.330_274_429;
    let t = 1.0 / (1.0 + P * x);
    let poly = t * (B1 + t * (B2 + t * (B3 + t * (B4 + t * B5))));
    let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    1.0 - pdf * poly
}

/// Uniform symmetric grid of 2*half+1 points over [-rho, rho], with
/// t_{-k} = -t_k exactly and 0 in the middle.
pub fn symmetric_grid(rho: f64, half: usize) -> Vec<f64> {
    assert!(rho > 0.0 && half >= 1);
    let step = rho / half as f64;
    let mut t = vec![0.0; 2 * half + 1];
    for k in 1..=half {
        let v = step * k as f64;
        t[half + k] = v;
        t[half - k] = -v;
    }
    t
}

/// Grid with spacing at most rho/64, the default resolution for N_rho.
pub fn default_grid(rho: f64) -> Vec<f64> {
    symmetric_grid(rho, 128)
}

/// Empirical characteristic function averages on a symmetric grid.
///
/// Invariants: the value at t = 0 is exactly 1; |phi| <= 1 up to
/// rounding; phi(-t) is the exact conjugate of phi(t) because only the
/// nonnegative half is accumulated and the negative half is mirrored.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharFnGrid {
    t: Vec<f64>,
    re: Vec<f64>,
    im: Vec<f64>,
    count: u64,
}

impl CharFnGrid {
    /// Assemble a grid from explicit values, checking the invariants.
    /// Used for closed-form characteristic functions in oracles.
    pub fn from_values(t: Vec<f64>, re: Vec<f64>, im: Vec<f64>, count: u64) -> Result<Self, StatsError> {
        if t.len() != re.len() || t.len() != im.len() {
            return Err(StatsError::BadGrid("mismatched array lengths".into()));
        }
        let center = grid_center(&t)?;
        if (re[center] - 1.0).abs() > 1e-12 || im[center].abs() > 1e-12 {
            return Err(StatsError::BadGrid("value at t = 0 must be 1".into()));
        }
        for k in 0..t.len() {
            if re[k].hypot(im[k]) > 1.0 + 1e-12 {
                return Err(StatsError::BadGrid(format!("|phi| > 1 at t = {}", t[k])));
            }
        }
        Ok(CharFnGrid { t, re, im, count })
    }

    pub fn grid(&self) -> &[f64] {
        &self.t
    }

    pub fn re(&self) -> &[f64] {
        &self.re
    }

    pub fn im(&self) -> &[f64] {
        &self.im
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn modulus(&self, k: usize) -> f64 {
        self.re[k].hypot(self.im[k])
    }
}

fn grid_center(t: &[f64]) -> Result<usize, StatsError> {
    if t.is_empty() {
        return Err(StatsError::BadGrid("empty grid".into()));
    }
    for k in 1..t.len() {
        if t[k] <= t[k - 1] {
            return Err(StatsError::BadGrid("grid not strictly increasing".into()));
        }
    }
    let center = t
        .iter()
        .position(|&v| v == 0.0)
        .ok_or_else(|| StatsError::BadGrid("grid must contain t = 0".into()))?;
    let half = center.min(t.len() - 1 - center);
    for k in 1..=half {
        if t[center + k] != -t[center - k] {
            return Err(StatsError::BadGrid("grid not symmetric about 0".into()));
        }
    }
    if center != t.len() - 1 - center {
        return Err(StatsError::BadGrid("grid not symmetric about 0".into()));
    }
    Ok(center)
}

/// Empirical characteristic function of a raw value slice (any order).
///
/// Only the nonnegative half of the symmetric grid is accumulated; the
/// negative half is mirrored by conjugation, which makes the Hermitian
/// symmetry exact. On a uniform grid each sample costs one sin/cos plus
/// a complex recurrence along the grid.
pub fn empirical_cf_of(values: &[f64], grid: &[f64]) -> Result<CharFnGrid, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let center = grid_center(grid)?;
    let half = grid.len() - 1 - center;

    let step = if half > 0 { grid[center + 1] } else { 0.0 };
    let uniform = (1..=half)
        .all(|k| (grid[center + k] - step * k as f64).abs() <= 1e-12 * (1.0 + step * k as f64));

    let mut sum_re = vec![0.0; half + 1];
    let mut sum_im = vec![0.0; half + 1];
    for &x in values {
        if !x.is_finite() {
            return Err(StatsError::NonFinite);
        }
        if uniform {
            let (ds, dc) = (step * x).sin_cos();
            let mut cr = 1.0;
            let mut ci = 0.0;
            sum_re[0] += 1.0;
            for k in 1..=half {
                let nr = cr * dc - ci * ds;
                let ni = cr * ds + ci * dc;
                cr = nr;
                ci = ni;
                sum_re[k] += cr;
                sum_im[k] += ci;
            }
        } else {
            for k in 0..=half {
                let (s, c) = (grid[center + k] * x).sin_cos();
                sum_re[k] += c;
                sum_im[k] += s;
            }
        }
    }

    let n = values.len() as f64;
    let len = grid.len();
    let mut re = vec![0.0; len];
    let mut im = vec![0.0; len];
    for k in 0..=half {
        let r = sum_re[k] / n;
        let i = sum_im[k] / n;
        re[center + k] = r;
        im[center + k] = i;
        re[center - k] = r;
        im[center - k] = -i;
    }
    Ok(CharFnGrid { t: grid.to_vec(), re, im, count: values.len() as u64 })
}

/// Result of evaluating N_rho on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NRhoOutcome {
    Bounded(f64),
    /// |phi| fell under the modulus floor inside (-rho, rho); the
    /// logarithm is ill-defined and the functional may be infinite.
    Unbounded,
}

/// Modulus floor distinguishing genuine vanishing of the characteristic
/// function from statistical noise.
pub const NRHO_MODULUS_FLOOR: f64 = 1e-6;

/// N_rho with the default modulus floor.
pub fn n_rho(cf: &CharFnGrid, rho: f64) -> Result<NRhoOutcome, StatsError> {
    n_rho_with_floor(cf, rho, NRHO_MODULUS_FLOOR)
}

/// Grid maximum of |log(phi(t) e^{t^2/2})| / |t|^3 over 0 < |t| < rho,
/// with the phase unwrapped continuously from t = 0 outward. A lower
/// estimate of the supremum; the grid must cover (-rho, rho) with spacing
/// at most rho/64.
pub fn n_rho_with_floor(cf: &CharFnGrid, rho: f64, floor: f64) -> Result<NRhoOutcome, StatsError> {
    if !(rho > 0.0) {
        return Err(StatsError::BadGrid("rho must be positive".into()));
    }
    let t = &cf.t;
    let center = grid_center(t)?;
    let last_in = t.iter().rposition(|&v| v < rho).unwrap_or(center);
    if last_in <= center && rho > t[center + 1.min(t.len() - 1 - center)] {
        return Err(StatsError::BadGrid("grid does not reach rho".into()));
    }
    // Coverage check: spacing below rho/64 and the grid extends to within
    // one spacing of rho.
    let max_spacing = rho / 64.0;
    for k in center..last_in {
        if t[k + 1] - t[k] > max_spacing * (1.0 + 1e-9) {
            return Err(StatsError::BadGrid(format!(
                "grid spacing {} exceeds rho/64 = {}",
                t[k + 1] - t[k],
                max_spacing
            )));
        }
    }
    if rho - t[last_in] > max_spacing * (1.0 + 1e-9) {
        return Err(StatsError::BadGrid("grid stops short of rho".into()));
    }

    // Walk the nonnegative half; Hermitian symmetry makes the negative
    // half contribute the same magnitudes.
    let mut best: f64 = 0.0;
    let mut phase = 0.0;
    let mut prev_re = cf.re[center];
    let mut prev_im = cf.im[center];
    for k in (center + 1)..=last_in {
        let re = cf.re[k];
        let im = cf.im[k];
        let modulus = re.hypot(im);
        if modulus < floor {
            return Ok(NRhoOutcome::Unbounded);
        }
        // Principal-branch increment between adjacent grid points. A
        // jump over pi/2 at near-zero modulus is a zero crossing that
        // slipped between grid points (the transversal dip scales with
        // the spacing); at healthy modulus it means the grid cannot
        // resolve the branch.
        let delta = (im * prev_re - re * prev_im).atan2(re * prev_re + im * prev_im);
        if delta.abs() > std::f64::consts::FRAC_PI_2 {
            let prev_mod = prev_re.hypot(prev_im);
            let vanish_scale = floor.sqrt().max(2.0 * (t[k] - t[k - 1]));
            if modulus.min(prev_mod) <= vanish_scale {
                return Ok(NRhoOutcome::Unbounded);
            }
            return Err(StatsError::PhaseJump { at_t: t[k] });
        }
        phase += delta;
        prev_re = re;
        prev_im = im;

        let g_re = modulus.ln() + 0.5 * t[k] * t[k];
        let g = g_re.hypot(phase);
        best = best.max(g / (t[k] * t[k] * t[k]).abs());
    }
    Ok(NRhoOutcome::Bounded(best))
}

/// Delete-one-block jackknife standard error from replicate estimates.
pub fn jackknife_se(replicates: &[f64]) -> f64 {
    let k = replicates.len();
    if k < 2 {
        return 0.0;
    }
    let mean = replicates.iter().sum::<f64>() / k as f64;
    let ss: f64 = replicates.iter().map(|r| (r - mean) * (r - mean)).sum();
    ((k - 1) as f64 / k as f64 * ss).sqrt()
}

/// Least-squares slope of y against x; None with fewer than two points
/// or a degenerate x spread.
pub fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}
