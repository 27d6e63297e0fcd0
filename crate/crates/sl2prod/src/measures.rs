//! Probability measures on SL(2,R): parametric samplers, non-stationary
//! schedules of per-index distributions, and diagnostics for the moment
//! and measures conditions.
//!
//! The measures condition (no pair of probability measures on RP^1 such
//! that almost every letter pushes the first onto the second) is not
//! algorithmically decidable for an arbitrary sampler, so the probe here
//! is a heuristic: it detects the two failure modes that actually break
//! experiments, isometric action (rotation-only letters) and collapse of
//! a projective point cloud onto a deterministic direction structure.

use std::borrow::Cow;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rng::CounterRng;
use crate::sl2::{ProjectivePoint, Sl2Matrix};
use crate::stats::MomentAccumulator;

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureError {
    BadProbabilities { sum: f64 },
    NegativeProbability { value: f64 },
    EmptySupport,
    BadScalarDist(String),
    DriftVariantMismatch { field: &'static str },
    BadSteps,
}

impl fmt::Display for MeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureError::BadProbabilities { sum } => {
                write!(f, "probabilities sum to {sum}, expected 1")
            }
            MeasureError::NegativeProbability { value } => {
                write!(f, "negative probability {value}")
            }
            MeasureError::EmptySupport => write!(f, "sampler has empty support"),
            MeasureError::BadScalarDist(msg) => write!(f, "bad scalar distribution: {msg}"),
            MeasureError::DriftVariantMismatch { field } => {
                write!(f, "drifting schedule endpoints use different {field} variants")
            }
            MeasureError::BadSteps => write!(f, "drifting schedule needs steps >= 1"),
        }
    }
}

impl std::error::Error for MeasureError {}

/// Scalar distribution for a decomposition parameter. Uniform draws
/// consume 1 stream value, Gaussian 2, Constant 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ScalarDist {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl ScalarDist {
    pub fn validate(&self) -> Result<(), MeasureError> {
        match self {
            ScalarDist::Constant { value } => {
                if !value.is_finite() {
                    return Err(MeasureError::BadScalarDist("non-finite constant".into()));
                }
            }
            ScalarDist::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return Err(MeasureError::BadScalarDist(format!(
                        "uniform bounds [{lo}, {hi}]"
                    )));
                }
            }
            ScalarDist::Gaussian { mean, sd } => {
                if !(mean.is_finite() && sd.is_finite() && *sd >= 0.0) {
                    return Err(MeasureError::BadScalarDist(format!(
                        "gaussian mean {mean}, sd {sd}"
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn draw(&self, rng: &mut CounterRng) -> f64 {
        match self {
            ScalarDist::Constant { value } => *value,
            ScalarDist::Uniform { lo, hi } => rng.uniform_in(*lo, *hi),
            ScalarDist::Gaussian { mean, sd } => rng.gaussian(*mean, *sd),
        }
    }

    /// Linear interpolation of parameters; both sides must be the same
    /// variant.
    fn lerp(&self, other: &ScalarDist, t: f64, field: &'static str) -> Result<ScalarDist, MeasureError> {
        let mix = |a: f64, b: f64| a + (b - a) * t;
        match (self, other) {
            (ScalarDist::Constant { value: a }, ScalarDist::Constant { value: b }) => {
                Ok(ScalarDist::Constant { value: mix(*a, *b) })
            }
            (ScalarDist::Uniform { lo: a, hi: b }, ScalarDist::Uniform { lo: c, hi: d }) => {
                Ok(ScalarDist::Uniform { lo: mix(*a, *c), hi: mix(*b, *d) })
            }
            (
                ScalarDist::Gaussian { mean: a, sd: b },
                ScalarDist::Gaussian { mean: c, sd: d },
            ) => Ok(ScalarDist::Gaussian { mean: mix(*a, *c), sd: mix(*b, *d) }),
            _ => Err(MeasureError::DriftVariantMismatch { field }),
        }
    }
}

/// One atom of a finite-support measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub matrix: Sl2Matrix,
    pub prob: f64,
}

/// Independent distributions for the rotation-scale-rotation normal form
/// Rot(beta1) diag(e^sigma, e^-sigma) Rot(beta2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotScaleRotSpec {
    pub beta1: ScalarDist,
    pub log_scale: ScalarDist,
    pub beta2: ScalarDist,
}

impl RotScaleRotSpec {
    pub fn validate(&self) -> Result<(), MeasureError> {
        self.beta1.validate()?;
        self.log_scale.validate()?;
        self.beta2.validate()
    }

    fn lerp(&self, other: &RotScaleRotSpec, t: f64) -> Result<RotScaleRotSpec, MeasureError> {
        Ok(RotScaleRotSpec {
            beta1: self.beta1.lerp(&other.beta1, t, "beta1")?,
            log_scale: self.log_scale.lerp(&other.log_scale, t, "log_scale")?,
            beta2: self.beta2.lerp(&other.beta2, t, "beta2")?,
        })
    }
}

/// A probability measure on SL(2,R) that can be sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum MatrixSampler {
    /// Categorical over finitely many matrices; 1 stream draw per sample.
    FiniteSupport { atoms: Vec<Atom> },
    /// Rot(beta1) diag(e^s, e^-s) Rot(beta2) with independent parameters.
    RotScaleRot {
        #[serde(flatten)]
        spec: RotScaleRotSpec,
    },
    /// Inner sampler conjugated by a fixed matrix: C A C^-1.
    Conjugated { inner: Box<MatrixSampler>, conjugator: Sl2Matrix },
    /// Weighted mixture; 1 stream draw to choose the component.
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub sampler: MatrixSampler,
}

fn check_weights(weights: impl Iterator<Item = f64>, n: usize) -> Result<(), MeasureError> {
    if n == 0 {
        return Err(MeasureError::EmptySupport);
    }
    let mut sum = 0.0;
    for w in weights {
        if w < 0.0 || !w.is_finite() {
            return Err(MeasureError::NegativeProbability { value: w });
        }
        sum += w;
    }
    if (sum - 1.0).abs() > 1e-12 {
        return Err(MeasureError::BadProbabilities { sum });
    }
    Ok(())
}

impl MatrixSampler {
    pub fn validate(&self) -> Result<(), MeasureError> {
        match self {
            MatrixSampler::FiniteSupport { atoms } => {
                check_weights(atoms.iter().map(|a| a.prob), atoms.len())
            }
            MatrixSampler::RotScaleRot { spec } => spec.validate(),
            MatrixSampler::Conjugated { inner, .. } => inner.validate(),
            MatrixSampler::Mixture { components } => {
                check_weights(components.iter().map(|c| c.weight), components.len())?;
                components.iter().try_for_each(|c| c.sampler.validate())
            }
        }
    }

    /// Draw one letter. The output always satisfies the SL(2,R)
    /// invariants; rotation-scale-rotation letters are composed in closed
    /// form so their determinant is 1 analytically.
    pub fn sample(&self, rng: &mut CounterRng) -> Sl2Matrix {
        match self {
            MatrixSampler::FiniteSupport { atoms } => {
                let u = rng.uniform();
                let mut cum = 0.0;
                for atom in atoms {
                    cum += atom.prob;
                    if u < cum {
                        return atom.matrix;
                    }
                }
                atoms.last().expect("validated non-empty support").matrix
            }
            MatrixSampler::RotScaleRot { spec } => {
                let beta1 = spec.beta1.draw(rng);
                let sigma = spec.log_scale.draw(rng);
                let beta2 = spec.beta2.draw(rng);
                Sl2Matrix::from_rot_scale_rot(beta1, sigma, beta2)
            }
            MatrixSampler::Conjugated { inner, conjugator } => {
                let a = inner.sample(rng);
                conjugator
                    .multiply(&a)
                    .and_then(|ca| ca.multiply(&conjugator.inverse()))
                    .expect("conjugation by a fixed SL(2,R) matrix stays in SL(2,R)")
            }
            MatrixSampler::Mixture { components } => {
                let u = rng.uniform();
                let mut cum = 0.0;
                for comp in components {
                    cum += comp.weight;
                    if u < cum {
                        return comp.sampler.sample(rng);
                    }
                }
                components.last().expect("validated non-empty mixture").sampler.sample(rng)
            }
        }
    }
}

/// A sequence of letter distributions (mu_i), i >= 1. Deterministic in
/// the index, so any worker can reconstruct the distribution of any
/// letter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Schedule {
    /// One sampler for every index.
    Stationary { sampler: MatrixSampler },
    /// Samplers cycled in order.
    Periodic { samplers: Vec<MatrixSampler> },
    /// Rotation-scale-rotation parameters interpolated linearly from
    /// `start` (index 1) to `end` (index `steps`), constant afterwards.
    Drifting { start: RotScaleRotSpec, end: RotScaleRotSpec, steps: usize },
    /// Explicit per-index list; the last sampler repeats forever.
    Explicit { samplers: Vec<MatrixSampler> },
}

impl Schedule {
    pub fn stationary(sampler: MatrixSampler) -> Schedule {
        Schedule::Stationary { sampler }
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        match self {
            Schedule::Stationary { sampler } => sampler.validate(),
            Schedule::Periodic { samplers } | Schedule::Explicit { samplers } => {
                if samplers.is_empty() {
                    return Err(MeasureError::EmptySupport);
                }
                samplers.iter().try_for_each(|s| s.validate())
            }
            Schedule::Drifting { start, end, steps } => {
                if *steps < 1 {
                    return Err(MeasureError::BadSteps);
                }
                start.validate()?;
                end.validate()?;
                // Interpolation requires matching variants; probe at the
                // midpoint so the mismatch surfaces at validation time.
                start.lerp(end, 0.5).map(|_| ())
            }
        }
    }

    /// Distribution of the i-th letter, for i >= 1. An index of 0 is a
    /// caller bug.
    pub fn sampler_at(&self, i: usize) -> Cow<'_, MatrixSampler> {
        assert!(i >= 1, "schedule indices start at 1");
        match self {
            Schedule::Stationary { sampler } => Cow::Borrowed(sampler),
            Schedule::Periodic { samplers } => Cow::Borrowed(&samplers[(i - 1) % samplers.len()]),
            Schedule::Explicit { samplers } => {
                Cow::Borrowed(&samplers[(i - 1).min(samplers.len() - 1)])
            }
            Schedule::Drifting { start, end, steps } => {
                let t = if *steps <= 1 {
                    1.0
                } else {
                    ((i - 1) as f64 / (*steps - 1) as f64).min(1.0)
                };
                let spec = start.lerp(end, t).expect("validated drift endpoints");
                Cow::Owned(MatrixSampler::RotScaleRot { spec })
            }
        }
    }

    /// Draw the i-th letter.
    #[inline]
    pub fn draw(&self, i: usize, rng: &mut CounterRng) -> Sl2Matrix {
        self.sampler_at(i).sample(rng)
    }
}

/// Monte Carlo estimate of E (log ||A||)^gamma with its standard error.
pub fn log_norm_moment(
    sampler: &MatrixSampler,
    gamma: f64,
    trials: u64,
    rng: &mut CounterRng,
) -> (f64, f64) {
    assert!(trials >= 1);
    let mut acc = MomentAccumulator::new();
    for _ in 0..trials {
        let a = sampler.sample(rng);
        acc.push(a.operator_norm().ln().powf(gamma)).expect("finite log-norm moment");
    }
    (acc.mean(), acc.std_error_of_mean())
}

/// Classification produced by the measures-condition probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeClass {
    /// Point clouds keep dispersion and letters expand: no degeneracy
    /// detected.
    Active,
    /// Letters are isometries of RP^1 (rotations); the action preserves
    /// Lebesgue measure, so the measures condition fails.
    Isometric,
    /// A common random word collapses the cloud toward a deterministic
    /// direction structure.
    Collapsed,
}

/// Dispersion diagnostics for a sampler acting on RP^1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProbeReport {
    pub initial_dispersion: f64,
    pub final_dispersion: f64,
    pub log_norm_mean: f64,
    pub log_norm_var: f64,
    pub classification: ProbeClass,
}

const PROBE_WORDS: usize = 8;
const COLLAPSE_FRACTION: f64 = 0.05;

fn dispersion(points: &[ProjectivePoint]) -> f64 {
    let n = points.len();
    let mut sum = 0.0;
    let mut pairs = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += points[i].distance(points[j]);
            pairs += 1;
        }
    }
    sum / pairs as f64
}

/// Push an evenly spread point cloud through common random words and
/// score the dispersion of the pooled images across words.
///
/// Any norm-growing word contracts the cloud toward its own attracting
/// direction, so per-word dispersion vanishes for degenerate and healthy
/// samplers alike. What separates them is where the words send the
/// cloud: a deterministic image structure pools every word's images onto
/// the same directions (score near 0), while a genuinely mixing sampler
/// scatters them (score bounded away from 0). Isometric samplers keep
/// the initial dispersion and are flagged separately through the letter
/// log-norms.
pub fn invariant_measure_probe(
    sampler: &MatrixSampler,
    points: usize,
    iterations: usize,
    rng: &mut CounterRng,
) -> ProbeReport {
    probe_letters(points, iterations, rng, |_, rng| sampler.sample(rng))
}

/// Same probe driven by a schedule's per-index letters.
pub fn probe_schedule(
    schedule: &Schedule,
    points: usize,
    iterations: usize,
    rng: &mut CounterRng,
) -> ProbeReport {
    probe_letters(points, iterations, rng, |i, rng| schedule.draw(i, rng))
}

fn probe_letters(
    points: usize,
    iterations: usize,
    rng: &mut CounterRng,
    mut letter: impl FnMut(usize, &mut CounterRng) -> Sl2Matrix,
) -> ProbeReport {
    assert!(points >= 2, "probe needs at least two points");
    let cloud: Vec<ProjectivePoint> = (0..points)
        .map(|j| ProjectivePoint::from_angle(std::f64::consts::PI * j as f64 / points as f64))
        .collect();
    let initial = dispersion(&cloud);

    let mut lognorm = MomentAccumulator::new();
    let mut pooled = Vec::with_capacity(points * PROBE_WORDS);
    for _ in 0..PROBE_WORDS {
        let mut images = cloud.clone();
        for i in 1..=iterations {
            let a = letter(i, rng);
            lognorm.push(a.operator_norm().ln()).expect("finite letter log-norm");
            for p in images.iter_mut() {
                *p = a.proj_action(*p);
            }
        }
        pooled.extend_from_slice(&images);
    }
    let final_dispersion = dispersion(&pooled);

    let classification = if lognorm.mean() < 1e-9 && lognorm.variance() < 1e-12 {
        ProbeClass::Isometric
    } else if final_dispersion < COLLAPSE_FRACTION * initial {
        ProbeClass::Collapsed
    } else {
        ProbeClass::Active
    };

    ProbeReport {
        initial_dispersion: initial,
        final_dispersion,
        log_norm_mean: lognorm.mean(),
        log_norm_var: lognorm.variance(),
        classification,
    }
}
