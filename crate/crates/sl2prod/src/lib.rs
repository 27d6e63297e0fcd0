//! Numerically careful simulation and statistical verification toolkit
//! for non-stationary random products of SL(2,R) matrices.
//!
//! The toolkit reproduces, at desk scale, the quantitative objects of the
//! non-stationary multiplicative ergodic theory: the log-norm process
//! xi_n = log ||A_n ... A_1|| and its mean and variance growth, the
//! subadditivity discrepancy R_{n,n'}, the expansion-loss function
//! Theta(B, v), projective regularity and atom dissolving on RP^1, the
//! non-Gaussianity functional N_rho built from empirical characteristic
//! functions, and an empirical central limit theorem check.
//!
//! Structure:
//! - [`sl2`]: exact SL(2,R) linear algebra (norms, decomposition,
//!   projective action, expansion loss);
//! - [`rng`]: counter-based splittable randomness for reproducible
//!   parallel Monte Carlo;
//! - [`measures`]: letter distributions, non-stationary schedules and
//!   the measures-condition probe;
//! - [`cocycle`]: scaled products, split samples and projective
//!   trajectories;
//! - [`stats`]: streaming moments, Kolmogorov-Smirnov distance,
//!   empirical characteristic functions and N_rho;
//! - [`experiments`]: orchestrated Monte Carlo experiments with
//!   structured JSON/CSV reports;
//! - [`presets`]: built-in schedules with known-good and known-degenerate
//!   behavior.

pub mod cocycle;
pub mod experiments;
pub mod measures;
pub mod presets;
pub mod rng;
pub mod sl2;
pub mod stats;
