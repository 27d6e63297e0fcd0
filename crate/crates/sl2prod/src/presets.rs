//! Built-in schedules. Experiments need trustworthy instances on both
//! sides: schedules with empirically verified norm growth and mixing, and
//! degenerate negative controls.

use crate::measures::{Atom, MatrixSampler, RotScaleRotSpec, ScalarDist, Schedule};
use crate::sl2::Sl2Matrix;

/// Log-scale of the fixed hyperbolic factor in [`rot_hyp`].
pub const ROT_HYP_SIGMA: f64 = 1.0;

/// Uniform random rotation composed with a fixed hyperbolic matrix:
/// A = Rot(beta) diag(e, 1/e) with beta ~ U[0, pi).
///
/// The uniform kick makes the direction process uniform at every step, so
/// the log-norm increments are iid with mean log cosh(1); norm growth,
/// variance growth and the CLT all hold and are easy to cross-check. The
/// projective point-cloud probe reports this schedule as active.
pub fn rot_hyp() -> Schedule {
    Schedule::stationary(MatrixSampler::RotScaleRot {
        spec: RotScaleRotSpec {
            beta1: ScalarDist::Uniform { lo: 0.0, hi: std::f64::consts::PI },
            log_scale: ScalarDist::Constant { value: ROT_HYP_SIGMA },
            beta2: ScalarDist::Constant { value: 0.0 },
        },
    })
}

/// Fair coin over two positive hyperbolic matrices with distinct axes,
/// [[2,1],[1,1]] and [[1,1],[1,2]]. Small enough support that exhaustive
/// word enumeration is exact for short products.
pub fn bernoulli_2x2() -> Schedule {
    let m1 = Sl2Matrix::new(2.0, 1.0, 1.0, 1.0).expect("unimodular");
    let m2 = Sl2Matrix::new(1.0, 1.0, 1.0, 2.0).expect("unimodular");
    Schedule::stationary(MatrixSampler::FiniteSupport {
        atoms: vec![Atom { matrix: m1, prob: 0.5 }, Atom { matrix: m2, prob: 0.5 }],
    })
}

/// Non-stationary drift: the hyperbolic strength ramps from 0.6 to 1.4
/// over the first 2000 letters while the rotation kick stays uniform.
pub fn drift() -> Schedule {
    let at = |sigma: f64| RotScaleRotSpec {
        beta1: ScalarDist::Uniform { lo: 0.0, hi: std::f64::consts::PI },
        log_scale: ScalarDist::Constant { value: sigma },
        beta2: ScalarDist::Constant { value: 0.0 },
    };
    Schedule::Drifting { start: at(0.6), end: at(1.4), steps: 2000 }
}

/// Negative control: uniform random rotations. Isometric on RP^1, zero
/// log norms, measures condition violated.
pub fn degenerate_rotation() -> Schedule {
    Schedule::stationary(MatrixSampler::RotScaleRot {
        spec: RotScaleRotSpec {
            beta1: ScalarDist::Uniform { lo: 0.0, hi: std::f64::consts::PI },
            log_scale: ScalarDist::Constant { value: 0.0 },
            beta2: ScalarDist::Constant { value: 0.0 },
        },
    })
}

/// Negative control: the deterministic letter diag(2, 1/2). Norms grow
/// but nothing is random; every variance-based verdict degenerates.
pub fn commuting_diag() -> Schedule {
    Schedule::stationary(MatrixSampler::FiniteSupport {
        atoms: vec![Atom {
            matrix: Sl2Matrix::diagonal(2.0).expect("unimodular"),
            prob: 1.0,
        }],
    })
}

/// Names accepted by [`by_name`], for diagnostics.
pub const PRESET_NAMES: [&str; 5] =
    ["rot-hyp", "bernoulli-2x2", "drift", "degenerate-rotation", "commuting-diag"];

/// Look up a preset schedule by CLI name.
pub fn by_name(name: &str) -> Option<Schedule> {
    match name {
        "rot-hyp" => Some(rot_hyp()),
        "bernoulli-2x2" => Some(bernoulli_2x2()),
        "drift" => Some(drift()),
        "degenerate-rotation" => Some(degenerate_rotation()),
        "commuting-diag" => Some(commuting_diag()),
        _ => None,
    }
}
