//! Linear algebra for SL(2,R): operator norms, rotation-diagonal-rotation
//! decomposition, the projective action on RP^1 and the expansion-loss
//! function.
//!
//! Everything here is a pure function on immutable values. The angle
//! metric on RP^1 has period pi, so the diameter of the projective line
//! is pi/2.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Plane vector, row-major.
pub type Vec2 = [f64; 2];

/// Determinant tolerance enforced when constructing an [`Sl2Matrix`].
pub const DET_TOL: f64 = 1e-9;
/// Looser determinant tolerance re-checked after a product.
pub const PRODUCT_DET_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum Sl2Error {
    /// Entries were finite but the determinant was not 1 within tolerance.
    NotUnimodular { det: f64 },
    /// An entry or an intermediate value was NaN or infinite.
    NonFinite,
    /// A zero vector has no direction.
    ZeroVector,
}

impl fmt::Display for Sl2Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sl2Error::NotUnimodular { det } => {
                write!(f, "matrix is not in SL(2,R): det = {det:.17e}")
            }
            Sl2Error::NonFinite => write!(f, "non-finite matrix entry or intermediate"),
            Sl2Error::ZeroVector => write!(f, "zero vector cannot be projectivized"),
        }
    }
}

impl std::error::Error for Sl2Error {}

/// General 2x2 real matrix, row-major. Used for norm-1 unit factors of
/// scaled products, whose determinant is positive but not 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    #[inline]
    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    #[inline]
    pub fn apply(&self, v: Vec2) -> Vec2 {
        [self.a * v[0] + self.b * v[1], self.c * v[0] + self.d * v[1]]
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    #[inline]
    pub fn scale(&self, k: f64) -> Mat2 {
        Mat2 { a: self.a * k, b: self.b * k, c: self.c * k, d: self.d * k }
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// Largest singular value, via the polar decomposition.
    ///
    /// Requires det > 0. Computed as the top eigenvalue of the symmetric
    /// polar factor P = R^T A, which stays accurate to a few ulps even
    /// when the two singular values nearly coincide; the naive closed
    /// form sqrt((F + sqrt(F^2 - 4 det^2))/2) loses half the digits there.
    pub fn op_norm(&self) -> f64 {
        let (p, q, r) = self.polar_symmetric_part();
        let h = (p - r).hypot(2.0 * q);
        0.5 * (p + r + h)
    }

    /// Symmetric factor P of the polar decomposition A = R P, as the
    /// triple (p, q, r) with P = [[p, q], [q, r]].
    fn polar_symmetric_part(&self) -> (f64, f64, f64) {
        // Polar rotation R = (A + adj(A)^T) / h, h = hypot(a+d, c-b) > 0
        // whenever det > 0.
        let alpha = self.a + self.d;
        let beta = self.c - self.b;
        let h = alpha.hypot(beta);
        let (cos_t, sin_t) = (alpha / h, beta / h);
        // P = R^T A.
        let p = cos_t * self.a + sin_t * self.c;
        let q1 = cos_t * self.b + sin_t * self.d;
        let q2 = -sin_t * self.a + cos_t * self.c;
        let r = -sin_t * self.b + cos_t * self.d;
        (p, 0.5 * (q1 + q2), r)
    }

    /// Full singular decomposition A = Rot(beta1) diag(s1, s2) Rot(beta2)
    /// for det > 0, with s1 >= s2 > 0, beta2 in [0, pi), beta1 in [0, 2pi).
    ///
    /// When the singular values coincide within `rot_tol` relative, the
    /// matrix is treated as a scaled rotation and beta2 is 0 by convention.
    pub fn svd(&self, rot_tol: f64) -> (f64, f64, f64, f64) {
        let alpha = self.a + self.d;
        let beta = self.c - self.b;
        let h = alpha.hypot(beta);
        let theta_r = beta.atan2(alpha);
        let (p, q, r) = self.polar_symmetric_part();
        let hp = (p - r).hypot(2.0 * q);
        let s1 = 0.5 * (p + r + hp);
        let s2 = 0.5 * (p + r - hp);
        let _ = h;

        if hp <= rot_tol * s1 {
            // Scaled rotation: any axis works, pick beta2 = 0.
            return (normalize_mod_2pi(theta_r), s1, s2, 0.0);
        }

        // Diagonalizing angle of P: P = Rot(phi) diag Rot(phi)^T with the
        // top eigenvector at angle phi.
        let phi = 0.5 * (2.0 * q).atan2(p - r);
        // A = Rot(theta_r + phi) diag(s1, s2) Rot(-phi); fold the pi
        // ambiguity of the eigenvector into both angles simultaneously.
        let mut beta1 = theta_r + phi;
        let mut beta2 = normalize_mod_2pi(-phi);
        if beta2 >= std::f64::consts::PI {
            beta2 -= std::f64::consts::PI;
            beta1 += std::f64::consts::PI;
        }
        (normalize_mod_2pi(beta1), s1, s2, beta2)
    }
}

/// Reduce an angle into [0, 2pi).
fn normalize_mod_2pi(t: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut r = t % tau;
    if r < 0.0 {
        r += tau;
    }
    if r >= tau {
        r = 0.0;
    }
    r
}

/// Reduce an angle into [0, pi).
fn normalize_mod_pi(t: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let mut r = t % pi;
    if r < 0.0 {
        r += pi;
    }
    if r >= pi {
        r = 0.0;
    }
    // Avoid returning -0.0.
    r + 0.0
}

/// A real 2x2 matrix with determinant 1, validated at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Sl2Matrix {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl TryFrom<[f64; 4]> for Sl2Matrix {
    type Error = Sl2Error;
    fn try_from(e: [f64; 4]) -> Result<Self, Sl2Error> {
        Sl2Matrix::new(e[0], e[1], e[2], e[3])
    }
}

impl From<Sl2Matrix> for [f64; 4] {
    fn from(m: Sl2Matrix) -> [f64; 4] {
        [m.a, m.b, m.c, m.d]
    }
}

impl Sl2Matrix {
    pub const IDENTITY: Sl2Matrix = Sl2Matrix { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    /// Row-major entries [[a, b], [c, d]]; det must be 1 within [`DET_TOL`].
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, Sl2Error> {
        Self::with_det_tol(a, b, c, d, DET_TOL)
    }

    fn with_det_tol(a: f64, b: f64, c: f64, d: f64, tol: f64) -> Result<Self, Sl2Error> {
        if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
            return Err(Sl2Error::NonFinite);
        }
        let det = a * d - b * c;
        if (det - 1.0).abs() > tol {
            return Err(Sl2Error::NotUnimodular { det });
        }
        Ok(Sl2Matrix { a, b, c, d })
    }

    /// Entries known to be unimodular analytically (rotations, diagonal
    /// scalings and their closed-form compositions). Debug builds still
    /// verify.
    pub(crate) fn new_unchecked(a: f64, b: f64, c: f64, d: f64) -> Self {
        debug_assert!(
            (a * d - b * c - 1.0).abs() <= 1e-6,
            "new_unchecked got det {}",
            a * d - b * c
        );
        Sl2Matrix { a, b, c, d }
    }

    /// Counterclockwise rotation by `angle` radians.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Sl2Matrix { a: c, b: -s, c: s, d: c }
    }

    /// diag(s, 1/s) for s != 0.
    pub fn diagonal(s: f64) -> Result<Self, Sl2Error> {
        if s == 0.0 || !s.is_finite() {
            return Err(Sl2Error::NonFinite);
        }
        Ok(Sl2Matrix { a: s, b: 0.0, c: 0.0, d: 1.0 / s })
    }

    /// Rot(beta1) diag(e^sigma, e^-sigma) Rot(beta2), composed in closed
    /// form so the determinant is 1 analytically.
    pub fn from_rot_scale_rot(beta1: f64, sigma: f64, beta2: f64) -> Self {
        let (s1, c1) = beta1.sin_cos();
        let (s2, c2) = beta2.sin_cos();
        let e = sigma.exp();
        let einv = (-sigma).exp();
        Sl2Matrix::new_unchecked(
            e * c1 * c2 - einv * s1 * s2,
            -e * c1 * s2 - einv * s1 * c2,
            e * s1 * c2 + einv * c1 * s2,
            -e * s1 * s2 + einv * c1 * c2,
        )
    }

    #[inline]
    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    #[inline]
    pub(crate) fn mat2(&self) -> Mat2 {
        Mat2 { a: self.a, b: self.b, c: self.c, d: self.d }
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Matrix product; the determinant invariant is re-checked within
    /// [`PRODUCT_DET_TOL`]. A non-finite result signals overflow: long
    /// products must go through a scaled product instead.
    pub fn multiply(&self, rhs: &Sl2Matrix) -> Result<Sl2Matrix, Sl2Error> {
        let m = self.mat2().mul(&rhs.mat2());
        Sl2Matrix::with_det_tol(m.a, m.b, m.c, m.d, PRODUCT_DET_TOL)
    }

    /// Exact inverse [[d, -b], [-c, a]].
    #[inline]
    pub fn inverse(&self) -> Sl2Matrix {
        Sl2Matrix { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    #[inline]
    pub fn apply(&self, v: Vec2) -> Vec2 {
        self.mat2().apply(v)
    }

    /// Largest singular value, always >= 1; equals 1 exactly for
    /// rotations.
    ///
    /// Uses the det = 1 closed form: with F the sum of squared entries,
    /// ||A||^2 = (F + sqrt(F^2 - 4)) / 2. The discriminant is evaluated
    /// as (F - 2)(F + 2) and clamped at zero when F - 2 sinks below the
    /// rounding floor of the entry squares, so rotations come out at
    /// exactly 1 instead of 1 + O(sqrt(eps)).
    pub fn operator_norm(&self) -> f64 {
        let f = self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d;
        let excess = f - 2.0;
        let disc = if excess < 1e-13 { 0.0 } else { excess * (f + 2.0) };
        let s2 = 0.5 * (f + disc.sqrt());
        s2.sqrt().max(1.0)
    }

    /// Rotation-diagonal-rotation form of the matrix.
    pub fn decompose(&self) -> RotDiagRot {
        let (beta1, s1, _s2, beta2) = self.mat2().svd(1e-12);
        RotDiagRot { beta1, s: s1.max(1.0), beta2 }
    }

    /// Projective action of the matrix on a direction.
    pub fn proj_action(&self, p: ProjectivePoint) -> ProjectivePoint {
        let v = self.apply(p.representative());
        // An SL(2,R) matrix never annihilates a direction.
        project(v).expect("image of a unit vector under SL(2,R) is nonzero")
    }
}

/// Canonical rotation-diagonal-rotation decomposition of an SL(2,R)
/// matrix: Rot(beta1) diag(s, 1/s) Rot(beta2) with s >= 1, beta2 in
/// [0, pi), beta1 in [0, 2pi), and beta2 = 0 when s = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotDiagRot {
    pub beta1: f64,
    pub s: f64,
    pub beta2: f64,
}

impl RotDiagRot {
    /// Recompose into the matrix this decomposition represents.
    pub fn compose(&self) -> Sl2Matrix {
        Sl2Matrix::from_rot_scale_rot(self.beta1, self.s.ln(), self.beta2)
    }

    /// The unit input direction that the decomposed matrix expands
    /// maximally: Rot(beta2)^-1 e1.
    pub fn max_expansion_input(&self) -> Vec2 {
        [self.beta2.cos(), -self.beta2.sin()]
    }
}

/// A point of the projective line RP^1: a direction with v ~ -v,
/// canonically represented by an angle in [0, pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct ProjectivePoint {
    theta: f64,
}

impl From<f64> for ProjectivePoint {
    fn from(t: f64) -> Self {
        ProjectivePoint::from_angle(t)
    }
}

impl From<ProjectivePoint> for f64 {
    fn from(p: ProjectivePoint) -> f64 {
        p.theta
    }
}

impl ProjectivePoint {
    /// Direction at the given angle (radians), reduced mod pi.
    pub fn from_angle(theta: f64) -> Self {
        ProjectivePoint { theta: normalize_mod_pi(theta) }
    }

    #[inline]
    pub fn angle(&self) -> f64 {
        self.theta
    }

    /// Unit representative of the direction.
    #[inline]
    pub fn representative(&self) -> Vec2 {
        [self.theta.cos(), self.theta.sin()]
    }

    /// Angle metric with period pi: min(|dt|, pi - |dt|), at most pi/2.
    pub fn distance(&self, other: ProjectivePoint) -> f64 {
        let d = (self.theta - other.theta).abs();
        d.min(std::f64::consts::PI - d).max(0.0)
    }
}

/// Canonical projection of a nonzero vector to RP^1.
pub fn project(v: Vec2) -> Result<ProjectivePoint, Sl2Error> {
    if !(v[0].is_finite() && v[1].is_finite()) {
        return Err(Sl2Error::NonFinite);
    }
    if v[0] == 0.0 && v[1] == 0.0 {
        return Err(Sl2Error::ZeroVector);
    }
    Ok(ProjectivePoint::from_angle(v[1].atan2(v[0])))
}

/// Expansion loss Theta(B, v) = log(||B|| |v|) - log(|B v|): how far the
/// vector v falls short of the maximal expansion under B.
///
/// Nonnegative, at most 2 log ||B||, and scale-invariant in v (the
/// representative is normalized before applying B).
pub fn expansion_loss(b: &Sl2Matrix, v: Vec2) -> f64 {
    let norm_v = v[0].hypot(v[1]);
    assert!(norm_v > 0.0 && norm_v.is_finite(), "expansion loss of a zero vector");
    let u = [v[0] / norm_v, v[1] / norm_v];
    let w = b.apply(u);
    b.operator_norm().ln() - w[0].hypot(w[1]).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn random_sl2(rng: &mut CounterRng) -> Sl2Matrix {
        let beta1 = rng.uniform_in(0.0, TAU);
        let sigma = rng.uniform_in(0.1, 3.0);
        let beta2 = rng.uniform_in(0.0, TAU);
        Sl2Matrix::from_rot_scale_rot(beta1, sigma, beta2)
    }

    use std::f64::consts::TAU;

    #[test]
    fn constructor_rejects_bad_determinant() {
        assert!(matches!(
            Sl2Matrix::new(1.0, 0.0, 0.0, 1.1),
            Err(Sl2Error::NotUnimodular { .. })
        ));
        assert!(matches!(Sl2Matrix::new(f64::NAN, 0.0, 0.0, 1.0), Err(Sl2Error::NonFinite)));
    }

    #[test]
    fn identity_products() {
        let i = Sl2Matrix::IDENTITY;
        assert_eq!(i.multiply(&i).unwrap(), i);
    }

    #[test]
    fn multiply_signals_overflow() {
        let huge = Sl2Matrix::diagonal(1e200).unwrap();
        assert!(matches!(huge.multiply(&huge), Err(Sl2Error::NonFinite)));
    }

    #[test]
    fn project_rejects_non_finite() {
        assert!(matches!(project([f64::NAN, 1.0]), Err(Sl2Error::NonFinite)));
        assert!(matches!(project([f64::INFINITY, 0.0]), Err(Sl2Error::NonFinite)));
    }

    #[test]
    fn commuting_diagonals_multiply() {
        let d = Sl2Matrix::diagonal(2.0).unwrap();
        let p = d.multiply(&d).unwrap();
        assert!((p.entries()[0] - 4.0).abs() < 1e-12);
        assert!((p.entries()[3] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn product_matches_componentwise_sum() {
        // Brute-force sum_k a_ik b_kj evaluated separately.
        let mut rng = CounterRng::new(21);
        for _ in 0..200 {
            let x = random_sl2(&mut rng);
            let y = random_sl2(&mut rng);
            let p = x.multiply(&y).unwrap().entries();
            let xe = x.entries();
            let ye = y.entries();
            let expect = [
                xe[0] * ye[0] + xe[1] * ye[2],
                xe[0] * ye[1] + xe[1] * ye[3],
                xe[2] * ye[0] + xe[3] * ye[2],
                xe[2] * ye[1] + xe[3] * ye[3],
            ];
            for k in 0..4 {
                assert!((p[k] - expect[k]).abs() <= 1e-9 * (1.0 + expect[k].abs()));
            }
        }
    }

    #[test]
    fn norm_of_rotation_is_one() {
        assert_eq!(Sl2Matrix::IDENTITY.operator_norm(), 1.0);
        assert_eq!(Sl2Matrix::rotation(0.7).operator_norm(), 1.0);
    }

    #[test]
    fn norm_of_diagonal() {
        let d = Sl2Matrix::diagonal(2.0).unwrap();
        assert!((d.operator_norm() - 2.0).abs() < 1e-14);
        let d = Sl2Matrix::diagonal(0.25).unwrap();
        assert!((d.operator_norm() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn norm_is_submultiplicative_and_inverse_symmetric() {
        let mut rng = CounterRng::new(22);
        for _ in 0..2000 {
            let x = random_sl2(&mut rng);
            let y = random_sl2(&mut rng);
            if let Ok(p) = x.multiply(&y) {
                assert!(
                    p.operator_norm()
                        <= x.operator_norm() * y.operator_norm() * (1.0 + 1e-10)
                );
            }
            let n = x.operator_norm();
            let ninv = x.inverse().operator_norm();
            assert!((n - ninv).abs() <= 1e-10 * n);
        }
    }

    #[test]
    fn decompose_rotation_case() {
        let r = Sl2Matrix::rotation(0.3).decompose();
        assert!((r.beta1 - 0.3).abs() < 1e-12);
        assert_eq!(r.beta2, 0.0);
        assert!((r.s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decompose_diagonal_case() {
        let r = Sl2Matrix::diagonal(3.0).unwrap().decompose();
        assert!((r.s - 3.0).abs() < 1e-12);
        assert!(r.beta1.min((r.beta1 - TAU).abs()) < 1e-12);
        assert!(r.beta2.abs() < 1e-12);
    }

    #[test]
    fn decompose_recomposition_error_small() {
        let mut rng = CounterRng::new(23);
        for _ in 0..5000 {
            let x = random_sl2(&mut rng);
            let d = x.decompose();
            assert!(d.s >= 1.0);
            assert!((0.0..PI).contains(&d.beta2));
            assert!((0.0..TAU).contains(&d.beta1));
            let back = d.compose().entries();
            let orig = x.entries();
            for k in 0..4 {
                assert!(
                    (back[k] - orig[k]).abs() < 1e-9,
                    "recomposition error {} at entry {k}",
                    (back[k] - orig[k]).abs()
                );
            }
        }
    }

    #[test]
    fn decompose_near_rotation_stays_accurate() {
        // Singular values split by ~1e-10: the degenerate regime for a
        // naive eigenvector approach.
        for k in 0..200 {
            let x = Sl2Matrix::from_rot_scale_rot(0.013 * k as f64, 5e-11, 1.0 + 0.02 * k as f64);
            let back = x.decompose().compose().entries();
            let orig = x.entries();
            for j in 0..4 {
                assert!((back[j] - orig[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn project_basis_and_antipodal() {
        assert_eq!(project([1.0, 0.0]).unwrap().angle(), 0.0);
        assert_eq!(project([-1.0, 0.0]).unwrap().angle(), 0.0);
        assert!((project([1.0, 1.0]).unwrap().angle() - FRAC_PI_4).abs() < 1e-15);
        assert!(project([0.0, 0.0]).is_err());
    }

    #[test]
    fn proj_action_quarter_turn() {
        let e1 = project([1.0, 0.0]).unwrap();
        let img = Sl2Matrix::rotation(FRAC_PI_2).proj_action(e1);
        assert!((img.angle() - FRAC_PI_2).abs() < 1e-12);
        let p = ProjectivePoint::from_angle(1.234);
        assert_eq!(Sl2Matrix::IDENTITY.proj_action(p), p);
    }

    #[test]
    fn proj_action_inverse_roundtrip() {
        let mut rng = CounterRng::new(24);
        for _ in 0..2000 {
            let x = random_sl2(&mut rng);
            let p = ProjectivePoint::from_angle(rng.uniform_in(0.0, PI));
            let back = x.inverse().proj_action(x.proj_action(p));
            assert!(back.distance(p) < 1e-10);
        }
    }

    #[test]
    fn proj_action_is_group_action() {
        let mut rng = CounterRng::new(25);
        for _ in 0..2000 {
            let x = random_sl2(&mut rng);
            let y = random_sl2(&mut rng);
            let p = ProjectivePoint::from_angle(rng.uniform_in(0.0, PI));
            if let Ok(xy) = x.multiply(&y) {
                let via_product = xy.proj_action(p);
                let via_composition = x.proj_action(y.proj_action(p));
                assert!(via_product.distance(via_composition) < 1e-10);
            }
        }
    }

    #[test]
    fn distance_basics() {
        let p = ProjectivePoint::from_angle(0.0);
        let q = ProjectivePoint::from_angle(FRAC_PI_2);
        assert_eq!(p.distance(p), 0.0);
        assert!((p.distance(q) - FRAC_PI_2).abs() < 1e-15);
        // Wrap-around: 0.1 vs 3.1 are close on RP^1.
        let a = ProjectivePoint::from_angle(0.1);
        let b = ProjectivePoint::from_angle(3.1);
        assert!((a.distance(b) - (3.1f64 - 0.1 - PI).abs()).abs() < 1e-12);
    }

    #[test]
    fn distance_triangle_inequality() {
        let mut rng = CounterRng::new(26);
        for _ in 0..2000 {
            let p = ProjectivePoint::from_angle(rng.uniform_in(0.0, PI));
            let q = ProjectivePoint::from_angle(rng.uniform_in(0.0, PI));
            let r = ProjectivePoint::from_angle(rng.uniform_in(0.0, PI));
            assert!(p.distance(r) <= p.distance(q) + q.distance(r) + 1e-12);
            assert!((p.distance(q) - q.distance(p)).abs() < 1e-15);
        }
    }

    #[test]
    fn expansion_loss_diagonal_extremes() {
        let b = Sl2Matrix::diagonal(2.0).unwrap();
        assert!(expansion_loss(&b, [1.0, 0.0]).abs() < 1e-14);
        assert!((expansion_loss(&b, [0.0, 1.0]) - 2.0 * 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn expansion_loss_bounds_and_scale_invariance() {
        let mut rng = CounterRng::new(27);
        for _ in 0..2000 {
            let b = random_sl2(&mut rng);
            let v = [rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)];
            if v[0].hypot(v[1]) < 1e-3 {
                continue;
            }
            let theta = expansion_loss(&b, v);
            assert!(theta >= -1e-10);
            assert!(theta <= 2.0 * b.operator_norm().ln() + 1e-10);
            let scaled = expansion_loss(&b, [v[0] * 731.0, v[1] * 731.0]);
            assert!((theta - scaled).abs() < 1e-10);
        }
    }

    #[test]
    fn max_expansion_input_attains_norm() {
        let mut rng = CounterRng::new(28);
        for _ in 0..1000 {
            let x = random_sl2(&mut rng);
            let u = x.decompose().max_expansion_input();
            let w = x.apply(u);
            let gain = w[0].hypot(w[1]);
            assert!((gain - x.operator_norm()).abs() < 1e-9 * x.operator_norm());
        }
    }

    #[test]
    fn geometric_expansion_lemma_on_samples() {
        // With r = 2 e^{-x/2}: if neither preimage of a basis direction
        // under B^-1 is r-close to [v], the loss is at most x.
        let mut rng = CounterRng::new(29);
        let mut accepted = 0u32;
        for _ in 0..20_000 {
            let b = Sl2Matrix::from_rot_scale_rot(
                rng.uniform_in(0.0, TAU),
                rng.uniform_in(0.0, 5.0),
                rng.uniform_in(0.0, TAU),
            );
            let x = rng.uniform_in(0.5, 8.0);
            let v_angle = rng.uniform_in(0.0, PI);
            let v = ProjectivePoint::from_angle(v_angle);
            let r = 2.0 * (-x / 2.0).exp();
            let binv = b.inverse();
            let pre1 = binv.proj_action(project([1.0, 0.0]).unwrap());
            let pre2 = binv.proj_action(project([0.0, 1.0]).unwrap());
            if pre1.distance(v) >= r && pre2.distance(v) >= r {
                accepted += 1;
                let theta = expansion_loss(&b, v.representative());
                assert!(theta <= x + 1e-9, "theta = {theta}, x = {x}");
            }
        }
        assert!(accepted > 1000, "hypothesis filter accepted too few samples");
    }
}
