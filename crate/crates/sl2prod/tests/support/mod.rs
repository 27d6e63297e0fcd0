//! Independent oracles for the acceptance suite. Nothing here shares a
//! code path with the library computations it checks.

use sl2prod::sl2::Sl2Matrix;

/// Top singular value by power iteration on A^T A, independent of the
/// closed-form operator norm.
pub fn power_iteration_norm(m: &Sl2Matrix) -> f64 {
    let [a, b, c, d] = m.entries();
    // A^T A entries.
    let p = a * a + c * c;
    let q = a * b + c * d;
    let r = b * b + d * d;
    let mut v = (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2);
    let mut lambda = 0.0_f64;
    for _ in 0..500 {
        let w = (p * v.0 + q * v.1, q * v.0 + r * v.1);
        let norm = (w.0 * w.0 + w.1 * w.1).sqrt();
        if norm == 0.0 {
            break;
        }
        let next = (w.0 / norm, w.1 / norm);
        // Rayleigh quotient of the unit iterate.
        let new_lambda = p * next.0 * next.0 + 2.0 * q * next.0 * next.1 + r * next.1 * next.1;
        let done = (new_lambda - lambda).abs() <= 1e-15 * new_lambda.abs();
        v = next;
        lambda = new_lambda;
        if done {
            break;
        }
    }
    lambda.sqrt()
}

/// Double-double value: an unevaluated sum hi + lo with |lo| <= ulp(hi)/2.
#[derive(Clone, Copy, Debug)]
pub struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Dd { hi: s, lo: err }
    }

    fn two_prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        let err = a.mul_add(b, -p);
        Dd { hi: p, lo: err }
    }

    pub fn add(self, other: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, other.hi);
        let lo = s.lo + self.lo + other.lo;
        let t = Dd::two_sum(s.hi, lo);
        Dd { hi: t.hi, lo: t.lo }
    }

    pub fn mul(self, other: Dd) -> Dd {
        let p = Dd::two_prod(self.hi, other.hi);
        let lo = p.lo + self.hi * other.lo + self.lo * other.hi;
        let t = Dd::two_sum(p.hi, lo);
        Dd { hi: t.hi, lo: t.lo }
    }
}

/// 2x2 matrix with double-double entries, row-major.
#[derive(Clone, Copy, Debug)]
pub struct DdMat2 {
    pub e: [Dd; 4],
}

impl DdMat2 {
    pub fn identity() -> DdMat2 {
        DdMat2 {
            e: [Dd::from_f64(1.0), Dd::from_f64(0.0), Dd::from_f64(0.0), Dd::from_f64(1.0)],
        }
    }

    pub fn from_sl2(m: &Sl2Matrix) -> DdMat2 {
        let [a, b, c, d] = m.entries();
        DdMat2 { e: [Dd::from_f64(a), Dd::from_f64(b), Dd::from_f64(c), Dd::from_f64(d)] }
    }

    pub fn mul(self, rhs: DdMat2) -> DdMat2 {
        let a = &self.e;
        let b = &rhs.e;
        DdMat2 {
            e: [
                a[0].mul(b[0]).add(a[1].mul(b[2])),
                a[0].mul(b[1]).add(a[1].mul(b[3])),
                a[2].mul(b[0]).add(a[3].mul(b[2])),
                a[2].mul(b[1]).add(a[3].mul(b[3])),
            ],
        }
    }

    /// log of the top singular value via the determinant-aware closed
    /// form, with the sum of squares accumulated in double-double.
    pub fn log_norm(self) -> f64 {
        let mut f = Dd::from_f64(0.0);
        for k in 0..4 {
            f = f.add(self.e[k].mul(self.e[k]));
        }
        let det = self.e[0].mul(self.e[3]).add(self.e[1].mul(self.e[2].mul(Dd::from_f64(-1.0))));
        let f64f = f.to_f64();
        let g = det.to_f64();
        let disc = (f64f * f64f - 4.0 * g * g).max(0.0);
        (0.5 * (f64f + disc.sqrt())).ln() * 0.5
    }
}

/// The two letters of the bernoulli-2x2 preset.
pub fn bernoulli_letters() -> (Sl2Matrix, Sl2Matrix) {
    (
        Sl2Matrix::new(2.0, 1.0, 1.0, 1.0).expect("unimodular"),
        Sl2Matrix::new(1.0, 1.0, 1.0, 2.0).expect("unimodular"),
    )
}

/// xi_n for every word of the two-letter alphabet, bit i of the word
/// index choosing letter i+1 of the product T_n = A_n ... A_1.
pub fn enumerate_xi(n: usize) -> Vec<f64> {
    assert!(n <= 20, "enumeration explodes past 2^20 words");
    let (m1, m2) = bernoulli_letters();
    let mut out = Vec::with_capacity(1 << n);
    for word in 0u32..(1u32 << n) {
        let mut t = DdMat2::identity();
        for i in 0..n {
            let a = if word >> i & 1 == 0 { m1 } else { m2 };
            t = DdMat2::from_sl2(&a).mul(t);
        }
        out.push(t.log_norm());
    }
    out
}

/// R_{n,n'} for every word of length n + n'.
pub fn enumerate_discrepancy(n: usize, n_prime: usize) -> Vec<f64> {
    assert!(n + n_prime <= 20);
    let (m1, m2) = bernoulli_letters();
    let mut out = Vec::with_capacity(1 << (n + n_prime));
    for word in 0u32..(1u32 << (n + n_prime)) {
        let letter = |i: usize| if word >> i & 1 == 0 { m1 } else { m2 };
        let mut pre = DdMat2::identity();
        for i in 0..n {
            pre = DdMat2::from_sl2(&letter(i)).mul(pre);
        }
        let mut suf = DdMat2::identity();
        for i in n..(n + n_prime) {
            suf = DdMat2::from_sl2(&letter(i)).mul(suf);
        }
        let full = suf.mul(pre);
        out.push(pre.log_norm() + suf.log_norm() - full.log_norm());
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}
