//! Seeded sample streams.
//!
//! Base points and sphere directions come from the additive R_d sequence with
//! a seeded Cranley–Patterson shift; sphere points use the inverse normal CDF.
//! Random matrices and forms are drawn from ChaCha streams keyed by
//! `(seed, stream)`, so every sample depends only on the seed and its index.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::exterior::{binomial, KForm};
use crate::field::Point;

/// Independent generator for `(seed, stream)`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Positive root of `x^{d+1} = x + 1`.
fn generalized_golden(d: usize) -> f64 {
    let mut x = 2.0f64;
    for _ in 0..64 {
        x = (1.0 + x).powf(1.0 / (d as f64 + 1.0));
    }
    x
}

/// Points `frac(s + n α)` of the shifted R_d sequence in `[0,1)^d`.
pub fn low_discrepancy(seed: u64, dim: usize, count: usize) -> Vec<Vec<f64>> {
    let phi = generalized_golden(dim);
    let alpha: Vec<f64> = (1..=dim).map(|j| phi.powi(-(j as i32))).collect();
    let mut r = rng(seed, 0);
    let shift: Vec<f64> = (0..dim).map(|_| r.random::<f64>()).collect();
    (0..count)
        .map(|n| {
            (0..dim)
                .map(|j| (shift[j] + (n as f64 + 1.0) * alpha[j]).rem_euclid(1.0))
                .collect()
        })
        .collect()
}

fn inverse_normal(u: f64) -> f64 {
    let n = Normal::standard();
    n.inverse_cdf(u.clamp(1e-12, 1.0 - 1e-12))
}

pub fn base_points(seed: u64, count: usize) -> Vec<Point> {
    low_discrepancy(seed, 7, count)
        .into_iter()
        .map(|v| std::array::from_fn(|i| v[i]))
        .collect()
}

/// `(m, x)` pairs: `m ∈ [0,1)⁷`, `x` a Euclidean unit vector (renormalized
/// against the field metric by the twistor module).
pub fn twistor_samples(seed: u64, count: usize) -> Vec<(Point, [f64; 7])> {
    low_discrepancy(seed, 14, count)
        .into_iter()
        .map(|v| {
            let m: Point = std::array::from_fn(|i| v[i]);
            let raw: [f64; 7] = std::array::from_fn(|i| inverse_normal(v[7 + i]));
            let n = raw.iter().map(|c| c * c).sum::<f64>().sqrt();
            (m, std::array::from_fn(|i| raw[i] / n))
        })
        .collect()
}

pub fn gaussian(r: &mut impl Rng) -> f64 {
    inverse_normal(r.random::<f64>())
}

pub fn gaussian_vector(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| gaussian(r)).collect()
}

pub fn unit_vector(r: &mut impl Rng, n: usize) -> Vec<f64> {
    let v = gaussian_vector(r, n);
    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / norm).collect()
}

pub fn gaussian_matrix(r: &mut impl Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| gaussian(r))
}

/// Haar-distributed rotation in `SO(n)`.
pub fn rotation(r: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(r, n).qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..n {
        if rr[(j, j)] < 0.0 {
            q.column_mut(j).scale_mut(-1.0);
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(0).scale_mut(-1.0);
    }
    q
}

/// Well-conditioned random element of `GL(n)`: `I + A/√n` with Gaussian `A`,
/// redrawn until its condition number is below 50.
pub fn general_linear(r: &mut impl Rng, n: usize) -> DMatrix<f64> {
    loop {
        let m = DMatrix::identity(n, n) + gaussian_matrix(r, n) / (n as f64).sqrt();
        let sv = m.clone().svd(false, false).singular_values;
        let (lo, hi) = (sv.min(), sv.max());
        if lo > 0.0 && hi / lo < 50.0 {
            return m;
        }
    }
}

/// Form with independent standard Gaussian coefficients.
pub fn random_form(r: &mut impl Rng, dim: usize, degree: usize) -> KForm {
    KForm::new(dim, degree, gaussian_vector(r, binomial(dim, degree))).expect("shape")
}
