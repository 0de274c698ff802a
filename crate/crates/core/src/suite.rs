//! Per-sample pointwise G2 checks shared by the campaign driver.
//!
//! Every sample draws from its own ChaCha stream `(seed, index)`, so results
//! do not depend on evaluation order.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::Result;
use crate::exterior::{annihilator_dimension, KForm};
use crate::field::orthonormal_frame;
use crate::g2::{
    cross, hodge_type_on_complement, octonion_multiply, orthonormalize, project_lambda2,
    projector_rank, G2Point, Octonion,
};
use crate::sampling::{gaussian, gaussian_vector, general_linear, random_form, rng, rotation};

/// Number of directions searched for a witness of a form with a Λ²₇ part.
pub const WITNESS_DIRECTIONS: usize = 200;

/// Smallest `‖a₇‖` of the forms used in the witness search.
pub const WITNESS_MIN_SEVEN: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointwiseSample {
    /// Annihilator dimension of a random `GL(7)` transport of the base form.
    pub stabilizer_dim: usize,
    /// `max |g(q*ρ) − qᵀ g(ρ) q|` for a random rotation `q`.
    pub metric_equivariance: f64,
    /// `max(|P₇ + P₁₄ − I|, |P₇P₁₄|)` at the transported structure, in a
    /// g-orthonormal frame, or `∞` if the ranks are not `(7, 14)`.
    pub projector_defect: f64,
    /// `|P₇(u*β) − u*(P₇β)|` for `u = exp(s)`, `s` in the stabilizer.
    pub g2_equivariance: f64,
    /// `p11 + ω` parts of `(ρ⌟v)|_{v₁⊥}` for orthonormal `v, v₁`.
    pub omega_11_part: f64,
    /// Largest quaternion-relation defect for `(v, v′, v⋆v′)`.
    pub quaternion_defect: f64,
    /// `||x⋆y|² − |x|²|y|² + g(x,y)²|`.
    pub cross_norm_defect: f64,
    /// Best `p20_02 + ω` of a random form with `‖a₇‖ ≥ 0.1` over the search
    /// directions.
    pub converse_witness: f64,
    /// Largest `p20_02 + ω` of `λ|_{v⊥}` over the Λ²₁₄ basis at a random `v`.
    pub lambda14_mixed_part: f64,
}

fn orthonormal_pair(p: &G2Point, r: &mut impl Rng) -> Result<(Vec<f64>, Vec<f64>)> {
    let on = orthonormalize(p.metric(), &[gaussian_vector(r, 7), gaussian_vector(r, 7)])?;
    Ok((on[0].clone(), on[1].clone()))
}

fn unit(p: &G2Point, r: &mut impl Rng) -> Vec<f64> {
    let v = gaussian_vector(r, 7);
    let n = p.metric().norm(&v);
    v.into_iter().map(|c| c / n).collect()
}

fn mixed_and_omega(p: &G2Point, a: &KForm, v: &[f64]) -> Result<f64> {
    let t = hodge_type_on_complement(p, a, v)?;
    Ok(t.p20_02_norm + t.omega_component)
}

/// Quaternion relations `i² = j² = k² = −1`, `ij = k = −ji`, `jk = i`, `ki = j`.
pub fn quaternion_defect(p: &G2Point, v: &[f64], w: &[f64]) -> f64 {
    let i = Octonion::imaginary(v);
    let j = Octonion::imaginary(w);
    let k = Octonion::imaginary(&cross(p, v, w));
    let mul = |a: &Octonion, b: &Octonion| octonion_multiply(p, a, b);
    let neg = |a: &Octonion| Octonion::new(&a.im.iter().map(|c| -c).collect::<Vec<_>>(), -a.re);
    let minus_one = Octonion::real(-1.0);
    [
        mul(&i, &i).distance(&minus_one),
        mul(&j, &j).distance(&minus_one),
        mul(&k, &k).distance(&minus_one),
        mul(&i, &j).distance(&k),
        mul(&j, &i).distance(&neg(&k)),
        mul(&j, &k).distance(&i),
        mul(&k, &i).distance(&j),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

pub fn cross_norm_defect(p: &G2Point, x: &[f64], y: &[f64]) -> f64 {
    let g = p.metric();
    let xy = cross(p, x, y);
    (g.dot(&xy, &xy) - g.dot(x, x) * g.dot(y, y) + g.dot(x, y).powi(2)).abs()
}

/// A random 2-form whose Λ²₇ part has norm at least `WITNESS_MIN_SEVEN`.
pub fn form_with_seven_part(p: &G2Point, r: &mut impl Rng) -> Result<KForm> {
    loop {
        let a = random_form(r, 7, 2);
        let (a7, _) = project_lambda2(p, &a)?;
        if a7.norm(p.metric())? >= WITNESS_MIN_SEVEN {
            return Ok(a);
        }
    }
}

pub fn pointwise_sample(base: &G2Point, seed: u64, index: u64) -> Result<PointwiseSample> {
    let mut r = rng(seed, index);
    let a = general_linear(&mut r, 7);
    let moved = base.transported(&a)?;
    let stabilizer_dim = annihilator_dimension(moved.rho());

    let q = rotation(&mut r, 7);
    let rotated = moved.transported(&q)?;
    let expected = q.transpose() * moved.metric().matrix() * &q;
    let metric_equivariance = (rotated.metric().matrix() - expected).amax();

    // coordinate projectors of a skewed structure have entries of size
    // cond(a)²; compare them in a g-orthonormal frame instead
    let unit_frame = moved.transported(&orthonormal_frame(moved.metric()))?;
    let (p7, p14) = (unit_frame.projector7(), unit_frame.projector14());
    let projector_defect = if projector_rank(p7) == 7 && projector_rank(p14) == 14 {
        let id = DMatrix::<f64>::identity(21, 21);
        (p7 + p14 - id).amax().max((p7 * p14).amax())
    } else {
        f64::INFINITY
    };

    let s = base
        .stabilizer_algebra()
        .iter()
        .fold(DMatrix::zeros(7, 7), |acc, b| {
            acc + b * (0.5 * gaussian(&mut r))
        });
    let u = s.exp();
    let beta = random_form(&mut r, 7, 2);
    let (lhs, _) = project_lambda2(base, &beta.pullback(&u)?)?;
    let (b7, _) = project_lambda2(base, &beta)?;
    let g2_equivariance = (&lhs - &b7.pullback(&u)?).max_abs();

    let (v, v1) = orthonormal_pair(base, &mut r)?;
    let t = hodge_type_on_complement(base, &base.rho().contract(&v)?, &v1)?;
    let omega_11_part = t.p11_norm + t.omega_component;

    let (w0, w1) = orthonormal_pair(base, &mut r)?;
    let quaternion_defect = quaternion_defect(base, &w0, &w1);
    let (x, y) = (gaussian_vector(&mut r, 7), gaussian_vector(&mut r, 7));
    let cross_norm_defect = cross_norm_defect(base, &x, &y);

    let form = form_with_seven_part(base, &mut r)?;
    let mut converse_witness: f64 = 0.0;
    for _ in 0..WITNESS_DIRECTIONS {
        let d = unit(base, &mut r);
        converse_witness = converse_witness.max(mixed_and_omega(base, &form, &d)?);
    }

    let d = unit(base, &mut r);
    let mut lambda14_mixed_part: f64 = 0.0;
    for l in base.lambda14_basis() {
        lambda14_mixed_part = lambda14_mixed_part.max(mixed_and_omega(base, l, &d)?);
    }

    Ok(PointwiseSample {
        stabilizer_dim,
        metric_equivariance,
        projector_defect,
        g2_equivariance,
        omega_11_part,
        quaternion_defect,
        cross_norm_defect,
        converse_witness,
        lambda14_mixed_part,
    })
}
