//! Single-point G2 linear algebra.
//!
//! Coordinates are frozen to the standard 3-form
//! `ρ = e¹²³ + e¹⁴⁵ + e¹⁶⁷ + e²⁴⁶ − e²⁵⁷ − e³⁴⁷ − e³⁵⁶` (1-based names,
//! 0-based storage). Every other structure here is derived from a 3-form
//! alone: the metric via the volume-valued pairing
//! `B(x,y) = (ρ⌟x)∧(ρ⌟y)∧ρ`, the vector product, the SU(3) structure on
//! `v⊥`, and the `Λ²₇ ⊕ Λ²₁₄` splitting. See `docs/conventions.md`.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeometryError, Result};
use crate::exterior::{
    annihilator_basis, multi_indices, numerical_rank, KForm, LinearMap, MetricTensor, Orientation,
};

/// Tolerance on unit-vector inputs.
pub const UNIT_TOLERANCE: f64 = 1e-10;

/// `|B(x,x)| = PAIRING_SCALE · g(x,x) · |vol_g|`; with this constant the
/// standard 3-form induces the identity metric.
pub const PAIRING_SCALE: f64 = 6.0;

const STANDARD_TERMS: [([usize; 3], f64); 7] = [
    ([0, 1, 2], 1.0),
    ([0, 3, 4], 1.0),
    ([0, 5, 6], 1.0),
    ([1, 3, 5], 1.0),
    ([1, 4, 6], -1.0),
    ([2, 3, 6], -1.0),
    ([2, 4, 5], -1.0),
];

/// The frozen coordinate 3-form `ρ_std`.
pub fn standard_rho() -> KForm {
    let terms: Vec<(&[usize], f64)> = STANDARD_TERMS.iter().map(|(i, c)| (&i[..], *c)).collect();
    KForm::from_terms(7, 3, &terms).expect("standard 3-form")
}

/// Unit coordinate vector `e_i` in ℝ⁷.
pub fn unit(i: usize) -> [f64; 7] {
    let mut v = [0.0; 7];
    v[i] = 1.0;
    v
}

fn check_three_form(rho: &KForm) -> Result<()> {
    if rho.dim() != 7 {
        return Err(GeometryError::DimensionMismatch {
            expected: 7,
            got: rho.dim(),
        });
    }
    if rho.degree() != 3 {
        return Err(GeometryError::DimensionMismatch {
            expected: 3,
            got: rho.degree(),
        });
    }
    Ok(())
}

/// Top coefficients `b_ij` of `(ρ⌟eᵢ)∧(ρ⌟eⱼ)∧ρ`.
pub fn volume_pairing(rho: &KForm) -> DMatrix<f64> {
    let contractions: Vec<KForm> = (0..7)
        .map(|i| rho.contract(&unit(i)).expect("degree 3"))
        .collect();
    let fives: Vec<KForm> = contractions
        .iter()
        .map(|c| c.wedge(rho).expect("degree 5"))
        .collect();
    let mut b = DMatrix::zeros(7, 7);
    for i in 0..7 {
        for j in i..7 {
            let top = contractions[j].wedge(&fives[i]).expect("degree 7").coeffs()[0];
            b[(i, j)] = top;
            b[(j, i)] = top;
        }
    }
    b
}

/// Metric and orientation of a 3-form, skipping the stabilizer check.
///
/// With `s` the sign making `s·b` positive definite,
/// `g = s·b / (6 · (det(s·b)/6⁷)^{1/9})`, so that `B(x,y) = 6 g(x,y) vol_g`.
/// Under `ρ ↦ tρ` this gives `g ↦ |t|^{2/3} g`.
pub fn induced_metric_unchecked(rho: &KForm) -> Result<(MetricTensor, Orientation)> {
    check_three_form(rho)?;
    let b = volume_pairing(rho);
    let eig = b.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let sign = if lo > 0.0 {
        1.0
    } else if hi < 0.0 {
        -1.0
    } else if lo == 0.0 && hi == 0.0 {
        return Err(GeometryError::Degenerate { stabilizer_dim: 49 });
    } else {
        return Err(GeometryError::SplitForm);
    };
    let positive = b * sign;
    let det = positive.determinant();
    let root = (det / PAIRING_SCALE.powi(7)).powf(1.0 / 9.0);
    let g = MetricTensor::new(positive / (PAIRING_SCALE * root))?;
    Ok((g, Orientation::from_sign(sign)))
}

/// Metric and orientation induced by a non-degenerate, non-split 3-form.
pub fn induced_metric(rho: &KForm) -> Result<(MetricTensor, Orientation)> {
    check_three_form(rho)?;
    let stabilizer_dim = crate::exterior::annihilator_dimension(rho);
    if stabilizer_dim != 14 {
        return Err(GeometryError::Degenerate { stabilizer_dim });
    }
    induced_metric_unchecked(rho)
}

/// Projector onto `span(basis)` that is orthogonal for the Gram matrix `gram`.
fn gram_projector(basis: &DMatrix<f64>, gram: &DMatrix<f64>) -> DMatrix<f64> {
    let bg = basis.transpose() * gram;
    let small = &bg * basis;
    let inv = small.try_inverse().expect("basis of full rank");
    basis * inv * bg
}

/// 2-form `a(x,y) = g(Ax, y)` of an endomorphism `A`, antisymmetrized.
pub fn endomorphism_to_two_form(g: &MetricTensor, a: &DMatrix<f64>) -> KForm {
    let lowered = a.transpose() * g.matrix();
    let n = g.dim();
    let coeffs = multi_indices(n, 2)
        .iter()
        .map(|&m| {
            let i = m.trailing_zeros() as usize;
            let j = 15 - m.leading_zeros() as usize;
            0.5 * (lowered[(i, j)] - lowered[(j, i)])
        })
        .collect();
    KForm::new(n, 2, coeffs).expect("2-form")
}

/// Endomorphism `A` with `g(Ax, y) = a(x, y)`.
pub fn two_form_to_endomorphism(g: &MetricTensor, a: &KForm) -> DMatrix<f64> {
    let n = g.dim();
    let mut m = DMatrix::zeros(n, n);
    for (idx, c) in a.terms() {
        m[(idx[0], idx[1])] = c;
        m[(idx[1], idx[0])] = -c;
    }
    // a = Aᵀ g  ⇒  A = g⁻¹ aᵀ
    g.inverse() * m.transpose()
}

/// Gram matrix of the g-induced inner product on the coefficient space of Λ².
fn lambda2_gram(g: &MetricTensor) -> DMatrix<f64> {
    let size = multi_indices(7, 2).len();
    let mut gram = DMatrix::zeros(size, size);
    let basis: Vec<KForm> = (0..size)
        .map(|s| {
            let mut c = vec![0.0; size];
            c[s] = 1.0;
            KForm::new(7, 2, c).expect("2-form")
        })
        .collect();
    for i in 0..size {
        for j in i..size {
            let v = basis[i].inner(&basis[j], g).expect("same shape");
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    gram
}

/// A validated G2 structure at one point, with its `Λ²` projectors.
#[derive(Clone, Debug)]
pub struct G2Point {
    rho: KForm,
    g: MetricTensor,
    rho_star: KForm,
    orientation: Orientation,
    stabilizer: Vec<DMatrix<f64>>,
    lambda14: Vec<KForm>,
    p7: DMatrix<f64>,
    p14: DMatrix<f64>,
}

impl G2Point {
    pub fn new(rho: KForm) -> Result<Self> {
        check_three_form(&rho)?;
        let stabilizer = annihilator_basis(&rho);
        if stabilizer.len() != 14 {
            return Err(GeometryError::Degenerate {
                stabilizer_dim: stabilizer.len(),
            });
        }
        let (g, orientation) = induced_metric_unchecked(&rho)?;
        let rho_star = rho.hodge_star(&g, orientation)?;

        let gram = lambda2_gram(&g);
        let mut b7 = DMatrix::zeros(21, 7);
        for i in 0..7 {
            b7.column_mut(i)
                .copy_from_slice(rho.contract(&unit(i))?.coeffs());
        }
        let mut b14 = DMatrix::zeros(21, 14);
        for (c, a) in stabilizer.iter().enumerate() {
            b14.column_mut(c)
                .copy_from_slice(endomorphism_to_two_form(&g, a).coeffs());
        }
        let p7 = gram_projector(&b7, &gram);
        let p14 = gram_projector(&b14, &gram);

        // g-orthonormal basis of Λ²₁₄ by Gram–Schmidt
        let mut lambda14: Vec<DVector<f64>> = Vec::with_capacity(14);
        for c in 0..14 {
            let mut v = b14.column(c).into_owned();
            for u in &lambda14 {
                let proj = (u.transpose() * &gram * &v)[(0, 0)];
                v -= u * proj;
            }
            let n = (v.transpose() * &gram * &v)[(0, 0)].sqrt();
            lambda14.push(v / n);
        }
        let lambda14 = lambda14
            .into_iter()
            .map(|v| KForm::new(7, 2, v.as_slice().to_vec()).expect("2-form"))
            .collect();

        Ok(Self {
            rho,
            g,
            rho_star,
            orientation,
            stabilizer,
            lambda14,
            p7,
            p14,
        })
    }

    pub fn standard() -> Self {
        Self::new(standard_rho()).expect("standard 3-form is a G2 structure")
    }

    pub fn rho(&self) -> &KForm {
        &self.rho
    }

    pub fn metric(&self) -> &MetricTensor {
        &self.g
    }

    pub fn rho_star(&self) -> &KForm {
        &self.rho_star
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// Basis of the annihilator algebra of ρ (as 7×7 matrices).
    pub fn stabilizer_algebra(&self) -> &[DMatrix<f64>] {
        &self.stabilizer
    }

    /// g-orthonormal basis of `Λ²₁₄`.
    pub fn lambda14_basis(&self) -> &[KForm] {
        &self.lambda14
    }

    pub fn projector7(&self) -> &DMatrix<f64> {
        &self.p7
    }

    pub fn projector14(&self) -> &DMatrix<f64> {
        &self.p14
    }

    /// `max |B(eᵢ,eⱼ) − 6 g_ij s√det g|`: how well the stored metric
    /// reproduces the volume-valued pairing.
    pub fn normalization_residual(&self) -> f64 {
        let b = volume_pairing(&self.rho);
        let vol = self.orientation.sign() * self.g.det().sqrt();
        (b - self.g.matrix() * (PAIRING_SCALE * vol)).amax()
    }

    /// Pullback `A*ρ`.
    pub fn transported(&self, a: &DMatrix<f64>) -> Result<Self> {
        Self::new(self.rho.pullback(a)?)
    }
}

/// Standard G2 point.
pub fn standard_g2_point() -> G2Point {
    G2Point::standard()
}

/// Vector product `x⋆y = ρ(x, y, ·)^♯`.
pub fn cross(p: &G2Point, x: &[f64], y: &[f64]) -> Vec<f64> {
    let one_form = p
        .rho
        .contract(x)
        .and_then(|a| a.contract(y))
        .expect("7-vectors");
    crate::exterior::sharp(&p.g, one_form.coeffs())
}

/// Element `(x, t)` of `O = V ⊕ ℝ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Octonion {
    pub im: Vec<f64>,
    pub re: f64,
}

impl Octonion {
    pub fn new(im: &[f64], re: f64) -> Self {
        Self {
            im: im.to_vec(),
            re,
        }
    }

    pub fn imaginary(im: &[f64]) -> Self {
        Self::new(im, 0.0)
    }

    pub fn real(re: f64) -> Self {
        Self {
            im: vec![0.0; 7],
            re,
        }
    }

    pub fn distance(&self, other: &Octonion) -> f64 {
        let d2: f64 = self
            .im
            .iter()
            .zip(&other.im)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (d2 + (self.re - other.re).powi(2)).sqrt()
    }
}

/// Sign convention of the real part of the octonion product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OctonionConvention {
    /// `(x,t)(y,t') = (ty + t'x + x⋆y, g(x,y) + tt')`.
    Displayed,
    /// `(x,t)(y,t') = (ty + t'x + x⋆y, tt' − g(x,y))`; imaginary units square to −1.
    Standard,
}

/// The convention used by [`octonion_multiply`].
pub const FROZEN_CONVENTION: OctonionConvention = OctonionConvention::Standard;

pub fn octonion_multiply_with(
    p: &G2Point,
    a: &Octonion,
    b: &Octonion,
    convention: OctonionConvention,
) -> Octonion {
    let xy = cross(p, &a.im, &b.im);
    let im = (0..7)
        .map(|i| a.re * b.im[i] + b.re * a.im[i] + xy[i])
        .collect();
    let inner = p.g.dot(&a.im, &b.im);
    let re = match convention {
        OctonionConvention::Displayed => inner + a.re * b.re,
        OctonionConvention::Standard => a.re * b.re - inner,
    };
    Octonion { im, re }
}

pub fn octonion_multiply(p: &G2Point, a: &Octonion, b: &Octonion) -> Octonion {
    octonion_multiply_with(p, a, b, FROZEN_CONVENTION)
}

/// g-orthonormal Gram–Schmidt; `DependentBasis` if a vector falls below
/// `1e-10` after projection.
pub fn orthonormalize(g: &MetricTensor, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut w = v.clone();
        for u in &out {
            let c = g.dot(u, &w);
            w.iter_mut().zip(u).for_each(|(wi, ui)| *wi -= c * ui);
        }
        let n = g.norm(&w);
        if n < 1e-10 {
            return Err(GeometryError::DependentBasis);
        }
        w.iter_mut().for_each(|wi| *wi /= n);
        out.push(w);
    }
    Ok(out)
}

/// Largest residual of `x⋆y` off `span(basis)` over pairs of an orthonormalized basis.
pub fn associative_defect(p: &G2Point, basis: &[Vec<f64>; 3]) -> Result<f64> {
    let ortho = orthonormalize(&p.g, basis)?;
    let mut worst: f64 = 0.0;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let mut w = cross(p, &ortho[i], &ortho[j]);
        for u in &ortho {
            let c = p.g.dot(u, &w);
            w.iter_mut().zip(u).for_each(|(wi, ui)| *wi -= c * ui);
        }
        worst = worst.max(p.g.norm(&w));
    }
    Ok(worst)
}

/// Whether the 3-plane is closed under `⋆` (residual ≤ 1e-10).
pub fn is_associative_subspace(p: &G2Point, basis: &[Vec<f64>; 3]) -> Result<bool> {
    Ok(associative_defect(p, basis)? <= 1e-10)
}

fn check_unit(g: &MetricTensor, v: &[f64]) -> Result<()> {
    let norm = g.norm(v);
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(GeometryError::NonUnitVector { norm });
    }
    Ok(())
}

/// Coordinate index dropped when completing `v` to a basis: the largest
/// component of `v`.
pub fn default_dropped_index(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    best
}

/// g-orthonormal basis (as columns of a 7×6 matrix) of `v⊥`, obtained by
/// Gram–Schmidt of `v, e₀, …, ê_drop, …, e₆`. Smooth in `(g, v)` for a fixed
/// `drop` as long as `v_drop ≠ 0`.
pub fn complement_basis(g: &MetricTensor, v: &[f64], drop: usize) -> DMatrix<f64> {
    let n = v.len();
    let vn = g.norm(v);
    let mut found: Vec<Vec<f64>> = vec![v.iter().map(|c| c / vn).collect()];
    for i in (0..n).filter(|&i| i != drop) {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        for u in &found {
            let c = g.dot(u, &w);
            w.iter_mut().zip(u).for_each(|(wi, ui)| *wi -= c * ui);
        }
        let norm = g.norm(&w);
        w.iter_mut().for_each(|wi| *wi /= norm);
        found.push(w);
    }
    let mut m = DMatrix::zeros(n, n - 1);
    for (c, w) in found.iter().skip(1).enumerate() {
        m.column_mut(c).copy_from_slice(w);
    }
    m
}

/// SU(3) structure on `v⊥`, expressed in a g-orthonormal basis of `v⊥`.
#[derive(Clone, Debug)]
pub struct Su3Frame {
    pub v: Vec<f64>,
    /// 7×6, g-orthonormal columns spanning `v⊥`.
    pub basis: DMatrix<f64>,
    /// `ω = (ρ⌟v)|_{v⊥}`.
    pub omega: KForm,
    /// `I = g⁻¹∘ω`, i.e. `I y = v⋆y`, in the basis above.
    pub complex_structure: LinearMap,
    /// `Re Ω = ρ|_{v⊥}`.
    pub omega_re: KForm,
    /// `Im Ω = ρ*(·,·,·,v)|_{v⊥}`.
    pub omega_im: KForm,
}

impl Su3Frame {
    /// `max |I² + Id|`.
    pub fn complex_structure_defect(&self) -> f64 {
        let i = self.complex_structure.matrix();
        (i * i + DMatrix::identity(6, 6)).amax()
    }

    /// `Ω(z, ·, ·)` split as (real, imaginary) 2-forms for the complex vector `z = re + i·im`.
    pub fn contract_omega(&self, re: &[f64], im: &[f64]) -> (KForm, KForm) {
        let a = self.omega_re.contract(re).expect("6-vector");
        let b = self.omega_im.contract(im).expect("6-vector");
        let c = self.omega_re.contract(im).expect("6-vector");
        let d = self.omega_im.contract(re).expect("6-vector");
        (&a - &b, &c + &d)
    }

    /// `a ↦ a(I·, I·)` on 2-forms over `v⊥`.
    pub fn rotate(&self, a: &KForm) -> KForm {
        a.pullback(self.complex_structure.matrix()).expect("6×6")
    }
}

/// SU(3) structure on `v⊥` for a unit vector `v`.
pub fn su3_structure(p: &G2Point, v: &[f64]) -> Result<Su3Frame> {
    su3_structure_with(p, v, default_dropped_index(v))
}

pub fn su3_structure_with(p: &G2Point, v: &[f64], drop: usize) -> Result<Su3Frame> {
    if v.len() != 7 {
        return Err(GeometryError::DimensionMismatch {
            expected: 7,
            got: v.len(),
        });
    }
    check_unit(&p.g, v)?;
    let basis = complement_basis(&p.g, v, drop);
    let omega = p.rho.contract(v)?.pullback(&basis)?;
    let mut i_mat = DMatrix::zeros(6, 6);
    for a in 0..6 {
        for b in 0..6 {
            i_mat[(a, b)] = omega.component(&[b, a]);
        }
    }
    let omega_re = p.rho.pullback(&basis)?;
    let omega_im = p.rho_star.contract(v)?.pullback(&basis)?.scaled(-1.0);
    Ok(Su3Frame {
        v: v.to_vec(),
        basis,
        omega,
        complex_structure: LinearMap(i_mat),
        omega_re,
        omega_im,
    })
}

/// Splitting `a = a₇ + a₁₄`.
pub fn project_lambda2(p: &G2Point, a: &KForm) -> Result<(KForm, KForm)> {
    if a.dim() != 7 || a.degree() != 2 {
        return Err(GeometryError::DimensionMismatch {
            expected: 2,
            got: a.degree(),
        });
    }
    let v = DVector::from_column_slice(a.coeffs());
    let a7 = &p.p7 * &v;
    let a14 = &p.p14 * &v;
    Ok((
        KForm::new(7, 2, a7.as_slice().to_vec())?,
        KForm::new(7, 2, a14.as_slice().to_vec())?,
    ))
}

/// Norms of the pieces of a 2-form restricted to `v⊥`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HodgeType {
    pub p20_02_norm: f64,
    pub p11_norm: f64,
    pub omega_component: f64,
}

/// Pieces of a 2-form on `v⊥` (in the frame basis).
#[derive(Clone, Debug)]
pub struct HodgeDecomposition {
    /// `(2,0) + (0,2)` part.
    pub mixed: KForm,
    /// Primitive `(1,1)` part.
    pub primitive: KForm,
    /// Coefficient `c` of the `c·ω` part.
    pub omega_coefficient: f64,
}

/// Decomposes a 2-form given on `v⊥` in the frame basis.
pub fn hodge_decompose(frame: &Su3Frame, restricted: &KForm) -> HodgeDecomposition {
    let rotated = frame.rotate(restricted);
    let p11 = (restricted + &rotated).scaled(0.5);
    let mixed = (restricted - &rotated).scaled(0.5);
    let w = &frame.omega;
    let ww: f64 = w.coeffs().iter().map(|c| c * c).sum();
    let c = p11
        .coeffs()
        .iter()
        .zip(w.coeffs())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        / ww;
    let primitive = p11.axpy(-c, w).expect("same shape");
    HodgeDecomposition {
        mixed,
        primitive,
        omega_coefficient: c,
    }
}

impl HodgeDecomposition {
    pub fn norms(&self, frame: &Su3Frame) -> HodgeType {
        HodgeType {
            p20_02_norm: self.mixed.norm_euclid(),
            p11_norm: self.primitive.norm_euclid(),
            omega_component: self.omega_coefficient.abs() * frame.omega.norm_euclid(),
        }
    }
}

/// Hodge type of `a|_{v⊥}` with respect to the complex structure of `v`.
pub fn hodge_type_on_complement(p: &G2Point, a: &KForm, v: &[f64]) -> Result<HodgeType> {
    let frame = su3_structure(p, v)?;
    let restricted = a.pullback(&frame.basis)?;
    Ok(hodge_decompose(&frame, &restricted).norms(&frame))
}

/// Rank of a projector matrix.
pub fn projector_rank(p: &DMatrix<f64>) -> usize {
    numerical_rank(p)
}
