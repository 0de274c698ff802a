//! Almost-G2 structures on the periodic 7-torus `[0,1)⁷`, evaluated lazily.
//!
//! A [`StructureField`] is a closed-form generator `p ↦ ρ(p)` together with a
//! virtual resolution `N`; every derivative is a central difference with step
//! `h = 1/N`. Nothing is stored on a grid.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{GeometryError, Result};
use crate::exterior::{KForm, MetricTensor, Orientation};
use crate::g2::{induced_metric_unchecked, standard_rho, G2Point};

pub type Point = [f64; 7];

/// Wraps a point into the fundamental domain.
pub fn wrap(p: &Point) -> Point {
    let mut q = *p;
    q.iter_mut().for_each(|c| *c = c.rem_euclid(1.0));
    q
}

pub fn shifted(p: &Point, axis: usize, delta: f64) -> Point {
    let mut q = *p;
    q[axis] += delta;
    q
}

/// Named closed-form generator families.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// Constant `ρ_std`.
    Flat,
    /// `ρ_std + ε dβ`, `β = sin(2π k·p)/(2π|k|) σ` for a fixed unit 2-form σ.
    ClosedPerturbed { epsilon: f64, frequency: [i32; 7] },
    /// `ρ_std + ε γ`, `γ = sin(2π k·p) τ` for a fixed unit 3-form τ.
    GenericPerturbed { epsilon: f64, frequency: [i32; 7] },
    /// `e^{3f} ρ_std` with `f = ε sin(2π m p₁)`; induces `g = e^{2f}·id`.
    Conformal { epsilon: f64, frequency: i32 },
}

impl Family {
    pub fn key(&self) -> &'static str {
        match self {
            Family::Flat => "flat",
            Family::ClosedPerturbed { .. } => "closed-perturbed",
            Family::GenericPerturbed { .. } => "generic-perturbed",
            Family::Conformal { .. } => "conformal",
        }
    }

    /// Builds a family from its config key.
    pub fn from_key(key: &str, epsilon: f64, frequency: [i32; 7]) -> Option<Family> {
        Some(match key {
            "flat" => Family::Flat,
            "closed-perturbed" => Family::ClosedPerturbed { epsilon, frequency },
            "generic-perturbed" => Family::GenericPerturbed { epsilon, frequency },
            "conformal" => Family::Conformal {
                epsilon,
                frequency: frequency[0],
            },
            _ => return None,
        })
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

pub const DEFAULT_FREQUENCY: [i32; 7] = [1, 0, 1, 0, 0, 1, 0];

fn unit_form(degree: usize, phase: f64) -> KForm {
    let n = crate::exterior::binomial(7, degree);
    let coeffs: Vec<f64> = (0..n).map(|i| (1.7 * i as f64 + phase).cos()).collect();
    let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    KForm::new(7, degree, coeffs.into_iter().map(|c| c / norm).collect()).expect("shape")
}

/// Fixed 2-form σ of the closed family.
pub fn closed_profile() -> KForm {
    unit_form(2, 0.3)
}

/// Fixed 3-form τ of the generic family.
pub fn generic_profile() -> KForm {
    unit_form(3, 1.1)
}

fn phase(frequency: &[i32; 7], p: &Point) -> f64 {
    2.0 * PI
        * frequency
            .iter()
            .zip(p)
            .map(|(k, x)| *k as f64 * x)
            .sum::<f64>()
}

/// Grid-free almost-G2 structure on `T⁷`.
#[derive(Clone, Debug)]
pub struct StructureField {
    family: Family,
    resolution: usize,
    rho0: KForm,
    profile: KForm,
}

impl StructureField {
    pub fn new(family: Family, resolution: usize) -> Self {
        assert!(resolution > 0, "resolution must be positive");
        let rho0 = standard_rho();
        let profile = match &family {
            Family::ClosedPerturbed { frequency, .. } => {
                let k: Vec<f64> = frequency.iter().map(|&c| c as f64).collect();
                let kn = k.iter().map(|c| c * c).sum::<f64>().sqrt();
                let khat: Vec<f64> = k.iter().map(|c| c / kn).collect();
                KForm::covector(&khat)
                    .unwrap()
                    .wedge(&closed_profile())
                    .unwrap()
            }
            Family::GenericPerturbed { .. } => generic_profile(),
            _ => KForm::zero(7, 3).unwrap(),
        };
        Self {
            family,
            resolution,
            rho0,
            profile,
        }
    }

    pub fn flat(resolution: usize) -> Self {
        Self::new(Family::Flat, resolution)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn step(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    pub fn with_resolution(&self, resolution: usize) -> Self {
        Self::new(self.family.clone(), resolution)
    }

    pub fn rho_at(&self, p: &Point) -> KForm {
        let p = wrap(p);
        match &self.family {
            Family::Flat => self.rho0.clone(),
            Family::ClosedPerturbed { epsilon, frequency } => {
                let c = epsilon * phase(frequency, &p).cos();
                self.rho0.axpy(c, &self.profile).unwrap()
            }
            Family::GenericPerturbed { epsilon, frequency } => {
                let s = epsilon * phase(frequency, &p).sin();
                self.rho0.axpy(s, &self.profile).unwrap()
            }
            Family::Conformal { .. } => self.rho0.scaled((3.0 * self.conformal_factor(&p)).exp()),
        }
    }

    /// `f(p)` of the conformal family (0 for the others).
    pub fn conformal_factor(&self, p: &Point) -> f64 {
        match &self.family {
            Family::Conformal { epsilon, frequency } => {
                epsilon * (2.0 * PI * *frequency as f64 * p[0]).sin()
            }
            _ => 0.0,
        }
    }

    /// Gradient of `f` (conformal family only).
    pub fn conformal_gradient(&self, p: &Point) -> [f64; 7] {
        let mut g = [0.0; 7];
        if let Family::Conformal { epsilon, frequency } = &self.family {
            let w = 2.0 * PI * *frequency as f64;
            g[0] = epsilon * w * (w * p[0]).cos();
        }
        g
    }

    /// Hessian entry `∂₁∂₁f` (the only non-zero one, conformal family only).
    pub fn conformal_second_derivative(&self, p: &Point) -> f64 {
        match &self.family {
            Family::Conformal { epsilon, frequency } => {
                let w = 2.0 * PI * *frequency as f64;
                -epsilon * w * w * (w * p[0]).sin()
            }
            _ => 0.0,
        }
    }

    pub fn metric_at(&self, p: &Point) -> MetricTensor {
        match &self.family {
            Family::Flat => MetricTensor::identity(7),
            _ => {
                induced_metric_unchecked(&self.rho_at(p))
                    .expect("generator left the non-degenerate stratum")
                    .0
            }
        }
    }

    pub fn metric_and_orientation_at(&self, p: &Point) -> (MetricTensor, Orientation) {
        match &self.family {
            Family::Flat => (MetricTensor::identity(7), Orientation::Positive),
            _ => induced_metric_unchecked(&self.rho_at(p))
                .expect("generator left the non-degenerate stratum"),
        }
    }

    pub fn rho_star_at(&self, p: &Point) -> KForm {
        let (g, o) = self.metric_and_orientation_at(p);
        self.rho_at(p).hodge_star(&g, o).expect("7-dim")
    }

    /// Fully validated G2 structure at `p`.
    pub fn structure_at(&self, p: &Point) -> Result<G2Point> {
        G2Point::new(self.rho_at(p))
    }

    /// Closed-form `dρ` (all families).
    pub fn exact_d_rho(&self, p: &Point) -> KForm {
        let p = wrap(p);
        match &self.family {
            Family::Flat | Family::ClosedPerturbed { .. } => KForm::zero(7, 4).unwrap(),
            Family::GenericPerturbed { epsilon, frequency } => {
                let k: Vec<f64> = frequency
                    .iter()
                    .map(|&c| 2.0 * PI * c as f64 * epsilon)
                    .collect();
                let dk = KForm::covector(&k).unwrap().wedge(&self.profile).unwrap();
                dk.scaled(phase(frequency, &p).cos())
            }
            Family::Conformal { .. } => {
                let f = self.conformal_factor(&p);
                let df = KForm::covector(&self.conformal_gradient(&p)).unwrap();
                df.wedge(&self.rho0).unwrap().scaled(3.0 * (3.0 * f).exp())
            }
        }
    }

    /// Closed-form `d(*ρ)` for the conformal family, where `*ρ = e^{4f} ρ*_std`.
    pub fn exact_d_rho_star_conformal(&self, p: &Point) -> Option<KForm> {
        if !matches!(self.family, Family::Conformal { .. }) {
            return None;
        }
        let p = wrap(p);
        let star = G2Point::standard().rho_star().clone();
        let f = self.conformal_factor(&p);
        let df = KForm::covector(&self.conformal_gradient(&p)).unwrap();
        Some(df.wedge(&star).unwrap().scaled(4.0 * (4.0 * f).exp()))
    }
}

/// Central-difference exterior derivative `dα = Σᵢ eⁱ ∧ ∂ᵢα`.
pub fn exterior_derivative<F>(field: F, p: &Point, h: f64) -> KForm
where
    F: Fn(&Point) -> KForm,
{
    assert!(h > 0.0, "step must be positive");
    let mut out: Option<KForm> = None;
    for i in 0..7 {
        let plus = field(&shifted(p, i, h));
        let minus = field(&shifted(p, i, -h));
        let derivative = (&plus - &minus).scaled(0.5 / h);
        let mut e = [0.0; 7];
        e[i] = 1.0;
        let term = KForm::covector(&e)
            .unwrap()
            .wedge(&derivative)
            .expect("degree fits");
        out = Some(match out {
            None => term,
            Some(acc) => &acc + &term,
        });
    }
    out.expect("seven terms")
}

/// `(max ‖dρ‖, max ‖d*ρ‖)` over a sample set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FernandezGray {
    pub d_rho: f64,
    pub d_rho_star: f64,
}

impl FernandezGray {
    pub fn max(&self) -> f64 {
        self.d_rho.max(self.d_rho_star)
    }
}

/// `(‖dρ‖_g, ‖d*ρ‖_g)` at a single point.
pub fn fernandez_gray_at(field: &StructureField, p: &Point) -> FernandezGray {
    let h = field.step();
    let g = field.metric_at(p);
    let d_rho = exterior_derivative(|q| field.rho_at(q), p, h)
        .norm(&g)
        .unwrap();
    let d_rho_star = exterior_derivative(|q| field.rho_star_at(q), p, h)
        .norm(&g)
        .unwrap();
    FernandezGray { d_rho, d_rho_star }
}

pub fn fernandez_gray_residual(field: &StructureField, samples: &[Point]) -> FernandezGray {
    samples.iter().map(|p| fernandez_gray_at(field, p)).fold(
        FernandezGray {
            d_rho: 0.0,
            d_rho_star: 0.0,
        },
        |acc, r| FernandezGray {
            d_rho: acc.d_rho.max(r.d_rho),
            d_rho_star: acc.d_rho_star.max(r.d_rho_star),
        },
    )
}

/// Safety factor applied to the measured truncation constant.
pub const INTEGRABILITY_SAFETY: f64 = 10.0;

/// Truncation constant `c` with `|d_h ρ − dρ| ≤ c h²`, measured on the
/// conformal toy structure (ε = 0.05, unit frequency) at N = 16 against its
/// closed-form `dρ` and `d*ρ`, times [`INTEGRABILITY_SAFETY`].
pub fn calibrate_integrability_constant(samples: &[Point]) -> f64 {
    let field = StructureField::new(
        Family::Conformal {
            epsilon: 0.05,
            frequency: 1,
        },
        16,
    );
    let h = field.step();
    let worst = samples
        .iter()
        .map(|p| {
            let g = field.metric_at(p);
            let fd = exterior_derivative(|q| field.rho_at(q), p, h);
            let fd_star = exterior_derivative(|q| field.rho_star_at(q), p, h);
            let e1 = (&fd - &field.exact_d_rho(p)).norm(&g).unwrap();
            let e2 = (&fd_star - &field.exact_d_rho_star_conformal(p).unwrap())
                .norm(&g)
                .unwrap();
            e1.max(e2)
        })
        .fold(0.0, f64::max);
    INTEGRABILITY_SAFETY * worst / (h * h)
}

/// Threshold `τ_int(N) = c·h²`.
pub fn integrability_threshold(constant: f64, resolution: usize) -> f64 {
    let h = 1.0 / resolution as f64;
    constant * h * h
}

/// `Γᵏᵢⱼ` stored as `[k][i][j]`.
pub type Christoffel = [[[f64; 7]; 7]; 7];

/// Central-difference metric derivatives `∂ₗ g` at `p`.
pub fn metric_derivatives(field: &StructureField, p: &Point, h: f64) -> [DMatrix<f64>; 7] {
    std::array::from_fn(|l| {
        let plus = field.metric_at(&shifted(p, l, h));
        let minus = field.metric_at(&shifted(p, l, -h));
        (plus.matrix() - minus.matrix()) * (0.5 / h)
    })
}

/// `Γᵏᵢⱼ = ½ gᵏˡ(∂ᵢg_jl + ∂ⱼg_il − ∂ₗg_ij)`.
pub fn christoffel_at(field: &StructureField, p: &Point, h: f64) -> Christoffel {
    let mut gamma = [[[0.0; 7]; 7]; 7];
    if matches!(field.family, Family::Flat) {
        return gamma;
    }
    let g = field.metric_at(p);
    let dg = metric_derivatives(field, p, h);
    let inv = g.inverse();
    let mut lowered = [[[0.0; 7]; 7]; 7];
    for l in 0..7 {
        for i in 0..7 {
            for j in i..7 {
                let v = 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                lowered[l][i][j] = v;
                lowered[l][j][i] = v;
            }
        }
    }
    for k in 0..7 {
        for i in 0..7 {
            for j in i..7 {
                let v: f64 = (0..7).map(|l| inv[(k, l)] * lowered[l][i][j]).sum();
                gamma[k][i][j] = v;
                gamma[k][j][i] = v;
            }
        }
    }
    gamma
}

/// `Γ(u, v)ᵏ = Γᵏᵢⱼ uⁱ vʲ`.
pub fn christoffel_apply(gamma: &Christoffel, u: &[f64], v: &[f64]) -> [f64; 7] {
    std::array::from_fn(|k| {
        let mut s = 0.0;
        for i in 0..7 {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..7 {
                s += gamma[k][i][j] * u[i] * v[j];
            }
        }
        s
    })
}

/// Riemann tensor `R[i][j][k][l] = g(R(eᵢ, eⱼ) e_k, e_l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curvature {
    data: Vec<f64>,
}

impl Curvature {
    pub fn zero() -> Self {
        Self {
            data: vec![0.0; 7 * 7 * 7 * 7],
        }
    }

    #[inline]
    fn offset(i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * 7 + j) * 7 + k) * 7 + l
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[Self::offset(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: f64) {
        self.data[Self::offset(i, j, k, l)] = v;
    }

    /// Builds `R` from `(2-form, endomorphism-2-form)` pairs: `R = Σ αₛ ⊗ βₛ`,
    /// i.e. `R[i][j][k][l] = Σ αₛ(eᵢ,eⱼ) βₛ(e_k,e_l)`.
    pub fn from_pairs(pairs: &[(KForm, KForm)]) -> Self {
        let mut r = Self::zero();
        for (a, b) in pairs {
            for i in 0..7 {
                for j in 0..7 {
                    let aij = if i == j { 0.0 } else { a.component(&[i, j]) };
                    if aij == 0.0 {
                        continue;
                    }
                    for k in 0..7 {
                        for l in 0..7 {
                            if k != l {
                                let o = Self::offset(i, j, k, l);
                                r.data[o] += aij * b.component(&[k, l]);
                            }
                        }
                    }
                }
            }
        }
        r
    }

    /// `g(R(X,Y)Z, W)`.
    pub fn evaluate(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..7 {
            for j in 0..7 {
                let xy = x[i] * y[j];
                if xy == 0.0 {
                    continue;
                }
                for k in 0..7 {
                    for l in 0..7 {
                        s += xy * z[k] * w[l] * self.get(i, j, k, l);
                    }
                }
            }
        }
        s
    }

    /// Lowered vector `g(R(X,Y)Z, ·)` as a covector.
    pub fn apply_lowered(&self, x: &[f64], y: &[f64], z: &[f64]) -> [f64; 7] {
        std::array::from_fn(|l| {
            let mut s = 0.0;
            for i in 0..7 {
                for j in 0..7 {
                    let xy = x[i] * y[j];
                    if xy == 0.0 {
                        continue;
                    }
                    for k in 0..7 {
                        s += xy * z[k] * self.get(i, j, k, l);
                    }
                }
            }
            s
        })
    }

    /// `max |Rᵢⱼₖₗ + Rⱼₖᵢₗ + Rₖᵢⱼₗ|`.
    pub fn bianchi_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..7 {
            for j in 0..7 {
                for k in 0..7 {
                    for l in 0..7 {
                        let s = self.get(i, j, k, l) + self.get(j, k, i, l) + self.get(k, i, j, l);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Components in the frame given by the columns of `f`.
    pub fn in_frame(&self, f: &DMatrix<f64>) -> Curvature {
        let n = f.ncols();
        assert_eq!(n, 7);
        // contract one slot at a time
        let mut cur = self.data.clone();
        for slot in 0..4 {
            let mut next = vec![0.0; cur.len()];
            for idx in 0..cur.len() {
                let mut digits = [idx / 343, (idx / 49) % 7, (idx / 7) % 7, idx % 7];
                let old = digits[slot];
                for a in 0..7 {
                    let fa = f[(old, a)];
                    if fa == 0.0 {
                        continue;
                    }
                    digits[slot] = a;
                    let o = Self::offset(digits[0], digits[1], digits[2], digits[3]);
                    next[o] += fa * cur[idx];
                }
            }
            cur = next;
        }
        Curvature { data: cur }
    }
}

/// Connection data at a point: Christoffel symbols and curvature.
#[derive(Clone, Debug)]
pub struct ConnectionSample {
    pub point: Point,
    pub christoffel: Christoffel,
    /// Curvature antisymmetrized in its last pair (exact antisymmetry in both pairs).
    pub curvature: Curvature,
    /// `max |R_ijkl + R_ijlk|` before antisymmetrization: metric-compatibility
    /// defect of the differenced connection, O(h²).
    pub compatibility_defect: f64,
}

/// Christoffel symbols and Riemann curvature from differenced metrics.
pub fn levi_civita(field: &StructureField, p: &Point) -> ConnectionSample {
    let h = field.step();
    let christoffel = christoffel_at(field, p, h);
    if matches!(field.family, Family::Flat) {
        return ConnectionSample {
            point: *p,
            christoffel,
            curvature: Curvature::zero(),
            compatibility_defect: 0.0,
        };
    }
    let dgamma: [Christoffel; 7] = std::array::from_fn(|m| {
        let plus = christoffel_at(field, &shifted(p, m, h), h);
        let minus = christoffel_at(field, &shifted(p, m, -h), h);
        let mut d = [[[0.0; 7]; 7]; 7];
        for k in 0..7 {
            for i in 0..7 {
                for j in 0..7 {
                    d[k][i][j] = (plus[k][i][j] - minus[k][i][j]) * (0.5 / h);
                }
            }
        }
        d
    });
    let g = field.metric_at(p);
    let gm = g.matrix();
    let gam = &christoffel;
    // upper[mu][nu][sigma][rho] = R^rho_{sigma mu nu}
    let mut raw = Curvature::zero();
    for mu in 0..7 {
        for nu in 0..7 {
            if mu == nu {
                continue;
            }
            for sigma in 0..7 {
                let mut upper = [0.0; 7];
                for (rho, u) in upper.iter_mut().enumerate() {
                    let mut v = dgamma[mu][rho][nu][sigma] - dgamma[nu][rho][mu][sigma];
                    for lam in 0..7 {
                        v += gam[rho][mu][lam] * gam[lam][nu][sigma]
                            - gam[rho][nu][lam] * gam[lam][mu][sigma];
                    }
                    *u = v;
                }
                for l in 0..7 {
                    let lowered: f64 = (0..7).map(|a| gm[(l, a)] * upper[a]).sum();
                    raw.set(mu, nu, sigma, l, lowered);
                }
            }
        }
    }
    let mut curvature = Curvature::zero();
    let mut defect: f64 = 0.0;
    for i in 0..7 {
        for j in 0..7 {
            for k in 0..7 {
                for l in 0..7 {
                    let a = raw.get(i, j, k, l);
                    let b = raw.get(i, j, l, k);
                    defect = defect.max((a + b).abs());
                    curvature.set(i, j, k, l, 0.5 * (a - b));
                }
            }
        }
    }
    ConnectionSample {
        point: *p,
        christoffel,
        curvature,
        compatibility_defect: defect,
    }
}

/// Symmetric inverse square root `g^{-1/2}`: its columns form a g-orthonormal frame.
pub fn orthonormal_frame(g: &MetricTensor) -> DMatrix<f64> {
    let eig = g.matrix().clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

fn curvature_matrix(r: &Curvature) -> DMatrix<f64> {
    let pairs: Vec<(usize, usize)> = (0..7)
        .flat_map(|i| (i + 1..7).map(move |j| (i, j)))
        .collect();
    let mut m = DMatrix::zeros(21, 21);
    for (a, &(i, j)) in pairs.iter().enumerate() {
        for (b, &(k, l)) in pairs.iter().enumerate() {
            m[(a, b)] = r.get(i, j, k, l);
        }
    }
    m
}

/// Norm of the part of `R ∈ Λ² ⊗ Λ²` outside `Λ²₁₄ ⊗ Λ²₁₄`, measured in
/// the orthonormal frame `g^{-1/2}·rotation`.
pub fn curvature_g2_residual_in_frame(
    rho: &KForm,
    g: &MetricTensor,
    r: &Curvature,
    rotation: &DMatrix<f64>,
) -> Result<f64> {
    let frame = orthonormal_frame(g) * rotation;
    let local = G2Point::new(rho.pullback(&frame)?)?;
    let rm = curvature_matrix(&r.in_frame(&frame));
    let p14 = local.projector14();
    let inside = p14 * &rm * p14.transpose();
    Ok((rm - inside).norm())
}

/// [`curvature_g2_residual_in_frame`] for the field's curvature at `p`.
pub fn curvature_g2_check(field: &StructureField, p: &Point) -> Result<f64> {
    curvature_g2_check_rotated(field, p, &DMatrix::identity(7, 7))
}

pub fn curvature_g2_check_rotated(
    field: &StructureField,
    p: &Point,
    rotation: &DMatrix<f64>,
) -> Result<f64> {
    if rotation.nrows() != 7 || rotation.ncols() != 7 {
        return Err(GeometryError::DimensionMismatch {
            expected: 7,
            got: rotation.nrows(),
        });
    }
    let sample = levi_civita(field, p);
    let g = field.metric_at(p);
    curvature_g2_residual_in_frame(&field.rho_at(p), &g, &sample.curvature, rotation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const P: Point = [0.13, 0.71, 0.42, 0.05, 0.88, 0.37, 0.6];

    #[test]
    fn flat_field_is_exactly_flat() {
        let f = StructureField::flat(16);
        let fg = fernandez_gray_at(&f, &P);
        assert_eq!(fg.d_rho, 0.0);
        assert_eq!(fg.d_rho_star, 0.0);
        let c = levi_civita(&f, &P);
        assert!(c.christoffel.iter().flatten().flatten().all(|v| *v == 0.0));
        assert_eq!(c.curvature.max_abs(), 0.0);
        assert_eq!(curvature_g2_check(&f, &P).unwrap(), 0.0);
    }

    #[test]
    fn constant_field_derivative_is_zero() {
        let rho = standard_rho();
        let d = exterior_derivative(|_| rho.clone(), &P, 0.1);
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn derivative_of_sine_one_form() {
        // d(sin(2πp₂) e¹) = 2π cos(2πp₂) e²∧e¹
        let field = |p: &Point| {
            let mut c = [0.0; 7];
            c[0] = (2.0 * PI * p[1]).sin();
            KForm::covector(&c).unwrap()
        };
        let h = 1.0 / 64.0;
        let d = exterior_derivative(field, &P, h);
        let expected = -2.0 * PI * (2.0 * PI * P[1]).cos();
        assert_abs_diff_eq!(
            d.component(&[0, 1]),
            expected,
            epsilon = 4.0 * h * h * 2.0 * PI
        );
        assert_abs_diff_eq!(
            d.component(&[1, 0]),
            -expected,
            epsilon = 4.0 * h * h * 2.0 * PI
        );
    }

    #[test]
    fn conformal_metric_is_scaled_identity() {
        let f = StructureField::new(
            Family::Conformal {
                epsilon: 0.1,
                frequency: 1,
            },
            16,
        );
        let g = f.metric_at(&P);
        let s = (2.0 * f.conformal_factor(&P)).exp();
        assert!((g.matrix() - DMatrix::identity(7, 7) * s).amax() <= 1e-12);
    }

    #[test]
    fn generators_are_periodic() {
        for fam in [
            Family::ClosedPerturbed {
                epsilon: 0.1,
                frequency: DEFAULT_FREQUENCY,
            },
            Family::GenericPerturbed {
                epsilon: 0.1,
                frequency: DEFAULT_FREQUENCY,
            },
            Family::Conformal {
                epsilon: 0.1,
                frequency: 2,
            },
        ] {
            let f = StructureField::new(fam, 8);
            let q = shifted(&shifted(&P, 0, 1.0), 5, -2.0);
            assert!((&f.rho_at(&P) - &f.rho_at(&q)).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn closed_family_profile_is_closed() {
        let f = StructureField::new(
            Family::ClosedPerturbed {
                epsilon: 0.05,
                frequency: DEFAULT_FREQUENCY,
            },
            16,
        );
        let fg = fernandez_gray_at(&f, &P);
        assert!(fg.d_rho <= 1e-12, "{}", fg.d_rho);
        assert!(fg.d_rho_star > 1e-3);
    }

    #[test]
    fn curvature_antisymmetries_are_exact() {
        let f = StructureField::new(
            Family::GenericPerturbed {
                epsilon: 0.1,
                frequency: DEFAULT_FREQUENCY,
            },
            16,
        );
        let c = levi_civita(&f, &P);
        let r = &c.curvature;
        for i in 0..7 {
            for j in 0..7 {
                for k in 0..7 {
                    for l in 0..7 {
                        assert_eq!(r.get(i, j, k, l), -r.get(j, i, k, l));
                        assert_eq!(r.get(i, j, k, l), -r.get(i, j, l, k));
                    }
                }
            }
        }
    }

    #[test]
    fn curvature_from_pairs() {
        let a = KForm::basis(7, &[0, 1]).unwrap();
        let b = KForm::basis(7, &[2, 3]).unwrap();
        let r = Curvature::from_pairs(&[(a, b)]);
        assert_eq!(r.get(0, 1, 2, 3), 1.0);
        assert_eq!(r.get(1, 0, 3, 2), 1.0);
        assert_eq!(r.get(0, 1, 3, 2), -1.0);
    }
}
