//! Connections on the flat 7-torus, the G2-instanton condition and the CR
//! Dolbeault operator on the twistor space.
//!
//! Bundle-valued forms are stored as one `rank × rank` complex matrix per
//! multi-index of `multi_indices(7, 2)`. Connection potentials are
//! anti-Hermitian, so curvatures are anti-Hermitian too, and
//! `F_ij = ∂ᵢA_j − ∂_jAᵢ + [Aᵢ, A_j]`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::Result;
use crate::exterior::{index_of, mask_indices, multi_indices, KForm};
use crate::field::{Point, StructureField};
use crate::g2::{hodge_type_on_complement, project_lambda2, unit, G2Point};
use crate::twistor::{
    bracket_family, distribution_fields, imag_part, real_part, Ambient, CVec, CrSplitting,
    Extension, Polarity, TwistorPoint, C,
};

pub type Mat = DMatrix<C>;

const ZERO: C = C::new(0.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// A 2-form with values in `rank × rank` complex matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleForm {
    pub rank: usize,
    pub coeffs: Vec<Mat>,
}

impl BundleForm {
    pub fn zero(rank: usize) -> Self {
        Self {
            rank,
            coeffs: vec![Mat::zeros(rank, rank); multi_indices(7, 2).len()],
        }
    }

    /// `i·f` for a real 2-form `f` (rank one).
    pub fn abelian(f: &KForm) -> Self {
        let coeffs = f
            .coeffs()
            .iter()
            .map(|c| Mat::from_element(1, 1, I * *c))
            .collect();
        Self { rank: 1, coeffs }
    }

    /// `F_ij` for any ordered pair.
    pub fn get(&self, i: usize, j: usize) -> Mat {
        if i == j {
            return Mat::zeros(self.rank, self.rank);
        }
        let c = &self.coeffs[index_of(7, (1u16 << i) | (1u16 << j))];
        if i < j {
            c.clone()
        } else {
            -c
        }
    }

    fn set(&mut self, i: usize, j: usize, value: Mat) {
        let k = index_of(7, (1u16 << i) | (1u16 << j));
        self.coeffs[k] = if i < j { value } else { -value };
    }

    /// `F(u, v) = Σ_{i<j} F_ij (uᵢv_j − u_jvᵢ)`.
    pub fn evaluate(&self, u: &[C], v: &[C]) -> Mat {
        let mut out = Mat::zeros(self.rank, self.rank);
        for (k, &mask) in multi_indices(7, 2).iter().enumerate() {
            let idx: Vec<usize> = mask_indices(mask).collect();
            let (i, j) = (idx[0], idx[1]);
            let w = u[i] * v[j] - u[j] * v[i];
            if w != ZERO {
                out += &self.coeffs[k] * w;
            }
        }
        out
    }

    /// Real 2-forms `Re F_rc` and `Im F_rc` for every matrix entry.
    pub fn real_components(&self) -> Vec<KForm> {
        let mut out = Vec::with_capacity(2 * self.rank * self.rank);
        for r in 0..self.rank {
            for c in 0..self.rank {
                for part in [0, 1] {
                    let coeffs = self
                        .coeffs
                        .iter()
                        .map(|m| {
                            if part == 0 {
                                m[(r, c)].re
                            } else {
                                m[(r, c)].im
                            }
                        })
                        .collect();
                    out.push(KForm::new(7, 2, coeffs).expect("shape"));
                }
            }
        }
        out
    }

    /// `u F u*`.
    pub fn conjugated(&self, u: &Mat) -> Self {
        let ua = u.adjoint();
        Self {
            rank: self.rank,
            coeffs: self.coeffs.iter().map(|c| u * c * &ua).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|m| m.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest deviation from anti-Hermitian in the bundle indices.
    pub fn hermitian_defect(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|m| {
                (m + m.adjoint())
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    pub fn distance(&self, other: &BundleForm) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .flat_map(|(a, b)| (a - b).iter().map(|z| z.norm()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }
}

/// Test connections on the flat torus.
#[derive(Clone, Debug, PartialEq)]
pub enum ConnectionFamily {
    /// `A = 0`.
    Flat,
    /// Constant abelian curvature `i·λ` with `λ` the chosen element of the
    /// computed Λ²₁₄ basis of `ρ_std`.
    Const14 { index: usize },
    /// Constant abelian curvature `i·(ρ⌟v)`.
    Const7 { vector: [f64; 7] },
    /// Constant abelian curvature `i·(λ_index + s·ρ⌟v)`.
    Mixed {
        index: usize,
        vector: [f64; 7],
        s: f64,
    },
    /// Rank-2 su(2) potential `A_k = φ_k(p) iσ_k/2` for `k < 3`.
    Su2Wave { amplitude: f64 },
}

impl ConnectionFamily {
    pub fn key(&self) -> &'static str {
        match self {
            ConnectionFamily::Flat => "flat",
            ConnectionFamily::Const14 { .. } => "const-14",
            ConnectionFamily::Const7 { .. } => "const-7",
            ConnectionFamily::Mixed { .. } => "mixed",
            ConnectionFamily::Su2Wave { .. } => "su2-wave",
        }
    }
}

impl fmt::Display for ConnectionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConnectionFamily::Flat => write!(f, "flat"),
            ConnectionFamily::Const14 { index } => write!(f, "const-14(index={index})"),
            ConnectionFamily::Const7 { vector } => write!(f, "const-7(vector={vector:?})"),
            ConnectionFamily::Mixed { index, vector, s } => {
                write!(f, "mixed(index={index}, vector={vector:?}, s={s})")
            }
            ConnectionFamily::Su2Wave { amplitude } => write!(f, "su2-wave(amplitude={amplitude})"),
        }
    }
}

/// Default `v` for the Λ²₇ families: the first basis vector.
pub fn default_seven_vector() -> [f64; 7] {
    unit(0)
}

/// A connection with closed-form potential and curvature.
#[derive(Clone, Debug)]
pub struct ConnectionData {
    pub family: ConnectionFamily,
    pub rank: usize,
    /// Real curvature 2-form `f` of the abelian families (`F = i·f`).
    form: Option<KForm>,
    /// Constant gauge transformation applied to everything.
    gauge: Mat,
}

fn su2_generator(k: usize) -> Mat {
    let half = C::new(0.5, 0.0);
    let m = match k {
        0 => [[ZERO, I], [I, ZERO]],
        1 => [[ZERO, half * 2.0], [-half * 2.0, ZERO]],
        _ => [[I, ZERO], [ZERO, -I]],
    };
    Mat::from_fn(2, 2, |r, c| m[r][c] * half)
}

impl ConnectionData {
    pub fn new(family: ConnectionFamily) -> Result<Self> {
        let p = G2Point::standard();
        let seven = |v: &[f64; 7]| p.rho().contract(v);
        let form = match &family {
            ConnectionFamily::Flat | ConnectionFamily::Su2Wave { .. } => None,
            ConnectionFamily::Const14 { index } => Some(fourteen(&p, *index)),
            ConnectionFamily::Const7 { vector } => Some(seven(vector)?),
            ConnectionFamily::Mixed { index, vector, s } => {
                Some(fourteen(&p, *index).axpy(*s, &seven(vector)?)?)
            }
        };
        let rank = if matches!(family, ConnectionFamily::Su2Wave { .. }) {
            2
        } else {
            1
        };
        Ok(Self {
            family,
            rank,
            form,
            gauge: Mat::identity(rank, rank),
        })
    }

    /// The real 2-form of an abelian constant family.
    pub fn constant_form(&self) -> Option<&KForm> {
        self.form.as_ref()
    }

    /// Same connection after the constant gauge transformation `u` (unitary).
    pub fn gauge_transformed(&self, u: &Mat) -> Self {
        let mut out = self.clone();
        out.gauge = u * &self.gauge;
        out
    }

    fn su2_profile(amplitude: f64, p: &Point) -> ([f64; 3], [[f64; 3]; 7]) {
        let a = amplitude;
        let phi = [
            a * (2.0 * PI * p[1]).sin(),
            a * (2.0 * PI * p[2]).cos(),
            a * (2.0 * PI * p[0]).sin(),
        ];
        let mut d = [[0.0; 3]; 7];
        d[1][0] = 2.0 * PI * a * (2.0 * PI * p[1]).cos();
        d[2][1] = -2.0 * PI * a * (2.0 * PI * p[2]).sin();
        d[0][2] = 2.0 * PI * a * (2.0 * PI * p[0]).cos();
        (phi, d)
    }

    /// Potential components `A_0, …, A_6` at `p`.
    pub fn potential(&self, p: &Point) -> Vec<Mat> {
        let raw: Vec<Mat> = match (&self.family, &self.form) {
            (ConnectionFamily::Su2Wave { amplitude }, _) => {
                let (phi, _) = Self::su2_profile(*amplitude, p);
                (0..7)
                    .map(|k| {
                        if k < 3 {
                            su2_generator(k) * C::new(phi[k], 0.0)
                        } else {
                            Mat::zeros(2, 2)
                        }
                    })
                    .collect()
            }
            (_, Some(f)) => (0..7)
                .map(|j| {
                    let s: f64 = (0..7).map(|i| f.component(&[i, j]) * p[i]).sum();
                    Mat::from_element(1, 1, I * (0.5 * s))
                })
                .collect(),
            _ => vec![Mat::zeros(self.rank, self.rank); 7],
        };
        let ua = self.gauge.adjoint();
        raw.iter().map(|a| &self.gauge * a * &ua).collect()
    }

    /// Closed-form curvature.
    pub fn curvature(&self, p: &Point) -> BundleForm {
        let raw = match (&self.family, &self.form) {
            (ConnectionFamily::Su2Wave { amplitude }, _) => {
                let (phi, d) = Self::su2_profile(*amplitude, p);
                let t: Vec<Mat> = (0..3).map(su2_generator).collect();
                let mut f = BundleForm::zero(2);
                for i in 0..7 {
                    for j in (i + 1)..7 {
                        let mut m = Mat::zeros(2, 2);
                        if j < 3 {
                            m += &t[j] * C::new(d[i][j], 0.0);
                        }
                        if i < 3 {
                            m -= &t[i] * C::new(d[j][i], 0.0);
                        }
                        if i < 3 && j < 3 {
                            m += (&t[i] * &t[j] - &t[j] * &t[i]) * C::new(phi[i] * phi[j], 0.0);
                        }
                        f.set(i, j, m);
                    }
                }
                f
            }
            (_, Some(f)) => BundleForm::abelian(f),
            _ => BundleForm::zero(self.rank),
        };
        raw.conjugated(&self.gauge)
    }

    /// `dA + A∧A` with central differences of step `h`.
    pub fn curvature_differenced(&self, p: &Point, h: f64) -> BundleForm {
        let a = self.potential(p);
        let shifted = |i: usize, s: f64| -> Vec<Mat> {
            let mut q = *p;
            q[i] += s;
            self.potential(&q)
        };
        let da: Vec<Vec<Mat>> = (0..7)
            .map(|i| {
                let (pl, mi) = (shifted(i, h), shifted(i, -h));
                (0..7)
                    .map(|j| (&pl[j] - &mi[j]) * C::new(0.5 / h, 0.0))
                    .collect()
            })
            .collect();
        let mut f = BundleForm::zero(self.rank);
        for i in 0..7 {
            for j in (i + 1)..7 {
                let m = &da[i][j] - &da[j][i] + &a[i] * &a[j] - &a[j] * &a[i];
                f.set(i, j, m);
            }
        }
        f
    }
}

fn fourteen(p: &G2Point, index: usize) -> KForm {
    let basis = p.lambda14_basis();
    basis[index % basis.len()].clone()
}

/// Λ²₇ part of the curvature at `m`: `sqrt(Σ ‖(F_rc)₇‖²)` over real and
/// imaginary parts of every matrix entry, in the metric of the field.
pub fn instanton_residual_at(
    field: &StructureField,
    conn: &ConnectionData,
    m: &Point,
) -> Result<f64> {
    let p = field.structure_at(m)?;
    let f = conn.curvature(m);
    let mut total = 0.0;
    for c in f.real_components() {
        let (a7, _) = project_lambda2(&p, &c)?;
        total += a7.norm(p.metric())?.powi(2);
    }
    Ok(total.sqrt())
}

/// `(max residual ≤ τ, max residual)` over the sampled base points.
pub fn is_g2_instanton(
    field: &StructureField,
    conn: &ConnectionData,
    samples: &[Point],
    tau: f64,
) -> Result<(bool, f64)> {
    let mut worst: f64 = 0.0;
    for m in samples {
        worst = worst.max(instanton_residual_at(field, conn, m)?);
    }
    Ok((worst <= tau, worst))
}

/// Where the curvature used on the twistor space comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CurvatureSource {
    Analytic,
    Differenced(f64),
}

fn curvature_from(conn: &ConnectionData, m: &Point, source: CurvatureSource) -> BundleForm {
    match source {
        CurvatureSource::Analytic => conn.curvature(m),
        CurvatureSource::Differenced(h) => conn.curvature_differenced(m, h),
    }
}

/// State needed to differentiate along `B^{0,1}` near one twistor point.
pub struct CrDolbeaultContext<'a> {
    pub field: &'a StructureField,
    pub point: TwistorPoint,
    pub splitting: CrSplitting,
    pub h: f64,
}

impl<'a> CrDolbeaultContext<'a> {
    pub fn new(field: &'a StructureField, point: TwistorPoint, h: f64) -> Self {
        let splitting = crate::twistor::cr_splitting(&point);
        Self {
            field,
            point,
            splitting,
            h,
        }
    }

    /// Ambient basis `b̄₀, b̄₁, b̄₂` of `B^{0,1}`.
    pub fn antiholomorphic(&self) -> [CVec; 3] {
        self.point.distribution_basis(Polarity::Antiholomorphic)
    }

    fn fields(&self) -> impl Fn(&Ambient) -> Vec<CVec> + '_ {
        distribution_fields(
            self.field,
            &self.point,
            Polarity::Antiholomorphic,
            Extension::Adapted,
        )
    }
}

fn displaced(q: &Ambient, d: &Ambient, s: f64) -> Ambient {
    std::array::from_fn(|i| q[i] + s * d[i])
}

/// Central-difference derivative of `f` along a complex ambient direction.
fn derivative(f: &dyn Fn(&Ambient) -> C, q: &Ambient, dir: &CVec, h: f64) -> C {
    let mut out = ZERO;
    for (part, factor) in [(real_part(dir), C::new(1.0, 0.0)), (imag_part(dir), I)] {
        if part.iter().all(|c| *c == 0.0) {
            continue;
        }
        out += (f(&displaced(q, &part, h)) - f(&displaced(q, &part, -h))) * (0.5 / h) * factor;
    }
    out
}

/// `(∂̄_B f)(b̄ₐ)`: derivative of `f` along each basis vector of `B^{0,1}`.
pub fn cr_dolbeault_on_functions(ctx: &CrDolbeaultContext, f: &dyn Fn(&Ambient) -> C) -> [C; 3] {
    let q = ctx.point.ambient();
    let b = ctx.antiholomorphic();
    std::array::from_fn(|a| derivative(f, &q, &b[a], ctx.h))
}

/// Projection of a complex ambient vector onto `B^{0,1}` at the context point.
fn project_b01(ctx: &CrDolbeaultContext, v: &CVec) -> CVec {
    let c = ctx.point.decompose(v).b01;
    let b = ctx.antiholomorphic();
    std::array::from_fn(|i| (0..3).map(|j| c[j] * b[j][i]).sum())
}

/// `(∂̄_B ∂̄_B f)(b̄ₐ, b̄_b) = Zₐ(Z_b f) − Z_b(Zₐ f) − (Π[Zₐ, Z_b]) f`, with
/// `Π` the projection to `B^{0,1}`.
pub fn dbar_squared_on_functions(
    ctx: &CrDolbeaultContext,
    f: &dyn Fn(&Ambient) -> C,
) -> [[C; 3]; 3] {
    let q = ctx.point.ambient();
    let h = ctx.h;
    let fields = ctx.fields();
    let z = &fields;
    let first = |b: usize| move |p: &Ambient| derivative(f, p, &z(p)[b], h);
    let brackets = bracket_family(z, &q, h);
    let zq = z(&q);
    let mut out = [[ZERO; 3]; 3];
    for a in 0..3 {
        for b in (a + 1)..3 {
            let ab = derivative(&first(b), &q, &zq[a], h);
            let ba = derivative(&first(a), &q, &zq[b], h);
            let br = derivative(f, &q, &project_b01(ctx, &brackets[a][b]), h);
            out[a][b] = ab - ba - br;
            out[b][a] = -out[a][b];
        }
    }
    out
}

/// Largest entry of `∂̄²f` over the pairs of `B^{0,1}`.
pub fn dbar_squared_residual(ctx: &CrDolbeaultContext, f: &dyn Fn(&Ambient) -> C) -> f64 {
    let d = dbar_squared_on_functions(ctx, f);
    d.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
}

fn base(v: &CVec) -> [C; 7] {
    std::array::from_fn(|i| v[i])
}

/// `∂̄_E² s` on `B^{0,1}` pairs for a rank-one connection and a scalar section,
/// built from the operator `∂̄_E s(Z) = Z s + A(π_*Z) s`.
pub fn dbar_e_squared_abelian(
    ctx: &CrDolbeaultContext,
    conn: &ConnectionData,
    s: &dyn Fn(&Ambient) -> C,
) -> [[C; 3]; 3] {
    let q = ctx.point.ambient();
    let h = ctx.h;
    let fields = ctx.fields();
    let z = &fields;
    let pot = |p: &Ambient, v: &CVec| -> C {
        let m: Point = std::array::from_fn(|i| p[i]);
        let a = conn.potential(&m);
        (0..7).map(|i| a[i][(0, 0)] * v[i]).sum()
    };
    let de = |p: &Ambient, v: &CVec| derivative(s, p, v, h) + pot(p, v) * s(p);
    let along = |b: usize| move |p: &Ambient| de(p, &z(p)[b]);
    let brackets = bracket_family(z, &q, h);
    let zq = z(&q);
    let mut out = [[ZERO; 3]; 3];
    for a in 0..3 {
        for b in (a + 1)..3 {
            let ab = derivative(&along(b), &q, &zq[a], h) + pot(&q, &zq[a]) * de(&q, &zq[b]);
            let ba = derivative(&along(a), &q, &zq[b], h) + pot(&q, &zq[b]) * de(&q, &zq[a]);
            let br = de(&q, &project_b01(ctx, &brackets[a][b]));
            out[a][b] = ab - ba - br;
            out[b][a] = -out[a][b];
        }
    }
    out
}

/// `(π*F)(b̄ₐ, b̄_b)` through the projection of the ambient `B^{0,1}` basis.
pub fn pulled_back_pairs(
    f: &BundleForm,
    tp: &TwistorPoint,
    polarity: Polarity,
) -> Vec<((usize, usize), Mat)> {
    let b = tp.distribution_basis(polarity);
    let mut out = Vec::new();
    for i in 0..3 {
        for j in (i + 1)..3 {
            out.push(((i, j), f.evaluate(&base(&b[i]), &base(&b[j]))));
        }
    }
    out
}

/// Type of the pulled-back curvature at one twistor point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrReport {
    /// `sqrt(4 Σ_{a<b} ‖F(bₐ, b_b)‖² + ‖F(b̄ₐ, b̄_b)‖²)`, the Euclidean norm of
    /// the `(2,0)+(0,2)` part of `F|_{x⊥}` in a unitary frame.
    pub residual: f64,
    /// `max_{a<b} ‖F(b̄ₐ, b̄_b)‖` (Frobenius).
    pub max_pair: f64,
}

/// `(0,2)`-part of the pulled-back curvature on `B^{0,1}`.
pub fn cr_holomorphicity_report(
    conn: &ConnectionData,
    tp: &TwistorPoint,
    source: CurvatureSource,
) -> CrReport {
    let f = curvature_from(conn, &tp.m, source);
    let mut total = 0.0;
    let mut max_pair: f64 = 0.0;
    for polarity in [Polarity::Antiholomorphic, Polarity::Holomorphic] {
        for (_, v) in pulled_back_pairs(&f, tp, polarity) {
            let n = v.norm();
            total += 4.0 * n * n;
            if polarity == Polarity::Antiholomorphic {
                max_pair = max_pair.max(n);
            }
        }
    }
    CrReport {
        residual: total.sqrt(),
        max_pair,
    }
}

pub fn cr_holomorphicity_residual(
    conn: &ConnectionData,
    tp: &TwistorPoint,
    source: CurvatureSource,
) -> f64 {
    cr_holomorphicity_report(conn, tp, source).residual
}

/// Same quantity through the Hodge decomposition of `F(m)|_{x⊥}`.
pub fn cr_residual_via_hodge(
    conn: &ConnectionData,
    tp: &TwistorPoint,
    source: CurvatureSource,
) -> Result<f64> {
    let f = curvature_from(conn, &tp.m, source);
    let mut total = 0.0;
    for c in f.real_components() {
        total += hodge_type_on_complement(&tp.structure, &c, &tp.x)?
            .p20_02_norm
            .powi(2);
    }
    Ok(total.sqrt())
}

/// Maximum CR residual of `i(λ + s·ρ⌟v)` over the sampled twistor points, for
/// each `s`.
pub fn equivalence_sweep(
    field: &StructureField,
    index: usize,
    vector: [f64; 7],
    values: &[f64],
    points: &[TwistorPoint],
) -> Result<Vec<f64>> {
    let _ = field;
    values
        .iter()
        .map(|&s| {
            let conn = ConnectionData::new(ConnectionFamily::Mixed { index, vector, s })?;
            Ok(points
                .iter()
                .map(|tp| cr_holomorphicity_residual(&conn, tp, CurvatureSource::Analytic))
                .fold(0.0, f64::max))
        })
        .collect()
}
