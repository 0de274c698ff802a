//! The CR twistor space `(S⁶M, B, I)` in ambient coordinates.
//!
//! A point of the sphere bundle is `(m, x) ∈ ℝ⁷ × ℝ⁷` with `|x|_{g(m)} = 1`;
//! tangent vectors are ambient 14-vectors `(base, fiber)`. The horizontal lift
//! of `X` at `(m, x)` is `(X, −Γ(m)(X, x))` and vertical vectors are `(0, ξ)`
//! with `ξ ∈ x⊥`.

use nalgebra::{Complex, DMatrix};

use crate::error::{GeometryError, Result};
use crate::exterior::{mask_indices, multi_indices, KForm, LinearMap, MetricTensor};
use crate::field::{
    christoffel_apply, christoffel_at, Christoffel, Curvature, Point, StructureField,
};
use crate::g2::{hodge_decompose, su3_structure_with, G2Point, Su3Frame};

pub type C = Complex<f64>;
pub type Ambient = [f64; 14];
pub type CVec = [C; 14];

const ZERO: C = Complex { re: 0.0, im: 0.0 };
const I: C = Complex { re: 0.0, im: 1.0 };

pub fn ambient(m: &Point, x: &[f64; 7]) -> Ambient {
    let mut q = [0.0; 14];
    q[..7].copy_from_slice(m);
    q[7..].copy_from_slice(x);
    q
}

pub fn split_ambient(q: &Ambient) -> (Point, [f64; 7]) {
    let mut m = [0.0; 7];
    let mut x = [0.0; 7];
    m.copy_from_slice(&q[..7]);
    x.copy_from_slice(&q[7..]);
    (m, x)
}

pub fn to_complex(v: &Ambient) -> CVec {
    std::array::from_fn(|i| C::new(v[i], 0.0))
}

pub fn real_part(v: &CVec) -> Ambient {
    std::array::from_fn(|i| v[i].re)
}

pub fn imag_part(v: &CVec) -> Ambient {
    std::array::from_fn(|i| v[i].im)
}

pub fn conj(v: &CVec) -> CVec {
    std::array::from_fn(|i| v[i].conj())
}

fn cdot(g: &MetricTensor, a: &[C], b: &[f64]) -> C {
    let re: Vec<f64> = a.iter().map(|c| c.re).collect();
    let im: Vec<f64> = a.iter().map(|c| c.im).collect();
    C::new(g.dot(&re, b), g.dot(&im, b))
}

/// `u⋆v = g⁻¹ ρ(u, v, ·)`.
pub fn star_product(g: &MetricTensor, rho: &KForm, u: &[f64], v: &[f64]) -> [f64; 7] {
    let w = rho
        .contract(u)
        .and_then(|a| a.contract(v))
        .expect("7-vectors");
    let inv = g.inverse();
    std::array::from_fn(|i| (0..7).map(|j| inv[(i, j)] * w.coeffs()[j]).sum())
}

/// Choices that make the adapted frame smooth near a base point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameChoice {
    /// Coordinate dropped when completing `x` to a basis.
    pub drop: usize,
    /// Complement vectors seeding the three complex lines.
    pub order: [usize; 3],
}

fn normalized(g: &MetricTensor, v: &[f64]) -> [f64; 7] {
    let n = g.norm(v);
    std::array::from_fn(|i| v[i] / n)
}

fn residual(g: &MetricTensor, found: &[[f64; 7]], v: &[f64]) -> [f64; 7] {
    let mut w: [f64; 7] = std::array::from_fn(|i| v[i]);
    for u in found {
        let c = g.dot(u, &w);
        w.iter_mut().zip(u).for_each(|(wi, ui)| *wi -= c * ui);
    }
    w
}

/// `ũ₀, Iũ₀, ũ₂, Iũ₂, ũ₄, Iũ₄`: a unitary frame of `x⊥` for `I = x̂⋆`.
pub fn adapted_frame(
    g: &MetricTensor,
    rho: &KForm,
    xhat: &[f64; 7],
    choice: FrameChoice,
) -> [[f64; 7]; 6] {
    let comp = crate::g2::complement_basis(g, xhat, choice.drop);
    let mut found: Vec<[f64; 7]> = vec![*xhat];
    for &c in &choice.order {
        let seed: Vec<f64> = comp.column(c).iter().copied().collect();
        let u = normalized(g, &residual(g, &found, &seed));
        let iu = star_product(g, rho, xhat, &u);
        found.push(u);
        found.push(iu);
    }
    std::array::from_fn(|i| found[i + 1])
}

/// Picks the frame choice at a base point: greedy maximal residuals.
pub fn choose_frame(g: &MetricTensor, rho: &KForm, xhat: &[f64; 7]) -> FrameChoice {
    let drop = crate::g2::default_dropped_index(xhat);
    let comp = crate::g2::complement_basis(g, xhat, drop);
    let mut found: Vec<[f64; 7]> = vec![*xhat];
    let mut order = [0usize; 3];
    let mut used = [false; 6];
    for slot in order.iter_mut() {
        let mut best = 0;
        let mut best_norm = -1.0;
        for c in (0..6).filter(|&c| !used[c]) {
            let seed: Vec<f64> = comp.column(c).iter().copied().collect();
            let n = g.norm(&residual(g, &found, &seed));
            if n > best_norm {
                best = c;
                best_norm = n;
            }
        }
        used[best] = true;
        *slot = best;
        let seed: Vec<f64> = comp.column(best).iter().copied().collect();
        let u = normalized(g, &residual(g, &found, &seed));
        let iu = star_product(g, rho, xhat, &u);
        found.push(u);
        found.push(iu);
    }
    FrameChoice { drop, order }
}

/// Geometry of the field at an ambient point.
#[derive(Clone, Debug)]
pub struct LocalFrame {
    pub m: Point,
    /// Raw fiber coordinate (not renormalized).
    pub x: [f64; 7],
    pub xhat: [f64; 7],
    pub g: MetricTensor,
    pub gamma: Christoffel,
    pub rho: KForm,
}

impl LocalFrame {
    pub fn at(field: &StructureField, q: &Ambient) -> Self {
        let (m, x) = split_ambient(q);
        let g = field.metric_at(&m);
        let gamma = christoffel_at(field, &m, field.step());
        let rho = field.rho_at(&m);
        let xhat = normalized(&g, &x);
        Self {
            m,
            x,
            xhat,
            g,
            gamma,
            rho,
        }
    }

    /// Horizontal lift `(v, −Γ(v, x))`.
    pub fn lift(&self, v: &[f64]) -> Ambient {
        let c = christoffel_apply(&self.gamma, v, &self.x);
        let mut out = [0.0; 14];
        out[..7].copy_from_slice(&v[..7]);
        for k in 0..7 {
            out[7 + k] = -c[k];
        }
        out
    }

    pub fn lift_complex(&self, v: &[C]) -> CVec {
        let re: Vec<f64> = v.iter().map(|c| c.re).collect();
        let im: Vec<f64> = v.iter().map(|c| c.im).collect();
        let a = self.lift(&re);
        let b = self.lift(&im);
        std::array::from_fn(|i| C::new(a[i], b[i]))
    }

    /// Vertical projection of an ambient vector, `fiber + Γ(base, x)`.
    pub fn vertical_part(&self, v: &CVec) -> [C; 7] {
        let re: Vec<f64> = v[..7].iter().map(|c| c.re).collect();
        let im: Vec<f64> = v[..7].iter().map(|c| c.im).collect();
        let a = christoffel_apply(&self.gamma, &re, &self.x);
        let b = christoffel_apply(&self.gamma, &im, &self.x);
        std::array::from_fn(|k| v[7 + k] + C::new(a[k], b[k]))
    }

    pub fn adapted(&self, choice: FrameChoice) -> [[f64; 7]; 6] {
        adapted_frame(&self.g, &self.rho, &self.xhat, choice)
    }
}

/// Type of the complex distribution used for brackets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    /// `B^{0,1}`, spanned by `(ũ + iIũ)/2`.
    Antiholomorphic,
    /// `B^{1,0}`, spanned by `(ũ − iIũ)/2`.
    Holomorphic,
}

impl Polarity {
    fn sign(self) -> f64 {
        match self {
            Polarity::Antiholomorphic => 1.0,
            Polarity::Holomorphic => -1.0,
        }
    }
}

/// Complex basis vectors `(ũ_{2a} ± iũ_{2a+1})/2` of `x⊥ ⊗ ℂ`.
pub fn complex_frame(frame: &[[f64; 7]; 6], polarity: Polarity) -> [[C; 7]; 3] {
    let s = polarity.sign();
    std::array::from_fn(|a| {
        std::array::from_fn(|i| C::new(0.5 * frame[2 * a][i], 0.5 * s * frame[2 * a + 1][i]))
    })
}

/// A point of the twistor space with its splittings.
#[derive(Clone, Debug)]
pub struct TwistorPoint {
    pub m: Point,
    /// Unit vector for `g(m)`.
    pub x: [f64; 7],
    pub choice: FrameChoice,
    pub local: LocalFrame,
    /// Adapted unitary frame of `x⊥`; `frame[2a+1] = x⋆frame[2a]`.
    pub frame: [[f64; 7]; 6],
    pub structure: G2Point,
    pub su3: Su3Frame,
}

/// Builds the twistor point over `m` in the direction of `x` (normalized here).
pub fn twistor_point(field: &StructureField, m: &Point, x: &[f64]) -> Result<TwistorPoint> {
    if x.len() != 7 {
        return Err(GeometryError::DimensionMismatch {
            expected: 7,
            got: x.len(),
        });
    }
    if x.iter().all(|c| *c == 0.0) {
        return Err(GeometryError::ZeroVector);
    }
    let structure = field.structure_at(m)?;
    let g = structure.metric();
    let n = g.norm(x);
    if n == 0.0 || !n.is_finite() {
        return Err(GeometryError::ZeroVector);
    }
    let x: [f64; 7] = std::array::from_fn(|i| x[i] / n);
    let local = LocalFrame::at(field, &ambient(m, &x));
    let choice = choose_frame(&local.g, &local.rho, &local.xhat);
    let frame = local.adapted(choice);
    let su3 = su3_structure_with(&structure, &local.xhat, choice.drop)?;
    Ok(TwistorPoint {
        m: *m,
        x,
        choice,
        local,
        frame,
        structure,
        su3,
    })
}

impl TwistorPoint {
    pub fn ambient(&self) -> Ambient {
        ambient(&self.m, &self.x)
    }

    pub fn metric(&self) -> &MetricTensor {
        &self.local.g
    }

    /// The section `θ`: horizontal lift of `x`.
    pub fn theta(&self) -> Ambient {
        self.local.lift(&self.x)
    }

    /// Lifts of `x, ũ₀, …, ũ₅`.
    pub fn horizontal_basis(&self) -> [Ambient; 7] {
        std::array::from_fn(|i| {
            if i == 0 {
                self.theta()
            } else {
                self.local.lift(&self.frame[i - 1])
            }
        })
    }

    pub fn b_basis(&self) -> [Ambient; 6] {
        std::array::from_fn(|i| self.local.lift(&self.frame[i]))
    }

    pub fn vertical_basis(&self) -> [Ambient; 6] {
        std::array::from_fn(|i| {
            let mut v = [0.0; 14];
            v[7..].copy_from_slice(&self.frame[i]);
            v
        })
    }

    /// Complex basis of `B^{0,1}` or `B^{1,0}` as ambient vectors.
    pub fn distribution_basis(&self, polarity: Polarity) -> [CVec; 3] {
        let w = complex_frame(&self.frame, polarity);
        std::array::from_fn(|a| self.local.lift_complex(&w[a]))
    }

    /// `(base, vertical)` parts of a real ambient vector.
    pub fn split(&self, v: &Ambient) -> ([f64; 7], [f64; 7]) {
        let vert = self.local.vertical_part(&to_complex(v));
        (
            std::array::from_fn(|i| v[i]),
            std::array::from_fn(|i| vert[i].re),
        )
    }

    /// Product metric: `g` on horizontal parts, `g` on vertical parts.
    pub fn inner(&self, u: &Ambient, v: &Ambient) -> f64 {
        let (ub, uv) = self.split(u);
        let (vb, vv) = self.split(v);
        self.local.g.dot(&ub, &vb) + self.local.g.dot(&uv, &vv)
    }

    /// Components of a complex ambient vector in the frame
    /// `{θ, B^{1,0}, B^{0,1}, vertical, normal}`.
    pub fn decompose(&self, v: &CVec) -> FrameComponents {
        let g = &self.local.g;
        let base = &v[..7];
        let theta = cdot(g, base, &self.local.xhat);
        let beta: [C; 6] = std::array::from_fn(|k| cdot(g, base, &self.frame[k]));
        let b10 = std::array::from_fn(|j| beta[2 * j] + I * beta[2 * j + 1]);
        let b01 = std::array::from_fn(|j| beta[2 * j] - I * beta[2 * j + 1]);
        let vert = self.local.vertical_part(v);
        let vertical = std::array::from_fn(|k| cdot(g, &vert, &self.frame[k]));
        let normal = cdot(g, &vert, &self.local.xhat);
        FrameComponents {
            theta,
            b10,
            b01,
            vertical,
            normal,
        }
    }
}

/// Coordinates of a complex tangent vector at a twistor point. The `b10` and
/// `b01` entries are coefficients on `(ũ ∓ iIũ)/2`, which have norm `1/√2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameComponents {
    pub theta: C,
    pub b10: [C; 3],
    pub b01: [C; 3],
    pub vertical: [C; 6],
    pub normal: C,
}

fn sq(c: &[C]) -> f64 {
    c.iter().map(|z| z.norm_sqr()).sum()
}

impl FrameComponents {
    pub fn vertical_norm(&self) -> f64 {
        sq(&self.vertical).sqrt()
    }

    pub fn b10_norm(&self) -> f64 {
        (0.5 * sq(&self.b10)).sqrt()
    }

    pub fn b01_norm(&self) -> f64 {
        (0.5 * sq(&self.b01)).sqrt()
    }

    /// Norm of everything outside the given distribution (the normal
    /// component of the sphere bundle is excluded).
    pub fn outside(&self, polarity: Polarity) -> f64 {
        let wrong = match polarity {
            Polarity::Antiholomorphic => &self.b10,
            Polarity::Holomorphic => &self.b01,
        };
        (self.theta.norm_sqr() + 0.5 * sq(wrong) + sq(&self.vertical)).sqrt()
    }
}

/// CR structure on `B` in the B basis of a twistor point.
#[derive(Clone, Debug)]
pub struct CrSplitting {
    pub i_b: LinearMap,
    /// Coefficients of `(b − iI_B b)/2` on the B basis.
    pub b10: [[C; 6]; 3],
    pub b01: [[C; 6]; 3],
}

/// `I_B` transported from the SU(3) structure on `x⊥` through `B ≅ x⊥`.
pub fn cr_splitting(tp: &TwistorPoint) -> CrSplitting {
    let g = tp.metric();
    // t[(i, b)]: component of B basis vector b along su3 basis vector i
    let mut t = DMatrix::zeros(6, 6);
    for b in 0..6 {
        for i in 0..6 {
            let col: Vec<f64> = tp.su3.basis.column(i).iter().copied().collect();
            t[(i, b)] = g.dot(&col, &tp.frame[b]);
        }
    }
    let i_b = t.transpose() * tp.su3.complex_structure.matrix() * &t;
    let make = |sign: f64| -> [[C; 6]; 3] {
        std::array::from_fn(|a| {
            let v = 2 * a;
            std::array::from_fn(|k| {
                let e = if k == v { 1.0 } else { 0.0 };
                C::new(0.5 * e, -0.5 * sign * i_b[(k, v)])
            })
        })
    };
    let b10 = make(1.0);
    let b01 = make(-1.0);
    CrSplitting {
        i_b: LinearMap(i_b),
        b10,
        b01,
    }
}

/// Second admissible extension: `Z'ₐ(q) = Σ_b U_ab(q) Z_b(q)` with `U(q₀) = Id`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extension {
    Adapted,
    Twisted,
}

fn twist_matrix(q0: &Ambient, q: &Ambient) -> [[C; 3]; 3] {
    let s = [
        [C::new(0.2, 0.1), C::new(-0.4, 0.0), C::new(0.0, 0.3)],
        [C::new(0.1, -0.5), C::new(0.3, 0.2), C::new(0.7, 0.0)],
        [C::new(-0.2, 0.0), C::new(0.0, -0.6), C::new(0.4, 0.4)],
    ];
    let t: f64 = (0..14)
        .map(|k| (0.3 + 0.1 * k as f64).sin() * (q[k] - q0[k]))
        .sum();
    std::array::from_fn(|a| {
        std::array::from_fn(|b| if a == b { C::new(1.0, 0.0) } else { ZERO } + s[a][b] * t)
    })
}

/// The three distribution fields near a twistor point, with the frame choice frozen.
pub fn distribution_fields<'a>(
    field: &'a StructureField,
    tp: &'a TwistorPoint,
    polarity: Polarity,
    extension: Extension,
) -> impl Fn(&Ambient) -> Vec<CVec> + 'a {
    let q0 = tp.ambient();
    move |q: &Ambient| {
        let local = LocalFrame::at(field, q);
        let w = complex_frame(&local.adapted(tp.choice), polarity);
        let z: Vec<CVec> = w.iter().map(|v| local.lift_complex(v)).collect();
        match extension {
            Extension::Adapted => z,
            Extension::Twisted => {
                let u = twist_matrix(&q0, q);
                (0..3)
                    .map(|a| std::array::from_fn(|i| (0..3).map(|b| u[a][b] * z[b][i]).sum()))
                    .collect()
            }
        }
    }
}

fn displaced(q: &Ambient, d: &Ambient, s: f64) -> Ambient {
    std::array::from_fn(|i| q[i] + s * d[i])
}

/// Central-difference derivative of every field in the family along a complex direction.
fn directional(eval: &dyn Fn(&Ambient) -> Vec<CVec>, q: &Ambient, dir: &CVec, h: f64) -> Vec<CVec> {
    let mut out: Option<Vec<CVec>> = None;
    for (part, factor) in [(real_part(dir), C::new(1.0, 0.0)), (imag_part(dir), I)] {
        if part.iter().all(|c| *c == 0.0) {
            continue;
        }
        let plus = eval(&displaced(q, &part, h));
        let minus = eval(&displaced(q, &part, -h));
        let d: Vec<CVec> = plus
            .iter()
            .zip(&minus)
            .map(|(p, m)| std::array::from_fn(|i| (p[i] - m[i]) * (0.5 / h) * factor))
            .collect();
        out = Some(match out {
            None => d,
            Some(acc) => acc
                .iter()
                .zip(&d)
                .map(|(a, b)| std::array::from_fn(|i| a[i] + b[i]))
                .collect(),
        });
    }
    out.unwrap_or_else(|| vec![[ZERO; 14]; eval(q).len()])
}

/// All brackets `[Vₐ, V_b] = D_{Vₐ}V_b − D_{V_b}Vₐ` of a family of complex fields.
pub fn bracket_family(eval: &dyn Fn(&Ambient) -> Vec<CVec>, q: &Ambient, h: f64) -> Vec<Vec<CVec>> {
    let values = eval(q);
    let derivs: Vec<Vec<CVec>> = values.iter().map(|v| directional(eval, q, v, h)).collect();
    let n = values.len();
    (0..n)
        .map(|a| {
            (0..n)
                .map(|b| std::array::from_fn(|i| derivs[a][b][i] - derivs[b][a][i]))
                .collect()
        })
        .collect()
}

/// Extension of a tangent vector at `tp`: constant base part with the
/// Γ-correction, vertical part held fixed and projected to `x'⊥`.
pub fn extend_vector<'a>(
    field: &'a StructureField,
    tp: &'a TwistorPoint,
    v: CVec,
) -> impl Fn(&Ambient) -> CVec + 'a {
    let base: [C; 7] = std::array::from_fn(|i| v[i]);
    let xi = tp.local.vertical_part(&v);
    move |q: &Ambient| {
        let local = LocalFrame::at(field, q);
        let mut out = local.lift_complex(&base);
        let c = cdot(&local.g, &xi, &local.xhat);
        for k in 0..7 {
            out[7 + k] += xi[k] - c * local.xhat[k];
        }
        out
    }
}

/// `[X, Y]` at `tp` for the extensions of [`extend_vector`].
pub fn frobenius_bracket(
    field: &StructureField,
    tp: &TwistorPoint,
    x: &CVec,
    y: &CVec,
    h: f64,
) -> CVec {
    let ex = extend_vector(field, tp, *x);
    let ey = extend_vector(field, tp, *y);
    let eval = |q: &Ambient| vec![ex(q), ey(q)];
    bracket_family(&eval, &tp.ambient(), h)[0][1]
}

/// Maxima over distribution pairs of the bracket components.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InvolutivityReport {
    /// Norm of the bracket outside the distribution.
    pub residual: f64,
    pub vertical: f64,
    pub theta: f64,
    /// Part in the opposite-type half of `B ⊗ ℂ`.
    pub wrong_type: f64,
    /// Radial (sphere-normal) component; a pure discretization artefact.
    pub normal: f64,
}

pub fn involutivity_report(
    field: &StructureField,
    tp: &TwistorPoint,
    h: f64,
    polarity: Polarity,
    extension: Extension,
) -> InvolutivityReport {
    let fields = distribution_fields(field, tp, polarity, extension);
    let brackets = bracket_family(&fields, &tp.ambient(), h);
    let mut r = InvolutivityReport::default();
    for a in 0..3 {
        for b in a + 1..3 {
            let c = tp.decompose(&brackets[a][b]);
            r.residual = r.residual.max(c.outside(polarity));
            r.vertical = r.vertical.max(c.vertical_norm());
            r.theta = r.theta.max(c.theta.norm());
            let wrong = match polarity {
                Polarity::Antiholomorphic => c.b10_norm(),
                Polarity::Holomorphic => c.b01_norm(),
            };
            r.wrong_type = r.wrong_type.max(wrong);
            r.normal = r.normal.max(c.normal.norm());
        }
    }
    r
}

/// Max over `B^{0,1}` pairs of the bracket's norm outside `B^{0,1}`.
pub fn involutivity_residual(field: &StructureField, tp: &TwistorPoint, h: f64) -> f64 {
    involutivity_report(field, tp, h, Polarity::Antiholomorphic, Extension::Adapted).residual
}

/// Evaluates a real 2-form on complex vectors.
pub fn eval2(form: &KForm, u: &[C], v: &[C]) -> C {
    let ur: Vec<f64> = u.iter().map(|c| c.re).collect();
    let ui: Vec<f64> = u.iter().map(|c| c.im).collect();
    let vr: Vec<f64> = v.iter().map(|c| c.re).collect();
    let vi: Vec<f64> = v.iter().map(|c| c.im).collect();
    let e = |a: &[f64], b: &[f64]| form.evaluate(&[a, b]);
    C::new(e(&ur, &vr) - e(&ui, &vi), e(&ur, &vi) + e(&ui, &vr))
}

/// Evaluates a real k-form on complex vectors by multilinear expansion.
pub fn eval_complex(form: &KForm, vectors: &[&[C]]) -> C {
    let k = vectors.len();
    let re: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().map(|c| c.re).collect())
        .collect();
    let im: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().map(|c| c.im).collect())
        .collect();
    let mut total = ZERO;
    for pick in 0..(1usize << k) {
        let args: Vec<&[f64]> = (0..k)
            .map(|s| {
                if pick >> s & 1 == 1 {
                    im[s].as_slice()
                } else {
                    re[s].as_slice()
                }
            })
            .collect();
        let val = form.evaluate(&args);
        if val == 0.0 {
            continue;
        }
        let mut phase = C::new(val, 0.0);
        for _ in 0..pick.count_ones() {
            phase *= I;
        }
        total += phase;
    }
    total
}

/// `max_{a<b} ‖R(wₐ, w_b)x‖` over the `B^{0,1}` frame, computed through the
/// `(2,0)+(0,2)` parts of the components `αₗ(X,Y) = g(R(X,Y)x, eₗ)` on `x⊥`.
pub fn vertical_obstruction(
    structure: &G2Point,
    curvature: &Curvature,
    x: &[f64; 7],
    frame: &[[f64; 7]; 6],
    drop: usize,
) -> Result<f64> {
    let g = structure.metric();
    let su3 = su3_structure_with(structure, x, drop)?;
    let w = complex_frame(frame, Polarity::Antiholomorphic);
    // frame vectors in su3-basis coordinates
    let coords: Vec<[C; 6]> = w
        .iter()
        .map(|v| {
            std::array::from_fn(|i| {
                let col: Vec<f64> = su3.basis.column(i).iter().copied().collect();
                cdot(g, v, &col)
            })
        })
        .collect();
    let mut mixed = Vec::with_capacity(7);
    for l in 0..7 {
        let mut coeffs = vec![0.0; 21];
        for (c, &mask) in multi_indices(7, 2).iter().enumerate() {
            let ij: Vec<usize> = mask_indices(mask).collect();
            coeffs[c] = (0..7)
                .map(|k| curvature.get(ij[0], ij[1], k, l) * x[k])
                .sum();
        }
        let alpha = KForm::new(7, 2, coeffs)?;
        let restricted = alpha.pullback(&su3.basis)?;
        mixed.push(hodge_decompose(&su3, &restricted).mixed);
    }
    let inv = g.inverse();
    let mut worst: f64 = 0.0;
    for a in 0..3 {
        for b in a + 1..3 {
            let cov: Vec<C> = mixed
                .iter()
                .map(|m| eval2(m, &coords[a], &coords[b]))
                .collect();
            let mut n2 = 0.0;
            for i in 0..7 {
                for j in 0..7 {
                    n2 += inv[(i, j)] * (cov[i].re * cov[j].re + cov[i].im * cov[j].im);
                }
            }
            worst = worst.max(n2.max(0.0).sqrt());
        }
    }
    Ok(worst)
}

/// Vertical obstruction of the field's own curvature at `tp`.
pub fn step1_vertical_obstruction(field: &StructureField, tp: &TwistorPoint) -> Result<f64> {
    let sample = crate::field::levi_civita(field, &tp.m);
    vertical_obstruction(
        &tp.structure,
        &sample.curvature,
        &tp.local.xhat,
        &tp.frame,
        tp.choice.drop,
    )
}

/// Tangent vector to the total space of `Λᵏ`: base part and fiber part.
#[derive(Clone, Debug)]
pub struct TotVector {
    pub base: Vec<f64>,
    pub fiber: KForm,
}

/// `Θ(y₁, …, y_k) = λ(Dπ y₁, …, Dπ y_k)`.
pub fn tautological_theta(lambda: &KForm, vectors: &[TotVector]) -> f64 {
    assert_eq!(vectors.len(), lambda.degree());
    let bases: Vec<&[f64]> = vectors.iter().map(|v| v.base.as_slice()).collect();
    lambda.evaluate(&bases)
}

/// `Ξ = Σ_I dq_I ∧ dp_{i₁} ∧ … ∧ dp_{i_k}` on `k+1` tangent vectors.
pub fn tautological_xi(vectors: &[TotVector]) -> f64 {
    let n = vectors.len();
    let mut total = 0.0;
    for s in 0..n {
        let others: Vec<&[f64]> = (0..n)
            .filter(|&r| r != s)
            .map(|r| vectors[r].base.as_slice())
            .collect();
        let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * vectors[s].fiber.evaluate(&others);
    }
    total
}

/// `(Θ(y₁..y_k), Ξ(y₀..y_k))` at a point of `Tot(Λᵏ)`.
pub fn tautological_forms(
    lambda: &KForm,
    theta_args: &[TotVector],
    xi_args: &[TotVector],
) -> (f64, f64) {
    (
        tautological_theta(lambda, theta_args),
        tautological_xi(xi_args),
    )
}

fn transport_rate(gamma: &Christoffel, v: &[f64], lambda: &KForm) -> KForm {
    let a = DMatrix::from_fn(7, 7, |m, i| (0..7).map(|k| v[k] * gamma[m][k][i]).sum());
    lambda.act(&a).scaled(-1.0)
}

/// One RK4 step of parallel transport of `λ` from `m` to `m + t v`.
pub fn transport(field: &StructureField, m: &Point, lambda: &KForm, v: &[f64; 7], t: f64) -> KForm {
    let h = field.step();
    let gamma_at = |s: f64| {
        let p: Point = std::array::from_fn(|i| m[i] + s * v[i]);
        christoffel_at(field, &p, h)
    };
    let g0 = gamma_at(0.0);
    let gh = gamma_at(0.5 * t);
    let g1 = gamma_at(t);
    let k1 = transport_rate(&g0, v, lambda);
    let k2 = transport_rate(&gh, v, &lambda.axpy(0.5 * t, &k1).unwrap());
    let k3 = transport_rate(&gh, v, &lambda.axpy(0.5 * t, &k2).unwrap());
    let k4 = transport_rate(&g1, v, &lambda.axpy(t, &k3).unwrap());
    let incr = &(&k1 + &k2.scaled(2.0)) + &(&k3.scaled(2.0) + &k4);
    lambda.axpy(t / 6.0, &incr).unwrap()
}

/// Difference stencil for the derivative of a transported form.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiftStencil {
    /// `(λ(h) − λ(−h)) / 2h`.
    Central2,
    /// `(λ(−2h) − 8λ(−h) + 8λ(h) − λ(2h)) / 12h`.
    Central4,
}

/// Fiber part of the horizontal lift of `v` at `(m, λ)`: the derivative of
/// the parallel-transported form along `m + t v`, by differences at step `h = 1/N`.
pub fn horizontal_fiber(
    field: &StructureField,
    m: &Point,
    lambda: &KForm,
    v: &[f64; 7],
    stencil: LiftStencil,
) -> KForm {
    let h = field.step();
    let at = |t: f64| transport(field, m, lambda, v, t);
    match stencil {
        LiftStencil::Central2 => (&at(h) - &at(-h)).scaled(0.5 / h),
        LiftStencil::Central4 => {
            let outer = &at(-2.0 * h) - &at(2.0 * h);
            let inner = (&at(h) - &at(-h)).scaled(8.0);
            (&outer + &inner).scaled(1.0 / (12.0 * h))
        }
    }
}

/// `max |Ξ(e'_{i₀}, …, e'_{i_k})|` over coordinate index sets, with `e'`
/// horizontal lifts on `Tot(Λᵏ)`.
pub fn xi_horizontal_check(field: &StructureField, k: usize, samples: &[(Point, KForm)]) -> f64 {
    xi_horizontal_check_with(field, k, samples, LiftStencil::Central4)
}

pub fn xi_horizontal_check_with(
    field: &StructureField,
    k: usize,
    samples: &[(Point, KForm)],
    stencil: LiftStencil,
) -> f64 {
    assert!(k == 1 || k == 3, "k must be 1 or 3");
    let mut worst: f64 = 0.0;
    for (m, lambda) in samples {
        assert_eq!(lambda.degree(), k);
        let lifts: Vec<TotVector> = (0..7)
            .map(|a| {
                let e = crate::g2::unit(a);
                TotVector {
                    base: e.to_vec(),
                    fiber: horizontal_fiber(field, m, lambda, &e, stencil),
                }
            })
            .collect();
        for &mask in multi_indices(7, k + 1) {
            let args: Vec<TotVector> = mask_indices(mask).map(|a| lifts[a].clone()).collect();
            worst = worst.max(tautological_xi(&args).abs());
        }
    }
    worst
}

/// `Ω_q(V₁, V₂, V₃) = ρ(a₁,a₂,a₃) + i ρ*(a₁,a₂,a₃,x̂)` on base parts.
pub fn omega_at(field: &StructureField, q: &Ambient, vectors: &[CVec]) -> C {
    let (m, x) = split_ambient(q);
    let (g, o) = field.metric_and_orientation_at(&m);
    let rho = field.rho_at(&m);
    let star = rho.hodge_star(&g, o).unwrap();
    let xhat = normalized(&g, &x);
    let bases: Vec<[C; 7]> = vectors
        .iter()
        .map(|v| std::array::from_fn(|i| v[i]))
        .collect();
    let refs: Vec<&[C]> = bases.iter().map(|b| b.as_slice()).collect();
    let re = eval_complex(&rho, &refs);
    let xc: [C; 7] = std::array::from_fn(|i| C::new(xhat[i], 0.0));
    let mut with_x = refs.clone();
    with_x.push(&xc);
    re + I * eval_complex(&star, &with_x)
}

/// `dω(V₀, …, V_k)` by the invariant formula, textbook sign convention.
pub fn cartan_derivative(
    form: &dyn Fn(&Ambient, &[CVec]) -> C,
    fields: &dyn Fn(&Ambient) -> Vec<CVec>,
    q: &Ambient,
    h: f64,
) -> C {
    let values = fields(q);
    let n = values.len();
    let mut total = ZERO;
    for i in 0..n {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        let scalar = |p: &Ambient| {
            let vs = fields(p);
            let others: Vec<CVec> = (0..n).filter(|&r| r != i).map(|r| vs[r]).collect();
            vec![{
                let mut v = [ZERO; 14];
                v[0] = form(p, &others);
                v
            }]
        };
        let d = directional(&scalar, q, &values[i], h)[0][0];
        total += d * sign;
    }
    let brackets = bracket_family(fields, q, h);
    for i in 0..n {
        for j in i + 1..n {
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            let mut args = vec![brackets[i][j]];
            args.extend((0..n).filter(|&r| r != i && r != j).map(|r| values[r]));
            total += form(q, &args) * sign;
        }
    }
    total
}

/// Outcome of the `Ω` checks at one twistor point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OmegaReport {
    /// `max |dΩ|` over horizontal lifts of coordinate 4-frames.
    pub d_omega: f64,
    /// `max |Im dΩ + φ*Ξ|` on the same frames.
    pub factorization_defect: f64,
    /// `max |Ω − Ω_su3|` on the B basis.
    pub b_consistency: f64,
}

/// `φ_* Y` for `φ(m, x) = (ρ*⌟x̂, m)`, by central differences along `Y`.
fn phi_push(field: &StructureField, q: &Ambient, y: &Ambient, h: f64) -> TotVector {
    let phi = |p: &Ambient| {
        let (m, x) = split_ambient(p);
        let (g, o) = field.metric_and_orientation_at(&m);
        let star = field.rho_at(&m).hodge_star(&g, o).unwrap();
        star.contract(&normalized(&g, &x)).unwrap()
    };
    let fiber = (&phi(&displaced(q, y, h)) - &phi(&displaced(q, y, -h))).scaled(0.5 / h);
    TotVector {
        base: y[..7].to_vec(),
        fiber,
    }
}

pub fn step3_omega_check(field: &StructureField, tp: &TwistorPoint, h: f64) -> OmegaReport {
    let q0 = tp.ambient();
    let omega = |q: &Ambient, v: &[CVec]| omega_at(field, q, v);
    let mut report = OmegaReport::default();
    for &mask in multi_indices(7, 4) {
        let idx: Vec<usize> = mask_indices(mask).collect();
        let fields = |q: &Ambient| {
            let local = LocalFrame::at(field, q);
            idx.iter()
                .map(|&a| to_complex(&local.lift(&crate::g2::unit(a))))
                .collect::<Vec<_>>()
        };
        let d = cartan_derivative(&omega, &fields, &q0, h);
        report.d_omega = report.d_omega.max(d.norm());
        let pushed: Vec<TotVector> = idx
            .iter()
            .map(|&a| phi_push(field, &q0, &tp.local.lift(&crate::g2::unit(a)), h))
            .collect();
        let xi = tautological_xi(&pushed);
        report.factorization_defect = report.factorization_defect.max((d.im + xi).abs());
    }
    let b = tp.b_basis();
    let g = tp.metric();
    let coords: Vec<Vec<f64>> = b
        .iter()
        .map(|v| {
            (0..6)
                .map(|i| {
                    let col: Vec<f64> = tp.su3.basis.column(i).iter().copied().collect();
                    g.dot(&v[..7], &col)
                })
                .collect()
        })
        .collect();
    for &mask in multi_indices(6, 3) {
        let idx: Vec<usize> = mask_indices(mask).collect();
        let args: Vec<CVec> = idx.iter().map(|&a| to_complex(&b[a])).collect();
        let direct = omega(&q0, &args);
        let vs: Vec<&[f64]> = idx.iter().map(|&a| coords[a].as_slice()).collect();
        let via = C::new(tp.su3.omega_re.evaluate(&vs), tp.su3.omega_im.evaluate(&vs));
        report.b_consistency = report.b_consistency.max((direct - via).norm());
    }
    report
}

/// `max |dΩ(X,Y,Z,T) − Ω(X,Y,[Z,T])|` over `X, Y` in the B frame and `Z, T`
/// in the `B^{0,1}` frame, with `d` in the sign convention `d = −d_textbook`.
pub fn step4_cartan_defect(field: &StructureField, tp: &TwistorPoint, h: f64) -> f64 {
    let q0 = tp.ambient();
    let omega = |q: &Ambient, v: &[CVec]| omega_at(field, q, v);
    let zbar = distribution_fields(field, tp, Polarity::Antiholomorphic, Extension::Adapted);
    let mut worst: f64 = 0.0;
    for x in 0..6 {
        for y in x + 1..6 {
            for z in 0..3 {
                for t in z + 1..3 {
                    let fields = |q: &Ambient| {
                        let local = LocalFrame::at(field, q);
                        let frame = local.adapted(tp.choice);
                        let zs = zbar(q);
                        vec![
                            to_complex(&local.lift(&frame[x])),
                            to_complex(&local.lift(&frame[y])),
                            zs[z],
                            zs[t],
                        ]
                    };
                    let d = -cartan_derivative(&omega, &fields, &q0, h);
                    let vals = fields(&q0);
                    let zt = bracket_family(
                        &|q: &Ambient| {
                            let zs = zbar(q);
                            vec![zs[z], zs[t]]
                        },
                        &q0,
                        h,
                    )[0][1];
                    let rhs = omega(&q0, &[vals[0], vals[1], zt]);
                    worst = worst.max((d - rhs).norm());
                }
            }
        }
    }
    worst
}
