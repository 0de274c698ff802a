//! Coordinate exterior algebra over ℝⁿ, n ≤ 8.
//!
//! A [`KForm`] stores one coefficient per strictly increasing multi-index,
//! in lexicographic order. Multi-indices are handled internally as bitmasks
//! (bit `i` set ⇔ index `i` present), which makes disjointness tests and
//! shuffle signs cheap. All sign bookkeeping goes through
//! [`permutation_sign`] and [`shuffle_sign`].
//!
//! Indices are 0-based throughout: `e⁰ … eⁿ⁻¹`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::{GeometryError, Result};

pub const MAX_DIM: usize = 8;

/// Relative singular-value threshold used for every rank decision.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Smallest eigenvalue accepted by [`MetricTensor::new`].
pub const PD_TOLERANCE: f64 = 1e-12;

struct DegreeTable {
    masks: Vec<u16>,
}

struct DimTable {
    degrees: Vec<DegreeTable>,
    /// position of a mask inside its degree's list
    position: Vec<u16>,
}

fn tables() -> &'static [DimTable] {
    static TABLES: OnceLock<Vec<DimTable>> = OnceLock::new();
    TABLES.get_or_init(|| {
        (0..=MAX_DIM)
            .map(|n| {
                let mut position = vec![u16::MAX; 1 << n];
                let degrees = (0..=n)
                    .map(|k| {
                        let mut masks = Vec::with_capacity(binomial(n, k));
                        let mut current = Vec::with_capacity(k);
                        combinations(n, k, 0, &mut current, &mut masks);
                        for (pos, &m) in masks.iter().enumerate() {
                            position[m as usize] = pos as u16;
                        }
                        DegreeTable { masks }
                    })
                    .collect();
                DimTable { degrees, position }
            })
            .collect()
    })
}

fn combinations(n: usize, k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<u16>) {
    if current.len() == k {
        out.push(current.iter().fold(0u16, |m, &i| m | (1 << i)));
        return;
    }
    for i in start..n {
        current.push(i);
        combinations(n, k, i + 1, current, out);
        current.pop();
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Increasing multi-indices of degree `k` in dimension `n`, as bitmasks, in
/// storage order.
pub fn multi_indices(n: usize, k: usize) -> &'static [u16] {
    &tables()[n].degrees[k].masks
}

/// Storage position of the multi-index `mask` in dimension `n`.
#[inline]
pub fn index_of(n: usize, mask: u16) -> usize {
    tables()[n].position[mask as usize] as usize
}

/// Expands a bitmask into its increasing index list.
pub fn mask_indices(mask: u16) -> impl Iterator<Item = usize> {
    (0..16).filter(move |i| mask & (1 << i) != 0)
}

fn mask_of(indices: &[usize]) -> u16 {
    indices.iter().fold(0u16, |m, &i| m | (1 << i))
}

/// Sign of the permutation sorting `indices`, or `None` when an index repeats.
pub fn permutation_sign(indices: &[usize]) -> Option<f64> {
    let mut inversions = 0usize;
    for a in 0..indices.len() {
        for b in a + 1..indices.len() {
            match indices[a].cmp(&indices[b]) {
                std::cmp::Ordering::Equal => return None,
                std::cmp::Ordering::Greater => inversions += 1,
                std::cmp::Ordering::Less => {}
            }
        }
    }
    Some(if inversions % 2 == 0 { 1.0 } else { -1.0 })
}

/// Sign of sorting the concatenation (increasing `a`, increasing `b`) for
/// disjoint masks. Same value as [`permutation_sign`] on the concatenated list.
#[inline]
pub fn shuffle_sign(a: u16, b: u16) -> f64 {
    debug_assert_eq!(a & b, 0);
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        inversions += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

struct WedgeEntry {
    left: u16,
    right: u16,
    target: u16,
    sign: f64,
}

fn wedge_table(n: usize, k: usize, l: usize) -> &'static [WedgeEntry] {
    const SIDE: usize = MAX_DIM + 1;
    static TABLES: [OnceLock<Vec<WedgeEntry>>; SIDE * SIDE * SIDE] =
        [const { OnceLock::new() }; SIDE * SIDE * SIDE];
    TABLES[(n * SIDE + k) * SIDE + l].get_or_init(|| {
        let mut entries = Vec::new();
        for (ia, &a) in multi_indices(n, k).iter().enumerate() {
            for (ib, &b) in multi_indices(n, l).iter().enumerate() {
                if a & b == 0 {
                    entries.push(WedgeEntry {
                        left: ia as u16,
                        right: ib as u16,
                        target: index_of(n, a | b) as u16,
                        sign: shuffle_sign(a, b),
                    });
                }
            }
        }
        entries
    })
}

/// Determinant of a small square matrix stored row-major, by partial pivoting.
pub(crate) fn small_det(m: &mut [f64], k: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..k {
        let mut pivot = col;
        for row in col + 1..k {
            if m[row * k + col].abs() > m[pivot * k + col].abs() {
                pivot = row;
            }
        }
        let p = m[pivot * k + col];
        if p == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for c in 0..k {
                m.swap(pivot * k + c, col * k + c);
            }
            det = -det;
        }
        det *= p;
        for row in col + 1..k {
            let f = m[row * k + col] / p;
            if f != 0.0 {
                for c in col..k {
                    m[row * k + c] -= f * m[col * k + c];
                }
            }
        }
    }
    det
}

/// Orientation sign of a top-degree form relative to `e⁰∧…∧eⁿ⁻¹`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn from_sign(s: f64) -> Self {
        if s < 0.0 {
            Orientation::Negative
        } else {
            Orientation::Positive
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }
}

/// Antisymmetric k-linear form on ℝⁿ.
#[derive(Clone, Debug, PartialEq)]
pub struct KForm {
    dim: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_DIM {
        Err(GeometryError::UnsupportedDimension(dim))
    } else {
        Ok(())
    }
}

impl KForm {
    pub fn zero(dim: usize, degree: usize) -> Result<Self> {
        check_dim(dim)?;
        if degree > dim {
            return Err(GeometryError::DegreeTooLarge { degree, dim });
        }
        Ok(Self {
            dim,
            degree,
            coeffs: vec![0.0; binomial(dim, degree)],
        })
    }

    pub fn new(dim: usize, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        let mut form = Self::zero(dim, degree)?;
        if coeffs.len() != form.coeffs.len() {
            return Err(GeometryError::CoefficientCount {
                dim,
                degree,
                expected: form.coeffs.len(),
                got: coeffs.len(),
            });
        }
        form.coeffs = coeffs;
        Ok(form)
    }

    pub fn scalar(dim: usize, value: f64) -> Result<Self> {
        Self::new(dim, 0, vec![value])
    }

    /// The basis monomial `e^{i₁}∧…∧e^{i_k}`; indices may come in any order.
    pub fn basis(dim: usize, indices: &[usize]) -> Result<Self> {
        Self::from_terms(dim, indices.len(), &[(indices, 1.0)])
    }

    /// Sum of `c · e^{I}` over the given terms. Index lists may be unsorted;
    /// the permutation sign is applied.
    pub fn from_terms(dim: usize, degree: usize, terms: &[(&[usize], f64)]) -> Result<Self> {
        let mut form = Self::zero(dim, degree)?;
        for (indices, c) in terms {
            if indices.len() != degree {
                return Err(GeometryError::DimensionMismatch {
                    expected: degree,
                    got: indices.len(),
                });
            }
            if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    got: bad + 1,
                });
            }
            if let Some(sign) = permutation_sign(indices) {
                form.coeffs[index_of(dim, mask_of(indices))] += sign * c;
            }
        }
        Ok(form)
    }

    /// The 1-form with the given components.
    pub fn covector(components: &[f64]) -> Result<Self> {
        Self::new(components.len(), 1, components.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// `(indices, coefficient)` pairs in storage order.
    pub fn terms(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        multi_indices(self.dim, self.degree)
            .iter()
            .zip(&self.coeffs)
            .map(|(&m, &c)| (mask_indices(m).collect(), c))
    }

    /// Component `a(e_{i₁}, …, e_{i_k})` for an arbitrary index tuple.
    pub fn component(&self, indices: &[usize]) -> f64 {
        debug_assert_eq!(indices.len(), self.degree);
        match permutation_sign(indices) {
            Some(sign) => sign * self.coeffs[index_of(self.dim, mask_of(indices))],
            None => 0.0,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            degree: self.degree,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self + s · other`; shapes must agree.
    pub fn axpy(&self, s: f64, other: &KForm) -> Result<Self> {
        self.same_shape(other)?;
        Ok(Self {
            dim: self.dim,
            degree: self.degree,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + s * b)
                .collect(),
        })
    }

    fn same_shape(&self, other: &KForm) -> Result<()> {
        if self.dim != other.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        if self.degree != other.degree {
            return Err(GeometryError::DimensionMismatch {
                expected: self.degree,
                got: other.degree,
            });
        }
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Euclidean norm of the coefficient vector (the norm induced by the
    /// identity metric).
    pub fn norm_euclid(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn wedge(&self, other: &KForm) -> Result<KForm> {
        if self.dim != other.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let degree = self.degree + other.degree;
        if degree > self.dim {
            return Err(GeometryError::DegreeOverflow {
                left: self.degree,
                right: other.degree,
                dim: self.dim,
            });
        }
        let mut out = vec![0.0; binomial(self.dim, degree)];
        for e in wedge_table(self.dim, self.degree, other.degree) {
            let a = self.coeffs[e.left as usize];
            if a != 0.0 {
                out[e.target as usize] += e.sign * a * other.coeffs[e.right as usize];
            }
        }
        Ok(KForm {
            dim: self.dim,
            degree,
            coeffs: out,
        })
    }

    /// Interior product into the first slot: `(a ⌟ v)(…) = a(v, …)`.
    pub fn contract(&self, v: &[f64]) -> Result<KForm> {
        if self.degree == 0 {
            return Err(GeometryError::ContractScalar);
        }
        if v.len() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        let n = self.dim;
        let mut out = vec![0.0; binomial(n, self.degree - 1)];
        for (&mask, &c) in multi_indices(n, self.degree).iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            let mut sign = 1.0;
            for i in mask_indices(mask) {
                out[index_of(n, mask & !(1 << i))] += sign * v[i] * c;
                sign = -sign;
            }
        }
        Ok(KForm {
            dim: n,
            degree: self.degree - 1,
            coeffs: out,
        })
    }

    /// Evaluates the form on `degree` vectors.
    pub fn evaluate(&self, vectors: &[&[f64]]) -> f64 {
        let k = self.degree;
        assert_eq!(vectors.len(), k, "wrong number of arguments");
        if k == 0 {
            return self.coeffs[0];
        }
        let mut scratch = [0.0f64; MAX_DIM * MAX_DIM];
        let mut total = 0.0;
        for (&mask, &c) in multi_indices(self.dim, k).iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            for (r, i) in mask_indices(mask).enumerate() {
                for (col, v) in vectors.iter().enumerate() {
                    scratch[r * k + col] = v[i];
                }
            }
            total += c * small_det(&mut scratch[..k * k], k);
        }
        total
    }

    /// Pullback along the linear map with matrix `m` (n × d): the result is a
    /// form on ℝᵈ with `(m*a)(u, …) = a(m u, …)`.
    pub fn pullback(&self, m: &DMatrix<f64>) -> Result<KForm> {
        if m.nrows() != self.dim {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                got: m.nrows(),
            });
        }
        let d = m.ncols();
        check_dim(d)?;
        let k = self.degree;
        if k > d {
            return Err(GeometryError::DegreeTooLarge { degree: k, dim: d });
        }
        let mut out = KForm::zero(d, k)?;
        if k == 0 {
            out.coeffs[0] = self.coeffs[0];
            return Ok(out);
        }
        let mut scratch = [0.0f64; MAX_DIM * MAX_DIM];
        for (slot, &target) in multi_indices(d, k).iter().enumerate() {
            let cols: Vec<usize> = mask_indices(target).collect();
            let mut total = 0.0;
            for (&mask, &c) in multi_indices(self.dim, k).iter().zip(&self.coeffs) {
                if c == 0.0 {
                    continue;
                }
                for (r, i) in mask_indices(mask).enumerate() {
                    for (cc, &j) in cols.iter().enumerate() {
                        scratch[r * k + cc] = m[(i, j)];
                    }
                }
                total += c * small_det(&mut scratch[..k * k], k);
            }
            out.coeffs[slot] = total;
        }
        Ok(out)
    }

    /// Infinitesimal action of `a ∈ gl(n)` by derivation:
    /// `(a·λ)(v₁,…,v_k) = −Σᵢ λ(v₁,…,a vᵢ,…,v_k)`.
    pub fn act(&self, a: &DMatrix<f64>) -> KForm {
        let n = self.dim;
        let k = self.degree;
        let mut out = vec![0.0; self.coeffs.len()];
        let mut tuple = [0usize; MAX_DIM];
        for (slot, &mask) in multi_indices(n, k).iter().enumerate() {
            let base: Vec<usize> = mask_indices(mask).collect();
            let mut total = 0.0;
            for p in 0..k {
                for m in 0..n {
                    let coeff = a[(m, base[p])];
                    if coeff == 0.0 {
                        continue;
                    }
                    tuple[..k].copy_from_slice(&base);
                    tuple[p] = m;
                    total += coeff * self.component(&tuple[..k]);
                }
            }
            out[slot] = -total;
        }
        KForm {
            dim: n,
            degree: k,
            coeffs: out,
        }
    }

    /// Inner product induced by `g` on Λᵏ.
    pub fn inner(&self, other: &KForm, g: &MetricTensor) -> Result<f64> {
        self.same_shape(other)?;
        g.check_dim(self.dim)?;
        if g.is_identity() {
            return Ok(self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a * b)
                .sum());
        }
        let raised = g.raise(self);
        Ok(raised.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self, g: &MetricTensor) -> Result<f64> {
        Ok(self.inner(self, g)?.max(0.0).sqrt())
    }

    /// Hodge star with convention `a ∧ *b = ⟨a, b⟩ vol`, where `vol` is the
    /// g-unit top form of the given orientation.
    pub fn hodge_star(&self, g: &MetricTensor, orientation: Orientation) -> Result<KForm> {
        g.check_dim(self.dim)?;
        let n = self.dim;
        let k = self.degree;
        let raised = if g.is_identity() {
            self.coeffs.clone()
        } else {
            g.raise(self)
        };
        let scale = orientation.sign() * g.det().sqrt();
        let full: u16 = ((1u32 << n) - 1) as u16;
        let mut out = vec![0.0; binomial(n, n - k)];
        for (slot, &mask) in multi_indices(n, k).iter().enumerate() {
            let comp = full & !mask;
            out[index_of(n, comp)] = scale * shuffle_sign(mask, comp) * raised[slot];
        }
        Ok(KForm {
            dim: n,
            degree: n - k,
            coeffs: out,
        })
    }
}

impl fmt::Display for KForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (idx, c) in self.terms() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let name: String = idx.iter().map(|i| (i + 1).to_string()).collect();
            write!(f, "{c}·e{name}")?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl Add for &KForm {
    type Output = KForm;
    fn add(self, rhs: &KForm) -> KForm {
        self.axpy(1.0, rhs)
            .expect("shape mismatch in KForm addition")
    }
}

impl Sub for &KForm {
    type Output = KForm;
    fn sub(self, rhs: &KForm) -> KForm {
        self.axpy(-1.0, rhs)
            .expect("shape mismatch in KForm subtraction")
    }
}

impl Mul<f64> for &KForm {
    type Output = KForm;
    fn mul(self, rhs: f64) -> KForm {
        self.scaled(rhs)
    }
}

impl Neg for &KForm {
    type Output = KForm;
    fn neg(self) -> KForm {
        self.scaled(-1.0)
    }
}

pub fn wedge(a: &KForm, b: &KForm) -> Result<KForm> {
    a.wedge(b)
}

pub fn contract(a: &KForm, v: &[f64]) -> Result<KForm> {
    a.contract(v)
}

pub fn hodge_star(a: &KForm, g: &MetricTensor, orientation: Orientation) -> Result<KForm> {
    a.hodge_star(g, orientation)
}

/// Symmetric positive-definite bilinear form.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricTensor {
    entries: DMatrix<f64>,
    inverse: DMatrix<f64>,
    det: f64,
    identity: bool,
}

impl MetricTensor {
    /// Symmetrizes `entries` and checks positive-definiteness.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n {
            return Err(GeometryError::DimensionMismatch {
                expected: n,
                got: entries.ncols(),
            });
        }
        check_dim(n)?;
        let sym = (&entries + entries.transpose()) * 0.5;
        let min_eigenvalue = sym.clone().symmetric_eigen().eigenvalues.min();
        if !(min_eigenvalue > PD_TOLERANCE) {
            return Err(GeometryError::NotPositiveDefinite { min_eigenvalue });
        }
        let chol = sym
            .clone()
            .cholesky()
            .ok_or(GeometryError::NotPositiveDefinite { min_eigenvalue })?;
        let inverse = chol.inverse();
        let det = chol.l().diagonal().iter().map(|d| d * d).product();
        let identity = sym == DMatrix::identity(n, n);
        Ok(Self {
            entries: sym,
            inverse,
            det,
            identity,
        })
    }

    pub fn identity(n: usize) -> Self {
        let id = DMatrix::identity(n, n);
        Self {
            entries: id.clone(),
            inverse: id,
            det: 1.0,
            identity: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() != n {
            Err(GeometryError::DimensionMismatch {
                expected: n,
                got: self.dim(),
            })
        } else {
            Ok(())
        }
    }

    pub fn dot(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += x[i] * self.entries[(i, j)] * y[j];
            }
        }
        total
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        self.dot(x, x).max(0.0).sqrt()
    }

    /// Coefficients of the form with all indices raised, `a^I = Σ_J det(g⁻¹[I,J]) a_J`.
    fn raise(&self, a: &KForm) -> Vec<f64> {
        let n = a.dim;
        let k = a.degree;
        if k == 0 {
            return a.coeffs.clone();
        }
        let masks = multi_indices(n, k);
        let mut scratch = [0.0f64; MAX_DIM * MAX_DIM];
        let mut out = vec![0.0; masks.len()];
        for (si, &mi) in masks.iter().enumerate() {
            let rows: Vec<usize> = mask_indices(mi).collect();
            let mut total = 0.0;
            for (sj, &mj) in masks.iter().enumerate() {
                let c = a.coeffs[sj];
                if c == 0.0 {
                    continue;
                }
                for (r, &i) in rows.iter().enumerate() {
                    for (cc, j) in mask_indices(mj).enumerate() {
                        scratch[r * k + cc] = self.inverse[(i, j)];
                    }
                }
                total += c * small_det(&mut scratch[..k * k], k);
            }
            out[si] = total;
        }
        out
    }
}

/// Raises an index: the vector `g⁻¹ξ`.
pub fn sharp(g: &MetricTensor, covector: &[f64]) -> Vec<f64> {
    (g.inverse() * DVector::from_column_slice(covector))
        .as_slice()
        .to_vec()
}

/// Lowers an index: the covector `g v`.
pub fn flat(g: &MetricTensor, vector: &[f64]) -> Vec<f64> {
    (g.matrix() * DVector::from_column_slice(vector))
        .as_slice()
        .to_vec()
}

/// Plain linear map between coordinate spaces.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap(pub DMatrix<f64>);

impl LinearMap {
    pub fn dim_in(&self) -> usize {
        self.0.ncols()
    }

    pub fn dim_out(&self) -> usize {
        self.0.nrows()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (&self.0 * DVector::from_column_slice(v))
            .as_slice()
            .to_vec()
    }

    pub fn compose(&self, other: &LinearMap) -> LinearMap {
        LinearMap(&self.0 * &other.0)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// Matrix of `A ↦ A·a` from gl(n) (column `i·n + j` is the unit matrix
/// `E_{ij}`) to Λᵏ.
pub fn gl_action_matrix(a: &KForm) -> DMatrix<f64> {
    let n = a.dim;
    let rows = a.coeffs.len();
    let mut m = DMatrix::zeros(rows, n * n);
    let mut unit = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            unit[(i, j)] = 1.0;
            let image = a.act(&unit);
            m.column_mut(i * n + j).copy_from_slice(&image.coeffs);
            unit[(i, j)] = 0.0;
        }
    }
    m
}

/// Singular values of `m`, with the right singular vectors spanning the full
/// column space (rows are padded with zeros when `m` is wide).
fn full_svd(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let cols = m.ncols();
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    (svd.singular_values, svd.v_t.expect("requested v_t"))
}

fn rank_threshold(sv: &DVector<f64>) -> f64 {
    RANK_TOLERANCE * sv.max()
}

/// Numerical rank with relative threshold [`RANK_TOLERANCE`].
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let threshold = rank_threshold(&sv);
    sv.iter().filter(|&&s| s > threshold && s > 0.0).count()
}

/// Dimension of `{A ∈ gl(n) : A·a = 0}`.
pub fn annihilator_dimension(a: &KForm) -> usize {
    let n = a.dim;
    n * n - numerical_rank(&gl_action_matrix(a))
}

/// Orthonormal (Frobenius) basis of the annihilator algebra of `a`, as n×n
/// matrices.
pub fn annihilator_basis(a: &KForm) -> Vec<DMatrix<f64>> {
    let n = a.dim;
    let l = gl_action_matrix(a);
    let (sv, v_t) = full_svd(&l);
    let threshold = rank_threshold(&sv);
    sv.iter()
        .enumerate()
        .filter(|(_, &s)| !(s > threshold && s > 0.0))
        .map(|(row, _)| DMatrix::from_row_iterator(n, n, v_t.row(row).iter().copied()))
        .collect()
}
