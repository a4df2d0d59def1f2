//! Dense Hermitian operator algebra.
//!
//! Every operator and state in the crate is a dense `d × d` complex matrix
//! with `d ≤ 4096`. Unbounded position and momentum operators are truncated
//! onto a periodic grid (see [`Grid`]), which keeps every trace finite.
//!
//! Eigendecompositions are delegated to `faer`. Diagonal matrices (grid
//! positions and functions of them) take a fast path that never calls the
//! dense solver, so position projectors on a 512-point grid cost `O(d)`.

use std::fmt;
use std::ops::Range;

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QrnError, Result};
use crate::tol;

pub type C64 = Complex64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

fn max_abs(m: MatRef<'_, C64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

fn hermitian_defect(m: MatRef<'_, C64>) -> f64 {
    let n = m.nrows();
    let mut best = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            best = best.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    best
}

fn symmetrize(m: MatRef<'_, C64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

fn is_diagonal(m: MatRef<'_, C64>) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| i == j || m[(i, j)] == ZERO))
}

/// `Tr(A·B)` for Hermitian `B`, computed elementwise as `Σ a_ij conj(b_ij)`.
fn trace_with_hermitian(a: &Mat<C64>, b: &Mat<C64>) -> C64 {
    let mut acc = ZERO;
    for j in 0..a.ncols() {
        let ca = a.col_as_slice(j);
        let cb = b.col_as_slice(j);
        for (x, y) in ca.iter().zip(cb) {
            acc += x * y.conj();
        }
    }
    acc
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(QrnError::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_cap(dim: usize) -> Result<()> {
    if dim > tol::MAX_DIM {
        return Err(QrnError::DimensionTooLarge { dim, cap: tol::MAX_DIM });
    }
    Ok(())
}

/// Eigenvalues (ascending) and the matching orthonormal eigenvectors as columns.
pub(crate) struct Eigh {
    pub values: Vec<f64>,
    pub vectors: Mat<C64>,
}

pub(crate) fn eigh(m: &Mat<C64>) -> Result<Eigh> {
    let n = m.nrows();
    if is_diagonal(m.as_ref()) {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re));
        let values = order.iter().map(|&k| m[(k, k)].re).collect();
        let mut vectors = Mat::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            vectors[(k, col)] = ONE;
        }
        return Ok(Eigh { values, vectors });
    }
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|_| QrnError::EigenFailure)?;
    let s = evd.S().column_vector();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
    let values = order.iter().map(|&k| s[k].re).collect();
    let u = evd.U();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok(Eigh { values, vectors })
}

pub(crate) fn eigvalsh(m: &Mat<C64>) -> Result<Vec<f64>> {
    if is_diagonal(m.as_ref()) {
        let mut v: Vec<f64> = (0..m.nrows()).map(|k| m[(k, k)].re).collect();
        v.sort_by(f64::total_cmp);
        return Ok(v);
    }
    m.self_adjoint_eigenvalues(Side::Lower).map_err(|_| QrnError::EigenFailure)
}

/// `V diag(w) V†` restricted to the columns in `cols`.
fn weighted_outer(vectors: &Mat<C64>, cols: &[usize], weights: &[f64]) -> Mat<C64> {
    let n = vectors.nrows();
    let diagonal_basis = cols.iter().all(|&c| {
        let col = vectors.col_as_slice(c);
        col.iter().filter(|z| **z != ZERO).count() == 1
    });
    if diagonal_basis {
        let mut out = Mat::zeros(n, n);
        for (&c, &w) in cols.iter().zip(weights) {
            let col = vectors.col_as_slice(c);
            let (i, z) = col.iter().enumerate().find(|(_, z)| **z != ZERO).unwrap();
            out[(i, i)] += C64::new(w * z.norm_sqr(), 0.0);
        }
        return out;
    }
    let k = cols.len();
    let left = Mat::from_fn(n, k, |i, j| vectors[(i, cols[j])] * weights[j]);
    let right = Mat::from_fn(n, k, |i, j| vectors[(i, cols[j])]);
    &left * right.adjoint()
}

/// A self-adjoint operator on a `dim`-dimensional space.
#[derive(Clone)]
pub struct HermitianOperator {
    label: String,
    mat: Mat<C64>,
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HermitianOperator").field("label", &self.label).field("dim", &self.dim()).finish()
    }
}

impl HermitianOperator {
    /// Validates Hermiticity to within `1e-12` (relative to the largest
    /// entry) and stores the symmetrized matrix.
    pub fn new(label: impl Into<String>, mat: Mat<C64>) -> Result<Self> {
        let (rows, cols) = (mat.nrows(), mat.ncols());
        if rows != cols || rows == 0 {
            return Err(QrnError::NotSquare { rows, cols });
        }
        check_cap(rows)?;
        let defect = hermitian_defect(mat.as_ref());
        if defect > tol::HERMITIAN * max_abs(mat.as_ref()).max(1.0) {
            return Err(QrnError::NotHermitian { defect });
        }
        Ok(Self { label: label.into(), mat: symmetrize(mat.as_ref()) })
    }

    /// Builds from a generator. Only the upper triangle of `f` is consulted.
    pub fn from_fn(label: impl Into<String>, dim: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mat = Mat::from_fn(dim, dim, |i, j| {
            if i < j {
                f(i, j)
            } else if i == j {
                C64::new(f(i, i).re, 0.0)
            } else {
                f(j, i).conj()
            }
        });
        Self { label: label.into(), mat }
    }

    pub fn diagonal(label: impl Into<String>, values: &[f64]) -> Self {
        let n = values.len();
        let mut mat = Mat::zeros(n, n);
        for (k, &v) in values.iter().enumerate() {
            mat[(k, k)] = C64::new(v, 0.0);
        }
        Self { label: label.into(), mat }
    }

    pub fn from_real_rows(label: impl Into<String>, rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            check_dim(n, r.len())?;
        }
        Self::new(label, Mat::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0)))
    }

    pub fn identity(dim: usize) -> Self {
        Self { label: "I".into(), mat: Mat::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { label: "0".into(), mat: Mat::zeros(dim, dim) }
    }

    /// Rank-one projector `|ψ⟩⟨ψ|` onto the normalized `psi`.
    pub fn ket_bra(label: impl Into<String>, psi: &[C64]) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(QrnError::InvalidArgument("zero vector".into()));
        }
        let n = psi.len();
        let mat = Mat::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Ok(Self { label: label.into(), mat })
    }

    pub(crate) fn from_mat_unchecked(label: impl Into<String>, mat: Mat<C64>) -> Self {
        Self { label: label.into(), mat: symmetrize(mat.as_ref()) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    pub fn as_mat(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn is_diagonal(&self) -> bool {
        is_diagonal(self.mat.as_ref())
    }

    /// `‖A − A†‖` measured as the largest entry defect.
    pub fn hermiticity_defect(&self) -> f64 {
        hermitian_defect(self.mat.as_ref())
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|k| self.mat[(k, k)].re).sum()
    }

    pub fn max_entry(&self) -> f64 {
        max_abs(self.mat.as_ref())
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        let mat = Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] * a + other.mat[(i, j)] * b);
        Ok(Self { label: format!("{a}*{} + {b}*{}", self.label, other.label), mat })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, -1.0)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            label: format!("{a}*{}", self.label),
            mat: Mat::from_fn(self.dim(), self.dim(), |i, j| self.mat[(i, j)] * a),
        }
    }

    /// `self + c·I`.
    pub fn shift(&self, c: f64) -> Self {
        let mut mat = self.mat.clone();
        for k in 0..self.dim() {
            mat[(k, k)] += C64::new(c, 0.0);
        }
        Self { label: format!("{} + {c}", self.label), mat }
    }

    /// Plain matrix product; generally not Hermitian.
    pub fn matmul(&self, other: &Self) -> Result<Mat<C64>> {
        check_dim(self.dim(), other.dim())?;
        Ok(&self.mat * &other.mat)
    }

    /// `B·self·B` for Hermitian `B`, which is Hermitian again.
    pub fn sandwich(&self, outer: &Self) -> Result<Self> {
        check_dim(self.dim(), outer.dim())?;
        let mat = &(&outer.mat * &self.mat) * &outer.mat;
        Ok(Self::from_mat_unchecked(format!("{0}{1}{0}", outer.label, self.label), mat))
    }

    /// `self²`; diagonal operators square entrywise.
    pub fn square(&self) -> Self {
        let label = format!("{}^2", self.label);
        if self.is_diagonal() {
            let v: Vec<f64> = (0..self.dim()).map(|k| self.mat[(k, k)].re.powi(2)).collect();
            return Self::diagonal(label, &v);
        }
        Self::from_mat_unchecked(label, &self.mat * &self.mat)
    }
}

/// Maps a Hermitian matrix entry-for-entry into the on-disk layout.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixRecord {
    pub dim: usize,
    /// Row-major `[re, im]` pairs.
    pub entries: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl MatrixRecord {
    fn from_mat(m: MatRef<'_, C64>, label: Option<String>) -> Self {
        let n = m.nrows();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = m[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        Self { dim: n, entries, label }
    }

    fn to_mat(&self) -> Result<Mat<C64>> {
        if self.dim == 0 || self.entries.len() != self.dim * self.dim {
            return Err(QrnError::InvalidArgument(format!(
                "expected {} entries for dim {}, found {}",
                self.dim * self.dim,
                self.dim,
                self.entries.len()
            )));
        }
        check_cap(self.dim)?;
        let n = self.dim;
        Ok(Mat::from_fn(n, n, |i, j| {
            let [re, im] = self.entries[i * n + j];
            C64::new(re, im)
        }))
    }
}

impl HermitianOperator {
    pub fn to_record(&self) -> MatrixRecord {
        MatrixRecord::from_mat(self.mat.as_ref(), Some(self.label.clone()))
    }

    pub fn from_record(rec: &MatrixRecord) -> Result<Self> {
        Self::new(rec.label.clone().unwrap_or_default(), rec.to_mat()?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_record())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_record(&serde_json::from_str(s)?)
    }
}

/// A positive, unit-trace Hermitian matrix.
#[derive(Clone)]
pub struct DensityMatrix {
    mat: Mat<C64>,
}

impl fmt::Debug for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityMatrix").field("dim", &self.dim()).finish()
    }
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.dim() == other.dim() && (0..self.dim()).all(|j| self.mat.col_as_slice(j) == other.mat.col_as_slice(j))
    }
}

impl DensityMatrix {
    /// Validates Hermiticity, trace one and eigenvalues `≥ −1e-10`.
    pub fn new(mat: Mat<C64>) -> Result<Self> {
        let op = HermitianOperator::new("rho", mat)?;
        let tr = op.trace();
        if (tr - 1.0).abs() > tol::DENSITY {
            return Err(QrnError::InvalidDensity(format!("trace {tr}")));
        }
        let lowest = eigvalsh(&op.mat)?.first().copied().unwrap_or(0.0);
        if lowest < -tol::DENSITY {
            return Err(QrnError::InvalidDensity(format!("eigenvalue {lowest:.3e}")));
        }
        Ok(Self { mat: op.mat })
    }

    /// Positivity repair: symmetrize, clip negative eigenvalues to zero and
    /// renormalize the trace.
    pub fn repaired(mat: Mat<C64>) -> Result<Self> {
        let (rows, cols) = (mat.nrows(), mat.ncols());
        if rows != cols || rows == 0 {
            return Err(QrnError::NotSquare { rows, cols });
        }
        let sym = symmetrize(mat.as_ref());
        let e = eigh(&sym)?;
        if e.values[0] >= 0.0 {
            let tr: f64 = e.values.iter().sum();
            return Self::normalized(sym, tr);
        }
        let kept: Vec<usize> = (0..rows).filter(|&k| e.values[k] > 0.0).collect();
        let weights: Vec<f64> = kept.iter().map(|&k| e.values[k]).collect();
        let tr: f64 = weights.iter().sum();
        Self::normalized(weighted_outer(&e.vectors, &kept, &weights), tr)
    }

    fn normalized(mat: Mat<C64>, tr: f64) -> Result<Self> {
        if !(tr > tol::NULL_WEIGHT) {
            return Err(QrnError::InvalidDensity("no positive spectral weight".into()));
        }
        let n = mat.nrows();
        Ok(Self { mat: Mat::from_fn(n, n, |i, j| mat[(i, j)] / tr) })
    }

    /// Pure state `|ψ⟩⟨ψ|`; `psi` need not be normalized.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        check_cap(psi.len())?;
        let op = HermitianOperator::ket_bra("rho", psi)?;
        Ok(Self { mat: op.mat })
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut mat = Mat::zeros(dim, dim);
        mat[(k, k)] = ONE;
        Self { mat }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { mat: Mat::from_fn(dim, dim, |i, j| if i == j { C64::new(1.0 / dim as f64, 0.0) } else { ZERO }) }
    }

    /// Diagonal state with the given (non-negative) weights, renormalized.
    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
            return Err(QrnError::InvalidDensity("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        let n = weights.len();
        let mut mat = Mat::zeros(n, n);
        for (k, &w) in weights.iter().enumerate() {
            mat[(k, k)] = C64::new(w, 0.0);
        }
        Self::normalized(mat, total)
    }

    /// Convex combination `Σ wᵢ ρᵢ`, weights renormalized.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let Some((_, first)) = parts.first() else {
            return Err(QrnError::InvalidArgument("empty mixture".into()));
        };
        let n = first.dim();
        let mut mat = Mat::zeros(n, n);
        let mut total = 0.0;
        for (w, rho) in parts {
            check_dim(n, rho.dim())?;
            if *w < 0.0 {
                return Err(QrnError::InvalidDensity("negative mixture weight".into()));
            }
            total += w;
            for j in 0..n {
                for i in 0..n {
                    mat[(i, j)] += rho.mat[(i, j)] * *w;
                }
            }
        }
        Self::normalized(mat, total)
    }

    pub(crate) fn from_mat_trusted(mat: Mat<C64>) -> Self {
        Self { mat: symmetrize(mat.as_ref()) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    pub fn as_mat(&self) -> MatRef<'_, C64> {
        self.mat.as_ref()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|k| self.mat[(k, k)].re).sum()
    }

    pub fn purity(&self) -> f64 {
        trace_with_hermitian(&self.mat, &self.mat).re
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        eigvalsh(&self.mat)
    }

    pub fn as_operator(&self) -> HermitianOperator {
        HermitianOperator { label: "rho".into(), mat: self.mat.clone() }
    }

    /// `self − other` as a Hermitian operator.
    pub fn sub(&self, other: &DensityMatrix) -> Result<HermitianOperator> {
        check_dim(self.dim(), other.dim())?;
        let n = self.dim();
        Ok(HermitianOperator {
            label: "drho".into(),
            mat: Mat::from_fn(n, n, |i, j| self.mat[(i, j)] - other.mat[(i, j)]),
        })
    }

    /// `Tr|self − other|`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        trace_norm(&self.sub(other)?)
    }

    /// `B ρ B` for Hermitian `B` (not renormalized).
    pub fn sandwich(&self, outer: &HermitianOperator) -> Result<HermitianOperator> {
        check_dim(self.dim(), outer.dim())?;
        let mat = &(&outer.mat * &self.mat) * &outer.mat;
        Ok(HermitianOperator::from_mat_unchecked("BrhoB", mat))
    }

    pub fn to_record(&self) -> MatrixRecord {
        MatrixRecord::from_mat(self.mat.as_ref(), None)
    }

    pub fn from_record(rec: &MatrixRecord) -> Result<Self> {
        Self::new(rec.to_mat()?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_record())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_record(&serde_json::from_str(s)?)
    }
}

/// Real part of `Tr(ρM)`.
pub fn trace_inner(rho: &DensityMatrix, m: &HermitianOperator) -> Result<f64> {
    check_dim(m.dim(), rho.dim())?;
    let z = trace_with_hermitian(&rho.mat, &m.mat);
    debug_assert!(z.im.abs() <= 1e-10 * (1.0 + z.re.abs()), "imaginary residue {}", z.im);
    Ok(z.re)
}

/// `Tr(AB)` for two Hermitian operators.
pub fn trace_product(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    Ok(trace_with_hermitian(&a.mat, &b.mat).re)
}

/// `|A| = √(A*A)`: same eigenvectors, eigenvalues replaced by their moduli.
pub fn operator_abs(a: &HermitianOperator) -> Result<HermitianOperator> {
    Ok(apply_function(f64::abs, a)?.with_label(format!("|{}|", a.label)))
}

/// `Tr|A| = Σ|λᵢ|`.
pub fn trace_norm(a: &HermitianOperator) -> Result<f64> {
    let vals = match low_rank_compression(&a.mat) {
        Some(small) => eigvalsh(&small)?,
        None => eigvalsh(&a.mat)?,
    };
    Ok(vals.iter().map(|l| l.abs()).sum())
}

/// `Q†AQ` for an orthonormal basis `Q` of the column space of Hermitian `A`,
/// when that space is small; `None` when the rank exceeds `n/8`.
fn low_rank_compression(a: &Mat<C64>) -> Option<Mat<C64>> {
    let n = a.nrows();
    if n < 32 || is_diagonal(a.as_ref()) {
        return None;
    }
    let cap = n / 8;
    let scale = (0..n).map(|j| a.col_as_slice(j).iter().map(|z| z.norm_sqr()).sum::<f64>()).fold(0.0, f64::max).sqrt();
    if scale == 0.0 {
        return Some(Mat::zeros(1, 1));
    }
    let drop = 1e-13 * scale;
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for j in 0..n {
        let mut v = a.col_as_slice(j).to_vec();
        if v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() <= drop {
            continue;
        }
        for _ in 0..2 {
            for q in &basis {
                let c: C64 = q.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (y, x) in v.iter_mut().zip(q) {
                    *y -= c * x;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > drop {
            if basis.len() == cap {
                return None;
            }
            v.iter_mut().for_each(|z| *z /= norm);
            basis.push(v);
        }
    }
    let k = basis.len().max(1);
    let q = Mat::from_fn(n, k, |i, j| basis.get(j).map_or(ZERO, |b| b[i]));
    let aq = a * &q;
    let small = q.adjoint() * aq.as_ref();
    Some(symmetrize(small.as_ref()))
}

/// `max|λᵢ|`.
pub fn operator_norm(a: &HermitianOperator) -> Result<f64> {
    let v = eigvalsh(&a.mat)?;
    Ok(v.first().map_or(0.0, |l| l.abs()).max(v.last().map_or(0.0, |l| l.abs())))
}

/// Operator norm of the commutator `[A, B]`, via the Hermitian `i[A, B]`.
pub fn commutator_norm(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let ab = &a.mat * &b.mat;
    let n = a.dim();
    let i = C64::new(0.0, 1.0);
    let c = Mat::from_fn(n, n, |r, s| (ab[(r, s)] - ab[(s, r)].conj()) * i);
    let v = eigvalsh(&symmetrize(c.as_ref()))?;
    Ok(v.iter().fold(0.0f64, |m, l| m.max(l.abs())))
}

/// An orthogonal projection `P = P² = P†`.
#[derive(Clone, Debug)]
pub struct Projector {
    op: HermitianOperator,
}

impl Projector {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let sq = &op.mat * &op.mat;
        let n = op.dim();
        let defect = max_abs(Mat::from_fn(n, n, |i, j| sq[(i, j)] - op.mat[(i, j)]).as_ref());
        if defect > tol::IDEMPOTENT {
            return Err(QrnError::NotProjector { defect });
        }
        Ok(Self { op })
    }

    /// Rank-one projector onto `psi` (normalized internally).
    pub fn onto(psi: &[C64]) -> Result<Self> {
        Ok(Self { op: HermitianOperator::ket_bra("P", psi)? })
    }

    pub fn basis(dim: usize, k: usize) -> Self {
        let mut w = vec![0.0; dim];
        w[k] = 1.0;
        Self { op: HermitianOperator::diagonal("P", &w) }
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn rank(&self) -> usize {
        self.op.trace().round() as usize
    }

    pub fn is_zero(&self) -> bool {
        self.rank() == 0
    }

    /// `I − P`.
    pub fn complement(&self) -> Projector {
        let n = self.dim();
        let mat = Mat::from_fn(n, n, |i, j| if i == j { ONE - self.op.mat[(i, j)] } else { -self.op.mat[(i, j)] });
        Projector { op: HermitianOperator { label: format!("I-{}", self.op.label), mat } }
    }
}

/// Eigenvalues merged into distinct levels, each with its eigenprojector.
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    groups: Vec<Range<usize>>,
    vectors: Mat<C64>,
}

impl fmt::Debug for SpectralDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralDecomposition")
            .field("eigenvalues", &self.eigenvalues)
            .field("multiplicities", &self.multiplicities())
            .finish()
    }
}

impl SpectralDecomposition {
    /// Distinct eigenvalues, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn multiplicities(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.len()).collect()
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn projector(&self, k: usize) -> Projector {
        let cols: Vec<usize> = self.groups[k].clone().collect();
        let w = vec![1.0; cols.len()];
        let mat = weighted_outer(&self.vectors, &cols, &w);
        Projector { op: HermitianOperator::from_mat_unchecked(format!("P[{}]", self.eigenvalues[k]), mat) }
    }

    pub fn projectors(&self) -> Vec<Projector> {
        (0..self.len()).map(|k| self.projector(k)).collect()
    }

    /// `Σ λᵢ Pᵢ`.
    pub fn reconstruct(&self) -> HermitianOperator {
        let cols: Vec<usize> = (0..self.vectors.ncols()).collect();
        let mut w = vec![0.0; cols.len()];
        for (g, &l) in self.groups.iter().zip(&self.eigenvalues) {
            for c in g.clone() {
                w[c] = l;
            }
        }
        HermitianOperator::from_mat_unchecked("sum l P", weighted_outer(&self.vectors, &cols, &w))
    }
}

pub fn spectral_decompose(a: &HermitianOperator) -> Result<SpectralDecomposition> {
    let e = eigh(&a.mat)?;
    let mut groups: Vec<Range<usize>> = Vec::new();
    for k in 0..e.values.len() {
        match groups.last_mut() {
            Some(g) if e.values[k] - e.values[k - 1] < tol::DEGENERACY => g.end = k + 1,
            _ => groups.push(k..k + 1),
        }
    }
    let eigenvalues = groups.iter().map(|g| e.values[g.clone()].iter().sum::<f64>() / g.len() as f64).collect();
    Ok(SpectralDecomposition { eigenvalues, groups, vectors: e.vectors })
}

/// An open real interval `]lo, hi[`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenInterval {
    pub lo: f64,
    pub hi: f64,
}

impl OpenInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(QrnError::InvalidArgument(format!("empty interval ]{lo}, {hi}[")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Strict membership, excluding points within `boundary` of either end.
    pub fn contains_strictly(&self, x: f64, boundary: f64) -> bool {
        x > self.lo + boundary && x < self.hi - boundary
    }
}

/// `E_A(]lo, hi[)` with the default boundary tolerance.
pub fn spectral_projector(a: &HermitianOperator, interval: OpenInterval) -> Result<Projector> {
    spectral_projector_with(a, interval, tol::BOUNDARY)
}

/// Sum of eigenprojectors whose eigenvalue lies inside `interval`, ignoring
/// eigenvalues within `boundary` of an endpoint.
pub fn spectral_projector_with(a: &HermitianOperator, interval: OpenInterval, boundary: f64) -> Result<Projector> {
    let e = eigh(&a.mat)?;
    let cols: Vec<usize> = (0..e.values.len()).filter(|&k| interval.contains_strictly(e.values[k], boundary)).collect();
    let w = vec![1.0; cols.len()];
    let mat = weighted_outer(&e.vectors, &cols, &w);
    let label = format!("E_{}(]{}, {}[)", a.label, interval.lo, interval.hi);
    Ok(Projector { op: HermitianOperator::from_mat_unchecked(label, mat) })
}

/// Spectral calculus `f(A) = Σ f(λᵢ) Pᵢ`.
pub fn apply_function(f: impl Fn(f64) -> f64, a: &HermitianOperator) -> Result<HermitianOperator> {
    let label = format!("f({})", a.label);
    if a.is_diagonal() {
        let v: Vec<f64> = (0..a.dim()).map(|k| f(a.mat[(k, k)].re)).collect();
        return Ok(HermitianOperator::diagonal(label, &v));
    }
    let e = eigh(&a.mat)?;
    let cols: Vec<usize> = (0..e.values.len()).collect();
    let w: Vec<f64> = e.values.iter().map(|&l| f(l)).collect();
    Ok(HermitianOperator::from_mat_unchecked(label, weighted_outer(&e.vectors, &cols, &w)))
}

fn kron(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    let (m, n) = (a.nrows(), b.nrows());
    Mat::from_fn(m * n, m * n, |r, c| a[(r / n, c / n)] * b[(r % n, c % n)])
}

/// `A ⊗ B` in the `(i₁, i₂) ↦ i₁·d₂ + i₂` ordering.
pub fn tensor(a: &HermitianOperator, b: &HermitianOperator) -> Result<HermitianOperator> {
    check_cap(a.dim() * b.dim())?;
    Ok(HermitianOperator { label: format!("{}⊗{}", a.label, b.label), mat: kron(a.as_mat(), b.as_mat()) })
}

pub fn tensor_states(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    check_cap(a.dim() * b.dim())?;
    Ok(DensityMatrix { mat: kron(a.as_mat(), b.as_mat()) })
}

/// Which factor of a bipartite space to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    First,
    Second,
}

/// Reduced state on the kept factor of a `dims.0 × dims.1` bipartite state.
pub fn partial_trace(rho: &DensityMatrix, keep: Subsystem, dims: (usize, usize)) -> Result<DensityMatrix> {
    let (d1, d2) = dims;
    check_dim(d1 * d2, rho.dim())?;
    let m = &rho.mat;
    let mat = match keep {
        Subsystem::First => Mat::from_fn(d1, d1, |i, j| (0..d2).map(|k| m[(i * d2 + k, j * d2 + k)]).sum()),
        Subsystem::Second => Mat::from_fn(d2, d2, |i, j| (0..d1).map(|k| m[(k * d2 + i, k * d2 + j)]).sum()),
    };
    Ok(DensityMatrix { mat: symmetrize(mat.as_ref()) })
}

/// A uniform periodic grid on `[−L, L)` with `n` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub n: usize,
    pub half_width: f64,
    pub hbar: f64,
}

impl Grid {
    pub fn new(n: usize, half_width: f64, hbar: f64) -> Result<Self> {
        if n < 2 {
            return Err(QrnError::InvalidArgument(format!("grid needs at least 2 points, got {n}")));
        }
        check_cap(n)?;
        if !(half_width > 0.0) || !(hbar > 0.0) {
            return Err(QrnError::InvalidArgument("grid half-width and hbar must be positive".into()));
        }
        Ok(Self { n, half_width, hbar })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        let dx = self.step();
        (0..self.n).map(|j| -self.half_width + j as f64 * dx).collect()
    }

    /// Angular wavenumbers in FFT order with the Nyquist mode zeroed.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n as i64;
        let dk = std::f64::consts::PI / self.half_width;
        (0..n)
            .map(|m| {
                let signed = if m < n / 2 { m } else { m - n };
                if n % 2 == 0 && signed == -n / 2 {
                    0.0
                } else {
                    signed as f64 * dk
                }
            })
            .collect()
    }

    pub fn position_operator(&self) -> HermitianOperator {
        HermitianOperator::diagonal("Q", &self.positions())
    }

    /// `−iħ d/dx` by spectral differentiation. The matrix is circulant and
    /// purely imaginary-antisymmetric because the Nyquist mode is dropped.
    pub fn momentum_operator(&self) -> HermitianOperator {
        let n = self.n;
        let dx = self.step();
        let k = self.wavenumbers();
        let kernel: Vec<C64> = (0..n)
            .map(|delta| {
                let s: C64 = k.iter().map(|&km| C64::from_polar(self.hbar * km, km * delta as f64 * dx)).sum();
                s / n as f64
            })
            .collect();
        let mat = Mat::from_fn(n, n, |i, j| kernel[(i + n - j) % n]);
        HermitianOperator::from_mat_unchecked("P", mat)
    }
}

/// Position and momentum operators on an `n`-point grid over `[−L, L)`.
pub fn grid_operators(n: usize, half_width: f64, hbar: f64) -> Result<(HermitianOperator, HermitianOperator)> {
    let g = Grid::new(n, half_width, hbar)?;
    Ok((g.position_operator(), g.momentum_operator()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn sigma_x() -> HermitianOperator {
        HermitianOperator::from_real_rows("X", &[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    fn plus() -> Vec<C64> {
        vec![c(1.0), c(1.0)]
    }

    #[test]
    fn trace_inner_examples() {
        let z = HermitianOperator::diagonal("Z", &[1.0, -1.0]);
        assert!(trace_inner(&DensityMatrix::maximally_mixed(2), &z).unwrap().abs() < 1e-15);
        let m = HermitianOperator::diagonal("M", &[3.0, 7.0]);
        assert_eq!(trace_inner(&DensityMatrix::basis(2, 0), &m).unwrap(), 3.0);
        let rho = DensityMatrix::pure(&plus()).unwrap();
        assert!((trace_inner(&rho, &sigma_x()).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trace_inner_rejects_dim_mismatch() {
        let m = HermitianOperator::identity(3);
        assert!(matches!(
            trace_inner(&DensityMatrix::maximally_mixed(2), &m),
            Err(QrnError::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn abs_examples() {
        let a = operator_abs(&HermitianOperator::diagonal("A", &[-2.0, 3.0])).unwrap();
        assert_eq!(a.entry(0, 0), c(2.0));
        assert_eq!(a.entry(1, 1), c(3.0));
        let z = operator_abs(&HermitianOperator::zeros(3)).unwrap();
        assert_eq!(z.max_entry(), 0.0);
        let x = operator_abs(&sigma_x()).unwrap();
        let i2 = HermitianOperator::identity(2);
        assert!(x.sub(&i2).unwrap().max_entry() < 1e-12);
    }

    #[test]
    fn trace_norm_examples() {
        assert!((trace_norm(&HermitianOperator::diagonal("", &[1.0, -1.0])).unwrap() - 2.0).abs() < 1e-15);
        let rho = DensityMatrix::maximally_mixed(3);
        assert_eq!(rho.trace_distance(&rho).unwrap(), 0.0);
        // |0><0| - |+><+| = [[1/2, -1/2], [-1/2, -1/2]], eigenvalues ±1/√2.
        let d = DensityMatrix::basis(2, 0).trace_distance(&DensityMatrix::pure(&plus()).unwrap()).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12, "{d}");
    }

    #[test]
    fn trace_norm_low_rank_matches_dense() {
        let mut rng = crate::states::rng_for(7, 0);
        let n = 64;
        let psi = crate::states::random_unit_vector(n, &mut rng);
        let phi = crate::states::random_unit_vector(n, &mut rng);
        let d = DensityMatrix::pure(&psi).unwrap().sub(&DensityMatrix::pure(&phi).unwrap()).unwrap();
        let overlap: C64 = psi.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum();
        let exact = 2.0 * (1.0 - overlap.norm_sqr()).sqrt();
        assert!((trace_norm(&d).unwrap() - exact).abs() < 1e-12);
        let dense: f64 = eigvalsh(&d.as_mat().to_owned()).unwrap().iter().map(|l| l.abs()).sum();
        assert!((dense - exact).abs() < 1e-12);
    }

    #[test]
    fn operator_norm_examples() {
        assert_eq!(operator_norm(&HermitianOperator::diagonal("", &[1.0, -3.0])).unwrap(), 3.0);
        assert!((operator_norm(&HermitianOperator::identity(4)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_decompose_merges_degenerate_levels() {
        let d = spectral_decompose(&HermitianOperator::diagonal("", &[1.0, 2.0, 1.0])).unwrap();
        assert_eq!(d.eigenvalues(), &[1.0, 2.0]);
        assert_eq!(d.multiplicities(), vec![2, 1]);
        let id = spectral_decompose(&HermitianOperator::identity(3)).unwrap();
        assert_eq!(id.len(), 1);
        assert!(id.projector(0).operator().sub(&HermitianOperator::identity(3)).unwrap().max_entry() < 1e-15);
    }

    #[test]
    fn spectral_projector_examples() {
        let a = HermitianOperator::diagonal("A", &[0.0, 1.0, 2.0]);
        let p = spectral_projector(&a, OpenInterval::new(0.5, 2.5).unwrap()).unwrap();
        assert_eq!(p.rank(), 2);
        assert_eq!(p.operator().entry(0, 0), c(0.0));
        assert_eq!(p.operator().entry(2, 2), c(1.0));
        let b = HermitianOperator::diagonal("B", &[0.0, 1.0]);
        assert!(spectral_projector(&b, OpenInterval::new(5.0, 6.0).unwrap()).unwrap().is_zero());
    }

    #[test]
    fn spectral_projector_excludes_boundary_eigenvalues() {
        let a = HermitianOperator::diagonal("A", &[0.0, 1.0, 2.0]);
        let p = spectral_projector(&a, OpenInterval::new(1.0, 2.0).unwrap()).unwrap();
        assert!(p.is_zero());
        let wide = spectral_projector_with(&a, OpenInterval::new(1.0, 2.0).unwrap(), -1e-9).unwrap();
        assert_eq!(wide.rank(), 2);
    }

    #[test]
    fn position_slit_rank_counts_grid_points() {
        let g = Grid::new(64, 4.0, 1.0).unwrap();
        let q = g.position_operator();
        let slit = OpenInterval::new(-2.05, 1.95).unwrap();
        let expected = g.positions().iter().filter(|&&x| x > -2.05 && x < 1.95).count();
        assert_eq!(spectral_projector(&q, slit).unwrap().rank(), expected);
        assert_eq!(expected, 32);
    }

    #[test]
    fn apply_function_examples() {
        let a = HermitianOperator::diagonal("A", &[1.0, 2.0]);
        let sq = apply_function(|x| x * x, &a).unwrap();
        assert_eq!(sq.entry(1, 1), c(4.0));
        let same = apply_function(|x| x, &sigma_x()).unwrap();
        assert!(same.sub(&sigma_x()).unwrap().max_entry() < 1e-14);
    }

    #[test]
    fn partial_trace_examples() {
        let zero_zero = DensityMatrix::basis(4, 0);
        let r = partial_trace(&zero_zero, Subsystem::Second, (2, 2)).unwrap();
        assert_eq!(r, DensityMatrix::basis(2, 0));
        let mixed = tensor_states(&DensityMatrix::maximally_mixed(2), &DensityMatrix::maximally_mixed(2)).unwrap();
        for keep in [Subsystem::First, Subsystem::Second] {
            let r = partial_trace(&mixed, keep, (2, 2)).unwrap();
            assert!(r.sub(&DensityMatrix::maximally_mixed(2)).unwrap().max_entry() < 1e-15);
        }
        // (|00> + |11>)/√2 reduces to I/2 on either side.
        let bell = DensityMatrix::pure(&[c(1.0), c(0.0), c(0.0), c(1.0)]).unwrap();
        for keep in [Subsystem::First, Subsystem::Second] {
            let r = partial_trace(&bell, keep, (2, 2)).unwrap();
            assert!(r.sub(&DensityMatrix::maximally_mixed(2)).unwrap().max_entry() < 1e-15);
        }
        assert!(partial_trace(&bell, Subsystem::First, (3, 2)).is_err());
    }

    #[test]
    fn grid_position_values() {
        let (q, _) = grid_operators(4, 2.0, 1.0).unwrap();
        let d: Vec<f64> = (0..4).map(|k| q.entry(k, k).re).collect();
        assert_eq!(d, vec![-2.0, -1.0, 0.0, 1.0]);
        assert!(grid_operators(1, 2.0, 1.0).is_err());
    }

    #[test]
    fn grid_momentum_is_hermitian_and_imaginary() {
        let (_, p) = grid_operators(16, 3.0, 1.0).unwrap();
        assert!(p.hermiticity_defect() < 1e-14);
        for i in 0..16 {
            for j in 0..16 {
                assert!(p.entry(i, j).re.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constructors_reject_bad_input() {
        let skew = Mat::from_fn(2, 2, |i, j| if i < j { c(1.0) } else { ZERO });
        assert!(matches!(HermitianOperator::new("", skew), Err(QrnError::NotHermitian { .. })));
        let neg = Mat::from_fn(2, 2, |i, j| if i == j { c(if i == 0 { 1.5 } else { -0.5 }) } else { ZERO });
        assert!(matches!(DensityMatrix::new(neg), Err(QrnError::InvalidDensity(_))));
        let half = Mat::from_fn(2, 2, |i, j| if i == j { c(0.25) } else { ZERO });
        assert!(DensityMatrix::new(half).is_err());
        assert!(Projector::new(HermitianOperator::diagonal("", &[0.5, 1.0])).is_err());
    }

    #[test]
    fn repair_clips_negative_weight() {
        let m = Mat::from_fn(2, 2, |i, j| if i == j { c(if i == 0 { 1.2 } else { -0.2 }) } else { ZERO });
        let rho = DensityMatrix::repaired(m).unwrap();
        assert_eq!(rho, DensityMatrix::basis(2, 0));
    }

    #[test]
    fn json_layout_round_trip() {
        let rho = DensityMatrix::pure(&[c(1.0), C64::new(0.0, 1.0)]).unwrap();
        let s = rho.to_json().unwrap();
        assert!(s.starts_with("{\"dim\":2,\"entries\":[["));
        let rec: MatrixRecord = serde_json::from_str(&s).unwrap();
        assert!((rec.entries[0][0] - 0.5).abs() < 1e-15 && (rec.entries[2][1] - 0.5).abs() < 1e-15);
        assert_eq!(DensityMatrix::from_json(&s).unwrap(), rho);
        let bad = r#"{"dim":2,"entries":[[1,0],[0,0],[0,0],[1,0]]}"#;
        assert!(DensityMatrix::from_json(bad).is_err());
        let op = HermitianOperator::from_json(bad).unwrap();
        assert_eq!(op.trace(), 2.0);
    }
}
