//! Dense complex matrix kernel.
//!
//! Everything here is small and dense: the largest objects the toolkit
//! builds are two-copy channel outputs of dimension 16, so plain `O(d^3)`
//! loops over a row-major `Vec` are all we need.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type C64 = Complex64;

/// Numerical tolerances shared by every module and test.
pub mod tol {
    /// Max Frobenius deviation from Hermiticity for a density matrix.
    pub const HERM_TOL: f64 = 1e-10;
    /// Most negative eigenvalue a density matrix may carry before clipping.
    pub const PSD_TOL: f64 = 1e-10;
    /// Reconstruction / unitarity accuracy of the eigensolver.
    pub const EIG_TOL: f64 = 1e-9;
    /// Hermiticity required on input to [`super::hermitian_eig`].
    pub const EIG_INPUT_HERM_TOL: f64 = 1e-8;
    /// Trace deviation accepted by [`super::DensityMatrix::new`] before renormalizing.
    pub const TRACE_TOL: f64 = 1e-8;
    /// Eigenvalues below this count as zero in entropies.
    pub const ZERO_EIG: f64 = 1e-12;
    /// Support threshold in relative entropy.
    pub const SUPPORT_TOL: f64 = 1e-10;
}

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.6}{:+.6}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Real row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// `|v><v|`
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), v.len(), |r, c| v[r] * v[c].conj())
    }

    /// Column vector `|v>`.
    pub fn column(v: &[C64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn col(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// Entry-wise complex conjugate.
    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `||m - m^dagger||_F`, or `+inf` for a non-square matrix.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                acc += (self[(r, c)] - self[(c, r)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// `(m + m^dagger) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| {
            (self[(r, c)] + self[(c, r)].conj()) * 0.5
        })
    }

    /// Matrix product; `None` when inner dimensions disagree.
    pub fn checked_mul(&self, rhs: &CMatrix) -> Option<CMatrix> {
        if self.cols != rhs.rows {
            return None;
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Some(out)
    }

    /// `self * rhs^dagger` without materializing the adjoint.
    pub fn mul_adjoint(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, rhs.cols, "mul_adjoint: column counts differ");
        let mut out = CMatrix::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..rhs.rows {
                let b = &rhs.data[j * rhs.cols..(j + 1) * rhs.cols];
                out.data[i * rhs.rows + j] = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
            }
        }
        out
    }

    /// `self^dagger * rhs`
    pub fn adjoint_mul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.rows, rhs.rows, "adjoint_mul: row counts differ");
        let mut out = CMatrix::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self.data[k * self.cols + i].conj();
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }

    /// `K rho K^dagger`
    pub fn sandwich(&self, rho: &CMatrix) -> CMatrix {
        (self * rho).mul_adjoint(self)
    }

    /// Kronecker product `self ⊗ rhs`.
    pub fn kron(&self, rhs: &CMatrix) -> CMatrix {
        let rows = self.rows * rhs.rows;
        let cols = self.cols * rhs.cols;
        let mut out = CMatrix::zeros(rows, cols);
        for ar in 0..self.rows {
            for ac in 0..self.cols {
                let a = self[(ar, ac)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for br in 0..rhs.rows {
                    for bc in 0..rhs.cols {
                        out[(ar * rhs.rows + br, ac * rhs.cols + bc)] = a * rhs[(br, bc)];
                    }
                }
            }
        }
        out
    }

    /// Max absolute entry difference.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Apply `f` to the eigenvalues of a Hermitian matrix.
    pub fn hermitian_map(&self, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
        let eig = hermitian_eig(self)?;
        let mapped: Vec<f64> = eig.values.iter().map(|&x| f(x)).collect();
        Ok(eig.reconstruct_with(&mapped))
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

impl<'a> Mul<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;

    /// Panics on mismatched inner dimensions; use [`CMatrix::checked_mul`] otherwise.
    fn mul(self, rhs: &'a CMatrix) -> CMatrix {
        self.checked_mul(rhs).unwrap_or_else(|| {
            panic!(
                "matrix product of {}x{} and {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )
        })
    }
}

impl<'a> Add<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &'a CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix sum shapes");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl<'a> Sub<&'a CMatrix> for &'a CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &'a CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix difference shapes");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// Kronecker product.
pub fn tensor(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kron(b)
}

/// Tensor product of a list of matrices, left to right.
pub fn tensor_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors
        .into_iter()
        .fold(CMatrix::identity(1), |acc, m| acc.kron(m))
}

/// Reduced matrix on the subsystems listed in `keep`.
///
/// `dims` lists the subsystem dimensions in tensor order; `keep` may be given
/// in any order but the result is always ordered as in `dims`.
pub fn partial_trace(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if !m.is_square() || m.rows() != total {
        return Err(Error::DimensionMismatch(format!(
            "partial trace of {}x{} matrix over subsystem dims {dims:?}",
            m.rows(),
            m.cols()
        )));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::DimensionMismatch(format!(
            "subsystem {bad} out of range for {} subsystems",
            dims.len()
        )));
    }
    let mut kept = vec![false; dims.len()];
    for &k in keep {
        kept[k] = true;
    }

    // strides in the full index
    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let kept_sys: Vec<usize> = (0..dims.len()).filter(|&i| kept[i]).collect();
    let traced_sys: Vec<usize> = (0..dims.len()).filter(|&i| !kept[i]).collect();
    let kept_dim: usize = kept_sys.iter().map(|&i| dims[i]).product();
    let traced_dim: usize = traced_sys.iter().map(|&i| dims[i]).product();

    let offsets = |sys: &[usize], n: usize| -> Vec<usize> {
        (0..n)
            .map(|mut idx| {
                let mut off = 0;
                for &s in sys.iter().rev() {
                    off += (idx % dims[s]) * strides[s];
                    idx /= dims[s];
                }
                off
            })
            .collect()
    };
    let kept_off = offsets(&kept_sys, kept_dim);
    let traced_off = offsets(&traced_sys, traced_dim);

    let mut out = CMatrix::zeros(kept_dim, kept_dim);
    for (i, &oi) in kept_off.iter().enumerate() {
        for (j, &oj) in kept_off.iter().enumerate() {
            out[(i, j)] = traced_off.iter().map(|&t| m[(oi + t, oj + t)]).sum();
        }
    }
    Ok(out)
}

/// `||a - b||_F`
pub fn frobenius_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok((a - b).frobenius_norm())
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    /// Real eigenvalues, descending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: CMatrix,
}

impl HermitianEig {
    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_with(&self.values)
    }

    /// `V diag(values) V^dagger`
    pub fn reconstruct_with(&self, values: &[f64]) -> CMatrix {
        let n = self.vectors.rows();
        let v = &self.vectors;
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in values.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            for r in 0..n {
                let a = v[(r, k)] * lam;
                for c in 0..n {
                    out[(r, c)] += a * v[(c, k)].conj();
                }
            }
        }
        out
    }

    pub fn min_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Hermitian eigensolver (cyclic complex Jacobi).
///
/// The input is symmetrized before iterating; inputs further than
/// [`tol::EIG_INPUT_HERM_TOL`] from Hermitian are rejected.
pub fn hermitian_eig(m: &CMatrix) -> Result<HermitianEig> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of non-square {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let defect = m.hermiticity_defect();
    let scale = m.frobenius_norm().max(1.0);
    if defect > tol::EIG_INPUT_HERM_TOL * scale {
        return Err(Error::NotHermitian(defect));
    }
    let n = m.rows();
    let mut a = m.hermitian_part();
    let mut v = CMatrix::identity(n);

    if n > 1 {
        jacobi_sweeps(&mut a, &mut v);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let values = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, k| v[(r, order[k])]);
    Ok(HermitianEig { values, vectors })
}

fn jacobi_sweeps(a: &mut CMatrix, v: &mut CMatrix) {
    let n = a.rows();
    let norm = a.frobenius_norm();
    if norm == 0.0 {
        return;
    }
    let off_target = (f64::EPSILON * norm) * (f64::EPSILON * norm);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off <= off_target {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(a, v, p, q);
            }
        }
    }
}

/// Zero `a[(p, q)]` with a unitary plane rotation `J`: `a <- J^dagger a J`, `v <- v J`.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let n = a.rows();
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // below rounding relative to the diagonal: skip
    if mag < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = C64::new(0.0, 0.0);
        a[(q, p)] = C64::new(0.0, 0.0);
        return;
    }
    let phase = apq / mag; // e^{i phi}
    let theta = (aqq - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let cs = 1.0 / (t * t + 1.0).sqrt();
    let sn = t * cs;
    // J = [[c, s], [-s e^{-i phi}, c e^{-i phi}]] on (p, q)
    let jpp = C64::new(cs, 0.0);
    let jpq = C64::new(sn, 0.0);
    let jqp = -phase.conj() * sn;
    let jqq = phase.conj() * cs;

    // columns: a <- a J
    for r in 0..n {
        let x = a[(r, p)];
        let y = a[(r, q)];
        a[(r, p)] = x * jpp + y * jqp;
        a[(r, q)] = x * jpq + y * jqq;
    }
    // rows: a <- J^dagger a
    for col in 0..n {
        let x = a[(p, col)];
        let y = a[(q, col)];
        a[(p, col)] = jpp.conj() * x + jqp.conj() * y;
        a[(q, col)] = jpq.conj() * x + jqq.conj() * y;
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = C64::new(a[(q, q)].re, 0.0);

    for r in 0..n {
        let x = v[(r, p)];
        let y = v[(r, q)];
        v[(r, p)] = x * jpp + y * jqp;
        v[(r, q)] = x * jpq + y * jqq;
    }
}

/// Hermitian, positive semidefinite, unit-trace operator.
///
/// The spectrum is computed once at construction and cached.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    mat: CMatrix,
    spectrum: Vec<f64>,
}

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity. Eigenvalues in
    /// `[-PSD_TOL, 0)` are clipped to zero and the trace renormalized.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square, got {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        let defect = mat.hermiticity_defect();
        if defect > tol::HERM_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > tol::TRACE_TOL || tr.im.abs() > tol::TRACE_TOL {
            return Err(Error::InvalidTrace(tr.re));
        }
        Self::from_hermitian(mat.hermitian_part())
    }

    /// Normalizes a Hermitian PSD matrix by its trace.
    pub fn from_psd(mat: CMatrix) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "density matrix must be square, got {}x{}",
                mat.rows(),
                mat.cols()
            )));
        }
        let tr = mat.trace().re;
        if !(tr > 0.0) {
            return Err(Error::InvalidTrace(tr));
        }
        let scaled = mat.scale_real(1.0 / tr);
        let defect = scaled.hermiticity_defect();
        if defect > tol::HERM_TOL {
            return Err(Error::NotHermitian(defect));
        }
        Self::from_hermitian(scaled.hermitian_part())
    }

    fn from_hermitian(mat: CMatrix) -> Result<Self> {
        let eig = hermitian_eig(&mat)?;
        let min = eig.min_value();
        if min < -tol::PSD_TOL {
            return Err(Error::NotPsd(min));
        }
        if min >= 0.0 {
            let total: f64 = eig.values.iter().sum();
            let spectrum = eig.values.iter().map(|x| x / total).collect();
            let mat = mat.scale_real(1.0 / mat.trace().re);
            return Ok(Self { mat, spectrum });
        }
        let clipped: Vec<f64> = eig.values.iter().map(|&x| x.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        let spectrum: Vec<f64> = clipped.iter().map(|x| x / total).collect();
        let mat = eig.reconstruct_with(&spectrum).hermitian_part();
        Ok(Self { mat, spectrum })
    }

    /// `|psi><psi| / <psi|psi>`
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm2 > 0.0) || !norm2.is_finite() {
            return Err(Error::InvalidParameter("zero or non-finite state vector".into()));
        }
        Self::from_psd(CMatrix::outer(psi))
    }

    /// Computational basis state `|k><k|`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut spectrum = vec![0.0; dim];
        spectrum[0] = 1.0;
        let mut mat = CMatrix::zeros(dim, dim);
        mat[(k, k)] = C64::new(1.0, 0.0);
        Self { mat, spectrum }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            mat: CMatrix::identity(dim).scale_real(1.0 / dim as f64),
            spectrum: vec![1.0 / dim as f64; dim],
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    #[inline]
    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Eigenvalues, descending.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectrum.last().copied().unwrap_or(0.0)
    }

    pub fn eig(&self) -> HermitianEig {
        hermitian_eig(&self.mat).expect("density matrix is Hermitian")
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut spectrum: Vec<f64> = self
            .spectrum
            .iter()
            .flat_map(|a| other.spectrum.iter().map(move |b| a * b))
            .collect();
        spectrum.sort_by(|a, b| b.total_cmp(a));
        DensityMatrix {
            mat: self.mat.kron(&other.mat),
            spectrum,
        }
    }

    /// Convex combination `sum p_i rho_i`. Weights must be nonnegative with unit sum.
    pub fn mixture(weights: &[f64], states: &[DensityMatrix]) -> Result<DensityMatrix> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} states",
                weights.len(),
                states.len()
            )));
        }
        let d = states[0].dim();
        let mut acc = CMatrix::zeros(d, d);
        for (w, s) in weights.iter().zip(states) {
            if s.dim() != d {
                return Err(Error::DimensionMismatch("mixture of states with different dims".into()));
            }
            acc = &acc + &s.mat.scale_real(*w);
        }
        DensityMatrix::new(acc)
    }

    pub fn distance(&self, other: &DensityMatrix) -> f64 {
        (&self.mat - &other.mat).frobenius_norm()
    }
}

impl DensityMatrix {
    /// Parses nested rows of `[re, im]` pairs.
    pub fn from_json(text: &str) -> Result<Self> {
        let rows: Vec<Vec<[f64; 2]>> =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parse("density matrix rows must form a square".into()));
        }
        let data = rows.into_iter().flatten().map(|[re, im]| c(re, im)).collect();
        DensityMatrix::new(CMatrix::new(n, n, data)?)
    }
}

/// Nested rows of `[re, im]` pairs.
pub fn matrix_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows())
        .map(|r| (0..m.cols()).map(|cc| [m[(r, cc)].re, m[(r, cc)].im]).collect())
        .collect()
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_rows(&self.mat).serialize(serializer)
    }
}

impl PartialEq for DensityMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mat == other.mat
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{random_hermitian, seeded};

    fn pauli_x() -> CMatrix {
        CMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn construction_checks_shape_and_finiteness() {
        assert!(CMatrix::new(2, 2, vec![c(1.0, 0.0); 3]).is_err());
        assert!(matches!(
            CMatrix::new(1, 1, vec![c(f64::NAN, 0.0)]),
            Err(Error::NonFinite)
        ));
        assert!(CMatrix::new(2, 3, vec![c(0.0, 0.0); 6]).is_ok());
    }

    #[test]
    fn tensor_identity_and_basis() {
        let i2 = CMatrix::identity(2);
        assert_eq!(tensor(&i2, &i2), CMatrix::identity(4));
        let a = CMatrix::diag(&[1.0, 0.0]);
        let b = CMatrix::diag(&[0.0, 1.0]);
        assert_eq!(tensor(&a, &b), CMatrix::diag(&[0.0, 1.0, 0.0, 0.0]));
    }

    #[test]
    fn tensor_trace_factorizes() {
        let mut rng = seeded(11);
        let a = random_hermitian(&mut rng, 2);
        let b = CMatrix::from_fn(2, 2, |r, cc| c(r as f64 - 0.3, cc as f64 * 0.7));
        let lhs = tensor(&a, &b).trace();
        // direct expansion: sum_{i,k} a_ii b_kk
        let mut rhs = c(0.0, 0.0);
        for i in 0..2 {
            for k in 0..2 {
                rhs += a[(i, i)] * b[(k, k)];
            }
        }
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn mixed_product_property() {
        let mut rng = seeded(3);
        let a = random_hermitian(&mut rng, 2);
        let b = random_hermitian(&mut rng, 3);
        let cm = random_hermitian(&mut rng, 2);
        let d = random_hermitian(&mut rng, 3);
        let lhs = &tensor(&a, &b) * &tensor(&cm, &d);
        let rhs = tensor(&(&a * &cm), &(&b * &d));
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn partial_trace_bell_state() {
        let s = 1.0 / 2f64.sqrt();
        let phi = [c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)];
        let rho = CMatrix::outer(&phi);
        let red = partial_trace(&rho, &[2, 2], &[0]).unwrap();
        assert!(red.max_abs_diff(&CMatrix::diag(&[0.5, 0.5])) < 1e-15);
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = seeded(5);
        let rho = crate::rng::random_density(&mut rng, 2);
        let sigma = crate::rng::random_density(&mut rng, 3);
        let joint = tensor(rho.matrix(), sigma.matrix());
        let first = partial_trace(&joint, &[2, 3], &[0]).unwrap();
        assert!(first.max_abs_diff(rho.matrix()) < 1e-14);
        let second = partial_trace(&joint, &[2, 3], &[1]).unwrap();
        assert!(second.max_abs_diff(sigma.matrix()) < 1e-14);
    }

    #[test]
    fn partial_trace_preserves_trace_by_index_sum() {
        let mut rng = seeded(8);
        let rho = crate::rng::random_density(&mut rng, 4);
        let red = partial_trace(rho.matrix(), &[2, 2], &[1]).unwrap();
        // oracle: Tr by summing every diagonal entry of the full matrix
        let mut full = c(0.0, 0.0);
        for i in 0..4 {
            full += rho.matrix()[(i, i)];
        }
        assert!((red.trace() - full).norm() < 1e-14);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let m = CMatrix::identity(4);
        assert!(partial_trace(&m, &[2, 3], &[0]).is_err());
        assert!(partial_trace(&m, &[2, 2], &[2]).is_err());
    }

    #[test]
    fn partial_trace_keep_order_is_canonical() {
        let mut rng = seeded(21);
        let a = crate::rng::random_density(&mut rng, 2);
        let b = crate::rng::random_density(&mut rng, 3);
        let cc = crate::rng::random_density(&mut rng, 2);
        let joint = tensor_all([a.matrix(), b.matrix(), cc.matrix()]);
        let ac = partial_trace(&joint, &[2, 3, 2], &[2, 0]).unwrap();
        assert!(ac.max_abs_diff(&tensor(a.matrix(), cc.matrix())) < 1e-14);
    }

    #[test]
    fn eig_diagonal_and_pauli() {
        let e = hermitian_eig(&CMatrix::diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.values, vec![3.0, 2.0, 1.0]);

        let e = hermitian_eig(&pauli_x()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15);
        assert!((e.values[1] + 1.0).abs() < 1e-15);
        let plus = e.vectors.col(0);
        // up to phase, |+> = (1, 1)/sqrt 2
        let overlap = (plus[0] + plus[1]).norm() / 2f64.sqrt();
        assert!((overlap - 1.0).abs() < 1e-12);
        let minus = e.vectors.col(1);
        let overlap = (minus[0] - minus[1]).norm() / 2f64.sqrt();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = seeded(1);
        for d in [1, 2, 3, 5, 8, 16] {
            let h = random_hermitian(&mut rng, d);
            let e = hermitian_eig(&h).unwrap();
            assert!(frobenius_distance(&e.reconstruct(), &h).unwrap() < 1e-9 * h.frobenius_norm().max(1.0));
            let vv = e.vectors.adjoint_mul(&e.vectors);
            assert!(frobenius_distance(&vv, &CMatrix::identity(d)).unwrap() < tol::EIG_TOL);
            assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn eig_handles_degenerate_spectrum() {
        let e = hermitian_eig(&CMatrix::identity(4)).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);
        let h = CMatrix::from_real(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        let e = hermitian_eig(&h).unwrap();
        assert!((e.values[0] - 2.0).abs() < 1e-14 && (e.values[1] - 2.0).abs() < 1e-14);
        assert!(e.values[2].abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = CMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(hermitian_eig(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn frobenius_distance_cases() {
        let a = CMatrix::diag(&[1.0, 0.0]);
        let b = CMatrix::diag(&[0.0, 1.0]);
        assert_eq!(frobenius_distance(&a, &a).unwrap(), 0.0);
        assert!((frobenius_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(frobenius_distance(&a, &CMatrix::identity(3)).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(CMatrix::diag(&[0.5, 0.5])).is_ok());
        assert!(matches!(
            DensityMatrix::new(CMatrix::diag(&[1.0, 1.0])),
            Err(Error::InvalidTrace(_))
        ));
        assert!(matches!(
            DensityMatrix::new(CMatrix::diag(&[1.1, -0.1])),
            Err(Error::NotPsd(_))
        ));
        let m = CMatrix::from_real(2, 2, &[0.5, 0.1, 0.0, 0.5]).unwrap();
        assert!(matches!(DensityMatrix::new(m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn density_matrix_clips_boundary_eigenvalues() {
        let rho = DensityMatrix::new(CMatrix::diag(&[1.0 + 5e-11, -5e-11])).unwrap();
        assert!(rho.min_eigenvalue() >= 0.0);
        assert!((rho.matrix().trace().re - 1.0).abs() < 1e-15);
        assert!(rho.matrix()[(1, 1)].re >= 0.0);
    }
}
