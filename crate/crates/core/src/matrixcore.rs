//! Small dense complex matrices.
//!
//! Every matrix in the model is at most `(M_A * N_A) x (M_A * N_A)`, so the
//! routines here favour exactness checks over blocking or sparsity. Storage is
//! a `nalgebra` column-major matrix of `Complex64`; the public surface only
//! exposes row/column indexing.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::MatrixError;

pub type C64 = Complex64;

/// Entrywise tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues in `[-PSD_CLAMP_TOL, 0]` are treated as zero.
pub const PSD_CLAMP_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self::identity(n).scale(s)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        Self {
            inner: DMatrix::from_fn(rows, cols, |r, c| f(r, c)),
        }
    }

    /// Builds a matrix from entries listed row by row.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[C64]) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::DimensionMismatch {
                expected: (rows, cols),
                found: (data.len(), 1),
            });
        }
        let m = Self {
            inner: DMatrix::from_row_slice(rows, cols, data),
        };
        m.ensure_finite()?;
        Ok(m)
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |r, c| {
            if r == c {
                C64::new(diag[r], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub(crate) fn from_inner(inner: DMatrix<C64>) -> Self {
        Self { inner }
    }

    pub(crate) fn inner(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.inner[(r, c)]
    }

    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.inner[(r, c)] = v;
    }

    pub fn adjoint(&self) -> Self {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            inner: self.inner.map(|z| z * s),
        }
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self {
            inner: self.inner.map(|z| z * s),
        }
    }

    pub fn trace(&self) -> C64 {
        self.inner.trace()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.inner.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.inner.shape(), other.inner.shape());
        self.inner
            .iter()
            .zip(other.inner.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<(), MatrixError> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(MatrixError::NonFinite)
        }
    }

    pub fn is_zero(&self) -> bool {
        self.inner.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// `self * self^H`, returned as a Hermitian PSD matrix.
    pub fn gram(&self) -> HermitianMatrix {
        HermitianMatrix::from_raw(self * &self.adjoint())
    }

    /// Lower-triangular `L` with a real nonnegative diagonal and
    /// `L L^H = self self^H`, from Gram-Schmidt on the rows.
    pub fn lower_triangular_factor(&self) -> Self {
        let (m, n) = (self.rows(), self.cols());
        let mut basis: Vec<Vec<C64>> = Vec::new();
        let mut slot: Vec<Option<usize>> = Vec::with_capacity(m);
        let mut l = DMatrix::zeros(m, m);
        for r in 0..m {
            let mut v: Vec<C64> = (0..n).map(|j| self.inner[(r, j)]).collect();
            // Two projection passes keep the basis orthogonal to rounding.
            for _ in 0..2 {
                for (c, e) in slot.iter().enumerate() {
                    let Some(b) = e else { continue };
                    let coef: C64 = v.iter().zip(&basis[*b]).map(|(x, y)| x * y.conj()).sum();
                    l[(r, c)] += coef;
                    for (x, y) in v.iter_mut().zip(&basis[*b]) {
                        *x -= coef * y;
                    }
                }
            }
            let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.0 && r < n {
                l[(r, r)] = C64::new(norm, 0.0);
                basis.push(v.iter().map(|x| x / norm).collect());
                slot.push(Some(basis.len() - 1));
            } else {
                slot.push(None);
            }
        }
        Self { inner: l }
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(parts: &[&ComplexMatrix]) -> Result<Self, MatrixError> {
        let cols = parts.first().map_or(0, |p| p.cols());
        let rows: usize = parts.iter().map(|p| p.rows()).sum();
        let mut out = DMatrix::zeros(rows, cols);
        let mut r0 = 0;
        for p in parts {
            if p.cols() != cols {
                return Err(MatrixError::DimensionMismatch {
                    expected: (p.rows(), cols),
                    found: (p.rows(), p.cols()),
                });
            }
            out.view_mut((r0, 0), (p.rows(), cols)).copy_from(&p.inner);
            r0 += p.rows();
        }
        Ok(Self { inner: out })
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self {
            inner: self.inner.view((r0, c0), (rows, cols)).into_owned(),
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<(), MatrixError> {
        if self.inner.shape() != other.inner.shape() {
            return Err(MatrixError::DimensionMismatch {
                expected: self.inner.shape(),
                found: other.inner.shape(),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, MatrixError> {
        self.check_same_shape(other)?;
        Ok(Self {
            inner: &self.inner + &other.inner,
        })
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self, MatrixError> {
        if self.cols() != other.rows() {
            return Err(MatrixError::DimensionMismatch {
                expected: (self.cols(), other.cols()),
                found: (other.rows(), other.cols()),
            });
        }
        Ok(Self {
            inner: &self.inner * &other.inner,
        })
    }
}

impl<'a> Mul<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner * &rhs.inner,
        }
    }
}

impl<'a> Add<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl<'a> Sub<&'a ComplexMatrix> for &'a ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &'a ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }
}

/// A square complex matrix equal to its conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(ComplexMatrix);

impl HermitianMatrix {
    /// Accepts `m` if it is Hermitian to within [`HERMITIAN_TOL`] entrywise,
    /// then symmetrizes it exactly.
    pub fn new(m: ComplexMatrix) -> Result<Self, MatrixError> {
        if !m.is_square() {
            return Err(MatrixError::DimensionMismatch {
                expected: (m.rows(), m.rows()),
                found: (m.rows(), m.cols()),
            });
        }
        m.ensure_finite()?;
        let dev = m.max_abs_diff(&m.adjoint());
        if dev > HERMITIAN_TOL {
            return Err(MatrixError::NotHermitian { deviation: dev });
        }
        Ok(Self::from_raw(m))
    }

    /// Symmetrizes without checking. Used for products that are Hermitian in
    /// exact arithmetic.
    pub(crate) fn from_raw(m: ComplexMatrix) -> Self {
        let adj = m.adjoint();
        Self((&m + &adj).scale(0.5))
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self(ComplexMatrix::scaled_identity(n, s))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self(ComplexMatrix::from_real_diagonal(diag))
    }

    pub fn zeros(n: usize) -> Self {
        Self(ComplexMatrix::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.0.get(r, c)
    }

    /// Real part of the trace; the imaginary part is zero by symmetry.
    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_raw(&self.0 - &other.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn add_scaled_identity(&self, s: f64) -> Self {
        let mut m = self.0.clone();
        for d in 0..self.dim() {
            let v = m.get(d, d);
            m.set(d, d, v + s);
        }
        Self(m)
    }

    /// `a * self * a^H`.
    pub fn congruence(&self, a: &ComplexMatrix) -> Self {
        Self::from_raw(&(a * &self.0) * &a.adjoint())
    }

    /// Lower-triangular `L` with `self = L L^H`.
    pub fn cholesky(&self) -> Result<ComplexMatrix, MatrixError> {
        let n = self.dim();
        let a = self.0.inner();
        let mut l = DMatrix::<C64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(MatrixError::NotPositiveDefinite);
            }
            let ljj = d.sqrt();
            l[(j, j)] = C64::new(ljj, 0.0);
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(ComplexMatrix::from_inner(l))
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    /// Ascending eigenvalues and the matching unitary eigenvector matrix.
    pub fn eigen(&self) -> (Vec<f64>, ComplexMatrix) {
        let eig = SymmetricEigen::new(self.0.inner().clone());
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.dim(), self.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
        (values, ComplexMatrix::from_inner(vectors))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().0.first().copied().unwrap_or(0.0)
    }

    pub fn inverse(&self) -> Result<Self, MatrixError> {
        let x = solve_hpd(self, &ComplexMatrix::identity(self.dim()))?;
        Ok(Self::from_raw(x))
    }

    /// Block-diagonal matrix with `blocks` along the diagonal.
    pub fn block_diag(blocks: &[HermitianMatrix]) -> Self {
        let n: usize = blocks.iter().map(|b| b.dim()).sum();
        let mut out = DMatrix::zeros(n, n);
        let mut o = 0;
        for b in blocks {
            out.view_mut((o, o), (b.dim(), b.dim())).copy_from(b.0.inner());
            o += b.dim();
        }
        Self(ComplexMatrix::from_inner(out))
    }
}

/// `log2 det(m)` for Hermitian positive-definite `m`, via Cholesky.
pub fn logdet2(m: &HermitianMatrix) -> Result<f64, MatrixError> {
    let l = m.cholesky()?;
    Ok((0..m.dim()).map(|d| 2.0 * l.get(d, d).re.log2()).sum())
}

/// Unique PSD square root of a Hermitian PSD matrix.
pub fn hermitian_sqrt(m: &HermitianMatrix) -> Result<HermitianMatrix, MatrixError> {
    let (values, vectors) = m.eigen();
    let mut roots = Vec::with_capacity(values.len());
    for &v in &values {
        if v < -PSD_CLAMP_TOL {
            return Err(MatrixError::NotPsd { min_eigenvalue: v });
        }
        roots.push(v.max(0.0).sqrt());
    }
    let d = HermitianMatrix::from_real_diagonal(&roots);
    Ok(d.congruence(&vectors))
}

/// Solves `m x = b` for Hermitian positive-definite `m`.
pub fn solve_hpd(m: &HermitianMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, MatrixError> {
    if b.rows() != m.dim() {
        return Err(MatrixError::DimensionMismatch {
            expected: (m.dim(), b.cols()),
            found: (b.rows(), b.cols()),
        });
    }
    let l = m.cholesky()?;
    let n = m.dim();
    let mut x = b.inner().clone();
    for c in 0..b.cols() {
        // forward: L y = b
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l.get(i, k) * x[(k, c)];
            }
            x[(i, c)] = s / l.get(i, i).re;
        }
        // backward: L^H x = y
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l.get(k, i).conj() * x[(k, c)];
            }
            x[(i, c)] = s / l.get(i, i).re;
        }
    }
    Ok(ComplexMatrix::from_inner(x))
}

/// `L^{-1} b` for lower-triangular `L` with real positive diagonal.
pub(crate) fn forward_substitute(l: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let n = l.rows();
    let mut x = b.inner().clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l.get(i, k) * x[(k, c)];
            }
            x[(i, c)] = s / l.get(i, i).re;
        }
    }
    ComplexMatrix::from_inner(x)
}
