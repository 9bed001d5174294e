//! Dense complex matrices and the structural operators built on them.
//!
//! Storage is row-major. Multi-system operators use a left-to-right tensor
//! factor convention: for `SystemDims([d0, d1, ..])` the basis index of
//! `|i0 i1 ..>` is `i0 * (d1 * d2 ..) + i1 * (d2 ..) + ..`.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default tolerance for Hermiticity checks (max-abs entry of `M - M^dag`).
pub const HERMITIAN_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for col in 0..self.cols {
                let z = self[(r, col)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols.max(1),
                col: k % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::from_vec(n, m, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for col in 0..cols {
                data.push(f(r, col));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = c(v, 0.0);
        }
        m
    }

    /// `|i><j|` in dimension `d`.
    pub fn unit(d: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(d, d);
        m[(i, j)] = ONE;
        m
    }

    /// Outer product `|u><v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, col)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, col| self[(col, r)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, col| self[(col, r)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(c(s, 0.0))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `tr[self * other]` without forming the product.
    pub fn trace_product(&self, other: &Self) -> C64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = ZERO;
        for r in 0..self.rows {
            for k in 0..self.cols {
                acc += self.data[r * self.cols + k] * other.data[k * other.cols + r];
            }
        }
        acc
    }

    /// Kronecker product; `self` carries the major index.
    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut out = Self::zeros(rows, cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..other.rows {
                    let dst = (i * other.rows + k) * cols + j * other.cols;
                    let src = k * other.cols;
                    for l in 0..other.cols {
                        out.data[dst + l] = a * other.data[src + l];
                    }
                }
            }
        }
        out
    }

    /// Largest entry-wise modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entry-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Max-abs entry of `M - M^dag`; infinite for non-square input.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0_f64;
        for r in 0..self.rows {
            for col in r..self.cols {
                worst = worst.max((self[(r, col)] - self[(col, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// `(M + M^dag) / 2`.
    pub fn hermitian_part(&self) -> Self {
        let adj = self.adjoint();
        (self + &adj).scale_real(0.5)
    }

    fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.rows, self.cols, |r, col| self[(r, col)])
    }

    fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, col| m[(r, col)])
    }

    /// Spectral decomposition of a Hermitian matrix: eigenvalues ascending and
    /// the matching eigenvectors as columns.
    pub fn eigh(&self, tol: f64) -> Result<Eigh> {
        let defect = self.hermitian_defect();
        if defect > tol {
            return Err(Error::NotHermitian { defect });
        }
        let sym = self.hermitian_part();
        let eig = SymmetricEigen::new(sym.to_nalgebra());
        let mut order: Vec<usize> = (0..self.rows).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = Self::from_nalgebra(&eig.eigenvectors.select_columns(order.iter()));
        Ok(Eigh { values, vectors })
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn eigvalsh(&self, tol: f64) -> Result<Vec<f64>> {
        let defect = self.hermitian_defect();
        if defect > tol {
            return Err(Error::NotHermitian { defect });
        }
        let mut v: Vec<f64> = self
            .hermitian_part()
            .to_nalgebra()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        v.sort_by(f64::total_cmp);
        Ok(v)
    }

    pub fn min_eigenvalue(&self, tol: f64) -> Result<f64> {
        Ok(self.eigvalsh(tol)?.first().copied().unwrap_or(0.0))
    }

    pub fn max_eigenvalue(&self, tol: f64) -> Result<f64> {
        Ok(self.eigvalsh(tol)?.last().copied().unwrap_or(0.0))
    }

    /// Trace norm of a Hermitian matrix.
    pub fn trace_norm_hermitian(&self, tol: f64) -> Result<f64> {
        Ok(self.eigvalsh(tol)?.iter().map(|v| v.abs()).sum())
    }
}

/// Result of [`ComplexMatrix::eigh`].
#[derive(Clone, Debug)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: ComplexMatrix,
}

impl Eigh {
    /// Rebuilds `V f(diag) V^dag`.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&v| f(v)).collect();
        ComplexMatrix::from_fn(n, n, |r, col| {
            (0..n)
                .filter(|&k| fv[k] != 0.0)
                .map(|k| self.vectors[(r, k)] * fv[k] * self.vectors[(col, k)].conj())
                .sum()
        })
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (r, col): (usize, usize)) -> &C64 {
        debug_assert!(r < self.rows && col < self.cols);
        &self.data[r * self.cols + col]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, col): (usize, usize)) -> &mut C64 {
        debug_assert!(r < self.rows && col < self.cols);
        &mut self.data[r * self.cols + col]
    }
}

macro_rules! elementwise {
    ($tr:ident, $method:ident, $op:tt, $tra:ident, $ma:ident) => {
        impl $tr<&ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
                ComplexMatrix {
                    rows: self.rows,
                    cols: self.cols,
                    data: self.data.iter().zip(&rhs.data).map(|(a, b)| a $op b).collect(),
                }
            }
        }

        impl $tr for ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                (&self).$method(&rhs)
            }
        }

        impl $tra<&ComplexMatrix> for ComplexMatrix {
            fn $ma(&mut self, rhs: &ComplexMatrix) {
                assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
                for (a, b) in self.data.iter_mut().zip(&rhs.data) {
                    *a = *a $op b;
                }
            }
        }
    };
}

elementwise!(Add, add, +, AddAssign, add_assign);
elementwise!(Sub, sub, -, SubAssign, sub_assign);

impl Mul<&ComplexMatrix> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        self.matmul(&rhs)
    }
}

impl Mul<f64> for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: f64) -> ComplexMatrix {
        self.scale_real(rhs)
    }
}

impl Mul<f64> for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: f64) -> ComplexMatrix {
        self.scale_real(rhs)
    }
}

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale_real(-1.0)
    }
}

/// Ordered subsystem dimensions of a multi-system operator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemDims(Vec<usize>);

impl SystemDims {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self> {
        let dims = dims.into();
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "subsystem dimensions must be positive, got {dims:?}"
            )));
        }
        Ok(Self(dims))
    }

    pub fn total(&self) -> usize {
        self.0.iter().product()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.0.len()];
        for k in (0..self.0.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.0[k + 1];
        }
        s
    }

    /// Flat indices of all basis states, enumerated over `systems` (major to
    /// minor) with every other digit set to zero.
    fn offsets(&self, systems: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut out = vec![0usize];
        for &s in systems {
            let mut next = Vec::with_capacity(out.len() * self.0[s]);
            for &base in &out {
                for digit in 0..self.0[s] {
                    next.push(base + digit * strides[s]);
                }
            }
            out = next;
        }
        out
    }

    fn check_square(&self, m: &ComplexMatrix) -> Result<()> {
        if !m.is_square() || m.rows() != self.total() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix against subsystem dims {:?}",
                m.rows(),
                m.cols(),
                self.0
            )));
        }
        Ok(())
    }
}

/// Traces out every subsystem not listed in `keep`. Kept systems retain their
/// original relative order.
pub fn partial_trace(m: &ComplexMatrix, dims: &SystemDims, keep: &[usize]) -> Result<ComplexMatrix> {
    dims.check_square(m)?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidArgument(format!(
            "keep set {keep:?} out of range for {} systems",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !kept.contains(k)).collect();
    let keep_off = dims.offsets(&kept);
    let trace_off = dims.offsets(&traced);
    let n = keep_off.len();
    let mut out = ComplexMatrix::zeros(n, n);
    for (r, &kr) in keep_off.iter().enumerate() {
        for (col, &kc) in keep_off.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &trace_off {
                acc += m[(kr + t, kc + t)];
            }
            out[(r, col)] = acc;
        }
    }
    Ok(out)
}

/// Reorders tensor factors: output factor `k` is input factor `perm[k]`.
pub fn permute_systems(m: &ComplexMatrix, dims: &SystemDims, perm: &[usize]) -> Result<ComplexMatrix> {
    dims.check_square(m)?;
    let mut sorted = perm.to_vec();
    sorted.sort_unstable();
    if sorted != (0..dims.len()).collect::<Vec<_>>() {
        return Err(Error::InvalidArgument(format!("{perm:?} is not a permutation")));
    }
    // Enumerating the input offsets in the permuted order yields, at position
    // `a`, the old flat index of new basis state `a`.
    let map = dims.offsets(perm);
    let n = map.len();
    Ok(ComplexMatrix::from_fn(n, n, |a, b| m[(map[a], map[b])]))
}

/// Kronecker product of a list of operators.
pub fn tensor_all(factors: &[&ComplexMatrix]) -> ComplexMatrix {
    factors
        .iter()
        .fold(ComplexMatrix::identity(1), |acc, f| acc.kron(f))
}

pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

/// Exponent for [`psd_power`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsdExponent {
    Sqrt,
    /// Pseudo-inverse square root: eigenvalues at or below `tol` map to zero.
    InvSqrt,
}

/// `m^{1/2}` or the pseudo-inverse `m^{-1/2}` of a PSD matrix.
pub fn psd_power(m: &ComplexMatrix, exponent: PsdExponent, tol: f64) -> Result<ComplexMatrix> {
    let eig = m.eigh(tol.max(HERMITIAN_TOL))?;
    if let Some(&lo) = eig.values.first() {
        if lo < -tol {
            return Err(Error::NegativeEigenvalue { value: lo, tol });
        }
    }
    Ok(match exponent {
        PsdExponent::Sqrt => eig.reconstruct(|v| if v > 0.0 { v.sqrt() } else { 0.0 }),
        PsdExponent::InvSqrt => eig.reconstruct(|v| if v > tol { 1.0 / v.sqrt() } else { 0.0 }),
    })
}

/// Operators on `C^d (x) C^d` that recur throughout.
#[derive(Clone, Debug)]
pub struct StructuralOperators {
    /// Unnormalized maximally entangled operator `sum_ij |ii><jj|`.
    pub phi: ComplexMatrix,
    /// `F |ij> = |ji>`.
    pub swap: ComplexMatrix,
    /// `(I + F) / 2`.
    pub p_sym: ComplexMatrix,
    /// `(I - F) / 2`.
    pub p_anti: ComplexMatrix,
}

pub fn structural_operators(d: usize) -> StructuralOperators {
    let phi = max_entangled(d);
    let swap = swap_operator(d, d);
    let id = ComplexMatrix::identity(d * d);
    let p_sym = (&id + &swap).scale_real(0.5);
    let p_anti = (&id - &swap).scale_real(0.5);
    StructuralOperators {
        phi,
        swap,
        p_sym,
        p_anti,
    }
}

/// `sum_ij |ii><jj|` on `C^d (x) C^d`.
pub fn max_entangled(d: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] = ONE;
        }
    }
    m
}

/// Swap `C^{d1} (x) C^{d2} -> C^{d2} (x) C^{d1}`, `|a b> -> |b a>`.
pub fn swap_operator(d1: usize, d2: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d1 * d2, d1 * d2);
    for a in 0..d1 {
        for b in 0..d2 {
            m[(b * d1 + a, a * d2 + b)] = ONE;
        }
    }
    m
}
