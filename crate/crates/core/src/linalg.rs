//! Dense complex matrices and Hermitian operators.
//!
//! Everything in the crate lives on spaces of dimension at most 64, so a
//! row-major `Vec<Complex64>` is the only storage format. Spectral routines
//! delegate to `nalgebra`'s Hermitian eigensolver.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative anti-Hermitian residual allowed in a [`HermitianOperator`].
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Most negative eigenvalue still treated as positive semidefinite.
pub const PSD_TOL: f64 = 1e-9;
/// Relative accuracy expected from the eigensolver.
pub const EIG_TOL: f64 = 1e-9;
/// Allowed deviation of a state's trace (or norm) from one.
pub const TRACE_TOL: f64 = 1e-10;
/// Entrywise tolerance for POVM completeness.
pub const COMPLETENESS_TOL: f64 = 1e-9;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, PartialEq, Serialize, Deserialize)]
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
            for c in 0..self.cols {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { ONE } else { ZERO })
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

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |r, c| if r == c { C64::new(diag[r], 0.0) } else { ZERO })
    }

    /// Row-major construction from nested rows of equal length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::dim("ragged rows"));
        }
        Self::from_vec(r, c, rows.concat())
    }

    /// |v⟩⟨w|
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        Self::from_fn(v.len(), w.len(), |r, c| v[r] * w[c].conj())
    }

    /// |v⟩⟨v|
    pub fn projector(v: &[C64]) -> Self {
        Self::outer(v, v)
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

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: C64, other: &Self) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::dim(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// Kronecker product; the first factor indexes the most significant block.
    pub fn kron(&self, other: &Self) -> Self {
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut data = Vec::with_capacity(rows * cols);
        for ra in 0..self.rows {
            for rb in 0..other.rows {
                for ca in 0..self.cols {
                    let a = self.data[ra * self.cols + ca];
                    for cb in 0..other.cols {
                        data.push(a * other.data[rb * other.cols + cb]);
                    }
                }
            }
        }
        Self { rows, cols, data }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// (M + M†)/2
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |r, c| (self[(r, c)] + self[(c, r)].conj()) * 0.5)
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::dim(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

// The operator impls panic on shape mismatch; fallible code uses `try_*`.
impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: Self) -> ComplexMatrix {
        self.try_add(rhs).expect("shape mismatch in matrix addition")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: Self) -> ComplexMatrix {
        self.try_sub(rhs).expect("shape mismatch in matrix subtraction")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: Self) -> ComplexMatrix {
        self.try_mul(rhs).expect("shape mismatch in matrix product")
    }
}

pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kron(b)
}

/// tr(AB) without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
    if a.cols != b.rows || a.rows != b.cols {
        return Err(Error::dim(format!(
            "tr(AB) needs A: n x m and B: m x n, got {}x{} and {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut acc = ZERO;
    for j in 0..a.rows {
        for k in 0..a.cols {
            acc += a.data[j * a.cols + k] * b.data[k * b.cols + j];
        }
    }
    Ok(acc)
}

/// A square matrix equal to its adjoint within [`HERMITIAN_TOL`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix", into = "ComplexMatrix")]
pub struct HermitianOperator(ComplexMatrix);

impl TryFrom<ComplexMatrix> for HermitianOperator {
    type Error = Error;
    fn try_from(m: ComplexMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<HermitianOperator> for ComplexMatrix {
    fn from(h: HermitianOperator) -> Self {
        h.0
    }
}

impl HermitianOperator {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim(format!("Hermitian operator must be square, got {}x{}", m.rows, m.cols)));
        }
        if m.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("non-finite matrix entry".into()));
        }
        let skew = (&m - &m.adjoint()).frobenius_norm();
        if skew > HERMITIAN_TOL * m.frobenius_norm() {
            return Err(Error::Numerical(format!("matrix is not Hermitian (‖M−M†‖_F = {skew:.3e})")));
        }
        Ok(Self(m))
    }

    /// Projects onto the Hermitian part; never fails on square finite input.
    pub fn from_hermitian_part(m: &ComplexMatrix) -> Self {
        Self(m.hermitian_part())
    }

    pub fn identity(n: usize) -> Self {
        Self(ComplexMatrix::identity(n))
    }

    pub fn zeros(n: usize) -> Self {
        Self(ComplexMatrix::zeros(n, n))
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        Self(ComplexMatrix::from_real_diag(diag))
    }

    pub fn projector(v: &[C64]) -> Self {
        Self(ComplexMatrix::projector(v)).symmetrized()
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale_real(s))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(Self(self.0.try_add(&other.0)?))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(Self(self.0.try_sub(&other.0)?))
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kron(&other.0))
    }

    /// O − (tr O / dim)·I
    pub fn traceless_part(&self) -> Self {
        let n = self.dim();
        let shift = self.trace() / n as f64;
        let mut m = self.0.clone();
        for i in 0..n {
            m[(i, i)] -= shift;
        }
        Self(m)
    }

    /// ⟨v|O|v⟩, real for Hermitian O.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        let n = self.dim();
        let mut acc = ZERO;
        for r in 0..n {
            let mut row = ZERO;
            for c in 0..n {
                row += self.0.data[r * n + c] * v[c];
            }
            acc += v[r].conj() * row;
        }
        acc.re
    }

    /// tr(self · other) for two Hermitian operators; the imaginary part is dropped.
    pub fn trace_with(&self, other: &Self) -> Result<f64> {
        Ok(trace_product(&self.0, &other.0)?.re)
    }

    fn symmetrized(self) -> Self {
        Self(self.0.hermitian_part())
    }

    /// Eigenvalues in ascending order and matching unit eigenvectors (columns).
    pub fn eigh(&self) -> Result<(Vec<f64>, Vec<Vec<C64>>)> {
        let sym = self.0.hermitian_part().to_nalgebra();
        let eig = sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        let values = eig.eigenvalues;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("eigensolver produced non-finite values".into()));
        }
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let vals = order.iter().map(|&i| values[i]).collect();
        let vecs = order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
            .collect();
        Ok((vals, vecs))
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let sym = self.0.hermitian_part().to_nalgebra();
        let mut vals: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("eigensolver produced non-finite values".into()));
        }
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(*self.eigenvalues()?.last().expect("nonempty spectrum"))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    /// Largest |λ|.
    pub fn operator_norm(&self) -> Result<f64> {
        let vals = self.eigenvalues()?;
        Ok(vals.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
    }

    pub fn is_psd(&self) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -PSD_TOL)
    }

    /// Coordinates in the orthonormal Hilbert–Schmidt basis of Hermitian
    /// matrices; see [`hermitian_basis_element`] for the ordering.
    pub fn coords(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for k in 0..n {
            out.push(self.0[(k, k)].re);
        }
        for k in 0..n {
            for l in (k + 1)..n {
                let z = self.0[(k, l)];
                out.push(std::f64::consts::SQRT_2 * z.re);
                out.push(std::f64::consts::SQRT_2 * z.im);
            }
        }
        out
    }

    pub fn from_coords(n: usize, coords: &[f64]) -> Result<Self> {
        if coords.len() != n * n {
            return Err(Error::dim(format!("{} coordinates for a {n}x{n} operator", coords.len())));
        }
        let mut m = ComplexMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = C64::new(coords[k], 0.0);
        }
        let mut idx = n;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for k in 0..n {
            for l in (k + 1)..n {
                let z = C64::new(coords[idx] * h, coords[idx + 1] * h);
                m[(k, l)] = z;
                m[(l, k)] = z.conj();
                idx += 2;
            }
        }
        Ok(Self(m))
    }
}

/// The `index`-th element of the orthonormal Hermitian basis on C^n:
/// first the n diagonal units |k⟩⟨k|, then for each pair k < l in row-major
/// order (|k⟩⟨l| + |l⟩⟨k|)/√2 followed by (i|k⟩⟨l| − i|l⟩⟨k|)/√2.
pub fn hermitian_basis_element(n: usize, index: usize) -> HermitianOperator {
    let mut coords = vec![0.0; n * n];
    coords[index] = 1.0;
    HermitianOperator::from_coords(n, &coords).expect("basis index in range")
}

pub fn max_eigenvalue(h: &HermitianOperator) -> Result<f64> {
    h.max_eigenvalue()
}

pub mod pauli {
    use super::{ComplexMatrix, HermitianOperator, C64, I, ONE, ZERO};

    pub fn x() -> HermitianOperator {
        HermitianOperator(ComplexMatrix { rows: 2, cols: 2, data: vec![ZERO, ONE, ONE, ZERO] })
    }

    pub fn y() -> HermitianOperator {
        HermitianOperator(ComplexMatrix { rows: 2, cols: 2, data: vec![ZERO, -I, I, ZERO] })
    }

    pub fn z() -> HermitianOperator {
        HermitianOperator(ComplexMatrix { rows: 2, cols: 2, data: vec![ONE, ZERO, ZERO, -ONE] })
    }

    pub fn id() -> HermitianOperator {
        HermitianOperator::identity(2)
    }

    /// I, X, Y, Z for codes 0..4.
    pub fn by_code(code: u8) -> HermitianOperator {
        match code {
            0 => id(),
            1 => x(),
            2 => y(),
            3 => z(),
            _ => panic!("invalid Pauli code {code}"),
        }
    }

    pub fn hadamard() -> ComplexMatrix {
        let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        ComplexMatrix { rows: 2, cols: 2, data: vec![h, h, h, -h] }
    }

    pub fn phase_s() -> ComplexMatrix {
        ComplexMatrix { rows: 2, cols: 2, data: vec![ONE, ZERO, ZERO, I] }
    }
}

/// Random unitary via QR of a complex Gaussian matrix.
pub fn random_unitary<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    use rand_distr_free::standard_normal;
    let g = DMatrix::from_fn(n, n, |_, _| C64::new(standard_normal(rng), standard_normal(rng)));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    // Fix column phases so the distribution is Haar.
    let mut q = q;
    for c in 0..n {
        let d = r[(c, c)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for rr in 0..n {
            q[(rr, c)] *= ph;
        }
    }
    ComplexMatrix::from_nalgebra(&q)
}

/// Random Hermitian matrix with i.i.d. Gaussian entries (GUE up to scale).
pub fn random_hermitian<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianOperator {
    use rand_distr_free::standard_normal;
    let g = ComplexMatrix::from_fn(n, n, |_, _| C64::new(standard_normal(rng), standard_normal(rng)));
    HermitianOperator::from_hermitian_part(&g)
}

/// Haar-random unit vector.
pub fn random_state_vector<R: rand::Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    use rand_distr_free::standard_normal;
    let v: Vec<C64> = (0..n).map(|_| C64::new(standard_normal(rng), standard_normal(rng))).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

mod rand_distr_free {
    /// Box–Muller standard normal draw.
    pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Pairwise summation over slice order; result depends only on the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}
