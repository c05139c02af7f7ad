//! Dense complex linear algebra for the small spaces used here (dimensions 2, 4, 8 and 16).
//!
//! Two-system spaces are ordered A-major: `|a b⟩ = |a⟩ ⊗ |b⟩` has index `a * dim_b + b`.
//! The single-system basis order is `|0⟩, |1⟩, |a⟩, |G⟩`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

pub use num_complex::Complex64 as C64;

use crate::error::{invalid, Result};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

const JACOBI_MAX_SWEEPS: usize = 60;

/// Eigenvalues in `[-NEGATIVE_EIGEN_CLAMP, 0)` are treated as exact zeros.
pub const NEGATIVE_EIGEN_CLAMP: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector {
    entries: Vec<C64>,
}

impl ComplexVector {
    pub fn new(entries: Vec<C64>) -> Self {
        assert!(!entries.is_empty(), "vector dimension must be positive");
        Self { entries }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![ZERO; dim])
    }

    /// The `k`-th canonical basis vector.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim, "basis index {k} out of range for dimension {dim}");
        let mut v = Self::zeros(dim);
        v.entries[k] = ONE;
        v
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self::new(values.iter().map(|&x| c(x, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(invalid!("cannot normalize a vector of norm {n}"));
        }
        Ok(self.scale(c(1.0 / n, 0.0)))
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> C64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, k: C64) -> Self {
        Self::new(self.entries.iter().map(|z| z * k).collect())
    }

    /// `|self⟩⟨other|`
    pub fn outer(&self, other: &Self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim(), other.dim());
        for (i, a) in self.entries.iter().enumerate() {
            for (j, b) in other.entries.iter().enumerate() {
                m[(i, j)] = a * b.conj();
            }
        }
        m
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for ComplexVector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.entries[i]
    }
}

impl IndexMut<usize> for ComplexVector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.entries[i]
    }
}

impl Add for &ComplexVector {
    type Output = ComplexVector;
    fn add(self, rhs: &ComplexVector) -> ComplexVector {
        assert_eq!(self.dim(), rhs.dim());
        ComplexVector::new(
            self.entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Sub for &ComplexVector {
    type Output = ComplexVector;
    fn sub(self, rhs: &ComplexVector) -> ComplexVector {
        assert_eq!(self.dim(), rhs.dim());
        ComplexVector::new(
            self.entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        assert_eq!(
            data.len(),
            rows * cols,
            "data length does not match {rows}x{cols}"
        );
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_vec(rows, cols, vec![ZERO; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == m), "ragged rows");
        Self::from_vec(n, m, rows.iter().flatten().copied().collect())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let owned: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| c(x, 0.0)).collect())
            .collect();
        Self::from_rows(&owned)
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = c(v, 0.0);
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[ComplexVector]) -> Self {
        let rows = columns.first().map_or(0, ComplexVector::dim);
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.dim(), rows, "column {j} has the wrong dimension");
            for i in 0..rows {
                m[(i, j)] = col[i];
            }
        }
        m
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

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> ComplexVector {
        ComplexVector::new((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)];
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        Self::from_vec(
            self.rows,
            self.cols,
            self.data.iter().map(C64::conj).collect(),
        )
    }

    pub fn scale(&self, k: C64) -> Self {
        Self::from_vec(
            self.rows,
            self.cols,
            self.data.iter().map(|z| z * k).collect(),
        )
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square());
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "shape mismatch"
        );
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, v: &ComplexVector) -> ComplexVector {
        assert_eq!(self.cols, v.dim(), "matrix-vector dimension mismatch");
        let out = (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter().zip(v.entries()).map(|(a, b)| a * b).sum()
            })
            .collect();
        ComplexVector::new(out)
    }

    /// `max |H - H†|` entrywise.
    pub fn hermiticity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                err = err.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        err
    }

    /// `‖U†U − I‖_max`
    pub fn unitarity_error(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.rows))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// Hermitian, unit trace and positive semidefinite down to `-NEGATIVE_EIGEN_CLAMP`.
    pub fn is_density(&self, tol: f64) -> bool {
        if self.hermiticity_error() > tol || (self.trace() - ONE).norm() > tol {
            return false;
        }
        match hermitian_eig(self) {
            Ok(eig) => eig
                .values
                .first()
                .is_some_and(|&v| v >= -NEGATIVE_EIGEN_CLAMP),
            Err(_) => false,
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = ComplexMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        out
    }
}

impl Mul<&ComplexVector> for &ComplexMatrix {
    type Output = ComplexVector;
    fn mul(self, rhs: &ComplexVector) -> ComplexVector {
        self.mul_vec(rhs)
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch"
        );
        ComplexMatrix::from_vec(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch"
        );
        ComplexMatrix::from_vec(
            self.rows,
            self.cols,
            self.data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        self.scale(c(-1.0, 0.0))
    }
}

impl fmt::Display for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prec = f.precision().unwrap_or(6);
        for i in 0..self.rows {
            write!(f, "[")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{:+.*}{:+.*}i", prec, z.re, prec, z.im)?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

/// Kronecker product `a ⊗ b`, with `a` on the slow index.
pub fn tensor_product(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ia in 0..a.rows {
        for ja in 0..a.cols {
            let x = a[(ia, ja)];
            if x == ZERO {
                continue;
            }
            for ib in 0..b.rows {
                for jb in 0..b.cols {
                    out[(ia * b.rows + ib, ja * b.cols + jb)] = x * b[(ib, jb)];
                }
            }
        }
    }
    out
}

/// Kronecker product of two vectors, `|a⟩ ⊗ |b⟩`.
pub fn tensor_vec(a: &ComplexVector, b: &ComplexVector) -> ComplexVector {
    let mut out = Vec::with_capacity(a.dim() * b.dim());
    for x in a.entries() {
        for y in b.entries() {
            out.push(x * y);
        }
    }
    ComplexVector::new(out)
}

/// `Tr_B ρ` for `ρ` on an A-major `dim_a · dim_b` space.
pub fn partial_trace_b(rho: &ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<ComplexMatrix> {
    let n = dim_a * dim_b;
    if dim_a == 0 || dim_b == 0 || rho.rows() != n || rho.cols() != n {
        return Err(invalid!(
            "partial trace expects a {n}x{n} matrix, got {}x{}",
            rho.rows(),
            rho.cols()
        ));
    }
    let mut out = ComplexMatrix::zeros(dim_a, dim_a);
    for i in 0..dim_a {
        for j in 0..dim_a {
            out[(i, j)] = (0..dim_b)
                .map(|k| rho[(i * dim_b + k, j * dim_b + k)])
                .sum();
        }
    }
    Ok(out)
}

/// `Tr_A ρ` for `ρ` on an A-major `dim_a · dim_b` space.
pub fn partial_trace_a(rho: &ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<ComplexMatrix> {
    let n = dim_a * dim_b;
    if dim_a == 0 || dim_b == 0 || rho.rows() != n || rho.cols() != n {
        return Err(invalid!(
            "partial trace expects a {n}x{n} matrix, got {}x{}",
            rho.rows(),
            rho.cols()
        ));
    }
    let mut out = ComplexMatrix::zeros(dim_b, dim_b);
    for i in 0..dim_b {
        for j in 0..dim_b {
            out[(i, j)] = (0..dim_a)
                .map(|k| rho[(k * dim_b + i, k * dim_b + j)])
                .sum();
        }
    }
    Ok(out)
}

/// Von Neumann entropy in bits, with `0·log₂0 = 0`.
pub fn vn_entropy(rho: &ComplexMatrix) -> Result<f64> {
    let eig = hermitian_eig(rho)?;
    if let Some(&min) = eig.values.first() {
        if min < -NEGATIVE_EIGEN_CLAMP {
            return Err(invalid!("density matrix has negative eigenvalue {min:e}"));
        }
    }
    Ok(entropy_bits(&eig.values))
}

/// `-Σ λ log₂ λ`, clamping tiny negative weights to zero.
pub fn entropy_bits(weights: &[f64]) -> f64 {
    weights
        .iter()
        .map(|&l| if l > 0.0 { -l * l.log2() } else { 0.0 })
        .sum::<f64>()
        .max(0.0)
}

#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector for `values[k]`.
    pub vectors: ComplexMatrix,
}

/// Unitary 2×2 Jacobi rotation `G = diag(e^{iα}, 1) · [[c, s], [-s, c]]` that diagonalises
/// `[[app, apq], [conj(apq), aqq]]` by `G† A G`. Returns `(phase, c, s, t)`.
#[inline]
fn jacobi_rotation(app: f64, aqq: f64, apq: C64) -> (C64, f64, f64, f64) {
    let r = apq.norm();
    let phase = apq / r;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let cs = 1.0 / (1.0 + t * t).sqrt();
    (phase, cs, t * cs, t * r)
}

/// Eigen-decomposition of a small Hermitian matrix.
///
/// A 2×2 input is solved by a single exact rotation (the closed form); larger inputs run cyclic
/// complex Jacobi sweeps until the off-diagonal mass is at rounding level.
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<HermitianEigen> {
    if !h.is_square() {
        return Err(invalid!("eigen-decomposition needs a square matrix"));
    }
    let n = h.rows();
    let scale = h.max_abs().max(1.0);
    let herr = h.hermiticity_error();
    if herr > 1e-10 * scale {
        return Err(invalid!("matrix is not Hermitian (asymmetry {herr:e})"));
    }

    let mut a = h.data.clone();
    for i in 0..n {
        a[i * n + i] = c(a[i * n + i].re, 0.0);
        for j in i + 1..n {
            let avg = (a[i * n + j] + a[j * n + i].conj()) * 0.5;
            a[i * n + j] = avg;
            a[j * n + i] = avg.conj();
        }
    }
    let mut v = ComplexMatrix::identity(n).data;

    let total: f64 = a.iter().map(|z| z.norm_sqr()).sum();
    let threshold = (f64::EPSILON * f64::EPSILON) * total.max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q].norm_sqr();
            }
        }
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.norm_sqr() <= threshold * 1e-6 {
                    continue;
                }
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let (phase, cs, sn, tr) = jacobi_rotation(app, aqq, apq);
                let phase_c = phase * cs;
                let phase_s = phase * sn;
                // A <- A G
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * phase_c - akq * sn;
                    a[k * n + q] = akp * phase_s + akq * cs;
                }
                // A <- G† A
                for j in 0..n {
                    let apj = a[p * n + j];
                    let aqj = a[q * n + j];
                    a[p * n + j] = phase_c.conj() * apj - aqj * sn;
                    a[q * n + j] = phase_s.conj() * apj + aqj * cs;
                }
                a[p * n + p] = c(app - tr, 0.0);
                a[q * n + q] = c(aqq + tr, 0.0);
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                // V <- V G
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * phase_c - vkq * sn;
                    v[k * n + q] = vkp * phase_s + vkq * cs;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    let values = order.iter().map(|&k| a[k * n + k].re).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            vectors[(row, new_col)] = v[row * n + old_col];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// `exp(-i H t)` for Hermitian `H`, via its eigen-decomposition.
pub fn expm_hermitian(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(h)?;
    let n = h.rows();
    let phases: Vec<C64> = eig
        .values
        .iter()
        .map(|&l| C64::from_polar(1.0, -l * t))
        .collect();
    let vecs = &eig.vectors;
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += vecs[(i, k)] * phases[k] * vecs[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(tensor_product(&i2, &i2), ComplexMatrix::identity(4));
    }

    #[test]
    fn kron_diagonal_is_a_major() {
        let d = ComplexMatrix::diag_real(&[1.0, 2.0]);
        let got = tensor_product(&d, &ComplexMatrix::identity(2));
        assert_eq!(got, ComplexMatrix::diag_real(&[1.0, 1.0, 2.0, 2.0]));
    }

    #[test]
    fn kron_rotation_on_bell_state() {
        let r = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]);
        let u = tensor_product(&r, &ComplexMatrix::identity(2));
        let bell = ComplexVector::from_real(&[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]);
        let got = u.mul_vec(&bell);

        // brute force: (R ⊗ I)|ab⟩ = Σ R[a',a] |a' b⟩
        let mut expect = ComplexVector::zeros(4);
        for a in 0..2 {
            for b in 0..2 {
                for ap in 0..2 {
                    expect[ap * 2 + b] += r[(ap, a)] * bell[a * 2 + b];
                }
            }
        }
        // R|0⟩ = −|1⟩, R|1⟩ = |0⟩, so the result is (|01⟩ − |10⟩)/√2: (|10⟩ − |01⟩)/√2 up to sign.
        let by_hand = ComplexVector::from_real(&[0.0, FRAC_1_SQRT_2, -FRAC_1_SQRT_2, 0.0]);
        let flipped = ComplexVector::from_real(&[0.0, -FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0]);
        assert!(got.max_abs_diff(&expect) < 1e-15);
        assert!(got.max_abs_diff(&by_hand) < 1e-15);
        assert!((got.inner(&flipped).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partial_trace_of_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ra = random_density(&mut rng, 2);
        let rb = random_density(&mut rng, 4);
        let got = partial_trace_b(&tensor_product(&ra, &rb), 2, 4).unwrap();
        assert!(got.max_abs_diff(&ra) < 1e-12);
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let bell = ComplexVector::from_real(&[FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2]);
        let rho_a = partial_trace_b(&bell.outer(&bell), 2, 2).unwrap();
        assert!(rho_a.max_abs_diff(&ComplexMatrix::diag_real(&[0.5, 0.5])) < 1e-15);
    }

    #[test]
    fn partial_trace_of_projected_leaky_state() {
        // (ω₀, ω₁, α) = (1, 0.64, 0): √ω₀|ψ₀ 0⟩ + √ω₁|ψ̃₀ 1⟩ with ψ₀ = |0⟩, ψ̃₀ = |1⟩.
        let norm = 1.64f64.sqrt();
        let psi = ComplexVector::from_real(&[1.0 / norm, 0.0, 0.0, 0.8 / norm]);
        let rho = psi.outer(&psi);
        let got = partial_trace_b(&rho, 2, 2).unwrap();

        let mut expect = ComplexMatrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    expect[(i, j)] += psi[i * 2 + k] * psi[j * 2 + k].conj();
                }
            }
        }
        assert!(got.max_abs_diff(&expect) < 1e-15);
        assert!(got.max_abs_diff(&ComplexMatrix::diag_real(&[1.0 / 1.64, 0.64 / 1.64])) < 1e-12);
    }

    #[test]
    fn partial_trace_rejects_bad_dimensions() {
        let rho = ComplexMatrix::identity(4);
        assert!(partial_trace_b(&rho, 3, 2).is_err());
        assert!(partial_trace_a(&rho, 2, 3).is_err());
    }

    #[test]
    fn entropy_examples() {
        let mixed = ComplexMatrix::diag_real(&[0.5, 0.5]);
        assert!((vn_entropy(&mixed).unwrap() - 1.0).abs() < 1e-15);

        let v = ComplexVector::new(vec![c(0.6, 0.0), c(0.0, 0.8)]);
        assert!(vn_entropy(&v.outer(&v)).unwrap().abs() < 1e-12);

        let expect = -0.9 * 0.9f64.log2() - 0.1 * 0.1f64.log2();
        let got = vn_entropy(&ComplexMatrix::diag_real(&[0.9, 0.1])).unwrap();
        assert!((got - expect).abs() < 1e-15);
        assert!((got - 0.468_995_593_589_281).abs() < 1e-12);
    }

    #[test]
    fn entropy_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[&[0.5, 0.3], &[0.0, 0.5]]);
        assert!(vn_entropy(&m).is_err());
    }

    #[test]
    fn entropy_clamps_tiny_negative_eigenvalues() {
        let m = ComplexMatrix::diag_real(&[1.0 + 5e-11, -5e-11]);
        assert!(vn_entropy(&m).unwrap().abs() < 1e-9);
        assert!(vn_entropy(&ComplexMatrix::diag_real(&[1.1, -0.1])).is_err());
    }

    #[test]
    fn eig_of_diagonal() {
        let chi = 0.37;
        let eig = hermitian_eig(&ComplexMatrix::diag_real(&[chi, 0.0])).unwrap();
        assert_eq!(eig.values, vec![0.0, chi]);
    }

    #[test]
    fn eig_of_pauli_x() {
        let eig = hermitian_eig(&pauli_x()).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-15);
        assert!((eig.values[1] - 1.0).abs() < 1e-15);
        let minus = eig.vectors.column(0);
        let plus = eig.vectors.column(1);
        // up to a phase: (|0⟩ ∓ |1⟩)/√2
        let m = ComplexVector::from_real(&[FRAC_1_SQRT_2, -FRAC_1_SQRT_2]);
        let p = ComplexVector::from_real(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]);
        assert!((minus.inner(&m).norm() - 1.0).abs() < 1e-14);
        assert!((plus.inner(&p).norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let m = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(hermitian_eig(&m).is_err());
    }

    #[test]
    fn eig_residuals_on_random_hermitians() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 3, 4, 8, 16] {
            for _ in 0..20 {
                let h = random_hermitian(&mut rng, n);
                let eig = hermitian_eig(&h).unwrap();
                assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
                assert!(eig.vectors.unitarity_error() < 1e-12, "n={n}");
                for k in 0..n {
                    let v = eig.vectors.column(k);
                    let r = &h.mul_vec(&v) - &v.scale(c(eig.values[k], 0.0));
                    assert!(r.norm() < 1e-10, "residual {} at n={n}", r.norm());
                }
            }
        }
    }

    #[test]
    fn expm_matches_series_for_small_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random_hermitian(&mut rng, 4);
        let t = 0.3;
        let got = expm_hermitian(&h, t).unwrap();
        // Taylor series of exp(-iHt) to convergence
        let a = h.scale(c(0.0, -t));
        let mut term = ComplexMatrix::identity(4);
        let mut sum = ComplexMatrix::identity(4);
        for k in 1..40 {
            term = (&term * &a).scale(c(1.0 / k as f64, 0.0));
            sum = &sum + &term;
        }
        assert!(got.max_abs_diff(&sum) < 1e-13);
        assert!(got.unitarity_error() < 1e-13);
    }

    #[test]
    fn density_flag() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(random_density(&mut rng, 4).is_density(1e-12));
        assert!(!ComplexMatrix::diag_real(&[0.7, 0.7]).is_density(1e-12));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn partial_trace_inverts_tensor_product(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ra = random_density(&mut rng, 2);
            let rb = random_density(&mut rng, 2);
            let back = partial_trace_b(&tensor_product(&ra, &rb), 2, 2).unwrap();
            prop_assert!(back.max_abs_diff(&ra) < 1e-12);
            let rho = tensor_product(&ra, &rb);
            let tr_in = rho.trace();
            prop_assert!((back.trace() - tr_in).norm() < 1e-12);
        }

        #[test]
        fn entropy_is_unitarily_invariant(seed in any::<u64>(), n in prop::sample::select(vec![2usize, 4])) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(&mut rng, n);
            let u = random_unitary(&mut rng, n);
            let rotated = &(&u * &rho) * &u.adjoint();
            let s0 = vn_entropy(&rho).unwrap();
            let s1 = vn_entropy(&rotated).unwrap();
            prop_assert!((s0 - s1).abs() < 1e-10);
        }
    }
}
