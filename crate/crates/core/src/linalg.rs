//! Dense matrices and the symmetric eigensolver.
//!
//! The solver reduces a real symmetric matrix to tridiagonal form with
//! Householder reflections and then runs the implicit QL iteration with
//! Wilkinson-type shifts (the EISPACK `tred2`/`tql2` pair, as popularized
//! by JAMA). Eigenvector accumulation is optional; eigenvalues alone cost
//! about `4n³/3` flops.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

pub type RealMatrix = Matrix<f64>;
pub type ComplexMatrix = Matrix<Complex64>;

impl<T: Copy + Default> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::default(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
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
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub(crate) fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }
}

impl RealMatrix {
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Maximum absolute row sum; an upper bound on the spectral norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols.min(self.rows) {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn to_complex(&self) -> ComplexMatrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spectral decomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Eigenvectors stored row-wise: row `k` is the unit eigenvector for
    /// `values[k]`.
    pub vectors: Option<RealMatrix>,
}

impl SymmetricEigen {
    /// `v_k[j]`, component `j` of the eigenvector for `values[k]`.
    pub fn vector(&self, k: usize) -> Option<&[f64]> {
        self.vectors.as_ref().map(|v| v.row(k))
    }
}

/// QL sweeps allowed per eigenvalue before giving up.
pub const MAX_QL_ITERATIONS: usize = 60;

/// Relative asymmetry accepted on input.
const SYMMETRY_TOL: f64 = 1e-12;

pub fn symmetric_eigen(m: &RealMatrix, want_vectors: bool) -> Result<SymmetricEigen> {
    let n = m.require_square()?;
    let scale = m.norm_inf();
    let asym = m.max_asymmetry();
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(asym));
    }
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: want_vectors.then(|| RealMatrix::zeros(0, 0)),
        });
    }

    let mut work = m.clone();
    let (mut diag, mut off) = tridiagonalize(&mut work);
    let mut basis = want_vectors.then(|| householder_basis(&work));

    tql(&mut diag, &mut off, basis.as_mut())?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
    let values = order.iter().map(|&k| diag[k]).collect();
    let vectors = basis.map(|z| {
        let mut sorted = RealMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            sorted.row_mut(dst).copy_from_slice(z.row(src));
        }
        sorted
    });
    Ok(SymmetricEigen { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn symmetric_eigenvalues(m: &RealMatrix) -> Result<Vec<f64>> {
    symmetric_eigen(m, false).map(|e| e.values)
}

/// Householder reduction to tridiagonal form.
///
/// On return `a` holds the Householder vectors in its rows (row `k` stores
/// `v_k` in columns `k+1..n`, the scalar `β_k` on the diagonal) and the
/// function returns the diagonal and sub-diagonal of `T = QᵀAQ`, with
/// `off[i] = T[i+1][i]` and `off[n-1] = 0`.
fn tridiagonalize(a: &mut RealMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        let tail = &a.row(k)[k + 1..];
        let len = tail.len();
        let scale: f64 = tail.iter().map(|x| x.abs()).sum();
        diag[k] = a.get(k, k);
        if scale == 0.0 {
            off[k] = 0.0;
            a.set(k, k, 0.0);
            continue;
        }
        let v = &mut v[..len];
        for (vi, &x) in v.iter_mut().zip(tail) {
            *vi = x / scale;
        }
        let norm = dot(v, v).sqrt();
        let alpha = if v[0] > 0.0 { -norm } else { norm };
        off[k] = alpha * scale;
        v[0] -= alpha;
        let vtv = dot(v, v);
        let beta = 2.0 / vtv;

        // p = β B v on the trailing block, then w = p - (β pᵀv / 2) v.
        let w = &mut w[..len];
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = beta * dot(&a.row(k + 1 + i)[k + 1..], v);
        }
        let kappa = 0.5 * beta * dot(w, v);
        for (wi, &vi) in w.iter_mut().zip(v.iter()) {
            *wi -= kappa * vi;
        }
        // B ← B - v wᵀ - w vᵀ
        for i in 0..len {
            let (vi, wi) = (v[i], w[i]);
            let row = &mut a.row_mut(k + 1 + i)[k + 1..];
            for ((bij, &vj), &wj) in row.iter_mut().zip(v.iter()).zip(w.iter()) {
                *bij -= vi * wj + wi * vj;
            }
        }
        // Keep the reflector for the optional basis accumulation.
        a.row_mut(k)[k + 1..].copy_from_slice(v);
        a.set(k, k, beta);
    }
    if n >= 2 {
        diag[n - 2] = a.get(n - 2, n - 2);
        off[n - 2] = a.get(n - 1, n - 2);
        a.set(n - 2, n - 2, 0.0);
    }
    diag[n - 1] = a.get(n - 1, n - 1);
    if n >= 1 {
        a.set(n - 1, n - 1, 0.0);
    }
    (diag, off)
}

/// Accumulates `Q = H_0 H_1 ⋯` and returns `Qᵀ`, so that row `i` of the
/// result is column `i` of `Q`.
fn householder_basis(reflectors: &RealMatrix) -> RealMatrix {
    let n = reflectors.rows();
    // Qᵀ = H_{n-3} ⋯ H_0: multiply reflectors on the right in reverse order.
    // Rows 0..=k are untouched by H_k at that point.
    let mut qt = RealMatrix::identity(n);
    for k in (0..n.saturating_sub(2)).rev() {
        let beta = reflectors.get(k, k);
        if beta == 0.0 {
            continue;
        }
        let v = &reflectors.row(k)[k + 1..];
        for i in (k + 1)..n {
            let row = &mut qt.row_mut(i)[k + 1..];
            let s = beta * dot(row, v);
            for (x, &vj) in row.iter_mut().zip(v) {
                *x -= s * vj;
            }
        }
    }
    qt
}

/// Implicit QL on the symmetric tridiagonal matrix (`diag`, `off`).
///
/// `basis`, when present, holds the columns of `Q` as rows and is rotated
/// in place so that on exit row `i` is the eigenvector for `diag[i]`.
fn tql(diag: &mut [f64], off: &mut [f64], mut basis: Option<&mut RealMatrix>) -> Result<()> {
    let n = diag.len();
    let eps = f64::EPSILON;
    let mut shift_acc = 0.0;
    let mut tst1 = 0.0_f64;

    for l in 0..n {
        tst1 = tst1.max(diag[l].abs() + off[l].abs());
        let mut m = l;
        while m < n - 1 {
            if off[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NoConvergence {
                        what: "implicit QL",
                        iterations: MAX_QL_ITERATIONS,
                        residual: off[l].abs(),
                    });
                }
                let g = diag[l];
                let mut p = (diag[l + 1] - g) / (2.0 * off[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                diag[l] = off[l] / (p + r);
                diag[l + 1] = off[l] * (p + r);
                let dl1 = diag[l + 1];
                let h = g - diag[l];
                for d in diag.iter_mut().skip(l + 2) {
                    *d -= h;
                }
                shift_acc += h;

                p = diag[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = off[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * off[i];
                    let h = c * p;
                    r = p.hypot(off[i]);
                    off[i + 1] = s * r;
                    s = off[i] / r;
                    c = p / r;
                    p = c * diag[i] - s * g;
                    diag[i + 1] = h + s * (c * g + s * diag[i]);
                    if let Some(z) = basis.as_deref_mut() {
                        rotate_rows(z, i, c, s);
                    }
                }
                p = -s * s2 * c3 * el1 * off[l] / dl1;
                off[l] = s * p;
                diag[l] = c * p;
                if off[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        diag[l] += shift_acc;
        off[l] = 0.0;
    }
    Ok(())
}

/// Applies the plane rotation to rows `i` and `i + 1`.
#[inline]
fn rotate_rows(z: &mut RealMatrix, i: usize, c: f64, s: f64) {
    let n = z.cols();
    let (head, tail) = z.data.split_at_mut((i + 1) * n);
    let zi = &mut head[i * n..];
    let zi1 = &mut tail[..n];
    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> RealMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = RealMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    fn check_residuals(m: &RealMatrix, eig: &SymmetricEigen, tol: f64) {
        let n = m.rows();
        let scale = m.norm_inf().max(1.0);
        for k in 0..n {
            let v = eig.vector(k).unwrap();
            let mv = m.mat_vec(v);
            let res: f64 = mv
                .iter()
                .zip(v)
                .map(|(a, b)| (a - eig.values[k] * b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(res <= tol * scale, "residual {res} for pair {k}");
            assert_relative_eq!(dot(v, v), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn diagonal_is_sorted() {
        let mut m = RealMatrix::zeros(3, 3);
        m.set(0, 0, 3.0);
        m.set(1, 1, 1.0);
        m.set(2, 2, 2.0);
        let e = symmetric_eigen(&m, true).unwrap();
        assert_eq!(e.values, vec![1.0, 2.0, 3.0]);
        check_residuals(&m, &e, 1e-14);
    }

    #[test]
    fn swap_matrix() {
        let m = RealMatrix::from_row_major(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let e = symmetric_eigen(&m, true).unwrap();
        assert_relative_eq!(e.values[0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(e.values[1], 1.0, epsilon = 1e-15);
        check_residuals(&m, &e, 1e-14);
    }

    #[test]
    fn tiny_sizes() {
        let m = RealMatrix::from_row_major(1, 1, vec![4.5]).unwrap();
        let e = symmetric_eigen(&m, true).unwrap();
        assert_eq!(e.values, vec![4.5]);
        assert_eq!(e.vector(0).unwrap(), &[1.0]);
        assert!(symmetric_eigen(&RealMatrix::zeros(0, 0), true).unwrap().values.is_empty());
    }

    #[test]
    fn random_50_trace_and_residuals() {
        let m = random_symmetric(50, 7);
        let e = symmetric_eigen(&m, true).unwrap();
        let sum: f64 = e.values.iter().sum();
        assert_relative_eq!(sum, m.trace(), max_relative = 1e-10);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        check_residuals(&m, &e, 1e-10);
        let only = symmetric_eigenvalues(&m).unwrap();
        for (a, b) in only.iter().zip(&e.values) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let m = random_symmetric(30, 11);
        let e = symmetric_eigen(&m, true).unwrap();
        let z = e.vectors.as_ref().unwrap();
        for i in 0..30 {
            for j in 0..30 {
                let d = dot(z.row(i), z.row(j));
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((d - target).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_spectrum() {
        // rank-one plus zeros: many repeated eigenvalues.
        let y = [0.5, -0.5, 0.5, 0.5];
        let m = RealMatrix::from_fn(4, 4, |i, j| y[i] * y[j]);
        let e = symmetric_eigen(&m, true).unwrap();
        assert_relative_eq!(e.values[3], 1.0, epsilon = 1e-14);
        for v in &e.values[..3] {
            assert!(v.abs() < 1e-14);
        }
        check_residuals(&m, &e, 1e-13);
    }

    #[test]
    fn rejects_bad_input() {
        let m = RealMatrix::zeros(2, 3);
        assert!(matches!(symmetric_eigen(&m, false), Err(Error::NotSquare { .. })));
        let m = RealMatrix::from_row_major(2, 2, vec![0.0, 1.0, 0.5, 0.0]).unwrap();
        assert!(matches!(symmetric_eigen(&m, false), Err(Error::NotSymmetric(_))));
    }
}
