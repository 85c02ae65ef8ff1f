//! Dense complex linear algebra for the detectors.
//!
//! Matrices are small (at most a few hundred rows) and dense, so everything
//! here is a straightforward row-major implementation without blocking.

use std::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::error::contract;
use crate::{Error, Real, Result};

/// Complex column vector.
pub type ComplexVector<T> = Vec<Complex<T>>;

/// Pivots of a Hermitian factorization must exceed this fraction of the
/// largest diagonal entry.
pub const PD_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> ComplexMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    /// Builds a matrix from row-major entries, checking the entry count and
    /// that every entry is finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(contract(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(contract(format!("non-finite matrix entry at index {pos}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_diagonal(diag: &[Complex<T>]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
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

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> ComplexVector<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn mul_vec(&self, x: &[Complex<T>]) -> Result<ComplexVector<T>> {
        if x.len() != self.cols {
            return Err(contract(format!(
                "vector of length {} against {}x{} matrix",
                x.len(),
                self.rows,
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect())
    }

    /// `selfᴴ x` without materialising the adjoint.
    pub fn adjoint_mul_vec(&self, x: &[Complex<T>]) -> Result<ComplexVector<T>> {
        if x.len() != self.rows {
            return Err(contract(format!(
                "vector of length {} against adjoint of {}x{} matrix",
                x.len(),
                self.rows,
                self.cols
            )));
        }
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * xi;
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(contract(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    /// `selfᴴ self`, the K×K Gram matrix of the columns.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut out = Self::zeros(n, n);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..n {
                let ci = row[i].conj();
                for j in i..n {
                    out.data[i * n + j] += ci * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out.data[i * n + j] = out.data[j * n + i].conj();
            }
            out.data[i * n + i].im = T::zero();
        }
        out
    }

    /// Sum of squared magnitudes of all entries, i.e. `tr(A Aᴴ)`.
    pub fn frobenius_sq(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn max_hermitian_defect(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..self.cols.min(self.rows) {
                let d = (self[(i, j)] - self[(j, i)].conj()).norm();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Converts the scalar type (e.g. `f64` to `f32`).
    pub fn cast<U: Real>(&self) -> ComplexMatrix<U> {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| cast_complex(*z)).collect(),
        }
    }
}

impl<T> Index<(usize, usize)> for ComplexMatrix<T> {
    type Output = Complex<T>;

    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for ComplexMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

pub fn cast_complex<T: Real, U: Real>(z: Complex<T>) -> Complex<U> {
    Complex::new(U::lit(z.re.to_f64_lossy()), U::lit(z.im.to_f64_lossy()))
}

/// `aᴴ b`.
pub fn dot<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter()
        .zip(b)
        .fold(Complex::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm_sq<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `y += a x`
pub fn axpy<T: Real>(a: Complex<T>, x: &[Complex<T>], y: &mut [Complex<T>]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Builds `c·I + G·diag(weights)·Gᴴ`.
///
/// This is the MMSE system matrix with `c = σ²/Eₛ` and the weights holding
/// the normalised residual symbol variances. The result is Hermitian by
/// construction: only the upper triangle is accumulated and then mirrored.
pub fn gram_plus_scaled_identity<T: Real>(
    g: &ComplexMatrix<T>,
    weights: &[T],
    c: T,
) -> Result<ComplexMatrix<T>> {
    if weights.len() != g.cols() {
        return Err(contract(format!(
            "{} weights for a matrix with {} columns",
            weights.len(),
            g.cols()
        )));
    }
    if !(c >= T::zero()) {
        return Err(contract("diagonal loading must be nonnegative"));
    }
    if weights.iter().any(|w| !(*w >= T::zero())) {
        return Err(contract("column weights must be nonnegative"));
    }
    let n = g.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        let gi = g.row(i);
        for j in i..n {
            let gj = g.row(j);
            let mut acc = Complex::new(T::zero(), T::zero());
            for ((a, b), &w) in gi.iter().zip(gj).zip(weights) {
                acc += a * b.conj() * w;
            }
            out[(i, j)] = acc;
        }
    }
    for i in 0..n {
        out[(i, i)].re += c;
        out[(i, i)].im = T::zero();
        for j in 0..i {
            out[(i, j)] = out[(j, i)].conj();
        }
    }
    Ok(out)
}

/// Cholesky factor `A = L Lᴴ` of a Hermitian positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: ComplexMatrix<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(a: &ComplexMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(contract(format!(
                "Cholesky of non-square {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let max_diag = (0..n).map(|i| a[(i, i)].re).fold(T::zero(), T::max);
        let floor = T::lit(PD_RELATIVE_TOLERANCE) * max_diag;
        let mut l = ComplexMatrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > floor) || max_diag <= T::zero() {
                return Err(Error::Solver { pivot: j });
            }
            let djj = d.sqrt();
            l[(j, j)] = Complex::new(djj, T::zero());
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &[Complex<T>]) -> Result<ComplexVector<T>> {
        let n = self.l.rows();
        if b.len() != n {
            return Err(contract(format!("rhs of length {} for order {n}", b.len())));
        }
        let l = &self.l;
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= l[(i, k)] * z[k];
            }
            z[i] = s / l[(i, i)].re;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s -= l[(k, i)].conj() * z[k];
            }
            z[i] = s / l[(i, i)].re;
        }
        Ok(z)
    }
}

/// Solves `A x = b` for Hermitian positive definite `A`.
pub fn hermitian_solve<T: Real>(a: &ComplexMatrix<T>, b: &[Complex<T>]) -> Result<ComplexVector<T>> {
    if b.len() != a.rows() {
        return Err(contract(format!(
            "rhs of length {} for {}x{} system",
            b.len(),
            a.rows(),
            a.cols()
        )));
    }
    Cholesky::factor(a)?.solve(b)
}

/// LU factorization with partial pivoting of a general square matrix.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: ComplexMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn factor(mut a: ComplexMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(contract(format!(
                "LU of non-square {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let scale = a.as_slice().iter().map(|z| z.norm()).fold(T::zero(), T::max);
        let floor = T::epsilon() * scale;
        let mut perm: Vec<usize> = (0..n).collect();
        for j in 0..n {
            let (p, best) = (j..n)
                .map(|i| (i, a[(i, j)].norm()))
                .fold((j, -T::one()), |acc, x| if x.1 > acc.1 { x } else { acc });
            if !(best > floor) {
                return Err(Error::Solver { pivot: j });
            }
            if p != j {
                for c in 0..n {
                    let tmp = a[(j, c)];
                    a[(j, c)] = a[(p, c)];
                    a[(p, c)] = tmp;
                }
                perm.swap(j, p);
            }
            let pivot = a[(j, j)];
            for i in (j + 1)..n {
                let f = a[(i, j)] / pivot;
                a[(i, j)] = f;
                if f.re == T::zero() && f.im == T::zero() {
                    continue;
                }
                for c in (j + 1)..n {
                    let u = a[(j, c)];
                    a[(i, c)] -= f * u;
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn solve(&self, b: &[Complex<T>]) -> Result<ComplexVector<T>> {
        let n = self.lu.rows();
        if b.len() != n {
            return Err(contract(format!("rhs of length {} for order {n}", b.len())));
        }
        let lu = &self.lu;
        let mut x: ComplexVector<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= lu[(i, k)] * x[k];
            }
            x[i] = s / lu[(i, i)];
        }
        Ok(x)
    }

    /// Explicit inverse, one column solve per unit vector.
    pub fn inverse(&self) -> Result<ComplexMatrix<T>> {
        let n = self.lu.rows();
        let mut inv = ComplexMatrix::zeros(n, n);
        let mut e = vec![Complex::new(T::zero(), T::zero()); n];
        for j in 0..n {
            e[j] = Complex::new(T::one(), T::zero());
            let col = self.solve(&e)?;
            e[j] = Complex::new(T::zero(), T::zero());
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        Ok(inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type C = Complex<f64>;

    fn c(re: f64, im: f64) -> C {
        Complex::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, k: usize) -> ComplexMatrix<f64> {
        ComplexMatrix::from_fn(r, k, |_, _| {
            c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
        })
    }

    fn spd(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix<f64> {
        let b = random_matrix(rng, n, n);
        let mut a = b.matmul(&b.adjoint()).unwrap();
        for i in 0..n {
            a[(i, i)] += c(1.0, 0.0);
        }
        a
    }

    // Cofactor expansion determinant; exponential but fine for 4x4.
    fn det(m: &[Vec<C>]) -> C {
        let n = m.len();
        if n == 1 {
            return m[0][0];
        }
        let mut acc = c(0.0, 0.0);
        for j in 0..n {
            let minor: Vec<Vec<C>> = m[1..]
                .iter()
                .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect())
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += m[0][j] * det(&minor) * sign;
        }
        acc
    }

    fn adjugate_inverse(a: &ComplexMatrix<f64>) -> Vec<Vec<C>> {
        let n = a.rows();
        let full: Vec<Vec<C>> = (0..n).map(|i| a.row(i).to_vec()).collect();
        let d = det(&full);
        let mut inv = vec![vec![c(0.0, 0.0); n]; n];
        for i in 0..n {
            for j in 0..n {
                let minor: Vec<Vec<C>> = full
                    .iter()
                    .enumerate()
                    .filter(|(r, _)| *r != i)
                    .map(|(_, row)| {
                        row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect()
                    })
                    .collect();
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                inv[j][i] = det(&minor) * sign / d;
            }
        }
        inv
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let b = vec![c(1.0, 0.0), c(0.0, 1.0), c(-2.0, 0.0)];
        let x = hermitian_solve(&ComplexMatrix::identity(3), &b).unwrap();
        assert_eq!(x, b);
    }

    #[test]
    fn diagonal_solve() {
        let a = ComplexMatrix::from_diagonal(&[c(2.0, 0.0), c(4.0, 0.0)]);
        let x = hermitian_solve(&a, &[c(2.0, 0.0), c(4.0, 0.0)]).unwrap();
        assert!((x[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn solve_matches_adjugate_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = spd(&mut rng, 4);
        let b: Vec<C> = (0..4).map(|_| c(rng.random(), rng.random())).collect();
        let inv = adjugate_inverse(&a);
        let expect: Vec<C> = inv
            .iter()
            .map(|row| row.iter().zip(&b).map(|(x, y)| x * y).sum())
            .collect();
        let got = hermitian_solve(&a, &b).unwrap();
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).norm() < 1e-8, "{g} vs {e}");
        }
        let lu = Lu::factor(a.clone()).unwrap().solve(&b).unwrap();
        for (g, e) in lu.iter().zip(&expect) {
            assert!((g - e).norm() < 1e-8);
        }
    }

    #[test]
    fn residual_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 5, 16, 40] {
            let a = spd(&mut rng, n);
            let b: Vec<C> = (0..n).map(|_| c(rng.random(), rng.random())).collect();
            let x = hermitian_solve(&a, &b).unwrap();
            let ax = a.mul_vec(&x).unwrap();
            let r: Vec<C> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
            assert!(norm_sq(&r).sqrt() <= 1e-9 * norm_sq(&b).sqrt());
        }
    }

    #[test]
    fn non_positive_definite_reports_pivot() {
        let a = ComplexMatrix::from_diagonal(&[c(1.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        match hermitian_solve(&a, &[c(1.0, 0.0); 3]) {
            Err(Error::Solver { pivot }) => assert_eq!(pivot, 1),
            other => panic!("expected solver failure, got {other:?}"),
        }
        let neg = ComplexMatrix::from_diagonal(&[c(-1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            hermitian_solve(&neg, &[c(1.0, 0.0); 2]),
            Err(Error::Solver { pivot: 0 })
        ));
    }

    #[test]
    fn singular_lu_reports_pivot() {
        let a = ComplexMatrix::from_vec(
            2,
            2,
            vec![c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)],
        )
        .unwrap();
        assert!(matches!(Lu::factor(a), Err(Error::Solver { pivot: 1 })));
    }

    #[test]
    fn lu_inverse_matches_adjugate() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 4, 4);
            let inv = Lu::factor(a.clone()).unwrap().inverse().unwrap();
            let oracle = adjugate_inverse(&a);
            for i in 0..4 {
                for j in 0..4 {
                    assert!((inv[(i, j)] - oracle[i][j]).norm() < 1e-9 * (1.0 + oracle[i][j].norm()));
                }
            }
        }
    }

    #[test]
    fn gram_plus_identity_examples() {
        let m = gram_plus_scaled_identity(&ComplexMatrix::identity(2), &[1.0, 1.0], 0.5).unwrap();
        assert_eq!(m, ComplexMatrix::from_diagonal(&[c(1.5, 0.0), c(1.5, 0.0)]));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_matrix(&mut rng, 3, 2);
        let m = gram_plus_scaled_identity(&g, &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(m, ComplexMatrix::identity(3));
    }

    #[test]
    fn gram_plus_identity_matches_triple_product() {
        let g = ComplexMatrix::from_vec(
            2,
            2,
            vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let d = [1.0, 0.25];
        let m = gram_plus_scaled_identity(&g, &d, 0.1).unwrap();
        // Direct elementwise evaluation of sum_k g_ik d_k conj(g_jk).
        for i in 0..2 {
            for j in 0..2 {
                let mut e = if i == j { c(0.1, 0.0) } else { c(0.0, 0.0) };
                for k in 0..2 {
                    e += g[(i, k)] * d[k] * g[(j, k)].conj();
                }
                assert!((m[(i, j)] - e).norm() < 1e-12);
            }
        }
        // [[1.35, 0.25i], [-0.25i, 0.35]]
        assert!((m[(0, 0)] - c(1.35, 0.0)).norm() < 1e-12);
        assert!((m[(0, 1)] - c(0.0, 0.25)).norm() < 1e-12);
    }

    #[test]
    fn gram_plus_identity_dimension_mismatch() {
        let g = ComplexMatrix::<f64>::identity(3);
        assert!(matches!(
            gram_plus_scaled_identity(&g, &[1.0, 1.0], 0.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn gram_is_adjoint_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_matrix(&mut rng, 7, 3);
        let r = g.gram();
        let direct = g.adjoint().matmul(&g).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((r[(i, j)] - direct[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_precision_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = spd(&mut rng, 6).cast::<f32>();
        let b: Vec<Complex<f32>> = (0..6).map(|i| Complex::new(i as f32, 1.0)).collect();
        let x = hermitian_solve(&a, &b).unwrap();
        let ax = a.mul_vec(&x).unwrap();
        let r: Vec<Complex<f32>> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm_sq(&r).sqrt() <= 1e-4 * norm_sq(&b).sqrt());
    }

    #[test]
    fn from_vec_rejects_bad_input() {
        assert!(ComplexMatrix::<f64>::from_vec(2, 2, vec![c(0.0, 0.0); 3]).is_err());
        assert!(ComplexMatrix::from_vec(1, 1, vec![c(f64::NAN, 0.0)]).is_err());
    }
}
