//! Dense matrices with the two factorizations the oracle needs: Cholesky
//! for constrained solves and a cyclic Jacobi eigensolver for symmetric
//! spectra. Everything is double precision and row-major.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transposed(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let brow = other.row(k);
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
    }

    /// Lower-triangular Cholesky factor of a symmetric positive definite
    /// matrix. Fails with [`Error::SingularOperator`] on a non-positive
    /// pivot.
    pub fn cholesky(&self) -> Result<Cholesky> {
        assert_eq!(self.rows, self.cols, "cholesky needs a square matrix");
        let n = self.rows;
        let mut l = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = self.get(i, j);
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(Error::SingularOperator(format!(
                            "non-positive pivot {sum:e} at row {i}"
                        )));
                    }
                    l[i * n + i] = sum.sqrt();
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { n, l })
    }

    /// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
    /// Returns eigenvalues ascending with matching orthonormal eigenvector
    /// columns. Sweeps stop once the off-diagonal Frobenius norm drops
    /// below `1e-12` relative to the matrix norm.
    pub fn jacobi_eigen(&self) -> (DenseMatrix, Vec<f64>) {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut v = DenseMatrix::identity(n);
        let scale = self.frobenius_norm().max(f64::MIN_POSITIVE);
        let tol = 1e-12 * scale;

        let off = |a: &DenseMatrix| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in (i + 1)..n {
                    s += a.get(i, j) * a.get(i, j);
                }
            }
            (2.0 * s).sqrt()
        };

        let max_sweeps = 100;
        for _ in 0..max_sweeps {
            if off(&a) <= tol {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq.abs() <= tol / (n as f64) {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;

                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap());
        let eigenvalues: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
        let mut vectors = DenseMatrix::zeros(n, n);
        for (new_col, &old_col) in order.iter().enumerate() {
            for k in 0..n {
                vectors.set(k, new_col, v.get(k, old_col));
            }
        }
        (vectors, eigenvalues)
    }
}

/// Lower-triangular Cholesky factor `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn order(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` by forward/back substitution.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let l = &self.l;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        y
    }

    /// `A^{-1}` assembled column by column.
    pub fn inverse(&self) -> DenseMatrix {
        let n = self.n;
        let mut out = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            e[j] = 0.0;
            for i in 0..n {
                out.set(i, j, col[i]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd3() -> DenseMatrix {
        DenseMatrix::from_rows(3, 3, vec![4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0])
    }

    #[test]
    fn cholesky_solves() {
        let a = spd3();
        let x_true = vec![1.0, -2.0, 0.5];
        let b = a.matvec(&x_true);
        let x = a.cholesky().unwrap().solve(&b);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DenseMatrix::from_rows(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(a.cholesky(), Err(Error::SingularOperator(_))));
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = spd3();
        let inv = a.cholesky().unwrap().inverse();
        let prod = inv.matmul(&a);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_recovers_diagonal() {
        let a = DenseMatrix::from_rows(2, 2, vec![3.0, 0.0, 0.0, 1.0]);
        let (v, lam) = a.jacobi_eigen();
        assert!((lam[0] - 1.0).abs() < 1e-12 && (lam[1] - 3.0).abs() < 1e-12);
        // Columns are signed unit vectors.
        assert!((v.get(0, 1).abs() - 1.0).abs() < 1e-12);
        assert!((v.get(1, 0).abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_reconstructs() {
        // Symmetric matrix with known-ill-behaved off-diagonals.
        let a = DenseMatrix::from_rows(
            4,
            4,
            vec![
                4.0, 1.0, 0.5, 0.0, 1.0, 3.0, 0.2, 0.1, 0.5, 0.2, 2.0, 0.3, 0.0, 0.1, 0.3, 1.0,
            ],
        );
        let (v, lam) = a.jacobi_eigen();
        // V diag(lam) V^T == A
        let mut vl = v.clone();
        for i in 0..4 {
            for j in 0..4 {
                vl.set(i, j, v.get(i, j) * lam[j]);
            }
        }
        let recon = vl.matmul(&v.transposed());
        for i in 0..4 {
            for j in 0..4 {
                assert!((recon.get(i, j) - a.get(i, j)).abs() < 1e-10);
            }
        }
        // Columns orthonormal.
        let vtv = v.transposed().matmul(&v);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((vtv.get(i, j) - expect).abs() < 1e-12);
            }
        }
        // Ascending order.
        assert!(lam.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn jacobi_tridiagonal_spectrum_formula() {
        // Second-difference matrix scaled by 1/h^2 has eigenvalues
        // (4/h^2) sin^2(k pi / (2(n+1))).
        let n = 9;
        let h = 0.1;
        let inv_h2 = 1.0 / (h * h);
        let mut a = DenseMatrix::zeros(n, n);
        for i in 0..n {
            a.set(i, i, 2.0 * inv_h2);
            if i + 1 < n {
                a.set(i, i + 1, -inv_h2);
                a.set(i + 1, i, -inv_h2);
            }
        }
        let (_, lam) = a.jacobi_eigen();
        for (k, &l) in lam.iter().enumerate() {
            let angle = (k + 1) as f64 * std::f64::consts::PI / (2.0 * (n as f64 + 1.0));
            let expect = 4.0 * inv_h2 * angle.sin().powi(2);
            assert!((l - expect).abs() / expect < 1e-10, "mode {k}: {l} vs {expect}");
        }
    }
}
