//! Small dense matrices and the handful of factorizations the toolkit needs.
//!
//! Everything here operates on matrices of a few dozen entries (group
//! elements for n ≤ 5, Jacobians of at most a dozen rows), so the routines
//! favour accuracy and determinism over blocking or vectorisation.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length");
        Self { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<T>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "column length");
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self {
            rows: rows.len(),
            cols,
            data,
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
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "matvec length");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.zip_with(rhs, |a, b| a - b)
    }

    fn zip_with(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Induced 1-norm (max absolute column sum).
    pub fn norm_one(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> T {
        assert_eq!(self.rows, self.cols, "det of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut det = T::one();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[(i, k)].abs().partial_cmp(&a[(j, k)].abs()).unwrap())
                .unwrap();
            if a[(p, k)] == T::zero() {
                return T::zero();
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(p * n + j, k * n + j);
                }
                det = -det;
            }
            let pivot = a[(k, k)];
            det *= pivot;
            for i in k + 1..n {
                let f = a[(i, k)] / pivot;
                for j in k..n {
                    let v = a[(k, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        det
    }

    /// Householder QR of a square matrix. Returns `(Q, R)` with `Q` orthogonal.
    pub fn qr(&self) -> (Self, Self) {
        assert_eq!(self.rows, self.cols, "qr expects a square matrix");
        let n = self.rows;
        let mut r = self.clone();
        let mut q = Self::identity(n);
        for k in 0..n.saturating_sub(1) {
            let norm = (k..n).map(|i| r[(i, k)] * r[(i, k)]).sum::<T>().sqrt();
            if norm == T::zero() {
                continue;
            }
            let alpha = if r[(k, k)] > T::zero() { -norm } else { norm };
            let mut v: Vec<T> = (0..n).map(|i| if i < k { T::zero() } else { r[(i, k)] }).collect();
            v[k] -= alpha;
            let vnorm2: T = v.iter().map(|&x| x * x).sum();
            if vnorm2 == T::zero() {
                continue;
            }
            let two = T::lit(2.0);
            // R <- H R
            for j in 0..n {
                let s: T = (k..n).map(|i| v[i] * r[(i, j)]).sum();
                let f = two * s / vnorm2;
                for i in k..n {
                    r[(i, j)] -= f * v[i];
                }
            }
            // Q <- Q H
            for i in 0..n {
                let s: T = (k..n).map(|l| q[(i, l)] * v[l]).sum();
                let f = two * s / vnorm2;
                for l in k..n {
                    q[(i, l)] -= f * v[l];
                }
            }
        }
        for i in 1..n {
            for j in 0..i {
                r[(i, j)] = T::zero();
            }
        }
        (q, r)
    }

    /// Matrix exponential by scaling and squaring around a Taylor core.
    ///
    /// The argument is scaled by `2^-s` until its 1-norm is at most 0.5, the
    /// series is summed until the next term drops below machine precision,
    /// and the result is squared `s` times.
    pub fn expm(&self) -> Self {
        assert_eq!(self.rows, self.cols, "expm expects a square matrix");
        let n = self.rows;
        let half = T::lit(0.5);
        let mut s = 0u32;
        let mut scale = T::one();
        let norm = self.norm_one();
        while norm * scale > half {
            scale = scale * half;
            s += 1;
        }
        let x = self.scaled(scale);
        let mut result = Self::identity(n);
        let mut term = Self::identity(n);
        for k in 1..=30 {
            term = term.matmul(&x).scaled(T::one() / T::from_usize_lossy(k));
            result = result.add(&term);
            if term.max_abs() <= T::epsilon() * result.max_abs() {
                break;
            }
        }
        for _ in 0..s {
            result = result.matmul(&result);
        }
        result
    }

    /// Singular values in non-increasing order (one-sided Jacobi).
    pub fn singular_values(&self) -> Vec<T> {
        let work = if self.rows >= self.cols {
            self.clone()
        } else {
            self.transpose()
        };
        let (m, n) = (work.rows, work.cols);
        // column-major copy so that column rotations touch contiguous memory
        let mut cols: Vec<Vec<T>> = (0..n).map(|j| work.column(j)).collect();
        let tol = T::epsilon();
        for _sweep in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha: T = cols[p].iter().map(|&x| x * x).sum();
                    let beta: T = cols[q].iter().map(|&x| x * x).sum();
                    let gamma: T = cols[p].iter().zip(&cols[q]).map(|(&a, &b)| a * b).sum();
                    if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                    let sign = if zeta >= T::zero() { T::one() } else { -T::one() };
                    let t = sign / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let a = cols[p][i];
                        let b = cols[q][i];
                        cols[p][i] = c * a - s * b;
                        cols[q][i] = s * a + c * b;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<T> = cols
            .iter()
            .map(|c| c.iter().map(|&x| x * x).sum::<T>().sqrt())
            .collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        sv
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in non-increasing order and the matching orthonormal
/// eigenvectors as the columns of the second matrix.
pub fn symmetric_eigen<T: Real>(m: &Mat<T>) -> (Vec<T>, Mat<T>) {
    assert_eq!(m.rows, m.cols, "symmetric_eigen expects a square matrix");
    let n = m.rows;
    let mut a = m.clone();
    let mut v = Mat::identity(n);
    for _sweep in 0..64 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let scale: T = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum::<T>() + off;
        if off <= T::epsilon() * T::epsilon() * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)] == T::zero() {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (T::lit(2.0) * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Mat::from_columns(n, &order.iter().map(|&i| v.column(i)).collect::<Vec<_>>());
    (values, vectors)
}

/// Number of singular values strictly above `rel_tol · σ_max`; zero when `σ_max = 0`.
pub fn numerical_rank<T: Real>(singular_values: &[T], rel_tol: T) -> usize {
    let smax = singular_values.iter().fold(T::zero(), |m, &s| m.max(s));
    if smax == T::zero() {
        return 0;
    }
    singular_values.iter().filter(|&&s| s > rel_tol * smax).count()
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rodrigues(axis: [f64; 3], angle: f64) -> Mat<f64> {
        let [x, y, z] = axis;
        let k = Mat::from_row_major(3, 3, vec![0.0, -z, y, z, 0.0, -x, -y, x, 0.0]);
        Mat::identity(3)
            .add(&k.scaled(angle.sin()))
            .add(&k.matmul(&k).scaled(1.0 - angle.cos()))
    }

    #[test]
    fn expm_matches_rodrigues() {
        let axis = [0.48, -0.6, 0.64];
        for &angle in &[0.3, 1.7, 4.0] {
            let [x, y, z] = axis;
            let w = Mat::from_row_major(3, 3, vec![0.0, -z, y, z, 0.0, -x, -y, x, 0.0]).scaled(angle);
            let e = w.expm();
            let r = rodrigues(axis, angle);
            assert!(e.sub(&r).max_abs() < 1e-13, "angle {angle}");
        }
    }

    #[test]
    fn expm_of_zero_is_identity() {
        assert_eq!(Mat::<f64>::zeros(4, 4).expm(), Mat::identity(4));
    }

    #[test]
    fn qr_reconstructs_and_is_orthogonal() {
        let a = Mat::from_row_major(
            4,
            4,
            vec![
                2.0, -1.0, 0.5, 3.0, 0.1, 4.0, -2.0, 1.0, -3.0, 0.0, 1.0, 2.5, 1.0, 1.0, 1.0, -1.0,
            ],
        );
        let (q, r) = a.qr();
        assert!(q.matmul(&r).sub(&a).max_abs() < 1e-13);
        assert!(q.transpose().matmul(&q).sub(&Mat::identity(4)).max_abs() < 1e-14);
        for i in 0..4 {
            for j in 0..i {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn det_of_permutation_and_diag() {
        let p = Mat::from_row_major(3, 3, vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(p.det(), -1.0);
        let d = Mat::from_row_major(2, 2, vec![2.0, 0.0, 0.0, 3.5]);
        assert_abs_diff_eq!(d.det(), 7.0);
    }

    #[test]
    fn singular_values_agree_with_nalgebra() {
        let data = vec![
            1.0, 2.0, 3.0, -1.0, 0.5, 0.0, 2.0, 2.0, 4.0, 6.0, -2.0, 1.0, 0.0, 0.0, 1.0,
        ];
        let ours = Mat::from_row_major(3, 5, data.clone()).singular_values();
        let theirs = nalgebra::DMatrix::from_row_slice(3, 5, &data).singular_values();
        let mut theirs: Vec<f64> = theirs.iter().copied().collect();
        theirs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(ours.len(), 3);
        for (a, b) in ours.iter().zip(&theirs) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn rank_of_rank_deficient_matrix() {
        // third row = first + second
        let m = Mat::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![0.0, 1.0, -1.0],
            vec![1.0, 3.0, 2.0],
        ]);
        assert_eq!(numerical_rank(&m.singular_values(), 1e-8), 2);
        assert_eq!(numerical_rank(&Mat::<f64>::zeros(3, 2).singular_values(), 1e-8), 0);
    }

    #[test]
    fn works_in_single_precision() {
        let w = Mat::<f32>::from_row_major(2, 2, vec![0.0, -0.7, 0.7, 0.0]);
        let e = w.expm();
        assert!((e.det() - 1.0).abs() < 1e-6);
        assert!((e[(0, 0)] - 0.7f32.cos()).abs() < 1e-6);
    }

    #[test]
    fn symmetric_eigen_diagonalizes() {
        let m = Mat::from_row_major(3, 3, vec![4.0, 1.0, -2.0, 1.0, 3.0, 0.5, -2.0, 0.5, 1.0]);
        let (vals, vecs) = symmetric_eigen(&m);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        let d = vecs.transpose().matmul(&m).matmul(&vecs);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { vals[i] } else { 0.0 };
                assert_abs_diff_eq!(d[(i, j)], want, epsilon = 1e-12);
            }
        }
        assert_abs_diff_eq!(vals.iter().sum::<f64>(), 8.0, epsilon = 1e-12);
    }
}
