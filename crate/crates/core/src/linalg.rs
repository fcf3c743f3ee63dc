//! Small dense linear algebra used by the fitter and the QP solver.
//!
//! Sizes here are tiny (regression blocks of 4 columns, QP systems up to a
//! few hundred), so the factorizations are written directly on row-major
//! `Vec` storage instead of pulling in a matrix crate.

use crate::scalar::Real;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub(crate) struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factor a symmetric matrix given in row-major order.
    /// Returns `None` if a non-positive pivot is encountered.
    pub fn factor(a: &[T], n: usize) -> Option<Self> {
        debug_assert_eq!(a.len(), n * n);
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = a[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if d <= T::zero() || !d.is_finite() {
                return None;
            }
            let dj = d.sqrt();
            l[j * n + j] = dj;
            for i in (j + 1)..n {
                let mut s = a[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / dj;
            }
        }
        Some(Cholesky { n, l })
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        // forward: L y = b
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i * n + k] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
        // backward: L^T x = y
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * b[k];
            }
            b[i] = s / self.l[i * n + i];
        }
    }
}

/// Least-squares solve `min ||A x - B||` by Householder QR with column
/// equilibration. `B` has `nrhs` right-hand sides stored column-wise.
///
/// Returns the `cols x nrhs` solution, or `None` when `A` is rank deficient
/// (trailing `R` diagonal below `rank_tol` relative to the largest one).
pub(crate) fn lstsq_qr<T: Real>(a: &Mat<T>, b: &Mat<T>, rank_tol: T) -> Option<Mat<T>> {
    let m = a.rows;
    let n = a.cols;
    let nrhs = b.cols;
    assert_eq!(b.rows, m);
    if m < n {
        return None;
    }

    // Column equilibration keeps the factorization well scaled when the
    // regressor columns span many orders of magnitude (metres vs. watts).
    let mut scale = vec![T::one(); n];
    for j in 0..n {
        let mut mx = T::zero();
        for i in 0..m {
            mx = mx.max(a.at(i, j).abs());
        }
        if mx > T::zero() {
            scale[j] = mx;
        }
    }

    let mut q = Mat::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            *q.at_mut(i, j) = a.at(i, j) / scale[j];
        }
    }
    let mut rhs = b.clone();

    // Householder triangularization, applying reflectors to rhs as we go.
    let mut rdiag = vec![T::zero(); n];
    for j in 0..n {
        let mut norm = T::zero();
        for i in j..m {
            norm += q.at(i, j) * q.at(i, j);
        }
        let norm = norm.sqrt();
        if norm == T::zero() {
            rdiag[j] = T::zero();
            continue;
        }
        let alpha = if q.at(j, j) >= T::zero() { -norm } else { norm };
        // v = x - alpha e1, stored in the column below the diagonal
        let vjj = q.at(j, j) - alpha;
        *q.at_mut(j, j) = vjj;
        let mut vtv = T::zero();
        for i in j..m {
            vtv += q.at(i, j) * q.at(i, j);
        }
        rdiag[j] = alpha;
        if vtv == T::zero() {
            continue;
        }
        for col in (j + 1)..n {
            let mut dot = T::zero();
            for i in j..m {
                dot += q.at(i, j) * q.at(i, col);
            }
            let f = real::<T>(2.0) * dot / vtv;
            for i in j..m {
                let d = q.at(i, j);
                *q.at_mut(i, col) -= f * d;
            }
        }
        for col in 0..nrhs {
            let mut dot = T::zero();
            for i in j..m {
                dot += q.at(i, j) * rhs.at(i, col);
            }
            let f = real::<T>(2.0) * dot / vtv;
            for i in j..m {
                let d = q.at(i, j);
                *rhs.at_mut(i, col) -= f * d;
            }
        }
    }

    let max_diag = rdiag.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    if max_diag == T::zero() {
        return None;
    }
    for j in 0..n {
        if rdiag[j].abs() <= rank_tol * max_diag {
            return None;
        }
    }

    // Back substitution on the implicit R (strict upper part of q + rdiag).
    let mut x = Mat::zeros(n, nrhs);
    for col in 0..nrhs {
        for i in (0..n).rev() {
            let mut s = rhs.at(i, col);
            for k in (i + 1)..n {
                s -= q.at(i, k) * x.at(k, col);
            }
            *x.at_mut(i, col) = s / rdiag[i];
        }
    }
    // Undo equilibration.
    for j in 0..n {
        for col in 0..nrhs {
            *x.at_mut(j, col) /= scale[j];
        }
    }
    Some(x)
}

use crate::scalar::real;
