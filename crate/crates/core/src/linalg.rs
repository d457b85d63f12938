//! Small dense linear algebra.
//!
//! Every matrix in this crate is tiny (calibration matrices up to 256x256,
//! PCA covariances up to ~32x32, Hermitian embeddings up to 512x512), so
//! exact direct methods are used throughout: LU with partial pivoting for
//! solves and cyclic Jacobi for symmetric eigendecomposition.
//!
//! Matrices are row-major flat slices of length `n * n`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Solves `A x = b` by LU decomposition with partial pivoting.
///
/// Fails with [`Error::SingularMatrix`] when a pivot falls below
/// `1e-12 * max(1, max |a_ij|)`; `name` identifies the matrix in the error.
pub fn lu_solve<T: Scalar>(matrix: &[T], n: usize, rhs: &[T], name: &str) -> Result<Vec<T>> {
    assert_eq!(matrix.len(), n * n, "matrix shape");
    if rhs.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: rhs.len(),
        });
    }

    let scale = matrix
        .iter()
        .fold(T::one(), |acc, &v| if v.abs() > acc { v.abs() } else { acc });
    let tol = T::of(1e-12) * scale;

    let mut a = matrix.to_vec();
    let mut x = rhs.to_vec();

    for col in 0..n {
        let mut pivot_row = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot_row * n + col].abs() {
                pivot_row = row;
            }
        }
        if a[pivot_row * n + col].abs() <= tol {
            return Err(Error::SingularMatrix {
                name: name.to_string(),
                tol: 1e-12,
            });
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            x.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / pivot;
            if factor != T::zero() {
                for k in col..n {
                    let v = a[col * n + k];
                    a[row * n + k] = a[row * n + k] - factor * v;
                }
                x[row] = x[row] - factor * x[col];
            }
        }
    }

    for row in (0..n).rev() {
        let mut acc = x[row];
        for k in row + 1..n {
            acc = acc - a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Ok(x)
}

/// Eigendecomposition of a real symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    /// Eigenvalues, sorted descending.
    pub values: Vec<T>,
    /// Matching eigenvectors, each of length `n`, orthonormal.
    pub vectors: Vec<Vec<T>>,
}

/// Full eigendecomposition of a real symmetric matrix by cyclic Jacobi.
///
/// The rotation product keeps the eigenvector basis orthonormal to machine
/// precision independent of the sweep count.
pub fn sym_eigen<T: Scalar>(matrix: &[T], n: usize) -> SymEigen<T> {
    assert_eq!(matrix.len(), n * n, "matrix shape");
    let mut a = matrix.to_vec();
    // v is column-major: v[i * n + j] = component i of eigenvector j.
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }

    let norm = a.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    let stop = T::epsilon() * if norm > T::one() { norm } else { T::one() };

    for _sweep in 0..64 {
        let mut off = T::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off + a[p * n + q].abs();
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= stop * T::of(1e-3) {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (T::of(2.0) * apq);
                let t = {
                    let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                    sign / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;

                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = T::zero();
                a[q * n + p] = T::zero();
                for i in 0..n {
                    if i != p && i != q {
                        let aip = a[i * n + p];
                        let aiq = a[i * n + q];
                        a[i * n + p] = c * aip - s * aiq;
                        a[p * n + i] = a[i * n + p];
                        a[i * n + q] = s * aip + c * aiq;
                        a[q * n + i] = a[i * n + q];
                    }
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[j * n + j]
            .partial_cmp(&a[i * n + i])
            .expect("finite eigenvalues")
    });
    let values = order.iter().map(|&k| a[k * n + k]).collect();
    let vectors = order
        .iter()
        .map(|&k| (0..n).map(|i| v[i * n + k]).collect())
        .collect();
    SymEigen { values, vectors }
}

/// Smallest eigenvalue of an `n x n` Hermitian matrix.
///
/// Uses the real embedding `[[Re H, -Im H], [Im H, Re H]]`, whose spectrum
/// is the spectrum of `H` with doubled multiplicity.
pub fn hermitian_min_eigenvalue<T: Scalar>(h: &[Complex<T>], n: usize) -> T {
    assert_eq!(h.len(), n * n, "matrix shape");
    let m = 2 * n;
    let mut embed = vec![T::zero(); m * m];
    for i in 0..n {
        for j in 0..n {
            let z = h[i * n + j];
            embed[i * m + j] = z.re;
            embed[(i + n) * m + (j + n)] = z.re;
            embed[i * m + (j + n)] = -z.im;
            embed[(i + n) * m + j] = z.im;
        }
    }
    let eig = sym_eigen(&embed, m);
    *eig.values.last().expect("non-empty spectrum")
}

/// 2-norm condition number `sigma_max / sigma_min` via the spectrum of
/// `A^T A`. Returns infinity for numerically singular matrices.
pub fn condition_number<T: Scalar>(matrix: &[T], n: usize) -> T {
    assert_eq!(matrix.len(), n * n, "matrix shape");
    let mut gram = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = T::zero();
            for k in 0..n {
                acc = acc + matrix[k * n + i] * matrix[k * n + j];
            }
            gram[i * n + j] = acc;
        }
    }
    let eig = sym_eigen(&gram, n);
    let max = eig.values[0].max(T::zero()).sqrt();
    let min = eig.values[n - 1].max(T::zero()).sqrt();
    if min <= T::epsilon() * max {
        T::infinity()
    } else {
        max / min
    }
}
