//! Linear solvers for the (nonsymmetric) Newton systems.

use serde::{Deserialize, Serialize};

use super::sparse::CsrMatrix;
use super::SolverError;
use crate::scalar::{dot, norm2, Scalar};

/// Strategy used by [`linear_solve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverKind {
    /// Banded LU with partial pivoting.
    Direct,
    /// Jacobi-preconditioned BiCGStab.
    Krylov,
    /// BiCGStab, retried with banded LU if it stalls.
    KrylovThenDirect,
}

/// A linear operator available both assembled and (optionally) matrix-free.
///
/// Solvers always work on the assembled matrix; the matrix-free form exists so
/// the two representations can be checked against each other.
pub struct SparseOperator<T> {
    matrix: CsrMatrix<T>,
    matrix_free: Option<Box<dyn Fn(&[T]) -> Vec<T> + Send + Sync>>,
}

impl<T: Scalar> SparseOperator<T> {
    pub fn assembled(matrix: CsrMatrix<T>) -> Self {
        Self {
            matrix,
            matrix_free: None,
        }
    }

    pub fn with_matrix_free(
        matrix: CsrMatrix<T>,
        apply: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            matrix,
            matrix_free: Some(Box::new(apply)),
        }
    }

    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.nrows() == 0
    }

    /// Matrix-free product if one was supplied, otherwise the assembled one.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        match &self.matrix_free {
            Some(f) => f(x),
            None => self.matrix.mul_vec(x),
        }
    }

    pub fn apply_assembled(&self, x: &[T]) -> Vec<T> {
        self.matrix.mul_vec(x)
    }

    pub fn has_matrix_free(&self) -> bool {
        self.matrix_free.is_some()
    }
}

impl<T: Scalar> std::fmt::Debug for SparseOperator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseOperator")
            .field("n", &self.matrix.nrows())
            .field("nnz", &self.matrix.nnz())
            .field("matrix_free", &self.matrix_free.is_some())
            .finish()
    }
}

/// LU factors of a banded matrix (row interchanges kept separately, as in LAPACK `gbtrf`).
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: Scalar> BandedLu<T> {
    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn factor(a: &CsrMatrix<T>) -> Result<Self, SolverError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "banded LU needs a square matrix");
        let (kl, ku0) = a.bandwidths();
        // Pivoting can push fill up to kl extra superdiagonals.
        let ku = ku0 + kl;
        let width = kl + ku + 1;
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
            pivots: vec![0; n],
        };
        for r in 0..n {
            let (cols, vals) = a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let s = lu.slot(r, c);
                lu.data[s] += v;
            }
        }
        let scale = lu.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.slot(k, k)].abs();
            for i in k + 1..=last {
                let v = lu.data[lu.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > scale * T::epsilon() * T::of(1e-3)) {
                return Err(SolverError::Singular { row: k });
            }
            lu.pivots[k] = p;
            let jmax = (k + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (lu.slot(k, j), lu.slot(p, j));
                    lu.data.swap(a, b);
                }
            }
            let pivot = lu.data[lu.slot(k, k)];
            for i in k + 1..=last {
                let sik = lu.slot(i, k);
                let l = lu.data[sik] / pivot;
                lu.data[sik] = l;
                if l != T::zero() {
                    for j in k + 1..=jmax {
                        let (sij, skj) = (lu.slot(i, j), lu.slot(k, j));
                        let u = lu.data[skj];
                        lu.data[sij] -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut x = b.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] -= self.data[self.slot(i, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + self.ku).min(n - 1) {
                s -= self.data[self.slot(k, j)] * x[j];
            }
            x[k] = s / self.data[self.slot(k, k)];
        }
        x
    }
}

fn residual<T: Scalar>(a: &CsrMatrix<T>, x: &[T], b: &[T]) -> Vec<T> {
    a.mul_vec(x)
        .iter()
        .zip(b)
        .map(|(&ax, &bi)| bi - ax)
        .collect()
}

/// Direct solve with up to three sweeps of iterative refinement.
pub fn solve_direct<T: Scalar>(a: &CsrMatrix<T>, b: &[T], tol: T) -> Result<Vec<T>, SolverError> {
    let lu = BandedLu::factor(a)?;
    let bnorm = norm2(b);
    let mut x = lu.solve(b);
    let mut r = residual(a, &x, b);
    let mut rn = norm2(&r);
    for _ in 0..3 {
        if rn <= tol * bnorm {
            break;
        }
        let dx = lu.solve(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        r = residual(a, &x, b);
        rn = norm2(&r);
    }
    if rn <= tol * bnorm && x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(SolverError::LinearBreakdown {
            method: "banded LU",
            iterations: 1,
            relative_residual: (rn / bnorm).to_f64_lossy(),
        })
    }
}

/// Right-preconditioned BiCGStab with a Jacobi (diagonal) preconditioner.
pub fn bicgstab<T: Scalar>(
    a: &CsrMatrix<T>,
    b: &[T],
    tol: T,
    max_iter: usize,
) -> Result<Vec<T>, SolverError> {
    let n = b.len();
    let bnorm = norm2(b);
    let diag_inv: Vec<T> = a
        .diagonal_entries()
        .into_iter()
        .map(|d| {
            if d != T::zero() {
                T::one() / d
            } else {
                T::one()
            }
        })
        .collect();
    let precond = |v: &[T]| -> Vec<T> { v.iter().zip(&diag_inv).map(|(&x, &d)| x * d).collect() };

    let mut x = vec![T::zero(); n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let mut rho_prev = T::one();
    let mut alpha = T::one();
    let mut omega = T::one();
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let target = tol * bnorm;
    let mut rn = norm2(&r);
    for it in 1..=max_iter {
        if rn <= target {
            break;
        }
        let rho = dot(&r_hat, &r);
        if rho == T::zero() || omega == T::zero() {
            return Err(SolverError::LinearBreakdown {
                method: "BiCGStab",
                iterations: it,
                relative_residual: (rn / bnorm).to_f64_lossy(),
            });
        }
        let beta = (rho / rho_prev) * (alpha / omega);
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        let p_hat = precond(&p);
        v = a.mul_vec(&p_hat);
        let rv = dot(&r_hat, &v);
        if rv == T::zero() {
            return Err(SolverError::LinearBreakdown {
                method: "BiCGStab",
                iterations: it,
                relative_residual: (rn / bnorm).to_f64_lossy(),
            });
        }
        alpha = rho / rv;
        let s: Vec<T> = r.iter().zip(&v).map(|(&ri, &vi)| ri - alpha * vi).collect();
        if norm2(&s) <= target {
            for k in 0..n {
                x[k] += alpha * p_hat[k];
            }
            break;
        }
        let s_hat = precond(&s);
        let t = a.mul_vec(&s_hat);
        let tt = dot(&t, &t);
        omega = if tt > T::zero() {
            dot(&t, &s) / tt
        } else {
            T::zero()
        };
        for k in 0..n {
            x[k] += alpha * p_hat[k] + omega * s_hat[k];
            r[k] = s[k] - omega * t[k];
        }
        rn = norm2(&r);
        rho_prev = rho;
        if !rn.is_finite() {
            break;
        }
    }
    // The recursively updated residual can drift; confirm with the true one.
    let true_rn = norm2(&residual(a, &x, b));
    if true_rn <= target {
        Ok(x)
    } else {
        Err(SolverError::LinearBreakdown {
            method: "BiCGStab",
            iterations: max_iter,
            relative_residual: (true_rn / bnorm).to_f64_lossy(),
        })
    }
}

/// Solves `A x = b` to `‖Ax - b‖₂ ≤ tol ‖b‖₂`, with `tol` raised to `64ε` of
/// the scalar type if it asks for more than the arithmetic can deliver.
pub fn linear_solve<T: Scalar>(
    a: &SparseOperator<T>,
    b: &[T],
    tol: T,
    kind: LinearSolverKind,
) -> Result<Vec<T>, SolverError> {
    let tol = tol.max(T::epsilon() * T::of(64.0));
    let m = a.matrix();
    assert_eq!(m.nrows(), b.len(), "right-hand side length mismatch");
    if b.iter().all(|&x| x == T::zero()) {
        return Ok(vec![T::zero(); b.len()]);
    }
    let max_iter = (4 * b.len()).max(200);
    match kind {
        LinearSolverKind::Direct => solve_direct(m, b, tol),
        LinearSolverKind::Krylov => bicgstab(m, b, tol, max_iter),
        LinearSolverKind::KrylovThenDirect => bicgstab(m, b, tol, max_iter).or_else(|e| {
            log::debug!("{e}; retrying with banded LU");
            solve_direct(m, b, tol)
        }),
    }
}
