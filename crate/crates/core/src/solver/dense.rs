//! Dense reference solver: Newton with a central-difference Jacobian and
//! Gaussian elimination. Test scale only.

use super::{NewtonConfig, NonlinearSystem, SolverError};
use crate::scalar::{max_abs, Scalar};

pub const DENSE_ORACLE_MAX_UNKNOWNS: usize = 512;

/// Central-difference Jacobian of `system` at `x`, row-major `n × n`.
pub fn finite_difference_jacobian<T: Scalar, S: NonlinearSystem<T> + ?Sized>(
    system: &S,
    x: &[T],
) -> Vec<T> {
    let n = x.len();
    let mut jac = vec![T::zero(); n * n];
    let base = T::epsilon().cbrt();
    let mut probe = x.to_vec();
    for c in 0..n {
        let step = base * T::one().max(x[c].abs());
        probe[c] = x[c] + step;
        let plus = system.residual(&probe);
        probe[c] = x[c] - step;
        let minus = system.residual(&probe);
        probe[c] = x[c];
        let inv = T::one() / (step + step);
        for r in 0..n {
            jac[r * n + c] = (plus[r] - minus[r]) * inv;
        }
    }
    jac
}

/// Solves the dense row-major system `a x = b` by Gaussian elimination with partial pivoting.
pub fn dense_lu_solve<T: Scalar>(mut a: Vec<T>, mut b: Vec<T>) -> Result<Vec<T>, SolverError> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i * n + k].abs().partial_cmp(&a[j * n + k].abs()).unwrap())
            .unwrap();
        if a[p * n + k] == T::zero() {
            return Err(SolverError::Singular { row: k });
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        let pivot = a[k * n + k];
        for i in k + 1..n {
            let l = a[i * n + k] / pivot;
            if l == T::zero() {
                continue;
            }
            for c in k..n {
                let u = a[k * n + c];
                a[i * n + c] -= l * u;
            }
            let bk = b[k];
            b[i] -= l * bk;
        }
    }
    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in k + 1..n {
            s -= a[k * n + c] * x[c];
        }
        x[k] = s / a[k * n + k];
    }
    Ok(x)
}

/// Solves `system` with undamped Newton on a finite-difference Jacobian.
///
/// Independent of the analytic Jacobian and of the sparse linear solvers, so it
/// serves as an oracle for [`super::newton_solve`].
pub fn dense_oracle_solve<T: Scalar, S: NonlinearSystem<T> + ?Sized>(
    system: &S,
    guess: &[T],
    cfg: &NewtonConfig,
) -> Result<Vec<T>, SolverError> {
    let n = system.len();
    if n > DENSE_ORACLE_MAX_UNKNOWNS {
        return Err(SolverError::TooLarge {
            n,
            max: DENSE_ORACLE_MAX_UNKNOWNS,
        });
    }
    let tol = T::of(cfg.tol_residual);
    let mut x = guess.to_vec();
    let mut history = Vec::new();
    for it in 0..cfg.max_iter {
        let r = system.residual(&x);
        let rn = max_abs(&r);
        history.push(rn.to_f64_lossy());
        if !rn.is_finite() {
            return Err(SolverError::NonFinite { iteration: it });
        }
        if rn <= tol {
            return Ok(x);
        }
        let jac = finite_difference_jacobian(system, &x);
        let dx = dense_lu_solve(jac, r.iter().map(|&v| -v).collect())?;
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    let rn = max_abs(&system.residual(&x));
    if rn <= tol {
        return Ok(x);
    }
    Err(SolverError::Diverged {
        iterations: cfg.max_iter,
        reason: "dense oracle iteration limit",
        residual: rn.to_f64_lossy(),
        history,
        last_iterate: x.iter().map(|v| v.to_f64_lossy()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_lu_small_system() {
        let a = vec![0.0f64, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let x = dense_lu_solve(a, vec![5.0, 3.0, 4.0]).unwrap();
        let expect = [1.0, 2.0, 1.0];
        for (xi, e) in x.iter().zip(expect) {
            assert!((xi - e).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_dense_matrix() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(dense_lu_solve(a, vec![1.0, 1.0]).is_err());
    }
}
