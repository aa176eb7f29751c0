//! Newton iteration for the implicit density update, the linear solvers behind
//! it, and a dense finite-difference oracle used to cross-check both.

mod dense;
mod linear;
mod sparse;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{max_abs, Scalar};

pub use dense::{
    dense_lu_solve, dense_oracle_solve, finite_difference_jacobian, DENSE_ORACLE_MAX_UNKNOWNS,
};
pub use linear::{
    bicgstab, linear_solve, solve_direct, BandedLu, LinearSolverKind, SparseOperator,
};
pub use sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(
        "Newton did not converge after {iterations} iterations ({reason}); residual {residual:e}"
    )]
    Diverged {
        iterations: usize,
        reason: &'static str,
        residual: f64,
        history: Vec<f64>,
        last_iterate: Vec<f64>,
    },
    #[error("non-finite residual at Newton iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error(
        "{method} failed after {iterations} iterations; relative residual {relative_residual:e}"
    )]
    LinearBreakdown {
        method: &'static str,
        iterations: usize,
        relative_residual: f64,
    },
    #[error("zero pivot in row {row}")]
    Singular { row: usize },
    #[error("dense oracle limited to {max} unknowns, got {n}")]
    TooLarge { n: usize, max: usize },
}

/// A square nonlinear system `R(x) = 0` with an analytic Jacobian.
pub trait NonlinearSystem<T: Scalar> {
    fn len(&self) -> usize;

    fn residual(&self, x: &[T]) -> Vec<T>;

    fn jacobian(&self, x: &[T]) -> SparseOperator<T>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonConfig {
    /// Converged once `‖R‖_∞` drops to this value.
    pub tol_residual: f64,
    /// Updates smaller than this (∞-norm) without convergence count as stagnation.
    pub tol_step: f64,
    pub max_iter: usize,
    /// Relative tolerance for each linear solve.
    pub linear_tol: f64,
    /// Residual-halving safeguard on the Newton step.
    pub line_search: bool,
    pub max_halvings: usize,
    /// `None` picks banded LU in 1D and Krylov (with LU fallback) in 2D.
    pub linear_solver: Option<LinearSolverKind>,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol_residual: 1e-7,
            tol_step: 1e-12,
            max_iter: 50,
            linear_tol: 1e-10,
            line_search: true,
            max_halvings: 20,
            linear_solver: None,
        }
    }
}

impl NewtonConfig {
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol_residual = tol;
        self
    }

    /// # Panics
    /// On nonpositive tolerances or `max_iter == 0`.
    pub fn validate(&self) {
        assert!(self.tol_residual > 0.0 && self.tol_step > 0.0 && self.linear_tol > 0.0);
        assert!(self.max_iter >= 1);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome<T> {
    pub solution: Vec<T>,
    pub iterations: usize,
    /// `‖R(solution)‖_∞`.
    pub residual: T,
    /// `‖R‖_∞` before each iteration and at the end.
    pub history: Vec<T>,
}

fn to_f64<T: Scalar>(xs: &[T]) -> Vec<f64> {
    xs.iter().map(|x| x.to_f64_lossy()).collect()
}

/// Damped Newton iteration starting from `guess`.
pub fn newton_solve<T: Scalar, S: NonlinearSystem<T> + ?Sized>(
    system: &S,
    guess: &[T],
    cfg: &NewtonConfig,
    linear: LinearSolverKind,
) -> Result<NewtonOutcome<T>, SolverError> {
    cfg.validate();
    assert_eq!(guess.len(), system.len());
    let tol = T::of(cfg.tol_residual);
    let mut x = guess.to_vec();
    let mut r = system.residual(&x);
    let mut rn = max_abs(&r);
    let mut history = vec![rn];
    for it in 0..cfg.max_iter {
        if !rn.is_finite() {
            return Err(SolverError::NonFinite { iteration: it });
        }
        if rn <= tol {
            return Ok(NewtonOutcome {
                solution: x,
                iterations: it,
                residual: rn,
                history,
            });
        }
        let jac = system.jacobian(&x);
        let neg_r: Vec<T> = r.iter().map(|&v| -v).collect();
        let dx = linear_solve(&jac, &neg_r, T::of(cfg.linear_tol), linear)?;

        let mut alpha = T::one();
        let mut trial: Vec<T> = x.iter().zip(&dx).map(|(&a, &d)| a + d).collect();
        let mut r_trial = system.residual(&trial);
        let mut rn_trial = max_abs(&r_trial);
        if cfg.line_search {
            let mut halvings = 0;
            while !(rn_trial < rn) && halvings < cfg.max_halvings {
                alpha = alpha * T::of(0.5);
                trial = x.iter().zip(&dx).map(|(&a, &d)| a + alpha * d).collect();
                r_trial = system.residual(&trial);
                rn_trial = max_abs(&r_trial);
                halvings += 1;
            }
            if !(rn_trial < rn) {
                // No decrease along the direction: take the full step anyway.
                alpha = T::one();
                trial = x.iter().zip(&dx).map(|(&a, &d)| a + d).collect();
                r_trial = system.residual(&trial);
                rn_trial = max_abs(&r_trial);
            }
        }
        let step = alpha * max_abs(&dx);
        x = trial;
        r = r_trial;
        rn = rn_trial;
        history.push(rn);
        if rn.is_finite() && rn > tol && step <= T::of(cfg.tol_step) {
            return Err(SolverError::Diverged {
                iterations: it + 1,
                reason: "stagnated",
                residual: rn.to_f64_lossy(),
                history: to_f64(&history),
                last_iterate: to_f64(&x),
            });
        }
    }
    if !rn.is_finite() {
        return Err(SolverError::NonFinite {
            iteration: cfg.max_iter,
        });
    }
    if rn <= tol {
        return Ok(NewtonOutcome {
            solution: x,
            iterations: cfg.max_iter,
            residual: rn,
            history,
        });
    }
    Err(SolverError::Diverged {
        iterations: cfg.max_iter,
        reason: "iteration limit",
        residual: rn.to_f64_lossy(),
        history: to_f64(&history),
        last_iterate: to_f64(&x),
    })
}
