//! Discrete mass and energy functionals, L² errors and convergence orders.
//!
//! Mass and energies are plain node sums; the `_weighted` variants multiply by
//! the cell volume `h^d`.

use serde::Serialize;
use thiserror::Error;

use crate::grid::{GridSpec, Parity, ScalarField, VectorField};
use crate::model::EnergyModel;
use crate::operators::grad_forward;
use crate::scalar::Scalar;
use crate::stepper::State;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("reference grid ({reference} cells) is not a refinement of the {cells}-cell grid")]
    NotNested { cells: usize, reference: usize },
    #[error("relative error requested against a reference of zero norm")]
    ZeroReference,
    #[error("error values must be positive, got {0:e} at K={1}")]
    NonPositiveError(f64, usize),
    #[error("grid sizes must double between consecutive entries ({0} -> {1})")]
    NotDoubling(usize, usize),
}

/// Per-step record written to the time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepDiagnostics<T> {
    pub t: T,
    pub step: usize,
    /// `Σρ` over nodes.
    pub mass: T,
    pub total_energy: T,
    pub kinetic_energy: T,
    pub newton_iters: usize,
    /// Largest ∞-norm residual among the three scheme equations.
    pub max_residual: T,
    /// `τ` divided by the kinetic-energy CFL bound at the start of the step.
    pub cfl_ratio: T,
    /// `τ` divided by the energy-estimate bound, evaluated after the step.
    pub energy_cfl_ratio: T,
    pub min_density: T,
    pub mu_h: T,
}

/// `Σρ`.
pub fn mass<T: Scalar>(rho: &ScalarField<T>) -> T {
    rho.sum()
}

/// `Σ ½ρ|v|²`.
pub fn kinetic_energy<T: Scalar>(state: &State<T>) -> T {
    let half = T::of(0.5);
    state
        .rho
        .values()
        .iter()
        .zip(state.v.norm_sq().values())
        .map(|(&r, &v2)| half * r * v2)
        .sum()
}

/// `Σ (1/M²)(W(ρ) + γ/2 |∇̃_hρ|²) + ½ρ|v|²` with a forward-difference gradient.
pub fn total_energy<T: Scalar, E: EnergyModel<T> + ?Sized>(
    state: &State<T>,
    model: &E,
    mach: T,
) -> T {
    let inv_m2 = T::one() / (mach * mach);
    let half = T::of(0.5);
    let grad2 = grad_forward(&state.rho, Parity::Symmetric).norm_sq();
    let potential: T = state
        .rho
        .values()
        .iter()
        .zip(grad2.values())
        .map(|(&r, &g2)| model.w(r) + half * model.gamma() * g2)
        .sum();
    inv_m2 * potential + kinetic_energy(state)
}

/// [`total_energy`] times `h^d`.
pub fn total_energy_weighted<T: Scalar, E: EnergyModel<T> + ?Sized>(
    state: &State<T>,
    model: &E,
    mach: T,
) -> T {
    total_energy(state, model, mach) * state.grid().cell_volume()
}

/// [`kinetic_energy`] times `h^d`.
pub fn kinetic_energy_weighted<T: Scalar>(state: &State<T>) -> T {
    kinetic_energy(state) * state.grid().cell_volume()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    Absolute,
    Relative,
}

/// Refinement factor of `reference` over `grid`, if the node sets are nested.
fn refinement<T: Scalar>(
    grid: &GridSpec<T>,
    reference: &GridSpec<T>,
) -> Result<usize, DiagnosticsError> {
    let err = DiagnosticsError::NotNested {
        cells: grid.cells(),
        reference: reference.cells(),
    };
    let tol = T::of(1e-12) * reference.length().abs().max(T::one());
    if grid.dim() != reference.dim()
        || !reference.cells().is_multiple_of(grid.cells())
        || (grid.origin() - reference.origin()).abs() > tol
        || (grid.length() - reference.length()).abs() > tol
    {
        return Err(err);
    }
    Ok(reference.cells() / grid.cells())
}

/// Values of `reference` at the nodes of `grid` (nodal restriction).
pub fn restrict<T: Scalar>(
    reference: &ScalarField<T>,
    grid: &GridSpec<T>,
) -> Result<ScalarField<T>, DiagnosticsError> {
    let r = refinement(grid, reference.grid())?;
    Ok(ScalarField::from_index_fn(*grid, |i, j| {
        reference.at(i * r, j * r)
    }))
}

/// `sqrt(h^d Σ(f − ref)²)`, divided by `sqrt(h^d Σ ref²)` in relative mode.
/// `reference` may live on a nested finer grid.
pub fn l2_error<T: Scalar>(
    f: &ScalarField<T>,
    reference: &ScalarField<T>,
    mode: ErrorMode,
) -> Result<T, DiagnosticsError> {
    l2_error_components(&[f], &[reference], mode)
}

/// Same as [`l2_error`] with `|·|` the Euclidean norm over components.
pub fn l2_error_vector<T: Scalar>(
    f: &VectorField<T>,
    reference: &VectorField<T>,
    mode: ErrorMode,
) -> Result<T, DiagnosticsError> {
    let a: Vec<&ScalarField<T>> = f.components().iter().collect();
    let b: Vec<&ScalarField<T>> = reference.components().iter().collect();
    l2_error_components(&a, &b, mode)
}

fn l2_error_components<T: Scalar>(
    f: &[&ScalarField<T>],
    reference: &[&ScalarField<T>],
    mode: ErrorMode,
) -> Result<T, DiagnosticsError> {
    assert_eq!(f.len(), reference.len());
    let mut diff = T::zero();
    let mut norm = T::zero();
    for (a, b) in f.iter().zip(reference) {
        let b = restrict(b, a.grid())?;
        for (&x, &y) in a.values().iter().zip(b.values()) {
            diff += (x - y) * (x - y);
            norm += y * y;
        }
    }
    let vol = f[0].grid().cell_volume();
    let abs = (vol * diff).sqrt();
    match mode {
        ErrorMode::Absolute => Ok(abs),
        ErrorMode::Relative if norm == T::zero() => Err(DiagnosticsError::ZeroReference),
        ErrorMode::Relative => Ok(abs / (vol * norm).sqrt()),
    }
}

/// `log₂(e_K / e_{2K})` for consecutive entries of a doubling sequence.
pub fn eoc<T: Scalar>(errors: &[(usize, T)]) -> Result<Vec<T>, DiagnosticsError> {
    for &(k, e) in errors {
        if !(e > T::zero()) {
            return Err(DiagnosticsError::NonPositiveError(e.to_f64_lossy(), k));
        }
    }
    errors
        .windows(2)
        .map(|w| {
            let ((k0, e0), (k1, e1)) = (w[0], w[1]);
            if k1 != 2 * k0 {
                return Err(DiagnosticsError::NotDoubling(k0, k1));
            }
            Ok((e0 / e1).log2())
        })
        .collect()
}
