//! The five reference experiments as ready-to-run configurations.
//!
//! | preset | domain      | M    | γ      | τ       | end      |
//! |--------|-------------|------|--------|---------|----------|
//! | exp51  | `[0,1]²`    | 1    | 9e-4   | 5e-4    | 2000 steps (T = 1) |
//! | exp52  | `[0,1]²`    | 1e-2 | 9e-4   | 5e-4    | 2000 steps |
//! | exp53  | `[-1,1]`    | 1    | 1e-3   | h/100   | T = 0.0125 |
//! | exp54  | `[-1,1]`    | 0.05 | 1e-3   | h/5     | T = 0.25 |
//! | exp55  | exp53 with the linearised density update |
//!
//! The step counts of exp51/exp52 are inferred as `T/τ`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EnergyModel, InitialData, ModelError, QuarticDoubleWell};
use crate::grid::{mean_subtract, Dim, GridSpec, Parity, ScalarField, VectorField};
use crate::operators::laplacian5;
use crate::scalar::Scalar;
use crate::solver::{
    newton_solve, CsrMatrix, LinearSolverKind, NewtonConfig, NonlinearSystem, SparseOperator,
};
use crate::stepper::{laplacian_matrix, SchemeParams, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Exp51,
    Exp52,
    Exp53,
    Exp54,
    Exp55,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Exp51,
        Preset::Exp52,
        Preset::Exp53,
        Preset::Exp54,
        Preset::Exp55,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Exp51 => "exp51",
            Preset::Exp52 => "exp52",
            Preset::Exp53 => "exp53",
            Preset::Exp54 => "exp54",
            Preset::Exp55 => "exp55",
        }
    }

    pub fn dim(self) -> Dim {
        match self {
            Preset::Exp51 | Preset::Exp52 => Dim::Two,
            _ => Dim::One,
        }
    }

    pub fn default_cells(self) -> usize {
        match self {
            Preset::Exp51 | Preset::Exp52 | Preset::Exp54 => 40,
            Preset::Exp53 | Preset::Exp55 => 80,
        }
    }

    pub fn default_mach(self) -> f64 {
        match self {
            Preset::Exp52 => 1e-2,
            Preset::Exp54 => 0.05,
            _ => 1.0,
        }
    }

    pub fn gamma(self) -> f64 {
        match self {
            Preset::Exp51 | Preset::Exp52 => 9e-4,
            _ => 1e-3,
        }
    }

    /// Whether the initial density is an exact steady state of the PDE.
    pub fn has_exact_solution(self) -> bool {
        self == Preset::Exp54
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ModelError::UnknownPreset(s.to_string()))
    }
}

/// Everything needed to run an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration<T> {
    pub preset: Option<Preset>,
    pub grid: GridSpec<T>,
    pub model: QuarticDoubleWell<T>,
    pub initial: InitialData<T>,
    pub params: SchemeParams,
    pub steps: usize,
    pub newton: NewtonConfig,
}

impl<T: Scalar> Configuration<T> {
    pub fn t_final(&self) -> f64 {
        self.params.tau * self.steps as f64
    }

    /// Exact density and velocity, when the preset is a steady state.
    pub fn exact_solution(&self) -> Option<(ScalarField<T>, VectorField<T>)> {
        match self.preset {
            Some(Preset::Exp54) => Some((
                exp54_profile(self.grid, self.model.gamma),
                VectorField::zeros(self.grid),
            )),
            _ => None,
        }
    }

    /// Replaces exp52's initial density by a discrete equilibrium plus an
    /// `O(M²)` mean-free perturbation (see [`well_prepared`]).
    pub fn into_well_prepared(mut self) -> Result<Self, ModelError> {
        if self.preset != Some(Preset::Exp52) {
            return Err(ModelError::Incompatible {
                preset: self.preset.map_or("custom", Preset::name),
                dim: self.grid.dim().as_usize(),
                reason: "well-prepared construction is defined for exp52 only".into(),
            });
        }
        let gamma = self.model.gamma;
        let guess = exp52_profile(self.grid, gamma, T::zero());
        let shape = exp52_shape(self.grid, gamma);
        self.initial = well_prepared(&guess, &shape, &self.model, T::of(self.params.mach))?;
        Ok(self)
    }
}

fn exp51_profile<T: Scalar>(grid: GridSpec<T>) -> ScalarField<T> {
    let k = grid.cells() as f64;
    ScalarField::from_index_fn(grid, |i, j| {
        let (x, y) = (i as f64 / k, j as f64 / k);
        let v = if (x - 0.25).abs() + (y - 0.25).abs() <= 0.25 {
            3.0
        } else if (x - 0.75).abs() + (y - 0.75).abs() <= 0.25 {
            2.0
        } else {
            1.0
        };
        T::of(v)
    })
}

fn exp52_arg<T: Scalar>(grid: GridSpec<T>, gamma: T) -> ScalarField<T> {
    let k = T::of_usize(grid.cells());
    let half = T::of(0.5);
    let slope = (T::of(2.0) / gamma).sqrt();
    ScalarField::from_index_fn(grid, |i, j| {
        let dx = T::of_usize(i) / k - half;
        let dy = T::of_usize(j) / k - half;
        slope * ((dx * dx + dy * dy).sqrt() - T::of(0.25))
    })
}

/// `3/2 − (½ + 4M)·tanh(√(2/γ)(r − ¼))`, centred at `(½, ½)`.
fn exp52_profile<T: Scalar>(grid: GridSpec<T>, gamma: T, mach: T) -> ScalarField<T> {
    let amp = T::of(0.5) + T::of(4.0) * mach;
    exp52_arg(grid, gamma).map(|a| T::of(1.5) - amp * a.tanh())
}

/// Derivative of the exp52 profile with respect to `M`.
fn exp52_shape<T: Scalar>(grid: GridSpec<T>, gamma: T) -> ScalarField<T> {
    exp52_arg(grid, gamma).map(|a| -T::of(4.0) * a.tanh())
}

fn exp53_profile<T: Scalar>(grid: GridSpec<T>, gamma: T) -> ScalarField<T> {
    let s = T::of(2.0) / gamma.sqrt();
    ScalarField::from_fn(grid, |x, _| T::of(1.5) + (s * x).tanh())
}

fn exp54_profile<T: Scalar>(grid: GridSpec<T>, gamma: T) -> ScalarField<T> {
    let s = T::one() / (T::of(2.0) * gamma).sqrt();
    ScalarField::from_fn(grid, |x, _| T::of(1.5) + T::of(0.5) * (s * x).tanh())
}

/// Builds a preset configuration. `cells` and `mach` default per preset.
pub fn preset<T: Scalar>(
    p: Preset,
    cells: Option<usize>,
    mach: Option<f64>,
) -> Result<Configuration<T>, ModelError> {
    let k = cells.unwrap_or_else(|| p.default_cells());
    if k < 2 {
        return Err(ModelError::Incompatible {
            preset: p.name(),
            dim: p.dim().as_usize(),
            reason: format!("need at least 2 cells, got {k}"),
        });
    }
    let mach = mach.unwrap_or_else(|| p.default_mach());
    if !(mach > 0.0) {
        return Err(ModelError::Incompatible {
            preset: p.name(),
            dim: p.dim().as_usize(),
            reason: format!("Mach number must be positive, got {mach}"),
        });
    }
    let gamma = T::of(p.gamma());
    let model = QuarticDoubleWell::new(gamma);
    let (grid, rho, tau, steps) = match p {
        Preset::Exp51 | Preset::Exp52 => {
            let grid = GridSpec::unit(Dim::Two, k);
            let rho = if p == Preset::Exp51 {
                exp51_profile(grid)
            } else {
                exp52_profile(grid, gamma, T::of(mach))
            };
            (grid, rho, 5e-4, 2000)
        }
        Preset::Exp53 | Preset::Exp55 | Preset::Exp54 => {
            let grid = GridSpec::symmetric(Dim::One, k);
            let h = 2.0 / k as f64;
            let (rho, nominal_tau, t_end) = if p == Preset::Exp54 {
                (exp54_profile(grid, gamma), h / 5.0, 0.25)
            } else {
                (exp53_profile(grid, gamma), h / 100.0, 0.0125)
            };
            let steps = ((t_end / nominal_tau).round() as usize).max(1);
            (grid, rho, t_end / steps as f64, steps)
        }
    };
    let mut params = SchemeParams::new(mach, tau);
    if p == Preset::Exp55 {
        params.variant = Variant::Linearized;
    }
    let newton = if p == Preset::Exp54 {
        NewtonConfig::default().with_tolerance(1e-11)
    } else {
        NewtonConfig::default()
    };
    let initial = InitialData::at_rest(rho)?;
    Ok(Configuration {
        preset: Some(p),
        grid,
        model,
        initial,
        params,
        steps,
        newton,
    })
}

/// `[W'(ρ) − γΔ_hρ − λ ; Σρ − m]` in the unknowns `(ρ, λ)`.
struct EquilibriumSystem<'a, T: Scalar, E: EnergyModel<T> + ?Sized> {
    grid: GridSpec<T>,
    model: &'a E,
    mass: T,
    laplacian: CsrMatrix<T>,
}

impl<T: Scalar, E: EnergyModel<T> + ?Sized> NonlinearSystem<T> for EquilibriumSystem<'_, T, E> {
    fn len(&self) -> usize {
        self.grid.len() + 1
    }

    fn residual(&self, x: &[T]) -> Vec<T> {
        let n = self.grid.len();
        let rho = ScalarField::new(self.grid, x[..n].to_vec());
        let lap = laplacian5(&rho, Parity::Symmetric);
        let gamma = self.model.gamma();
        let mut r: Vec<T> = rho
            .values()
            .iter()
            .zip(lap.values())
            .map(|(&p, &l)| self.model.dw(p) - gamma * l - x[n])
            .collect();
        r.push(rho.sum() - self.mass);
        r
    }

    fn jacobian(&self, x: &[T]) -> SparseOperator<T> {
        let n = self.grid.len();
        let mut trip = Vec::with_capacity(self.laplacian.nnz() + 3 * n);
        let gamma = self.model.gamma();
        for r in 0..n {
            let (cols, vals) = self.laplacian.row(r);
            trip.extend(cols.iter().zip(vals).map(|(&c, &v)| (r, c, -gamma * v)));
            trip.push((r, r, self.model.d2w(x[r])));
            trip.push((r, n, -T::one()));
            trip.push((n, r, T::one()));
        }
        SparseOperator::assembled(CsrMatrix::from_triplets(n + 1, n + 1, trip))
    }
}

/// Discrete equilibrium near `guess`: a density with the mass of `guess` and
/// spatially constant `W'(ρ) − γΔ_hρ` (symmetric ghosts), i.e. a state the
/// scheme leaves unchanged when at rest.
///
/// Solved by Newton on the system bordered with the mass constraint; `tol`
/// bounds the ∞-norm of the chemical-potential residual.
pub fn discrete_equilibrium<T: Scalar, E: EnergyModel<T> + ?Sized>(
    guess: &ScalarField<T>,
    model: &E,
    tol: T,
) -> Result<ScalarField<T>, ModelError> {
    let grid = *guess.grid();
    let system = EquilibriumSystem {
        grid,
        model,
        mass: guess.sum(),
        laplacian: laplacian_matrix(&grid, Parity::Symmetric),
    };
    let lap = laplacian5(guess, Parity::Symmetric);
    let n = grid.len();
    let mean_lambda = guess
        .values()
        .iter()
        .zip(lap.values())
        .map(|(&p, &l)| model.dw(p) - model.gamma() * l)
        .sum::<T>()
        / T::of_usize(n);
    let mut x = guess.values().to_vec();
    x.push(mean_lambda);
    let cfg = NewtonConfig {
        tol_residual: tol.to_f64_lossy(),
        tol_step: 1e-300,
        linear_tol: 1e-14,
        max_iter: 100,
        ..NewtonConfig::default()
    };
    let out = newton_solve(&system, &x, &cfg, LinearSolverKind::Direct)
        .map_err(|e| ModelError::Equilibrium(e.to_string()))?;
    let rho = ScalarField::new(grid, out.solution[..n].to_vec());
    if let Some((node, &value)) = rho
        .values()
        .iter()
        .enumerate()
        .find(|(_, &r)| !(r > T::zero()))
    {
        return Err(ModelError::NonPositiveInitial {
            node,
            value: value.to_f64_lossy(),
        });
    }
    Ok(rho)
}

/// Well-prepared initial data `ρ⁰ = ρ_eq + M²·P(shape)`, `v⁰ = 0`, where
/// `ρ_eq` is the discrete equilibrium reached from `guess` and `P` removes the
/// mean so the mass of `ρ_eq` is kept.
pub fn well_prepared<T: Scalar, E: EnergyModel<T> + ?Sized>(
    guess: &ScalarField<T>,
    shape: &ScalarField<T>,
    model: &E,
    mach: T,
) -> Result<InitialData<T>, ModelError> {
    let eq = discrete_equilibrium(guess, model, T::of(1e-12))?;
    let p = mean_subtract(shape);
    let m2 = mach * mach;
    let rho = eq.zip_map(&p, |e, d| e + m2 * d);
    let v = VectorField::zeros(*rho.grid());
    InitialData::new(rho, v, true)
}
