//! One timestep of the semi-implicit all-speed scheme.
//!
//! A step has three parts:
//!
//! 1. the explicit momentum predictor
//!    `Φⁿ = ρⁿvⁿ − τ·div~_h(ρⁿvⁿ⊗vⁿ) + μ_h τ Δ_h vⁿ`,
//! 2. the implicit density solve obtained by substituting the momentum update
//!    into the mass balance and eliminating the chemical potential:
//!    `ρ − (τ²/M²)·div_h(ρⁿ ∇_h Λ(ρ)) = ρⁿ − τ·div_h Φⁿ`, with
//!    `Λ(ρ) = U'(ρ) − V'(ρⁿ) − γΔ_hρ`,
//! 3. the explicit velocity update
//!    `v^{n+1} = (Φⁿ − ρⁿ(τ/M²)∇_hΛ^{n+1}) / ρ^{n+1}`.
//!
//! Only the gradient of `Λ` enters the velocity, so no constant is removed
//! from it. The linearised variant replaces `U'(ρ)` by its tangent at `ρⁿ`,
//! which turns step 2 into a single linear solve.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{self, StepDiagnostics};
use crate::grid::{Dim, GridSpec, Parity, ScalarField, VectorField};
use crate::model::EnergyModel;
use crate::operators::{div_advection, div_centered, grad_centered, laplacian5, vector_laplacian};
use crate::scalar::{max_abs, Scalar};
use crate::solver::{
    linear_solve, newton_solve, CsrMatrix, LinearSolverKind, NewtonConfig, NonlinearSystem,
    SolverError, SparseOperator,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("density not positive at node {node} (value {value:e}) in step {step}")]
    Positivity {
        step: usize,
        node: usize,
        value: f64,
    },
    #[error("density {value} at node {node} outside admissible range [{lo}, {hi}] in step {step}")]
    OutOfRange {
        step: usize,
        node: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("timestep exceeds the kinetic-energy CFL bound by a factor {ratio:.3} in step {step}")]
    Cfl { step: usize, ratio: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// Artificial viscosity `μ_h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViscosityPolicy {
    /// A fixed coefficient (also the hook for a physical viscosity).
    Fixed { mu: f64 },
    /// `μ_h = h · max(‖vⁿ‖_∞, v_floor)`.
    Proportional { v_floor: f64 },
}

impl Default for ViscosityPolicy {
    fn default() -> Self {
        ViscosityPolicy::Proportional { v_floor: 0.05 }
    }
}

impl ViscosityPolicy {
    pub fn coefficient<T: Scalar>(&self, h: T, v_max: T) -> T {
        match *self {
            ViscosityPolicy::Fixed { mu } => T::of(mu),
            ViscosityPolicy::Proportional { v_floor } => h * v_max.max(T::of(v_floor)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CflMonitor {
    Off,
    #[default]
    Warn,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangePolicy {
    #[default]
    Warn,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Convex-split nonlinear density solve.
    #[default]
    Newton,
    /// `U'` linearised about `ρⁿ`: one linear solve per step.
    Linearized,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "newton" => Ok(Variant::Newton),
            "linearized" | "linearised" => Ok(Variant::Linearized),
            other => Err(format!(
                "unknown variant `{other}` (expected newton|linearized)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeParams {
    /// Mach number `M`.
    pub mach: f64,
    /// Uniform timestep `τ`.
    pub tau: f64,
    pub viscosity: ViscosityPolicy,
    pub cfl_monitor: CflMonitor,
    pub range_policy: RangePolicy,
    pub variant: Variant,
}

impl SchemeParams {
    pub fn new(mach: f64, tau: f64) -> Self {
        Self {
            mach,
            tau,
            viscosity: ViscosityPolicy::default(),
            cfl_monitor: CflMonitor::default(),
            range_policy: RangePolicy::default(),
            variant: Variant::default(),
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_viscosity(mut self, viscosity: ViscosityPolicy) -> Self {
        self.viscosity = viscosity;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.mach > 0.0 && self.tau > 0.0) {
            return Err(format!(
                "Mach number and timestep must be positive (M={}, tau={})",
                self.mach, self.tau
            ));
        }
        match self.viscosity {
            ViscosityPolicy::Fixed { mu } if !(mu >= 0.0) => {
                Err(format!("viscosity must be >= 0, got {mu}"))
            }
            ViscosityPolicy::Proportional { v_floor } if !(v_floor >= 0.0) => {
                Err(format!("v_floor must be >= 0, got {v_floor}"))
            }
            _ => Ok(()),
        }
    }
}

/// Solution at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct State<T> {
    pub rho: ScalarField<T>,
    pub v: VectorField<T>,
    /// Chemical potential from the most recent step (zero initially).
    pub lambda: ScalarField<T>,
    pub t: T,
    pub step: usize,
}

impl<T: Scalar> State<T> {
    pub fn new(rho: ScalarField<T>, v: VectorField<T>) -> Self {
        let lambda = ScalarField::zeros(*rho.grid());
        Self {
            rho,
            v,
            lambda,
            t: T::zero(),
            step: 0,
        }
    }

    /// `ρ ≡ c`, `v ≡ 0`.
    pub fn at_rest(grid: GridSpec<T>, c: T) -> Self {
        Self::new(ScalarField::constant(grid, c), VectorField::zeros(grid))
    }

    pub fn grid(&self) -> &GridSpec<T> {
        self.rho.grid()
    }

    pub fn validate(&self) -> Result<(), StepError> {
        let g = self.rho.grid();
        if self.v.grid() != g || self.lambda.grid() != g {
            return Err(StepError::InvalidState("fields on different grids".into()));
        }
        if !(self.rho.is_finite() && self.v.is_finite()) {
            return Err(StepError::InvalidState("non-finite values".into()));
        }
        check_positive(&self.rho, self.step)
    }
}

fn check_positive<T: Scalar>(rho: &ScalarField<T>, step: usize) -> Result<(), StepError> {
    match rho
        .values()
        .iter()
        .enumerate()
        .find(|(_, &r)| !(r > T::zero()))
    {
        Some((node, &value)) => Err(StepError::Positivity {
            step,
            node,
            value: value.to_f64_lossy(),
        }),
        None => Ok(()),
    }
}

/// `Φⁿ = ρⁿvⁿ − τ·div~_h(ρⁿvⁿ⊗vⁿ) + μ_h τ Δ_h vⁿ` at every node.
pub fn explicit_flux<T: Scalar>(state: &State<T>, tau: T, mu_h: T) -> VectorField<T> {
    let momentum = state.v.scale_by(&state.rho);
    let adv = div_advection(&state.rho, &state.v);
    let lap = vector_laplacian(&state.v, Parity::Antisymmetric);
    let partial = momentum.zip_map(&adv, move |m, a| m - tau * a);
    partial.zip_map(&lap, move |p, l| p + mu_h * tau * l)
}

/// Sparse matrix of an axis-aligned stencil with ghost values folded back
/// onto the mirrored interior nodes.
fn stencil_matrix<T: Scalar>(
    grid: &GridSpec<T>,
    parity: Parity,
    taps: &[(isize, isize, T)],
) -> CsrMatrix<T> {
    let k = grid.cells() as isize;
    let s: T = parity.sign();
    let fold = |m: isize| -> (usize, bool) {
        if m < 0 {
            (0, true)
        } else if m > k {
            (k as usize, true)
        } else {
            (m as usize, false)
        }
    };
    let mut trip = Vec::with_capacity(grid.len() * taps.len());
    for (row, (i, j)) in grid.nodes().enumerate() {
        for &(di, dj, c) in taps {
            if grid.dim() == Dim::One && dj != 0 {
                continue;
            }
            let (ni, gi) = fold(i as isize + di);
            let (nj, gj) = fold(j as isize + dj);
            let coef = if gi || gj { s * c } else { c };
            trip.push((row, grid.index(ni, nj), coef));
        }
    }
    CsrMatrix::from_triplets(grid.len(), grid.len(), trip)
}

pub(crate) fn laplacian_matrix<T: Scalar>(grid: &GridSpec<T>, parity: Parity) -> CsrMatrix<T> {
    let inv = T::one() / (grid.h() * grid.h());
    let center = match grid.dim() {
        Dim::One => T::of(-2.0),
        Dim::Two => T::of(-4.0),
    } * inv;
    stencil_matrix(
        grid,
        parity,
        &[
            (0, 0, center),
            (1, 0, inv),
            (-1, 0, inv),
            (0, 1, inv),
            (0, -1, inv),
        ],
    )
}

fn centered_matrix<T: Scalar>(grid: &GridSpec<T>, parity: Parity, axis: usize) -> CsrMatrix<T> {
    let half = T::one() / (T::of(2.0) * grid.h());
    let taps = if axis == 0 {
        [(1, 0, half), (-1, 0, -half)]
    } else {
        [(0, 1, half), (0, -1, -half)]
    };
    stencil_matrix(grid, parity, &taps)
}

/// The eliminated density equation of one step, as a nonlinear system in `ρ^{n+1}`.
pub struct DensitySystem<'a, T: Scalar, E: EnergyModel<T> + ?Sized> {
    grid: GridSpec<T>,
    rho_n: &'a ScalarField<T>,
    model: &'a E,
    variant: Variant,
    /// `τ²/M²`.
    coupling: T,
    /// `ρⁿ − τ·div_h Φⁿ`.
    rhs: Vec<T>,
    /// Terms of `Λ` known at time n: `−V'(ρⁿ)` (plus `U'(ρⁿ) − U''(ρⁿ)ρⁿ` when linearised).
    explicit_potential: Vec<T>,
    d2u_n: Vec<T>,
    /// `Σ_axes D_axis diag(ρⁿ) G_axis`.
    mobility: CsrMatrix<T>,
    laplacian: CsrMatrix<T>,
}

impl<'a, T: Scalar, E: EnergyModel<T> + ?Sized> DensitySystem<'a, T, E> {
    pub fn new(
        rho_n: &'a ScalarField<T>,
        phi: &VectorField<T>,
        mach: T,
        tau: T,
        model: &'a E,
        variant: Variant,
    ) -> Self {
        let grid = *rho_n.grid();
        let div_phi = div_centered(phi, Parity::Antisymmetric);
        let rhs = rho_n
            .values()
            .iter()
            .zip(div_phi.values())
            .map(|(&r, &d)| r - tau * d)
            .collect();
        let d2u_n: Vec<T> = rho_n.values().iter().map(|&r| model.d2u(r)).collect();
        let explicit_potential = rho_n
            .values()
            .iter()
            .zip(&d2u_n)
            .map(|(&r, &d2u)| match variant {
                Variant::Newton => -model.dv(r),
                Variant::Linearized => model.du(r) - d2u * r - model.dv(r),
            })
            .collect();
        let mut mobility = CsrMatrix::from_triplets(grid.len(), grid.len(), Vec::new());
        for axis in 0..grid.dim().as_usize() {
            let g = centered_matrix(&grid, Parity::Symmetric, axis);
            let d = centered_matrix(&grid, Parity::Antisymmetric, axis);
            mobility = mobility.add_scaled(T::one(), &d.matmul(&g.scale_rows(rho_n.values())));
        }
        Self {
            grid,
            rho_n,
            model,
            variant,
            coupling: tau * tau / (mach * mach),
            rhs,
            explicit_potential,
            d2u_n,
            mobility,
            laplacian: laplacian_matrix(&grid, Parity::Symmetric),
        }
    }

    /// `U''` used in the Jacobian at the iterate `rho`.
    fn convex_curvature(&self, rho: &[T]) -> Vec<T> {
        match self.variant {
            Variant::Newton => rho.iter().map(|&r| self.model.d2u(r)).collect(),
            Variant::Linearized => self.d2u_n.clone(),
        }
    }

    /// `Λ(ρ)` with `ρ` extended symmetrically in the Laplacian.
    pub fn chemical_potential(&self, rho: &ScalarField<T>) -> ScalarField<T> {
        let gamma = self.model.gamma();
        let lap = laplacian5(rho, Parity::Symmetric);
        let values = rho
            .values()
            .iter()
            .zip(lap.values())
            .zip(&self.explicit_potential)
            .zip(&self.d2u_n)
            .map(|(((&r, &l), &e), &d2u)| {
                let implicit = match self.variant {
                    Variant::Newton => self.model.du(r),
                    Variant::Linearized => d2u * r,
                };
                implicit + e - gamma * l
            })
            .collect();
        ScalarField::new(self.grid, values)
    }

    /// `ρ − (τ²/M²)·div_h(ρⁿ∇_hΛ(ρ))` where the flux `ρⁿ∇_hΛ` is extended antisymmetrically.
    fn apply_operator(&self, rho: &ScalarField<T>, lambda: &ScalarField<T>) -> Vec<T> {
        let flux = grad_centered(lambda, Parity::Symmetric).scale_by(self.rho_n);
        let div = div_centered(&flux, Parity::Antisymmetric);
        rho.values()
            .iter()
            .zip(div.values())
            .map(|(&r, &d)| r - self.coupling * d)
            .collect()
    }

    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    pub fn rhs(&self) -> &[T] {
        &self.rhs
    }
}

impl<T: Scalar, E: EnergyModel<T> + ?Sized> NonlinearSystem<T> for DensitySystem<'_, T, E> {
    fn len(&self) -> usize {
        self.grid.len()
    }

    fn residual(&self, x: &[T]) -> Vec<T> {
        let rho = ScalarField::new(self.grid, x.to_vec());
        let lambda = self.chemical_potential(&rho);
        self.apply_operator(&rho, &lambda)
            .iter()
            .zip(&self.rhs)
            .map(|(&a, &b)| a - b)
            .collect()
    }

    /// `J = I − (τ²/M²)·A·(diag(U'') − γL)` with `A` the variable-coefficient
    /// mobility operator and `L` the symmetric-ghost Laplacian.
    fn jacobian(&self, x: &[T]) -> SparseOperator<T> {
        let curvature = self.convex_curvature(x);
        let gamma = self.model.gamma();
        let potential = CsrMatrix::diagonal(&curvature).add_scaled(-gamma, &self.laplacian);
        let matrix = CsrMatrix::identity(self.grid.len())
            .add_scaled(-self.coupling, &self.mobility.matmul(&potential));

        let grid = self.grid;
        let rho_n = self.rho_n.clone();
        let coupling = self.coupling;
        SparseOperator::with_matrix_free(matrix, move |dx: &[T]| {
            let d = ScalarField::new(grid, dx.to_vec());
            let lap = laplacian5(&d, Parity::Symmetric);
            let dl: Vec<T> = dx
                .iter()
                .zip(&curvature)
                .zip(lap.values())
                .map(|((&a, &c), &l)| c * a - gamma * l)
                .collect();
            let flux =
                grad_centered(&ScalarField::new(grid, dl), Parity::Symmetric).scale_by(&rho_n);
            let div = div_centered(&flux, Parity::Antisymmetric);
            dx.iter()
                .zip(div.values())
                .map(|(&a, &v)| a - coupling * v)
                .collect()
        })
    }
}

/// Result of the density/chemical-potential solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityUpdate<T> {
    pub rho: ScalarField<T>,
    pub lambda: ScalarField<T>,
    pub newton_iters: usize,
    /// `‖R(ρ^{n+1})‖_∞` of the eliminated density equation.
    pub residual: T,
}

fn linear_kind<T: Scalar>(grid: &GridSpec<T>, cfg: &NewtonConfig) -> LinearSolverKind {
    cfg.linear_solver.unwrap_or(match grid.dim() {
        Dim::One => LinearSolverKind::Direct,
        Dim::Two => LinearSolverKind::KrylovThenDirect,
    })
}

/// Convex-split implicit solve for `(ρ^{n+1}, Λ^{n+1})`, Newton started from `ρⁿ`.
pub fn implicit_density_step<T: Scalar, E: EnergyModel<T> + ?Sized>(
    state: &State<T>,
    phi: &VectorField<T>,
    params: &SchemeParams,
    model: &E,
    cfg: &NewtonConfig,
) -> Result<DensityUpdate<T>, StepError> {
    check_positive(&state.rho, state.step)?;
    let system = DensitySystem::new(
        &state.rho,
        phi,
        T::of(params.mach),
        T::of(params.tau),
        model,
        Variant::Newton,
    );
    let kind = linear_kind(state.grid(), cfg);
    let out = newton_solve(&system, state.rho.values(), cfg, kind)?;
    let rho = ScalarField::new(*state.grid(), out.solution);
    check_positive(&rho, state.step + 1)?;
    let lambda = system.chemical_potential(&rho);
    Ok(DensityUpdate {
        rho,
        lambda,
        newton_iters: out.iterations,
        residual: out.residual,
    })
}

/// Linearised density solve: exactly one linear solve.
pub fn linearized_density_step<T: Scalar, E: EnergyModel<T> + ?Sized>(
    state: &State<T>,
    phi: &VectorField<T>,
    params: &SchemeParams,
    model: &E,
    cfg: &NewtonConfig,
) -> Result<DensityUpdate<T>, StepError> {
    check_positive(&state.rho, state.step)?;
    let system = DensitySystem::new(
        &state.rho,
        phi,
        T::of(params.mach),
        T::of(params.tau),
        model,
        Variant::Linearized,
    );
    let x0 = state.rho.values();
    let r0 = system.residual(x0);
    let jac = system.jacobian(x0);
    let neg: Vec<T> = r0.iter().map(|&v| -v).collect();
    let dx = linear_solve(
        &jac,
        &neg,
        T::of(cfg.linear_tol),
        linear_kind(state.grid(), cfg),
    )?;
    let values: Vec<T> = x0.iter().zip(&dx).map(|(&a, &d)| a + d).collect();
    let residual = max_abs(&system.residual(&values));
    let rho = ScalarField::new(*state.grid(), values);
    check_positive(&rho, state.step + 1)?;
    let lambda = system.chemical_potential(&rho);
    Ok(DensityUpdate {
        rho,
        lambda,
        newton_iters: 1,
        residual,
    })
}

/// `v^{n+1} = (Φⁿ − ρⁿ(τ/M²)∇_hΛ^{n+1}) / ρ^{n+1}`.
pub fn velocity_update<T: Scalar>(
    state: &State<T>,
    rho_new: &ScalarField<T>,
    lambda_new: &ScalarField<T>,
    phi: &VectorField<T>,
    params: &SchemeParams,
) -> Result<VectorField<T>, StepError> {
    check_positive(rho_new, state.step + 1)?;
    let scale = T::of(params.tau) / (T::of(params.mach) * T::of(params.mach));
    let pressure = grad_centered(lambda_new, Parity::Symmetric).scale_by(&state.rho);
    let momentum = phi.zip_map(&pressure, move |f, p| f - scale * p);
    let inv_rho = rho_new.map(|r| T::one() / r);
    Ok(momentum.scale_by(&inv_rho))
}

/// `τ_max` of the kinetic-energy estimate:
/// `h/‖v‖_∞ · ρ_min / (9‖ρ‖²_∞ + 8)`. Infinite at rest.
pub fn cfl_bound<T: Scalar>(state: &State<T>) -> T {
    let vmax = state.v.max_norm();
    if vmax == T::zero() {
        return T::infinity();
    }
    let rmax = state.rho.max_abs();
    state.grid().h() / vmax * state.rho.min() / (T::of(9.0) * rmax * rmax + T::of(8.0))
}

/// Timestep bound of the generic-Mach energy estimate, which involves the new
/// state and can only be checked after the step.
pub fn energy_cfl_bound<T: Scalar>(prev: &State<T>, next: &State<T>) -> T {
    let vn = prev.v.max_norm();
    let vn1 = next.v.max_norm();
    let r1 = next.rho.max_abs();
    let denom = T::of(8.0) * (T::of(2.0) * r1 * r1 * (vn + vn1) * (vn + vn1) + vn * vn);
    if denom == T::zero() {
        return T::infinity();
    }
    prev.grid().h() * vn * prev.rho.min() / denom
}

/// ∞-norm residuals of the three scheme equations for a completed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeResiduals<T> {
    /// `ρ^{n+1} − ρⁿ + τ div_h(ρ^{n+1}v^{n+1})`.
    pub mass: T,
    /// `ρ^{n+1}v^{n+1} − ρⁿvⁿ + τ div~_h(ρⁿvⁿ⊗vⁿ) + ρⁿ(τ/M²)∇_hΛ^{n+1} − μ_hτΔ_hvⁿ`.
    pub momentum: T,
    /// `Λ^{n+1} − U'(ρ^{n+1}) + V'(ρⁿ) + γΔ_hρ^{n+1}` (tangent of `U'` for the linearised variant).
    pub chemical: T,
}

impl<T: Scalar> SchemeResiduals<T> {
    pub fn max(&self) -> T {
        self.mass.max(self.momentum).max(self.chemical)
    }
}

/// Evaluates every scheme equation directly from the two time levels.
pub fn scheme_residuals<T: Scalar, E: EnergyModel<T> + ?Sized>(
    prev: &State<T>,
    next: &State<T>,
    params: &SchemeParams,
    model: &E,
    mu_h: T,
) -> SchemeResiduals<T> {
    let tau = T::of(params.tau);
    let mach2 = T::of(params.mach) * T::of(params.mach);
    let m_new = next.v.scale_by(&next.rho);
    let div_m = div_centered(&m_new, Parity::Antisymmetric);
    let mass_res: Vec<T> = next
        .rho
        .values()
        .iter()
        .zip(prev.rho.values())
        .zip(div_m.values())
        .map(|((&a, &b), &d)| a - b + tau * d)
        .collect();

    let adv = div_advection(&prev.rho, &prev.v);
    let lap_v = vector_laplacian(&prev.v, Parity::Antisymmetric);
    let grad_l = grad_centered(&next.lambda, Parity::Symmetric);
    let mut momentum = T::zero();
    for c in 0..prev.grid().dim().as_usize() {
        for k in 0..prev.grid().len() {
            let r = m_new.component(c).values()[k]
                - prev.rho.values()[k] * prev.v.component(c).values()[k]
                + tau * adv.component(c).values()[k]
                + prev.rho.values()[k] * tau / mach2 * grad_l.component(c).values()[k]
                - mu_h * tau * lap_v.component(c).values()[k];
            momentum = momentum.max(r.abs());
        }
    }

    let gamma = model.gamma();
    let lap_r = laplacian5(&next.rho, Parity::Symmetric);
    let mut chemical = T::zero();
    for k in 0..prev.grid().len() {
        let (r1, r0) = (next.rho.values()[k], prev.rho.values()[k]);
        let convex = match params.variant {
            Variant::Newton => model.du(r1),
            Variant::Linearized => model.du(r0) + model.d2u(r0) * (r1 - r0),
        };
        let res = next.lambda.values()[k] - convex + model.dv(r0) + gamma * lap_r.values()[k];
        chemical = chemical.max(res.abs());
    }
    SchemeResiduals {
        mass: max_abs(&mass_res),
        momentum,
        chemical,
    }
}

/// Advances `state` by one step of size `params.tau`.
pub fn advance<T: Scalar, E: EnergyModel<T> + ?Sized>(
    state: &State<T>,
    params: &SchemeParams,
    model: &E,
    cfg: &NewtonConfig,
) -> Result<(State<T>, StepDiagnostics<T>), StepError> {
    params.validate().map_err(StepError::InvalidState)?;
    state.validate()?;
    let grid = *state.grid();
    let tau = T::of(params.tau);

    let cfl_ratio = tau / cfl_bound(state);
    if cfl_ratio > T::one() {
        match params.cfl_monitor {
            CflMonitor::Off => {}
            // Reported once per run by the harness; per step only at debug level.
            CflMonitor::Warn => {
                log::debug!(
                    "step {}: tau exceeds kinetic-energy CFL bound (ratio {cfl_ratio:.3})",
                    state.step
                )
            }
            CflMonitor::Abort => {
                return Err(StepError::Cfl {
                    step: state.step,
                    ratio: cfl_ratio.to_f64_lossy(),
                })
            }
        }
    }

    let mu_h = params.viscosity.coefficient(grid.h(), state.v.max_norm());
    let phi = explicit_flux(state, tau, mu_h);
    let update = match params.variant {
        Variant::Newton => implicit_density_step(state, &phi, params, model, cfg)?,
        Variant::Linearized => linearized_density_step(state, &phi, params, model, cfg)?,
    };
    let v = velocity_update(state, &update.rho, &update.lambda, &phi, params)?;

    let (lo, hi) = model.admissible_range();
    if let Some((node, &value)) = update
        .rho
        .values()
        .iter()
        .enumerate()
        .find(|(_, &r)| r < lo || r > hi)
    {
        let err = StepError::OutOfRange {
            step: state.step + 1,
            node,
            value: value.to_f64_lossy(),
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
        };
        match params.range_policy {
            RangePolicy::Warn => log::warn!("{err}"),
            RangePolicy::Abort => return Err(err),
        }
    }

    let next = State {
        rho: update.rho,
        v,
        lambda: update.lambda,
        t: state.t + tau,
        step: state.step + 1,
    };
    let energy_ratio = tau / energy_cfl_bound(state, &next);
    log::debug!(
        "step {}: a-posteriori energy CFL ratio {:.3e}",
        next.step,
        energy_ratio.to_f64_lossy()
    );
    let residuals = scheme_residuals(state, &next, params, model, mu_h);
    let diag = StepDiagnostics {
        t: next.t,
        step: next.step,
        mass: diagnostics::mass(&next.rho),
        total_energy: diagnostics::total_energy(&next, model, T::of(params.mach)),
        kinetic_energy: diagnostics::kinetic_energy(&next),
        newton_iters: update.newton_iters,
        max_residual: residuals.max(),
        cfl_ratio,
        energy_cfl_ratio: energy_ratio,
        min_density: next.rho.min(),
        mu_h,
    };
    Ok((next, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::quartic_double_well;

    #[test]
    fn flux_vanishes_at_rest() {
        let g = GridSpec::<f64>::unit(Dim::Two, 4);
        let s = State::new(ScalarField::constant(g, 1.3), VectorField::zeros(g));
        let phi = explicit_flux(&s, 0.1, 0.05);
        assert!(phi
            .components()
            .iter()
            .all(|c| c.values().iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn flux_hand_case_1d() {
        let g = GridSpec::<f64>::unit(Dim::One, 2);
        let s = State::new(
            ScalarField::constant(g, 1.0),
            VectorField::new(vec![ScalarField::new(g, vec![0.0, 1.0, 0.0])]),
        );
        let phi = explicit_flux(&s, 0.1, 0.05);
        assert!((phi.component(0).at(1, 0) - 0.96).abs() < 1e-14);
    }

    #[test]
    fn flux_of_uniform_flow_is_momentum_in_interior() {
        let g = GridSpec::<f64>::unit(Dim::Two, 6);
        let s = State::new(
            ScalarField::constant(g, 2.0),
            VectorField::constant(g, &[0.3, -0.1]),
        );
        let phi = explicit_flux(&s, 0.01, 0.02);
        for j in 1..6 {
            for i in 1..6 {
                assert!((phi.component(0).at(i, j) - 0.6).abs() < 1e-13);
                assert!((phi.component(1).at(i, j) + 0.2).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn velocity_from_flux_hand_case() {
        let g = GridSpec::<f64>::unit(Dim::One, 2);
        let s = State::new(ScalarField::constant(g, 2.0), VectorField::zeros(g));
        let phi = VectorField::new(vec![ScalarField::constant(g, 0.96)]);
        let v = velocity_update(
            &s,
            &ScalarField::constant(g, 2.0),
            &ScalarField::constant(g, 5.0),
            &phi,
            &SchemeParams::new(1.0, 0.1),
        )
        .unwrap();
        assert!(v
            .component(0)
            .values()
            .iter()
            .all(|&x| (x - 0.48).abs() < 1e-15));
    }

    #[test]
    fn velocity_update_rejects_nonpositive_density() {
        let g = GridSpec::<f64>::unit(Dim::One, 2);
        let s = State::at_rest(g, 1.0);
        let mut bad = ScalarField::constant(g, 1.0);
        bad.values_mut()[2] = -0.1;
        let err = velocity_update(
            &s,
            &bad,
            &ScalarField::zeros(g),
            &VectorField::zeros(g),
            &SchemeParams::new(1.0, 0.1),
        );
        assert!(matches!(err, Err(StepError::Positivity { node: 2, .. })));
    }

    #[test]
    fn constant_state_is_a_fixed_point() {
        let model = quartic_double_well(1e-3);
        for g in [
            GridSpec::<f64>::unit(Dim::One, 8),
            GridSpec::unit(Dim::Two, 6),
        ] {
            for variant in [Variant::Newton, Variant::Linearized] {
                let s = State::at_rest(g, 1.5);
                let params = SchemeParams::new(0.1, 1e-3).with_variant(variant);
                let (next, diag) = advance(&s, &params, &model, &NewtonConfig::default()).unwrap();
                assert!(next.rho.values().iter().all(|&r| (r - 1.5).abs() <= 1e-12));
                assert!(next.lambda.values().iter().all(|&l| l.abs() <= 1e-12));
                assert_eq!(diag.kinetic_energy, 0.0);
                assert!(diag.newton_iters <= 1);
            }
        }
    }

    #[test]
    fn stencil_matrices_match_operators() {
        let g = GridSpec::<f64>::unit(Dim::Two, 5);
        let f = ScalarField::from_fn(g, |x, y| (3.0 * x).sin() + y * y * x);
        for parity in [Parity::Symmetric, Parity::Antisymmetric] {
            let lap = laplacian_matrix(&g, parity).mul_vec(f.values());
            for (a, b) in lap.iter().zip(laplacian5(&f, parity).values()) {
                assert!((a - b).abs() < 1e-10);
            }
            let gr = grad_centered(&f, parity);
            for axis in 0..2 {
                let m = centered_matrix(&g, parity, axis).mul_vec(f.values());
                for (a, b) in m.iter().zip(gr.component(axis).values()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
