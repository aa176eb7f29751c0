//! Thermodynamic closure: a double-well free energy written as a difference of
//! two convex functions, the associated pressure, and experiment presets.

pub mod presets;

use thiserror::Error;

use crate::grid::{ScalarField, VectorField};
use crate::scalar::Scalar;

pub use presets::{preset, well_prepared, Configuration, Preset};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("density must be positive, got {0}")]
    NonPositiveDensity(f64),
    #[error("unknown preset `{0}` (expected one of exp51, exp52, exp53, exp54, exp55)")]
    UnknownPreset(String),
    #[error("preset {preset} is {dim}D; {reason}")]
    Incompatible {
        preset: &'static str,
        dim: usize,
        reason: String,
    },
    #[error("initial density must be positive everywhere; node {node} has {value}")]
    NonPositiveInitial { node: usize, value: f64 },
    #[error("well-prepared equilibrium solve failed: {0}")]
    Equilibrium(String),
}

/// Local free energy `W = U - V` with `U`, `V` convex, plus the capillarity
/// coefficient `γ`.
///
/// The scheme evaluates `U'` implicitly and `V'` explicitly. Implement this
/// trait to plug in a custom splitting; the derivatives must be supplied in
/// closed form.
pub trait EnergyModel<T: Scalar>: Send + Sync {
    fn u(&self, rho: T) -> T;
    fn du(&self, rho: T) -> T;
    fn d2u(&self, rho: T) -> T;
    fn v(&self, rho: T) -> T;
    fn dv(&self, rho: T) -> T;
    fn d2v(&self, rho: T) -> T;

    /// Capillarity coefficient `γ`.
    fn gamma(&self) -> T;

    /// Lower bound claimed for `V''` on the admissible range (diagnostic only).
    fn kappa_v(&self) -> T;

    /// Densities outside this range trigger the run's range policy.
    fn admissible_range(&self) -> (T, T);

    fn description(&self) -> String;

    fn w(&self, rho: T) -> T {
        self.u(rho) - self.v(rho)
    }

    fn dw(&self, rho: T) -> T {
        self.du(rho) - self.dv(rho)
    }

    fn d2w(&self, rho: T) -> T {
        self.d2u(rho) - self.d2v(rho)
    }
}

/// `W(ρ) = (ρ-1)²(ρ-2)² = (ρ⁴ + 13ρ² + 4) - (6ρ³ + 12ρ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticDoubleWell<T> {
    pub gamma: T,
    pub rho_lo: T,
    pub rho_hi: T,
    /// Density at which `κ_V = V''(ρ) = 36ρ` is evaluated.
    pub kappa_floor: T,
}

impl<T: Scalar> QuarticDoubleWell<T> {
    /// Default admissible range `[0.25, 4]`, `κ_V` evaluated at `ρ = 0.5`.
    pub fn new(gamma: T) -> Self {
        Self {
            gamma,
            rho_lo: T::of(0.25),
            rho_hi: T::of(4.0),
            kappa_floor: T::of(0.5),
        }
    }

    pub fn with_range(mut self, lo: T, hi: T) -> Self {
        self.rho_lo = lo;
        self.rho_hi = hi;
        self
    }

    pub fn with_kappa_floor(mut self, rho: T) -> Self {
        self.kappa_floor = rho;
        self
    }
}

impl<T: Scalar> EnergyModel<T> for QuarticDoubleWell<T> {
    fn u(&self, r: T) -> T {
        let r2 = r * r;
        r2 * r2 + T::of(13.0) * r2 + T::of(4.0)
    }

    fn du(&self, r: T) -> T {
        T::of(4.0) * r * r * r + T::of(26.0) * r
    }

    fn d2u(&self, r: T) -> T {
        T::of(12.0) * r * r + T::of(26.0)
    }

    fn v(&self, r: T) -> T {
        T::of(6.0) * r * r * r + T::of(12.0) * r
    }

    fn dv(&self, r: T) -> T {
        T::of(18.0) * r * r + T::of(12.0)
    }

    fn d2v(&self, r: T) -> T {
        T::of(36.0) * r
    }

    fn gamma(&self) -> T {
        self.gamma
    }

    /// `V'' = 36ρ` has no uniform positive bound on `(0, ∞)`; reported at `kappa_floor`.
    fn kappa_v(&self) -> T {
        T::of(36.0) * self.kappa_floor
    }

    fn admissible_range(&self) -> (T, T) {
        (self.rho_lo, self.rho_hi)
    }

    fn description(&self) -> String {
        format!(
            "quartic double well (rho-1)^2(rho-2)^2, U=rho^4+13rho^2+4, V=6rho^3+12rho, gamma={}",
            self.gamma
        )
    }
}

/// `W = (ρ−1)²(ρ−2)²` with the given `γ` and the default range.
pub fn quartic_double_well<T: Scalar>(gamma: T) -> QuarticDoubleWell<T> {
    QuarticDoubleWell::new(gamma)
}

/// Pressure from the Gibbs–Duhem relation, `p = ρW'(ρ) - W(ρ)`.
pub fn pressure<T: Scalar, E: EnergyModel<T> + ?Sized>(model: &E, rho: T) -> Result<T, ModelError> {
    if !(rho > T::zero()) {
        return Err(ModelError::NonPositiveDensity(rho.to_f64_lossy()));
    }
    Ok(rho * model.dw(rho) - model.w(rho))
}

/// Initial density and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData<T> {
    pub rho: ScalarField<T>,
    pub v: VectorField<T>,
    /// Whether the data is meant to satisfy the discrete well-preparedness
    /// conditions (constant discrete chemical potential, solenoidal momentum).
    pub well_prepared: bool,
}

impl<T: Scalar> InitialData<T> {
    pub fn new(
        rho: ScalarField<T>,
        v: VectorField<T>,
        well_prepared: bool,
    ) -> Result<Self, ModelError> {
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
        assert!(
            v.grid() == rho.grid(),
            "density and velocity on different grids"
        );
        Ok(Self {
            rho,
            v,
            well_prepared,
        })
    }

    /// Density `rho` at rest.
    pub fn at_rest(rho: ScalarField<T>) -> Result<Self, ModelError> {
        let v = VectorField::zeros(*rho.grid());
        Self::new(rho, v, false)
    }
}
