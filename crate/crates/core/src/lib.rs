//! Semi-implicit, asymptotic-preserving finite-difference solver for the
//! isothermal Euler–Korteweg system on `[a,b]^d`, `d ∈ {1, 2}`.
//!
//! Everything is generic over the floating-point type (`f32` or `f64`); the
//! `*64` aliases below are what the command-line harness uses.
//!
//! ```
//! use korteweg_core::{advance, preset, NewtonConfig, Preset, State64};
//!
//! let cfg = preset::<f64>(Preset::Exp53, Some(16), None).unwrap();
//! let state = State64::new(cfg.initial.rho.clone(), cfg.initial.v.clone());
//! let (next, diag) = advance(&state, &cfg.params, &cfg.model, &NewtonConfig::default()).unwrap();
//! assert_eq!(next.step, 1);
//! assert!((diag.mass - state.rho.sum()).abs() < 1e-9);
//! ```

pub mod diagnostics;
pub mod grid;
pub mod harness;
pub mod model;
pub mod operators;
pub mod scalar;
pub mod solver;
pub mod stepper;

pub use diagnostics::{
    eoc, kinetic_energy, l2_error, total_energy, DiagnosticsError, ErrorMode, StepDiagnostics,
};
pub use grid::{Dim, GridSpec, Parity, ScalarField, VectorField};
pub use model::{
    preset, quartic_double_well, Configuration, EnergyModel, InitialData, ModelError, Preset,
    QuarticDoubleWell,
};
pub use scalar::Scalar;
pub use solver::{LinearSolverKind, NewtonConfig, SolverError};
pub use stepper::{advance, SchemeParams, State, StepError, Variant, ViscosityPolicy};

pub type GridSpec64 = GridSpec<f64>;
pub type ScalarField64 = ScalarField<f64>;
pub type VectorField64 = VectorField<f64>;
pub type State64 = State<f64>;
pub type Configuration64 = Configuration<f64>;
pub type QuarticDoubleWell64 = QuarticDoubleWell<f64>;

pub type GridSpec32 = GridSpec<f32>;
pub type ScalarField32 = ScalarField<f32>;
pub type VectorField32 = VectorField<f32>;
pub type State32 = State<f32>;
