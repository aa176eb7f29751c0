//! Time loop, CSV output and the run manifest.

use std::fs::{self, File};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{RunConfig, SCHEMA_VERSION};
use super::HarnessError;
use crate::diagnostics::{self, StepDiagnostics};
use crate::model::{Configuration, EnergyModel};
use crate::scalar::Scalar;
use crate::stepper::{advance, cfl_bound, CflMonitor, State, StepError, Variant, ViscosityPolicy};

/// Diagnostics of the initial state (step 0).
pub fn initial_diagnostics<T: Scalar>(
    cfg: &Configuration<T>,
    state: &State<T>,
) -> StepDiagnostics<T> {
    let tau = T::of(cfg.params.tau);
    let mu_h = cfg
        .params
        .viscosity
        .coefficient(cfg.grid.h(), state.v.max_norm());
    StepDiagnostics {
        t: state.t,
        step: state.step,
        mass: diagnostics::mass(&state.rho),
        total_energy: diagnostics::total_energy(state, &cfg.model, T::of(cfg.params.mach)),
        kinetic_energy: diagnostics::kinetic_energy(state),
        newton_iters: 0,
        max_residual: T::zero(),
        cfl_ratio: tau / cfl_bound(state),
        energy_cfl_ratio: T::zero(),
        min_density: state.rho.min(),
        mu_h,
    }
}

/// A run that stopped early.
#[derive(Debug, Clone)]
pub struct SimulationFailure<T> {
    pub error: StepError,
    /// Last state that was computed successfully.
    pub last_state: State<T>,
}

/// Runs `cfg.steps` steps, calling `observer` on the initial state and after
/// every step. Returns the final state.
pub fn simulate<T: Scalar>(
    cfg: &Configuration<T>,
    mut observer: impl FnMut(&State<T>, &StepDiagnostics<T>),
) -> Result<State<T>, SimulationFailure<T>> {
    let mut state = State::new(cfg.initial.rho.clone(), cfg.initial.v.clone());
    observer(&state, &initial_diagnostics(cfg, &state));
    let mut over = (0usize, 0.0f64);
    let result = (|| {
        for _ in 0..cfg.steps {
            match advance(&state, &cfg.params, &cfg.model, &cfg.newton) {
                Ok((next, diag)) => {
                    let r = diag.cfl_ratio.to_f64_lossy();
                    if r > 1.0 {
                        over = (over.0 + 1, over.1.max(r));
                    }
                    state = next;
                    observer(&state, &diag);
                }
                Err(error) => return Err(error),
            }
        }
        Ok(())
    })();
    if over.0 > 0 && cfg.params.cfl_monitor == CflMonitor::Warn {
        log::warn!(
            "K={}: tau exceeded the kinetic-energy CFL bound in {} of {} steps (max ratio {:.3})",
            cfg.grid.cells(),
            over.0,
            cfg.steps,
            over.1
        );
    }
    match result {
        Ok(()) => Ok(state),
        Err(error) => Err(SimulationFailure {
            error,
            last_state: state,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    SolverFailure,
}

/// Aggregates over the time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps_completed: usize,
    pub t_end: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    pub max_relative_mass_drift: f64,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub min_density: f64,
    pub total_newton_iters: usize,
    pub max_newton_iters: usize,
    pub max_residual: f64,
    pub max_cfl_ratio: Option<f64>,
    pub max_energy_cfl_ratio: Option<f64>,
}

impl RunSummary {
    pub fn from_history(history: &[StepDiagnostics<f64>]) -> Self {
        let first = history.first().expect("history holds the initial state");
        let last = history.last().unwrap();
        let finite_max = |f: fn(&StepDiagnostics<f64>) -> f64| {
            history
                .iter()
                .map(f)
                .filter(|x| x.is_finite())
                .fold(None, |a: Option<f64>, x| Some(a.map_or(x, |a| a.max(x))))
        };
        Self {
            steps_completed: last.step,
            t_end: last.t,
            initial_mass: first.mass,
            final_mass: last.mass,
            max_relative_mass_drift: history
                .iter()
                .map(|d| ((d.mass - first.mass) / first.mass).abs())
                .fold(0.0, f64::max),
            initial_energy: first.total_energy,
            final_energy: last.total_energy,
            min_density: history
                .iter()
                .map(|d| d.min_density)
                .fold(f64::INFINITY, f64::min),
            total_newton_iters: history.iter().map(|d| d.newton_iters).sum(),
            max_newton_iters: history.iter().map(|d| d.newton_iters).max().unwrap_or(0),
            max_residual: history.iter().map(|d| d.max_residual).fold(0.0, f64::max),
            max_cfl_ratio: finite_max(|d| d.cfl_ratio),
            max_energy_cfl_ratio: finite_max(|d| d.energy_cfl_ratio),
        }
    }
}

/// Derived quantities recorded next to the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSetup {
    pub dim: usize,
    pub cells: usize,
    pub h: f64,
    pub origin: f64,
    pub length: f64,
    pub model: String,
    pub gamma: f64,
    pub density_range: [f64; 2],
    pub kappa_v: f64,
    pub mach: f64,
    pub tau: f64,
    pub steps: usize,
    pub t_final: f64,
    pub variant: Variant,
    pub viscosity: ViscosityPolicy,
    pub well_prepared: bool,
}

impl ResolvedSetup {
    fn new(cfg: &Configuration<f64>) -> Self {
        let (lo, hi) = cfg.model.admissible_range();
        Self {
            dim: cfg.grid.dim().as_usize(),
            cells: cfg.grid.cells(),
            h: cfg.grid.h(),
            origin: cfg.grid.origin(),
            length: cfg.grid.length(),
            model: cfg.model.description(),
            gamma: cfg.model.gamma,
            density_range: [lo, hi],
            kappa_v: cfg.model.kappa_v(),
            mach: cfg.params.mach,
            tau: cfg.params.tau,
            steps: cfg.steps,
            t_final: cfg.t_final(),
            variant: cfg.params.variant,
            viscosity: cfg.params.viscosity,
            well_prepared: cfg.initial.well_prepared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub program: String,
    pub version: String,
    /// Configuration with every default filled in; rerunning it reproduces the run.
    pub config: RunConfig,
    pub resolved: ResolvedSetup,
    pub notes: Vec<String>,
    pub wall_clock_seconds: f64,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub summary: RunSummary,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }
}

pub const TIMESERIES_HEADER: [&str; 9] = [
    "t",
    "mass",
    "total_energy",
    "normalized_energy",
    "kinetic_energy",
    "newton_iters",
    "max_residual",
    "min_density",
    "cfl_ratio",
];

fn num(x: f64) -> String {
    // `Display` for f64 is the shortest representation that round-trips.
    format!("{x}")
}

fn timeseries_record(d: &StepDiagnostics<f64>, e0: f64) -> [String; 9] {
    let normalized = if e0 == 0.0 { 1.0 } else { d.total_energy / e0 };
    [
        num(d.t),
        num(d.mass),
        num(d.total_energy),
        num(normalized),
        num(d.kinetic_energy),
        d.newton_iters.to_string(),
        num(d.max_residual),
        num(d.min_density),
        num(d.cfl_ratio),
    ]
}

/// Writes node coordinates, `ρ`, velocity components and `Λ`.
pub fn write_snapshot(path: &Path, state: &State<f64>) -> Result<(), HarnessError> {
    let grid = state.grid();
    let two_d = grid.dim().as_usize() == 2;
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    let header: &[&str] = if two_d {
        &["x", "y", "rho", "u", "w", "lambda"]
    } else {
        &["x", "rho", "u", "lambda"]
    };
    w.write_record(header)
        .map_err(|e| HarnessError::csv(path, e))?;
    for (k, (i, j)) in grid.nodes().enumerate() {
        let mut rec = vec![num(grid.coord(i))];
        if two_d {
            rec.push(num(grid.coord(j)));
        }
        rec.push(num(state.rho.values()[k]));
        for c in state.v.components() {
            rec.push(num(c.values()[k]));
        }
        rec.push(num(state.lambda.values()[k]));
        w.write_record(&rec)
            .map_err(|e| HarnessError::csv(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

fn snapshot_name(step: usize) -> String {
    format!("snap_{step}.csv")
}

/// Runs `config`, writing `timeseries.csv`, `snap_<n>.csv` and
/// `manifest.json` into `out`. On a solver failure the partial outputs and a
/// manifest with status `solver_failure` are kept and
/// [`HarnessError::Solver`] is returned.
pub fn run(config: &RunConfig, out: &Path) -> Result<RunManifest, HarnessError> {
    let resolved = config.resolved()?;
    let cfg = resolved.build()?;
    fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let started = Instant::now();

    let ts_path = out.join("timeseries.csv");
    let file = File::create(&ts_path).map_err(|e| HarnessError::io(&ts_path, e))?;
    let mut ts = csv::Writer::from_writer(file);
    ts.write_record(TIMESERIES_HEADER)
        .map_err(|e| HarnessError::csv(&ts_path, e))?;

    let stride = resolved.snapshot_every;
    let mut files = vec!["timeseries.csv".to_string()];
    let mut history: Vec<StepDiagnostics<f64>> = Vec::with_capacity(cfg.steps + 1);
    let mut io_error: Option<HarnessError> = None;
    let mut last_snapshot = None;
    let result = simulate(&cfg, |state, diag| {
        if io_error.is_some() {
            return;
        }
        let e0 = history
            .first()
            .map_or(diag.total_energy, |d| d.total_energy);
        history.push(*diag);
        let res = ts
            .write_record(timeseries_record(diag, e0))
            .map_err(|e| HarnessError::csv(&ts_path, e))
            .and_then(|_| ts.flush().map_err(|e| HarnessError::io(&ts_path, e)));
        let res = res.and_then(|_| {
            if state.step % stride == 0 || state.step == cfg.steps {
                let name = snapshot_name(state.step);
                write_snapshot(&out.join(&name), state)?;
                files.push(name);
                last_snapshot = Some(state.step);
            }
            Ok(())
        });
        if let Err(e) = res {
            io_error = Some(e);
        }
    });
    if let Some(e) = io_error {
        return Err(e);
    }
    let (status, error) = match &result {
        Ok(_) => (RunStatus::Completed, None),
        Err(f) => {
            if last_snapshot != Some(f.last_state.step) {
                let name = snapshot_name(f.last_state.step);
                write_snapshot(&out.join(&name), &f.last_state)?;
                files.push(name);
            }
            (RunStatus::SolverFailure, Some(f.error.to_string()))
        }
    };

    let mut notes = vec![format!(
        "artificial viscosity policy: {:?}; with the proportional policy mu_h = h*max(|v|_inf, v_floor)",
        cfg.params.viscosity
    )];
    if cfg.initial.well_prepared {
        notes.push("initial density = discrete equilibrium + M^2 * mean-free perturbation".into());
    }
    files.push("manifest.json".into());
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        program: "korteweg".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: resolved,
        resolved: ResolvedSetup::new(&cfg),
        notes,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        status,
        error: error.clone(),
        summary: RunSummary::from_history(&history),
        files,
    };
    let path = out.join("manifest.json");
    let text =
        serde_json::to_string_pretty(&manifest).map_err(|e| HarnessError::Config(e.to_string()))?;
    fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))?;
    match error {
        None => Ok(manifest),
        Some(message) => Err(HarnessError::Solver {
            message,
            manifest: path,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_energy_of_zero_initial_energy_is_one() {
        let d = StepDiagnostics {
            t: 0.0,
            step: 0,
            mass: 1.0,
            total_energy: 0.0,
            kinetic_energy: 0.0,
            newton_iters: 0,
            max_residual: 0.0,
            cfl_ratio: 0.0,
            energy_cfl_ratio: 0.0,
            min_density: 1.0,
            mu_h: 0.0,
        };
        assert_eq!(timeseries_record(&d, 0.0)[3], "1");
    }

    #[test]
    fn shortest_round_trip_formatting() {
        for x in [0.1, 1.0 / 3.0, 4.314e-2, 1e-300, 123456789.125] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
