//! JSON run configuration.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "preset": "exp54",
//!   "cells": 80,
//!   "steps": 50,
//!   "out": "runs/exp54-k80"
//! }
//! ```
//!
//! Either `preset` or `explicit` must be present. Every optional field left
//! out is filled in by [`RunConfig::resolved`], and the resolved form is what
//! the run manifest records.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::grid::{Dim, GridSpec, ScalarField, VectorField};
use crate::model::{preset, Configuration, InitialData, Preset, QuarticDoubleWell};
use crate::solver::{LinearSolverKind, NewtonConfig};
use crate::stepper::{CflMonitor, RangePolicy, SchemeParams, Variant, ViscosityPolicy};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit: Option<ExplicitSetup>,
    /// Cells per direction `K` (preset runs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mach: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    /// Step count; mutually exclusive with `t_final`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    /// Replace exp52's density by equilibrium + `O(M²)` perturbation.
    #[serde(default)]
    pub well_prepared: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viscosity: Option<ViscosityPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl_monitor: Option<CflMonitor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_policy: Option<RangePolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton: Option<NewtonConfig>,
    /// Steps between field snapshots.
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Seed for randomized checks; unused by time stepping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_snapshot_every() -> usize {
    100
}

/// A configuration built from scratch instead of from a preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSetup {
    pub dim: Dim,
    pub cells: usize,
    #[serde(default)]
    pub origin: f64,
    #[serde(default = "one")]
    pub length: f64,
    pub gamma: f64,
    #[serde(default = "default_range")]
    pub density_range: [f64; 2],
    pub mach: f64,
    pub tau: f64,
    pub initial: InitialSpec,
}

fn one() -> f64 {
    1.0
}

fn default_range() -> [f64; 2] {
    [0.25, 4.0]
}

/// Initial density (velocity zero unless given nodally).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        rho: f64,
    },
    /// `mean + amplitude·tanh((x − center)/width)` along the first axis.
    TanhFront {
        mean: f64,
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// Nodal values in storage order (`i` fastest).
    Nodal {
        rho: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        velocity: Option<Vec<Vec<f64>>>,
    },
}

impl RunConfig {
    pub fn for_preset(p: Preset) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            preset: Some(p),
            explicit: None,
            cells: None,
            mach: None,
            tau: None,
            variant: None,
            steps: None,
            t_final: None,
            well_prepared: false,
            viscosity: None,
            cfl_monitor: None,
            range_policy: None,
            newton: None,
            snapshot_every: default_snapshot_every(),
            out: None,
            seed: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        match (&self.preset, &self.explicit) {
            (Some(_), Some(_)) => {
                return fail("give either `preset` or `explicit`, not both".into())
            }
            (None, None) => return fail("one of `preset` or `explicit` is required".into()),
            _ => {}
        }
        if self.explicit.is_some()
            && (self.cells.is_some() || self.mach.is_some() || self.tau.is_some())
        {
            return fail(
                "`cells`, `mach` and `tau` belong inside `explicit` for explicit setups".into(),
            );
        }
        if self.steps.is_some() && self.t_final.is_some() {
            return fail("give either `steps` or `t_final`, not both".into());
        }
        if self.snapshot_every == 0 {
            return fail("snapshot_every must be >= 1".into());
        }
        if let Some(t) = self.t_final {
            if !(t > 0.0) {
                return fail(format!("t_final must be positive, got {t}"));
            }
        }
        if let Some(n) = &self.newton {
            if !(n.tol_residual > 0.0 && n.tol_step > 0.0 && n.linear_tol > 0.0 && n.max_iter >= 1)
            {
                return fail("newton tolerances must be positive and max_iter >= 1".into());
            }
        }
        Ok(())
    }

    /// Builds the configuration to run.
    pub fn build(&self) -> Result<Configuration<f64>, HarnessError> {
        self.validate()?;
        let mut cfg = match (&self.preset, &self.explicit) {
            (Some(p), None) => {
                let mut c = preset::<f64>(*p, self.cells, self.mach)?;
                if self.well_prepared {
                    c = c.into_well_prepared()?;
                }
                if let Some(tau) = self.tau {
                    c.params.tau = tau;
                }
                c
            }
            (None, Some(e)) => {
                if self.well_prepared {
                    return Err(HarnessError::Config(
                        "well_prepared requires preset exp52".into(),
                    ));
                }
                e.build()?
            }
            _ => unreachable!("validated"),
        };
        if let Some(v) = self.variant {
            cfg.params.variant = v;
        }
        if let Some(v) = self.viscosity {
            cfg.params.viscosity = v;
        }
        if let Some(c) = self.cfl_monitor {
            cfg.params.cfl_monitor = c;
        }
        if let Some(r) = self.range_policy {
            cfg.params.range_policy = r;
        }
        if let Some(n) = self.newton {
            cfg.newton = n;
        }
        if cfg.newton.linear_solver.is_none() {
            cfg.newton.linear_solver = Some(match cfg.grid.dim() {
                Dim::One => LinearSolverKind::Direct,
                Dim::Two => LinearSolverKind::KrylovThenDirect,
            });
        }
        if let Some(n) = self.steps {
            cfg.steps = n;
        }
        if let Some(t) = self.t_final {
            let n = (t / cfg.params.tau).round().max(1.0) as usize;
            if ((n as f64) * cfg.params.tau - t).abs() > 1e-9 * t {
                return Err(HarnessError::Config(format!(
                    "t_final {t} is not a whole number of steps of tau {}",
                    cfg.params.tau
                )));
            }
            cfg.steps = n;
        }
        cfg.params.validate().map_err(HarnessError::Config)?;
        Ok(cfg)
    }

    /// Copy with every default made explicit, suitable for reproducing the run.
    pub fn resolved(&self) -> Result<Self, HarnessError> {
        let cfg = self.build()?;
        let mut out = self.clone();
        if out.preset.is_some() {
            out.cells = Some(cfg.grid.cells());
            out.mach = Some(cfg.params.mach);
            out.tau = Some(cfg.params.tau);
        }
        out.variant = Some(cfg.params.variant);
        out.steps = Some(cfg.steps);
        out.t_final = None;
        out.viscosity = Some(cfg.params.viscosity);
        out.cfl_monitor = Some(cfg.params.cfl_monitor);
        out.range_policy = Some(cfg.params.range_policy);
        out.newton = Some(cfg.newton);
        Ok(out)
    }
}

impl ExplicitSetup {
    fn build(&self) -> Result<Configuration<f64>, HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.cells < 2 {
            return bad(format!("cells must be >= 2, got {}", self.cells));
        }
        if !(self.length > 0.0 && self.gamma > 0.0) {
            return bad("length and gamma must be positive".into());
        }
        let grid = GridSpec::new(self.dim, self.cells, self.origin, self.length);
        let [lo, hi] = self.density_range;
        let model = QuarticDoubleWell::new(self.gamma).with_range(lo, hi);
        let rho = match &self.initial {
            InitialSpec::Constant { rho } => ScalarField::constant(grid, *rho),
            InitialSpec::TanhFront {
                mean,
                amplitude,
                center,
                width,
            } => ScalarField::from_fn(grid, |x, _| {
                mean + amplitude * ((x - center) / width).tanh()
            }),
            InitialSpec::Nodal { rho, .. } => {
                if rho.len() != grid.len() {
                    return bad(format!(
                        "nodal rho has {} values, grid has {}",
                        rho.len(),
                        grid.len()
                    ));
                }
                ScalarField::new(grid, rho.clone())
            }
        };
        let v = match &self.initial {
            InitialSpec::Nodal {
                velocity: Some(comps),
                ..
            } => {
                if comps.len() != self.dim.as_usize() || comps.iter().any(|c| c.len() != grid.len())
                {
                    return bad("nodal velocity must have one full component per dimension".into());
                }
                VectorField::new(
                    comps
                        .iter()
                        .map(|c| ScalarField::new(grid, c.clone()))
                        .collect(),
                )
            }
            _ => VectorField::zeros(grid),
        };
        let initial = InitialData::new(rho, v, false)?;
        Ok(Configuration {
            preset: None,
            grid,
            model,
            initial,
            params: SchemeParams::new(self.mach, self.tau),
            steps: 1,
            newton: NewtonConfig::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_preset_config_parses() {
        let c = RunConfig::from_json(r#"{"schema_version": 1, "preset": "exp54", "cells": 20}"#)
            .unwrap();
        let built = c.build().unwrap();
        assert_eq!(built.grid.cells(), 20);
        assert_eq!(built.newton.tol_residual, 1e-11);
        assert_eq!(built.newton.linear_solver, Some(LinearSolverKind::Direct));
    }

    #[test]
    fn schema_and_exclusivity_are_enforced() {
        assert!(RunConfig::from_json(r#"{"schema_version": 2, "preset": "exp54"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"schema_version": 1}"#).is_err());
        assert!(RunConfig::from_json(
            r#"{"schema_version": 1, "preset": "exp54", "steps": 3, "t_final": 0.1}"#
        )
        .is_err());
        assert!(RunConfig::from_json(
            r#"{"schema_version": 1, "preset": "exp54", "snapshot_every": 0}"#
        )
        .is_err());
        assert!(RunConfig::from_json(r#"{"schema_version": 1, "preset": "exp99"}"#).is_err());
        assert!(
            RunConfig::from_json(r#"{"schema_version": 1, "preset": "exp54", "bogus": 1}"#)
                .is_err()
        );
    }

    #[test]
    fn resolved_config_reproduces_build() {
        let mut c = RunConfig::for_preset(Preset::Exp53);
        c.cells = Some(16);
        c.t_final = Some(0.0125);
        let r = c.resolved().unwrap();
        assert_eq!(r.steps, Some(10));
        assert_eq!(r.build().unwrap(), c.build().unwrap());
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), r);
    }

    #[test]
    fn explicit_constant_setup() {
        let text = r#"{
            "schema_version": 1,
            "explicit": {"dim": "2", "cells": 4, "gamma": 0.001, "mach": 0.1, "tau": 0.001,
                         "initial": {"kind": "constant", "rho": 1.5}},
            "steps": 3
        }"#;
        let c = RunConfig::from_json(text).unwrap().build().unwrap();
        assert_eq!(c.grid.len(), 25);
        assert_eq!(c.steps, 3);
        assert!(c.initial.rho.values().iter().all(|&r| r == 1.5));
    }
}
