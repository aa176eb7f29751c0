//! Convergence studies under mesh doubling.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::simulate;
use super::HarnessError;
use crate::diagnostics::{eoc, l2_error, l2_error_vector, ErrorMode};
use crate::model::Configuration;
use crate::scalar::Scalar;
use crate::stepper::State;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    /// Compare with the configuration's exact steady state.
    ExactProfile,
    /// Compare with a run on `cells` cells (default: 4× the finest studied grid).
    FinestGrid { cells: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EocRow {
    pub cells: usize,
    pub e_rho: f64,
    pub eoc_rho: Option<f64>,
    pub e_v: f64,
    pub eoc_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EocTable {
    pub mode: ErrorMode,
    pub reference_cells: Option<usize>,
    pub t_final: f64,
    pub rows: Vec<EocRow>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v}"))
}

impl EocTable {
    pub const HEADER: [&'static str; 5] = ["K", "e_rho", "eoc_rho", "e_v", "eoc_v"];

    pub fn to_csv(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| HarnessError::Config(e.to_string());
        w.write_record(Self::HEADER).map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.cells.to_string(),
                format!("{}", r.e_rho),
                fmt_opt(r.eoc_rho),
                format!("{}", r.e_v),
                fmt_opt(r.eoc_v),
            ])
            .map_err(err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_csv()?).map_err(|e| HarnessError::io(path, e))
    }

    pub fn density_errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.e_rho).collect()
    }

    pub fn density_eocs(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.eoc_rho).collect()
    }

    pub fn velocity_eocs(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.eoc_v).collect()
    }
}

fn run_to_end<T: Scalar>(cfg: &Configuration<T>) -> Result<State<T>, HarnessError> {
    simulate(cfg, |_, _| {}).map_err(|f| HarnessError::Solver {
        message: format!("K={}: {}", cfg.grid.cells(), f.error),
        manifest: Default::default(),
    })
}

/// Runs `build(K)` for every `K` in `cells` (in parallel) and tabulates
/// errors at the final time against `reference`, with EOCs between
/// consecutive rows.
pub fn eoc_study<T: Scalar>(
    build: impl Fn(usize) -> Result<Configuration<T>, HarnessError> + Sync,
    cells: &[usize],
    reference: Reference,
    mode: ErrorMode,
) -> Result<EocTable, HarnessError> {
    if cells.is_empty() {
        return Err(HarnessError::Config("no grid sizes given".into()));
    }
    for w in cells.windows(2) {
        if w[1] != 2 * w[0] {
            return Err(HarnessError::Config(format!(
                "grid sizes must double: {} -> {}",
                w[0], w[1]
            )));
        }
    }
    let finest = *cells.last().unwrap();
    let reference_cells = match reference {
        Reference::ExactProfile => None,
        Reference::FinestGrid { cells: c } => {
            let k = c.unwrap_or(4 * finest);
            if let Some(bad) = cells.iter().find(|&&c| k % c != 0) {
                return Err(HarnessError::Config(format!(
                    "reference K={k} is not a multiple of K={bad}"
                )));
            }
            Some(k)
        }
    };

    let mut jobs: Vec<usize> = cells.to_vec();
    jobs.extend(reference_cells);
    let states: Vec<(Configuration<T>, State<T>)> = jobs
        .par_iter()
        .map(|&k| {
            let cfg = build(k)?;
            let state = run_to_end(&cfg)?;
            Ok((cfg, state))
        })
        .collect::<Result<_, HarnessError>>()?;
    let t_final = states[0].0.t_final();
    for (cfg, _) in &states {
        if (cfg.t_final() - t_final).abs() > 1e-9 * t_final.max(1.0) {
            return Err(HarnessError::Config(format!(
                "runs end at different times ({} vs {t_final})",
                cfg.t_final()
            )));
        }
    }

    let mut e_rho = Vec::with_capacity(cells.len());
    let mut e_v = Vec::with_capacity(cells.len());
    for (cfg, state) in &states[..cells.len()] {
        let (ref_rho, ref_v) = match reference_cells {
            None => cfg.exact_solution().ok_or_else(|| {
                HarnessError::Config(
                    "configuration has no exact solution; use a finest-grid reference".into(),
                )
            })?,
            Some(_) => {
                let r = &states[cells.len()].1;
                (r.rho.clone(), r.v.clone())
            }
        };
        e_rho.push(l2_error(&state.rho, &ref_rho, mode)?.to_f64_lossy());
        e_v.push(l2_error_vector(&state.v, &ref_v, mode)?.to_f64_lossy());
    }
    let rates = |errs: &[f64]| -> Vec<Option<f64>> {
        let pairs: Vec<(usize, f64)> = cells.iter().copied().zip(errs.iter().copied()).collect();
        let mut out = vec![None];
        out.extend(pairs.windows(2).map(|w| eoc(w).ok().map(|v| v[0])));
        out
    };
    let (r_rho, r_v) = (rates(&e_rho), rates(&e_v));
    let rows = cells
        .iter()
        .enumerate()
        .map(|(i, &k)| EocRow {
            cells: k,
            e_rho: e_rho[i],
            eoc_rho: r_rho[i],
            e_v: e_v[i],
            eoc_v: r_v[i],
        })
        .collect();
    Ok(EocTable {
        mode,
        reference_cells,
        t_final,
        rows,
    })
}
