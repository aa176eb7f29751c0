//! Shared helpers for the acceptance suite in `tests/acceptance.rs`.
//!
//! Every criterion prints one `PASS`/`FAIL` line followed by indented detail
//! lines, so the suite doubles as a report:
//!
//! ```text
//! cargo test --release -p korteweg-validation --test acceptance
//! ```

use korteweg_core::harness::{EocTable, HarnessError};
use korteweg_core::{preset, Configuration, Preset, Variant};

/// Prints the verdict and details; returns `passed`.
pub fn criterion(name: &str, passed: bool, details: &[String]) -> bool {
    println!("{} {name}", if passed { "PASS" } else { "FAIL" });
    for d in details {
        println!("    {d}");
    }
    passed
}

pub fn build(
    p: Preset,
    cells: usize,
    variant: Variant,
) -> Result<Configuration<f64>, HarnessError> {
    let mut c = preset::<f64>(p, Some(cells), None)?;
    c.params.variant = variant;
    Ok(c)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn table_lines(t: &EocTable) -> Vec<String> {
    let eoc = |e: Option<f64>| e.map_or("-".into(), |e| format!("{e:.2}"));
    t.rows
        .iter()
        .map(|r| {
            format!(
                "K={:4}  e_rho={:.4e}  eoc={:>6}  e_v={:.4e}  eoc={:>6}",
                r.cells,
                r.e_rho,
                eoc(r.eoc_rho),
                r.e_v,
                eoc(r.eoc_v)
            )
        })
        .collect()
}

/// Average rate between the first and last level.
pub fn overall_rate(errs: &[f64]) -> f64 {
    (errs[0] / errs[errs.len() - 1]).log2() / (errs.len() - 1) as f64
}
