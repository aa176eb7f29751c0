//! `korteweg` — run presets or JSON configurations, convergence studies and
//! the operator identity checks.
//!
//! Exit codes: 0 success, 1 configuration/IO error or failed check,
//! 2 solver failure.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use korteweg_core::diagnostics::ErrorMode;
use korteweg_core::harness::{self, eoc_study, HarnessError, Reference, RunConfig};
use korteweg_core::model::Preset;
use korteweg_core::stepper::Variant;

#[derive(Parser)]
#[command(name = "korteweg", version, about = "Low-Mach Euler-Korteweg solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write timeseries.csv, snapshots and manifest.json.
    Run(RunArgs),
    /// Convergence study under mesh doubling.
    Eoc(EocArgs),
    /// Randomized checks of the discrete operator identities.
    Check(CheckArgs),
}

#[derive(Args)]
struct Common {
    /// Named preset (exp51..exp55).
    #[arg(long)]
    preset: Option<Preset>,
    /// JSON run configuration; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mach number (overrides the preset default).
    #[arg(long)]
    mach: Option<f64>,
    /// Density update: newton or linearized.
    #[arg(long)]
    variant: Option<Variant>,
    /// Final time; must be a whole number of time steps.
    #[arg(long = "tfinal")]
    t_final: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Cells per direction.
    #[arg(long = "K")]
    cells: Option<usize>,
    /// Number of time steps.
    #[arg(long, conflicts_with = "t_final")]
    steps: Option<usize>,
    /// Output directory (default runs/<preset>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Steps between snapshots (default 100).
    #[arg(long)]
    snapshot_every: Option<usize>,
    /// exp52 only: start from equilibrium + O(M²) perturbation.
    #[arg(long)]
    well_prepared: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefKind {
    Exact,
    Finest,
}

#[derive(Args)]
struct EocArgs {
    #[command(flatten)]
    common: Common,
    /// Doubling sequence of cell counts, e.g. 40,80,160,320.
    #[arg(long = "K", value_delimiter = ',', required = true)]
    cells: Vec<usize>,
    /// Reference solution (default: exact when the preset has one).
    #[arg(long)]
    reference: Option<RefKind>,
    /// Cells of the finest-grid reference (default 4× the finest grid).
    #[arg(long = "ref-K")]
    ref_cells: Option<usize>,
    /// Error norm: absolute or relative.
    #[arg(long, default_value = "absolute")]
    mode: String,
    /// CSV output path (printed to stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Random cases per (dimension, K) pair.
    #[arg(long, default_value_t = 100)]
    cases: usize,
}

fn base_config(c: &Common) -> Result<RunConfig, HarnessError> {
    let mut cfg = match (&c.config, c.preset) {
        (Some(path), _) => {
            let mut cfg = RunConfig::load(path)?;
            if let Some(p) = c.preset {
                cfg.preset = Some(p);
                cfg.explicit = None;
            }
            cfg
        }
        (None, Some(p)) => RunConfig::for_preset(p),
        (None, None) => return Err(HarnessError::Config("give --preset or --config".into())),
    };
    if c.mach.is_some() {
        cfg.mach = c.mach;
    }
    if c.variant.is_some() {
        cfg.variant = c.variant;
    }
    if c.t_final.is_some() {
        cfg.t_final = c.t_final;
        cfg.steps = None;
    }
    Ok(cfg)
}

fn cmd_run(a: RunArgs) -> Result<(), HarnessError> {
    let mut cfg = base_config(&a.common)?;
    if a.cells.is_some() {
        cfg.cells = a.cells;
    }
    if a.steps.is_some() {
        cfg.steps = a.steps;
        cfg.t_final = None;
    }
    if let Some(n) = a.snapshot_every {
        cfg.snapshot_every = n;
    }
    cfg.well_prepared |= a.well_prepared;
    let out = a.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| {
        PathBuf::from(format!(
            "runs/{}",
            cfg.preset.map_or("explicit", |p| p.name())
        ))
    });
    let manifest = harness::run(&cfg, &out)?;
    let s = &manifest.summary;
    println!(
        "{}: {} steps, t = {}, mass drift {:.3e}, energy {:.6e} -> {:.6e}, min rho {:.4}",
        out.display(),
        s.steps_completed,
        s.t_end,
        s.max_relative_mass_drift,
        s.initial_energy,
        s.final_energy,
        s.min_density
    );
    Ok(())
}

fn cmd_eoc(a: EocArgs) -> Result<(), HarnessError> {
    let base = base_config(&a.common)?;
    let mode: ErrorMode = match a.mode.as_str() {
        "absolute" => ErrorMode::Absolute,
        "relative" => ErrorMode::Relative,
        m => return Err(HarnessError::Config(format!("unknown error mode `{m}`"))),
    };
    let has_exact = base.preset.is_some_and(|p| p.has_exact_solution());
    let reference = match a.reference.unwrap_or(if has_exact {
        RefKind::Exact
    } else {
        RefKind::Finest
    }) {
        RefKind::Exact => Reference::ExactProfile,
        RefKind::Finest => Reference::FinestGrid { cells: a.ref_cells },
    };
    let table = eoc_study(
        |k| {
            let mut c = base.clone();
            c.cells = Some(k);
            c.build()
        },
        &a.cells,
        reference,
        mode,
    )?;
    match a.out {
        Some(path) => table.write_csv(&path)?,
        None => print!("{}", table.to_csv()?),
    }
    Ok(())
}

fn cmd_check(a: CheckArgs) -> anyhow::Result<bool> {
    let report = harness::run_identity_checks(a.seed, a.cases);
    for r in &report.results {
        println!(
            "{} {:<24} cases={} worst={:.3e} tol={:.1e}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.cases,
            r.worst,
            r.tolerance
        );
    }
    println!(
        "{}",
        serde_json::to_string(&report).context("serializing report")?
    );
    Ok(report.all_passed())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap exits with 2 on usage errors, which is reserved for solver failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::from(e.use_stderr()));
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Eoc(a) => cmd_eoc(a),
        Command::Check(a) => {
            return match cmd_check(a) {
                Ok(true) => ExitCode::SUCCESS,
                Ok(false) => ExitCode::from(1),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let HarnessError::Solver { manifest, .. } = &e {
                if !manifest.as_os_str().is_empty() {
                    eprintln!("partial results: {}", manifest.display());
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
