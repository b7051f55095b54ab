//! Experiment harness: JSON configuration, deterministic seeding, and
//! CSV/JSON reporting around `tandem-core`.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::Path;
use std::time::Instant;

use config::{ConfigError, Kind, Spec};
use experiments::Context;
use report::RunReport;

/// Exit status for a run where every check passed.
pub const EXIT_PASS: i32 = 0;
/// Exit status for a failed check or a numerical error.
pub const EXIT_FAIL: i32 = 1;
/// Exit status for an invalid configuration.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error at {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] tandem_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            _ => EXIT_FAIL,
        }
    }
}

/// Validates `spec`, runs `kind`, and writes its tables plus
/// `report.json` into `out`.
pub fn run(kind: Kind, spec: &Spec, out: &Path) -> Result<RunReport, RunError> {
    spec.validate(kind)?;
    std::fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut ctx = Context::new(spec, out);
    match kind {
        Kind::SolveM => experiments::solve_m(&mut ctx)?,
        Kind::SolveKappa => experiments::solve_kappa(&mut ctx)?,
        Kind::Phi => experiments::phi(&mut ctx)?,
        Kind::SimulateDes => experiments::simulate_des(&mut ctx)?,
        Kind::SimulateChain => experiments::simulate_chain(&mut ctx)?,
        Kind::Theorem1 => experiments::theorem1(&mut ctx)?,
        Kind::Theorem2 => experiments::theorem2(&mut ctx)?,
        Kind::SteadyState => experiments::steady_state(&mut ctx)?,
        Kind::Verify => experiments::verify(&mut ctx)?,
    }
    let sizes = ctx.sizes;
    let outcome = ctx.finish();
    let report = RunReport {
        kind,
        version: env!("CARGO_PKG_VERSION"),
        seed: spec.seed,
        profile: spec.profile,
        spec: spec.clone(),
        sizes,
        checks: outcome.checks,
        notes: outcome.notes,
        outputs: outcome.outputs,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    };
    report.write_json(&out.join("report.json"))?;
    Ok(report)
}
