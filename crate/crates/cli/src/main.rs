use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tandem_cli::config::{self, Kind, Profile, Spec};
use tandem_cli::{run, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS};

/// Heavy-traffic experiments for the tandem queue with reused service times.
#[derive(Debug, Parser)]
#[command(name = "tandem-ht", version)]
struct Args {
    /// Experiment to run.
    kind: Kind,
    /// JSON configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sample-size profile, overriding the configuration.
    #[arg(long, value_enum)]
    profile: Option<Profile>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAIL as u8);
        }
    }
    let mut spec = match &args.config {
        Some(path) => match config::load(path) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("configuration error at {e}");
                return ExitCode::from(EXIT_CONFIG as u8);
            }
        },
        None => Spec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(p) = args.profile {
        spec.profile = p;
    }
    if let Some(out) = args.out {
        spec.output = Some(out);
    }
    let out = spec.output.clone().unwrap_or_else(|| PathBuf::from("out"));
    match run(args.kind, &spec, &out) {
        Ok(report) => {
            for c in &report.checks {
                let status = if c.pass { "PASS" } else { "FAIL" };
                println!("{status} {} statistic={:e} tolerance={:e} {}", c.name, c.statistic, c.tolerance, c.detail);
            }
            for n in &report.notes {
                println!("note: {n}");
            }
            let code = if report.passed() { EXIT_PASS } else { EXIT_FAIL };
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
