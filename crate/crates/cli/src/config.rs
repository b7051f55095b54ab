//! JSON experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tandem_core::chain::schedule;
use tandem_core::heavytail::{ServiceDistribution, NU_MAX, NU_MIN};

/// Experiment kinds, one per subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    SolveM,
    SolveKappa,
    Phi,
    SimulateDes,
    SimulateChain,
    Theorem1,
    Theorem2,
    SteadyState,
    Verify,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::SolveM => "solve-m",
            Kind::SolveKappa => "solve-kappa",
            Kind::Phi => "phi",
            Kind::SimulateDes => "simulate-des",
            Kind::SimulateChain => "simulate-chain",
            Kind::Theorem1 => "theorem1",
            Kind::Theorem2 => "theorem2",
            Kind::SteadyState => "steady-state",
            Kind::Verify => "verify",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// Reduced sample sizes for smoke runs.
    #[default]
    Fast,
    /// Full sample sizes.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Inverse CDF of the tabulated `m`.
    #[default]
    Table,
    /// Fresh simulated busy periods.
    BusyPeriod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckName {
    Semigroup,
    Generator,
    DiscreteGenerator,
    MaxConvolution,
    Iterates,
}

impl CheckName {
    pub const ALL: [CheckName; 5] = [
        CheckName::Semigroup,
        CheckName::Generator,
        CheckName::DiscreteGenerator,
        CheckName::MaxConvolution,
        CheckName::Iterates,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// Every parameter an experiment may read. Unset sizes fall back to the
/// profile defaults in [`Spec::sizes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Spec {
    pub kind: Option<Kind>,
    pub nu: f64,
    pub b: f64,
    pub gamma: f64,
    /// Load of the fixed-`λ` experiments.
    pub rho: f64,
    pub n_grid: Vec<f64>,
    pub t: f64,
    pub x0: f64,
    pub x_grid: Option<Vec<f64>>,
    pub y_grid: Vec<f64>,
    pub h_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub grid: Option<GridConfig>,
    pub reps: Option<usize>,
    pub busy_periods: Option<usize>,
    pub steps: Option<usize>,
    pub burn_in: Option<u64>,
    pub draws: Option<usize>,
    pub seed: u64,
    pub profile: Profile,
    pub output: Option<PathBuf>,
    pub checks: Vec<CheckName>,
    /// Support end of the bump test function.
    pub c: f64,
    pub sampler: SamplerKind,
    pub event_log: bool,
}

impl Default for Spec {
    fn default() -> Self {
        Spec {
            kind: None,
            nu: 1.5,
            b: 1.0,
            gamma: 0.5,
            rho: 0.9,
            n_grid: vec![1e2, 1e3, 1e4],
            t: 1.0,
            x0: 0.0,
            x_grid: None,
            y_grid: vec![0.5, 1.0, 2.0, 5.0],
            h_grid: vec![0.1, 0.05, 0.025, 0.0125],
            t_grid: vec![0.5, 1.0, 2.0],
            grid: None,
            reps: None,
            busy_periods: None,
            steps: None,
            burn_in: None,
            draws: None,
            seed: 1,
            profile: Profile::Fast,
            output: None,
            checks: CheckName::ALL.to_vec(),
            c: 2.0,
            sampler: SamplerKind::Table,
            event_log: false,
        }
    }
}

/// A configuration problem at a field path.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.into(),
        message: message.into(),
    }
}

pub fn load(path: &Path) -> Result<Spec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid("<config>", format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Spec, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        invalid(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
    })
}

/// Sizes after applying profile defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sizes {
    pub reps: usize,
    pub busy_periods: usize,
    pub steps: usize,
    pub burn_in: u64,
    pub draws: usize,
}

impl Spec {
    pub fn dist(&self) -> ServiceDistribution {
        ServiceDistribution::pareto(self.nu, self.b).expect("validated")
    }

    pub fn lambda(&self) -> f64 {
        self.rho / self.dist().mean()
    }

    pub fn x_grid(&self) -> Vec<f64> {
        self.x_grid.clone().unwrap_or_else(|| vec![0.0, 0.5, 1.0, 1.5])
    }

    pub fn sizes(&self) -> Sizes {
        let full = self.profile == Profile::Full;
        let pick = |v: Option<usize>, fast: usize, full_v: usize| v.unwrap_or(if full { full_v } else { fast });
        let burn = (10.0 / (1.0 - self.rho)).ceil().max(1e5) as u64;
        Sizes {
            reps: pick(self.reps, 2_000, 10_000),
            busy_periods: pick(self.busy_periods, 100_000, 1_000_000),
            steps: pick(self.steps, 100_000, 1_000_000),
            burn_in: self.burn_in.unwrap_or(burn),
            draws: pick(self.draws, 20_000, 100_000),
        }
    }

    /// Checks every parameter the given kind reads.
    pub fn validate(&self, kind: Kind) -> Result<(), ConfigError> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(invalid("kind", format!("config is for `{k}` but `{kind}` was requested")));
            }
        }
        if !(NU_MIN..=NU_MAX).contains(&self.nu) {
            return Err(invalid("nu", format!("must lie in [{NU_MIN}, {NU_MAX}], got {}", self.nu)));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(invalid("b", format!("must be positive and finite, got {}", self.b)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be finite and >= 0, got {}", self.gamma)));
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(invalid("t", format!("must be finite and >= 0, got {}", self.t)));
        }
        if !(self.x0 >= 0.0 && self.x0.is_finite()) {
            return Err(invalid("x0", format!("must be finite and >= 0, got {}", self.x0)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid("c", format!("must be positive and finite, got {}", self.c)));
        }
        let fixed_load = matches!(kind, Kind::SolveM | Kind::SimulateDes | Kind::SteadyState);
        if fixed_load {
            let upper = if kind == Kind::SteadyState { 1.0 } else { 1.0 + 1e-12 };
            if !(self.rho > 0.0 && self.rho < upper) {
                let bound = if kind == Kind::SteadyState { "(0, 1)" } else { "(0, 1]" };
                return Err(invalid("rho", format!("must lie in {bound}, got {}", self.rho)));
            }
        }
        let scaled = matches!(
            kind,
            Kind::SimulateChain | Kind::Theorem1 | Kind::Theorem2 | Kind::SteadyState | Kind::Verify
        );
        if scaled {
            if self.n_grid.is_empty() {
                return Err(invalid("n_grid", "must not be empty"));
            }
            for (i, &n) in self.n_grid.iter().enumerate() {
                if let Err(e) = schedule(&self.dist(), self.gamma, n) {
                    return Err(invalid(format!("n_grid[{i}]"), e.to_string()));
                }
            }
        }
        positive_list("y_grid", &self.y_grid)?;
        positive_list("h_grid", &self.h_grid)?;
        positive_list("t_grid", &self.t_grid)?;
        if let Some(xs) = &self.x_grid {
            for (i, &x) in xs.iter().enumerate() {
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(invalid(format!("x_grid[{i}]"), format!("must be finite and >= 0, got {x}")));
                }
            }
        }
        if let Some(g) = &self.grid {
            if !(g.lo > 0.0 && g.hi > g.lo && g.hi.is_finite()) {
                return Err(invalid("grid", "needs 0 < lo < hi < inf"));
            }
            if g.points < 2 {
                return Err(invalid("grid.points", "needs at least 2 points"));
            }
        }
        for (name, v) in [
            ("reps", self.reps),
            ("busy_periods", self.busy_periods),
            ("steps", self.steps),
            ("draws", self.draws),
        ] {
            if v == Some(0) {
                return Err(invalid(name, "must be at least 1"));
            }
        }
        if kind == Kind::Verify && self.checks.is_empty() {
            return Err(invalid("checks", "must name at least one check"));
        }
        Ok(())
    }
}

fn positive_list(name: &str, values: &[f64]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return Err(invalid(name, "must not be empty"));
    }
    for (i, &v) in values.iter().enumerate() {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("{name}[{i}]"), format!("must be positive and finite, got {v}")));
        }
    }
    Ok(())
}
