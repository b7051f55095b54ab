//! One driver per experiment kind.

use std::path::{Path, PathBuf};

use tandem_core::boxma::{log_space, tabulate, GridSpec, MaxServiceCdf, SteadyStateLaw};
use tandem_core::chain::{long_run, run_scaled, scaled_max_cdf_probe, schedule, HeavyTrafficSchedule, Kernel};
use tandem_core::kappa::{
    kappa_residual, kappa_upper_bound, regular_variation_exponent, KappaFunction, KappaParams, LimitCdf,
};
use tandem_core::limits::{
    discrete_generator, generator_apply, generator_limit_check, iterate_representation_check, ks_distance,
    ks_two_sample, max_convolution_identity_error, max_convolution_mc, mean_and_error, semigroup_property,
    steady_state_interchange_error, Bump, EmpiricalDistribution,
};
use tandem_core::rng::{derive_seed, stream};
use tandem_core::tandemsim::{simulate, verify_recursion, BusyPeriodSampler, SimOptions};
use tandem_core::tolerances::Tolerances;

use crate::config::{CheckName, SamplerKind, Sizes, Spec};
use crate::report::{Check, Table};
use crate::row;
use crate::RunError;

const FULL_BUSY_PERIODS: usize = 1_000_000;
const FULL_IDLES: usize = 100_000;
const FULL_STEPS: usize = 1_000_000;
const FULL_REPS: usize = 10_000;
const FULL_DRAWS: usize = 100_000;

/// Collected results of one experiment.
pub struct Outcome {
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub outputs: Vec<PathBuf>,
}

pub(crate) struct Context<'a> {
    pub spec: &'a Spec,
    pub sizes: Sizes,
    pub tol: Tolerances,
    pub out: &'a Path,
    outcome: Outcome,
}

impl<'a> Context<'a> {
    pub fn new(spec: &'a Spec, out: &'a Path) -> Self {
        Context {
            spec,
            sizes: spec.sizes(),
            tol: Tolerances::default(),
            out,
            outcome: Outcome {
                checks: Vec::new(),
                notes: Vec::new(),
                outputs: Vec::new(),
            },
        }
    }

    fn check(&mut self, c: Check) {
        self.outcome.checks.push(c);
    }

    fn note(&mut self, s: impl Into<String>) {
        self.outcome.notes.push(s.into());
    }

    fn emit(&mut self, name: &str, table: &Table) -> Result<(), RunError> {
        let path = self.out.join(name);
        table.write(&path)?;
        self.outcome.outputs.push(PathBuf::from(name));
        Ok(())
    }

    /// A KS threshold stated for `full` observations, rescaled to `used`
    /// so that the significance level is unchanged.
    fn ks_check(&mut self, name: &str, statistic: f64, base: f64, full: usize, used: usize) {
        if used >= full {
            self.check(Check::at_most(name, statistic, base));
        } else {
            let tol = base * (full as f64 / used as f64).sqrt();
            self.check(
                Check::at_most(name, statistic, tol)
                    .with_detail(format!("threshold {base} at {full} scaled to {used} observations")),
            );
        }
    }

    pub fn finish(self) -> Outcome {
        self.outcome
    }

    fn limit(&self) -> Result<LimitCdf, RunError> {
        let params = KappaParams::new(&self.spec.dist(), self.spec.gamma)?;
        Ok(LimitCdf::new(KappaFunction::build(params)?))
    }
}

/// Table of `m` at `λ_n` wide enough for chain sampling at scale `n`.
fn scaled_table(s: &HeavyTrafficSchedule) -> Result<MaxServiceCdf, RunError> {
    let b = s.dist().scale();
    Ok(tabulate(
        s.lambda_n(),
        s.dist(),
        &GridSpec::Log {
            lo: b,
            hi: b * s.n() * 1e6,
            points: 2048,
        },
    )?)
}

fn fixed_table(ctx: &Context) -> Result<MaxServiceCdf, RunError> {
    let b = ctx.spec.b;
    Ok(tabulate(
        ctx.spec.lambda(),
        &ctx.spec.dist(),
        &GridSpec::Log {
            lo: b,
            hi: b * 1e8,
            points: 2048,
        },
    )?)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

pub(crate) fn solve_m(ctx: &mut Context) -> Result<(), RunError> {
    let dist = ctx.spec.dist();
    let grid = match ctx.spec.grid {
        Some(g) => GridSpec::Log {
            lo: g.lo,
            hi: g.hi,
            points: g.points,
        },
        None => GridSpec::default_for(&dist),
    };
    let m = tabulate(ctx.spec.lambda(), &dist, &grid)?;
    let residuals = m.residuals();
    let mut t = Table::new(&["w", "m", "residual"]);
    for ((&w, v), r) in m.grid().iter().zip(m.values()).zip(&residuals) {
        t.push(row![w, v, *r]);
    }
    ctx.emit("m.csv", &t)?;
    let worst = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let tol = ctx.tol.fixed_point_residual;
    ctx.check(Check::at_most("fixed_point_residual", worst, tol));
    Ok(())
}

pub(crate) fn solve_kappa(ctx: &mut Context) -> Result<(), RunError> {
    let params = KappaParams::new(&ctx.spec.dist(), ctx.spec.gamma)?;
    let k = KappaFunction::build(params)?;
    let bound = kappa_upper_bound(&params);
    let mut t = Table::new(&["y", "kappa", "residual"]);
    let (mut worst, mut above, mut lo, mut hi) = (0.0f64, 0usize, f64::INFINITY, f64::NEG_INFINITY);
    for y in log_space(1e-3, 1e6, 91) {
        let v = k.value(y);
        let r = kappa_residual(&params, y, v)?;
        worst = worst.max(r.abs());
        above += usize::from(v > bound || v <= 0.0);
        lo = lo.min(v);
        hi = hi.max(v);
        t.push(row![y, v, r]);
    }
    ctx.emit("kappa.csv", &t)?;
    ctx.check(Check::at_most("kappa_residual", worst, ctx.tol.kappa_residual));
    ctx.check(Check::flag("kappa_bound", above == 0, format!("upper bound {bound:e}")));
    if k.is_constant() {
        ctx.check(Check::at_most("kappa_constant", hi - lo, ctx.tol.kappa_constant_spread));
    } else {
        let slope = regular_variation_exponent(&k, 1e3, 1e5)?;
        let target = 1.0 - ctx.spec.nu;
        ctx.check(
            Check::at_most("kappa_slope", (slope - target).abs(), ctx.tol.kappa_slope)
                .with_detail(format!("slope {slope:.5} on [1e3, 1e5], target {target}")),
        );
    }
    Ok(())
}

pub(crate) fn phi(ctx: &mut Context) -> Result<(), RunError> {
    let cdf = ctx.limit()?;
    let xs = ctx.spec.x_grid.clone().unwrap_or_else(|| log_space(1e-3, 1e3, 61));
    let mut t = Table::new(&["t", "x", "phi", "phi_quadrature"]);
    let mut worst = 0.0f64;
    for &time in &ctx.spec.t_grid {
        for &x in &xs {
            let a = cdf.phi(time, x);
            let b = cdf.phi_by_quadrature(time, x)?;
            worst = worst.max((a - b).abs());
            t.push(row![time, x, a, b]);
        }
    }
    ctx.emit("phi.csv", &t)?;
    ctx.check(Check::at_most("phi_routes", worst, ctx.tol.phi_agreement));
    if cdf.kappa().is_constant() {
        ctx.note("gamma = 0: the stationary limit diverges and is not tabulated");
    } else {
        let mut s = Table::new(&["x", "phi_infinity"]);
        for &x in &xs {
            s.push(row![x, cdf.phi_infinity(x).value]);
        }
        ctx.emit("phi_infinity.csv", &s)?;
    }
    Ok(())
}

pub(crate) fn simulate_des(ctx: &mut Context) -> Result<(), RunError> {
    let dist = ctx.spec.dist();
    let lambda = ctx.spec.lambda();
    let opts = SimOptions {
        keep_path: ctx.spec.event_log,
        ..SimOptions::default()
    };
    let mut rng = stream(derive_seed(ctx.spec.seed, 10), 0);
    let out = simulate(lambda, &dist, ctx.sizes.busy_periods, &mut rng, opts)?;
    let mut t = Table::new(&["k", "t_k", "t_tilde_k", "M_k", "I_k", "R_k"]);
    for p in &out.periods {
        t.push(row![p.index, p.last_arrival, p.last_q2_arrival, p.max_service, p.idle_after, p.r_value]);
    }
    ctx.emit("des.csv", &t)?;
    if let Some(path) = &out.path {
        let mut e = Table::new(&["time", "kind", "job", "w1", "w2"]);
        for ev in &path.events {
            let kind = match ev.kind {
                tandem_core::tandemsim::EventKind::Arrival => "arrival",
                tandem_core::tandemsim::EventKind::Departure => "departure",
            };
            e.push(row![ev.time, kind, ev.job, ev.w1, ev.w2]);
        }
        ctx.emit("events.csv", &e)?;
    }

    let report = verify_recursion(&out.periods, ctx.tol.recursion_relative);
    ctx.check(
        Check::at_most("recursion", report.max_relative_error, ctx.tol.recursion_relative)
            .with_detail(format!("{} violations in {} periods", report.violations.len(), report.checked)),
    );
    let m = fixed_table(ctx)?;
    let maxima = EmpiricalDistribution::new(out.periods.iter().map(|p| p.max_service).collect())?;
    let ks = ks_distance(&maxima, |w| m.cdf(w));
    ctx.ks_check("ks_max_law", ks, ctx.tol.ks_max_law, FULL_BUSY_PERIODS, ctx.sizes.busy_periods);
    let idles = EmpiricalDistribution::new(out.periods.iter().map(|p| p.idle_after).collect())?;
    let ks_idle = ks_distance(&idles, |x| -(-lambda * x).exp_m1());
    ctx.ks_check("ks_idle_exponential", ks_idle, ctx.tol.ks_sampler, FULL_IDLES, ctx.sizes.busy_periods);
    let counts: Vec<f64> = out.periods.iter().map(|p| p.jobs as f64).collect();
    let (mean, se) = mean_and_error(&counts);
    let expected = 1.0 / (1.0 - ctx.spec.rho);
    let z = (mean - expected).abs() / se;
    ctx.check(Check::at_most("mean_jobs", z, ctx.tol.mc_sigmas).with_detail(format!(
        "mean {mean:.4} (se {se:.4}) vs {expected:.4}, in standard errors"
    )));
    Ok(())
}

/// Terminal values of the scaled chain at scale `n`.
fn chain_sample(ctx: &Context, s: &HeavyTrafficSchedule, seed: u64) -> Result<Vec<f64>, RunError> {
    let (t, x0, reps) = (ctx.spec.t, ctx.spec.x0, ctx.sizes.reps);
    let values = match ctx.spec.sampler {
        SamplerKind::Table => run_scaled(&s.kernel(), &scaled_table(s)?, t, x0, reps, seed)?,
        SamplerKind::BusyPeriod => {
            let sampler = BusyPeriodSampler::new(s.lambda_n(), *s.dist())?;
            run_scaled(&s.kernel(), &sampler, t, x0, reps, seed)?
        }
    };
    Ok(values)
}

/// KS distance of a terminal sample from the law of `max(x0 - t/λ, Z_t)`.
fn limit_ks(cdf: &LimitCdf, sample: Vec<f64>, t: f64, x0: f64) -> Result<f64, RunError> {
    if t == 0.0 {
        return Ok(if sample.iter().all(|&v| v == x0) { 0.0 } else { 1.0 });
    }
    let floor = x0 - t / cdf.lambda();
    let e = EmpiricalDistribution::new(sample)?;
    Ok(ks_distance(&e, |x| if x < floor { 0.0 } else { cdf.phi(t, x) }))
}

pub(crate) fn simulate_chain(ctx: &mut Context) -> Result<(), RunError> {
    let n = *ctx.spec.n_grid.last().expect("validated");
    let s = schedule(&ctx.spec.dist(), ctx.spec.gamma, n)?;
    let values = chain_sample(ctx, &s, derive_seed(ctx.spec.seed, 20))?;
    let mut t = Table::new(&["rep", "terminal_value"]);
    for (r, &v) in values.iter().enumerate() {
        t.push(row![r, v]);
    }
    ctx.emit("chain.csv", &t)?;
    let cdf = ctx.limit()?;
    let ks = limit_ks(&cdf, values, ctx.spec.t, ctx.spec.x0)?;
    ctx.ks_check("ks_limit_law", ks, ctx.tol.ks_limit_law, FULL_REPS, ctx.sizes.reps);
    Ok(())
}

pub(crate) fn theorem1(ctx: &mut Context) -> Result<(), RunError> {
    let dist = ctx.spec.dist();
    let k = KappaFunction::build(KappaParams::new(&dist, ctx.spec.gamma)?)?;
    let ys = ctx.spec.y_grid.clone();
    let bound = (2f64.powf(2.0 / ctx.spec.nu) * dist.mean()).max(1.0);
    let mut t = Table::new(&["n", "y", "n_mbar_ny", "kappa_over_y", "abs_err"]);
    let mut errors = vec![Vec::new(); ys.len()];
    let mut relative = vec![0.0; ys.len()];
    let mut in_bounds = true;
    for &n in &ctx.spec.n_grid {
        let s = schedule(&dist, ctx.spec.gamma, n)?;
        let probe = scaled_max_cdf_probe(&s, &ys)?;
        for (i, (&p, &y)) in probe.iter().zip(&ys).enumerate() {
            let target = k.value(y) / y;
            let err = (p - target).abs();
            in_bounds &= p > 0.0 && p <= bound;
            errors[i].push(err);
            relative[i] = err / target;
            t.push(row![n, y, p, target, err]);
        }
    }
    ctx.emit("theorem1.csv", &t)?;
    let monotone = errors.iter().all(|e| strictly_decreasing(e));
    let detail = errors.iter().map(|e| format!("[{}]", join(e))).collect::<Vec<_>>().join(" ");
    ctx.check(Check::flag("error_decreasing", monotone, detail));
    let worst = relative.iter().cloned().fold(0.0, f64::max);
    ctx.check(Check::at_most("final_relative_error", worst, ctx.tol.scaled_tail_relative));
    ctx.check(Check::flag("bounds", in_bounds, format!("0 < n m̄(ny) <= {bound:.4}")));
    Ok(())
}

pub(crate) fn theorem2(ctx: &mut Context) -> Result<(), RunError> {
    let cdf = ctx.limit()?;
    let mut t = Table::new(&["n", "ks", "ks_floor"]);
    let mut ks_values = Vec::new();
    for (i, &n) in ctx.spec.n_grid.iter().enumerate() {
        let s = schedule(&ctx.spec.dist(), ctx.spec.gamma, n)?;
        let values = chain_sample(ctx, &s, derive_seed(ctx.spec.seed, 30 + i as u64))?;
        let ks = limit_ks(&cdf, values, ctx.spec.t, ctx.spec.x0)?;
        // X_n(t) >= b/n while Φ(t, ·) has mass below b/n
        let floor = if ctx.spec.t > 0.0 { cdf.phi(ctx.spec.t, ctx.spec.b / n) } else { 0.0 };
        t.push(row![n, ks, floor]);
        ks_values.push(ks);
    }
    ctx.emit("theorem2.csv", &t)?;
    let last = *ks_values.last().expect("validated");
    ctx.ks_check("ks_final", last, ctx.tol.ks_limit_law, FULL_REPS, ctx.sizes.reps);
    ctx.check(Check::flag("ks_decreasing", strictly_decreasing(&ks_values), join(&ks_values)));
    if cdf.kappa().is_constant() {
        ctx.note("gamma = 0: compared against (1 + t/(x λ))^(-λ κ)");
    }
    Ok(())
}

pub(crate) fn steady_state(ctx: &mut Context) -> Result<(), RunError> {
    let m = fixed_table(ctx)?;
    let law = SteadyStateLaw::new(m.clone())?;
    let lambda = ctx.spec.lambda();
    let xs = long_run(
        &Kernel::unscaled(lambda),
        &m,
        0.0,
        ctx.sizes.burn_in,
        ctx.sizes.steps,
        derive_seed(ctx.spec.seed, 40),
    )?;
    let half = xs.len() / 2;
    let first = EmpiricalDistribution::new(xs[..half.max(1)].to_vec())?;
    let second = EmpiricalDistribution::new(xs[half.min(xs.len() - 1)..].to_vec())?;
    let e = EmpiricalDistribution::new(xs)?;
    let mut t = Table::new(&["w", "ecdf", "cdf"]);
    for w in log_space(ctx.spec.b, ctx.spec.b * 1e6, 121) {
        t.push(row![w, e.cdf(w), law.cdf(w)]);
    }
    ctx.emit("steady_state.csv", &t)?;
    let steps = ctx.sizes.steps;
    let ks = ks_distance(&e, |w| law.cdf(w));
    ctx.ks_check("ks_steady_state", ks, ctx.tol.ks_steady_state, FULL_STEPS, steps);
    let split = ks_two_sample(&first, &second);
    ctx.ks_check("burn_in_split_half", split, ctx.tol.split_half, FULL_STEPS, steps);

    let cdf = ctx.limit()?;
    if cdf.kappa().is_constant() {
        ctx.note("gamma = 0: the stationary limit is degenerate; interchange check skipped");
        return Ok(());
    }
    let xg = log_space(0.01, 100.0, 41);
    let mut s = Table::new(&["n", "sup_error"]);
    let mut errs = Vec::new();
    for &n in &ctx.spec.n_grid {
        let sch = schedule(&ctx.spec.dist(), ctx.spec.gamma, n)?;
        let b = ctx.spec.b;
        let mn = tabulate(
            sch.lambda_n(),
            &ctx.spec.dist(),
            &GridSpec::Log {
                lo: b,
                hi: b * n * 1e8,
                points: 4096,
            },
        )?;
        let err = steady_state_interchange_error(&sch, &SteadyStateLaw::new(mn)?, &cdf, &xg)?;
        s.push(row![n, err]);
        errs.push(err);
    }
    ctx.emit("interchange.csv", &s)?;
    ctx.check(Check::flag("interchange_decreasing", strictly_decreasing(&errs), join(&errs)));
    Ok(())
}

pub(crate) fn verify(ctx: &mut Context) -> Result<(), RunError> {
    let cdf = ctx.limit()?;
    let f = Bump::new(ctx.spec.c)?;
    let c = ctx.spec.c;
    for &name in &ctx.spec.checks.clone() {
        match name {
            CheckName::Semigroup => {
                let xs: Vec<f64> = (0..9).map(|i| 2.0 * c * i as f64 / 8.0).collect();
                let err = semigroup_property(&cdf, 0.5, 0.5, &f, &xs)?;
                ctx.check(Check::at_most("semigroup", err, ctx.tol.semigroup_property));
            }
            CheckName::Generator => verify_generator(ctx, &cdf, &f)?,
            CheckName::DiscreteGenerator => verify_discrete(ctx, &cdf, &f)?,
            CheckName::MaxConvolution => {
                let g: Vec<f64> = (0..10).map(|i| 0.1 + 1.9 * i as f64 / 9.0).collect();
                let xs: Vec<f64> = (0..10).map(|i| 0.05 + 4.95 * i as f64 / 9.0).collect();
                let err = max_convolution_identity_error(&cdf, &g, &g, &xs);
                ctx.check(Check::at_most("max_convolution_identity", err, ctx.tol.max_convolution_identity));
                let ks = max_convolution_mc(&cdf, 0.5, 1.0, ctx.sizes.draws, derive_seed(ctx.spec.seed, 50))?;
                let (tol, draws) = (ctx.tol.ks_max_convolution, ctx.sizes.draws);
                ctx.ks_check("max_convolution_mc", ks, tol, FULL_DRAWS, draws);
            }
            CheckName::Iterates => {
                for (i, &n) in ctx.spec.n_grid.iter().enumerate() {
                    let s = schedule(&ctx.spec.dist(), ctx.spec.gamma, n)?;
                    let m = scaled_table(&s)?;
                    let seed = derive_seed(ctx.spec.seed, 60 + i as u64);
                    let r = iterate_representation_check(&s.kernel(), &m, &f, ctx.spec.x0, ctx.spec.t, ctx.sizes.reps, seed)?;
                    let (tol, reps) = (ctx.tol.ks_iterates, ctx.sizes.reps);
                    ctx.ks_check(&format!("iterates_ks_n{n}"), r.ks, tol, FULL_REPS, reps);
                    ctx.check(
                        Check::at_most(&format!("iterates_mean_n{n}"), r.z_score(), ctx.tol.mc_sigmas)
                            .with_detail("in standard errors"),
                    );
                }
            }
        }
    }
    Ok(())
}

fn verify_generator(ctx: &mut Context, cdf: &LimitCdf, f: &Bump) -> Result<(), RunError> {
    let xs = ctx.spec.x_grid();
    let hs = ctx.spec.h_grid.clone();
    let rows = generator_limit_check(cdf, f, &xs, &hs)?;
    let mut t = Table::new(&["x", "h", "quotient", "generator", "error"]);
    for r in &rows {
        t.push(row![r.x, r.h, r.quotient, r.generator, r.error]);
    }
    ctx.emit("generator.csv", &t)?;
    let mut monotone = true;
    let mut worst_order = f64::INFINITY;
    let mut orders = Vec::new();
    for chunk in rows.chunks(hs.len()) {
        let e: Vec<f64> = chunk.iter().map(|r| r.error).collect();
        monotone &= strictly_decreasing(&e);
        if hs.len() > 1 {
            let order = (e[0] / e[e.len() - 1]).ln() / (hs[0] / hs[hs.len() - 1]).ln();
            worst_order = worst_order.min(order);
            orders.push(format!("x={}: {order:.3}", chunk[0].x));
        }
    }
    ctx.check(Check::flag("generator_decreasing", monotone, ""));
    ctx.check(Check::at_least("generator_order", worst_order, ctx.tol.generator_order).with_detail(orders.join(", ")));
    Ok(())
}

fn verify_discrete(ctx: &mut Context, cdf: &LimitCdf, f: &Bump) -> Result<(), RunError> {
    let xs = ctx.spec.x_grid();
    let limit: Vec<f64> = xs
        .iter()
        .map(|&x| generator_apply(cdf.kappa(), f, x))
        .collect::<Result<_, _>>()?;
    let mut t = Table::new(&["n", "x", "a_n", "a_hat", "abs_err"]);
    let mut errors = vec![Vec::new(); xs.len()];
    for &n in &ctx.spec.n_grid {
        let s = schedule(&ctx.spec.dist(), ctx.spec.gamma, n)?;
        let m = scaled_table(&s)?;
        for (i, &x) in xs.iter().enumerate() {
            let a = discrete_generator(&s, &m, f, x)?;
            let err = (a - limit[i]).abs();
            errors[i].push(err);
            t.push(row![n, x, a, limit[i], err]);
        }
    }
    ctx.emit("discrete_generator.csv", &t)?;
    let monotone = errors.iter().all(|e| strictly_decreasing(e));
    let detail = errors.iter().map(|e| format!("[{}]", join(e))).collect::<Vec<_>>().join(" ");
    ctx.check(Check::flag("discrete_generator_decreasing", monotone, detail));
    Ok(())
}

