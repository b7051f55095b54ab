//! The limit semigroup `T(t) f(x) = E f(max(x - t/λ, Z_t))`, its generator,
//! the discrete generators `A_n = n (T_n - I)`, and empirical distribution
//! tools.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::boxma::{MaxServiceCdf, SteadyStateLaw};
use crate::chain::{max_representation_sample, run_scaled, HeavyTrafficSchedule, Kernel, MaxSampler};
use crate::error::{domain, Error, Result};
use crate::kappa::{KappaFunction, LimitCdf};
use crate::quad::Integrator;
use crate::rng::{derive_seed, stream};

/// A `C¹` function supported on `[0, c]` with `|f'(x)| <= a x`.
pub trait TestFunction: Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    /// `c`; the function vanishes on `[c, ∞)`.
    fn support_end(&self) -> f64;
    /// A constant `a` with `|f'(x)| <= a x`.
    fn slope_bound(&self) -> f64;
}

/// `x²(x - c)²/c⁴` on `[0, c]`, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    c: f64,
}

impl Bump {
    pub fn new(c: f64) -> Result<Self> {
        if c > 0.0 && c.is_finite() {
            Ok(Bump { c })
        } else {
            Err(domain("c", c, "support end must be positive and finite"))
        }
    }
}

impl TestFunction for Bump {
    fn value(&self, x: f64) -> f64 {
        if (0.0..self.c).contains(&x) {
            let c2 = self.c * self.c;
            x * x * (x - self.c) * (x - self.c) / (c2 * c2)
        } else {
            0.0
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        if (0.0..self.c).contains(&x) {
            let c2 = self.c * self.c;
            2.0 * x * (x - self.c) * (2.0 * x - self.c) / (c2 * c2)
        } else {
            0.0
        }
    }

    fn support_end(&self) -> f64 {
        self.c
    }

    fn slope_bound(&self) -> f64 {
        // sup |(x - c)(2x - c)| on [0, c] is c², at x = 0
        2.0 / (self.c * self.c)
    }
}

/// The zero function on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Zero;

impl TestFunction for Zero {
    fn value(&self, _: f64) -> f64 {
        0.0
    }

    fn derivative(&self, _: f64) -> f64 {
        0.0
    }

    fn support_end(&self) -> f64 {
        1.0
    }

    fn slope_bound(&self) -> f64 {
        0.0
    }
}

/// Largest `|f'(x)|/x` on a uniform grid of `samples` points in `(0, c]`.
pub fn certify_slope_bound<F: TestFunction + ?Sized>(f: &F, samples: usize) -> f64 {
    let c = f.support_end();
    (1..=samples)
        .map(|i| {
            let x = c * i as f64 / samples as f64;
            f.derivative(x).abs() / x
        })
        .fold(0.0, f64::max)
}

/// Sorted sample with its right-continuous step CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    sorted: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(&bad) = sample.iter().find(|v| v.is_nan()) {
            return Err(domain("sample", bad, "sample values must not be NaN"));
        }
        sample.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { sorted: sample })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }
}

/// `sup_x |F_N(x) - F(x)|` for a continuous CDF `F`. Compare two samples
/// with [`ks_two_sample`].
pub fn ks_distance<F: Fn(f64) -> f64>(sample: &EmpiricalDistribution, cdf: F) -> f64 {
    let n = sample.len() as f64;
    let v = &sample.sorted;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let f = cdf(v[i]);
        d = d.max((j + 1) as f64 / n - f).max(f - i as f64 / n);
        i = j + 1;
    }
    d
}

/// Two-sample statistic `sup_x |F_N(x) - G_M(x)|`.
pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let (x, y) = (&a.sorted, &b.sorted);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

/// Sample mean and its standard error.
pub fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// `∫ g dΦ(t, ·)` over `(a, end]` plus the atom `Φ(t, a) g(a)`, where
/// `a = [x - t/λ]⁺`, integrated in `u = ln y`. For `a = 0` the mass below
/// the point where `Φ(t, ·)` reaches 1e-14 is lumped into the atom.
fn apply_general<G: Fn(f64) -> f64>(
    cdf: &LimitCdf,
    t: f64,
    g: &G,
    end: f64,
    breaks: &[f64],
    x: f64,
    tol: f64,
) -> Result<f64> {
    if t <= 0.0 {
        return Ok(g(x));
    }
    let a = (x - t / cdf.lambda()).max(0.0);
    if a >= end {
        return Ok(0.0);
    }
    let mut lower = a;
    if a == 0.0 {
        lower = 1e-20;
        while cdf.phi(t, lower) > 1e-14 && lower > 1e-280 {
            lower *= 1e-20;
        }
    }
    let head = cdf.phi(t, lower) * g(lower);
    let mut pts = vec![lower.ln()];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&b| b > lower && b < end).collect();
    inner.sort_by(f64::total_cmp);
    pts.extend(inner.iter().map(|b| b.ln()));
    pts.push(end.ln());
    let mut integrand = |u: f64| {
        let y = u.exp();
        g(y) * cdf.density(t, y) * y
    };
    let body = Integrator::new(tol, 1e-12).integrate_with_breaks(&mut integrand, &pts)?;
    Ok(head + body.value)
}

/// `T(t) f(x)`.
pub fn semigroup_apply<F: TestFunction + ?Sized>(cdf: &LimitCdf, t: f64, f: &F, x: f64) -> Result<f64> {
    semigroup_apply_with(cdf, t, f, x, 1e-11)
}

fn semigroup_apply_with<F: TestFunction + ?Sized>(cdf: &LimitCdf, t: f64, f: &F, x: f64, tol: f64) -> Result<f64> {
    if !(t >= 0.0) || !(x >= 0.0) {
        return Err(domain("t, x", t.min(x), "semigroup needs t >= 0 and x >= 0"));
    }
    apply_general(cdf, t, &|y| f.value(y), f.support_end(), &[], x, tol)
}

/// Monte Carlo estimate of `T(t) f(x)` with standard error.
pub fn semigroup_apply_mc<F: TestFunction + ?Sized>(
    cdf: &LimitCdf,
    t: f64,
    f: &F,
    x: f64,
    draws: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let shift = x - t / cdf.lambda();
    let values: Result<Vec<f64>> = (0..draws)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            Ok(f.value(shift.max(cdf.sample_z(t, &mut rng)?)))
        })
        .collect();
    Ok(mean_and_error(&values?))
}

/// `max_x |T(s) T(t) f(x) - T(s + t) f(x)|` over `x_grid`, with the outer
/// operator integrating the inner one numerically.
pub fn semigroup_property<F: TestFunction + ?Sized>(
    cdf: &LimitCdf,
    s: f64,
    t: f64,
    f: &F,
    x_grid: &[f64],
) -> Result<f64> {
    let lambda = cdf.lambda();
    let c = f.support_end();
    let inner = |y: f64| semigroup_apply_with(cdf, t, f, y, 1e-12).unwrap_or(f64::NAN);
    let errors: Result<Vec<f64>> = x_grid
        .par_iter()
        .map(|&x| {
            let nested = apply_general(cdf, s, &inner, c + t / lambda, &[t / lambda, c], x, 1e-10)?;
            let direct = semigroup_apply(cdf, s + t, f, x)?;
            if nested.is_nan() {
                return Err(domain("x", x, "inner semigroup evaluation failed"));
            }
            Ok((nested - direct).abs())
        })
        .collect();
    Ok(errors?.into_iter().fold(0.0, f64::max))
}

/// `Âf(x) = -f'(x)/λ + ∫_x^∞ f'(y) κ(y)/y dy`.
pub fn generator_apply<F: TestFunction + ?Sized>(kappa: &KappaFunction, f: &F, x: f64) -> Result<f64> {
    let c = f.support_end();
    if x >= c {
        return Ok(0.0);
    }
    let lo = x.max(0.0);
    let drift = -f.derivative(x) / kappa.params().lambda();
    let integrand = |y: f64| {
        if y <= 0.0 {
            0.0
        } else {
            f.derivative(y) * kappa.model(y) / y
        }
    };
    let jump = Integrator::new(1e-13, 1e-13).integrate(integrand, lo, c)?.value;
    Ok(drift + jump)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorRow {
    pub x: f64,
    pub h: f64,
    pub quotient: f64,
    pub generator: f64,
    pub error: f64,
}

/// `|(T(h) f(x) - f(x))/h - Âf(x)|` for every `(x, h)`.
pub fn generator_limit_check<F: TestFunction + ?Sized>(
    cdf: &LimitCdf,
    f: &F,
    x_grid: &[f64],
    h_grid: &[f64],
) -> Result<Vec<GeneratorRow>> {
    let pairs: Vec<(f64, f64)> = x_grid
        .iter()
        .flat_map(|&x| h_grid.iter().map(move |&h| (x, h)))
        .collect();
    pairs
        .par_iter()
        .map(|&(x, h)| {
            let generator = generator_apply(cdf.kappa(), f, x)?;
            let quotient = (semigroup_apply_with(cdf, h, f, x, 1e-13)? - f.value(x)) / h;
            Ok(GeneratorRow {
                x,
                h,
                quotient,
                generator,
                error: (quotient - generator).abs(),
            })
        })
        .collect()
}

/// `A_n f(x) = n (E f(max(x - I/n, M/n)) - f(x))` by one-dimensional
/// quadrature against the tabulated `m` at `λ_n`:
///
/// ```text
/// A_n f(x) = ∫_{nx}^{nc} f'(w/n) m̄(w) dw
///          - ∫_0^{nx} f'(x - z/n) e^{-λ_n z} (1 - m̄(nx - z)) dz.
/// ```
pub fn discrete_generator<F: TestFunction + ?Sized>(
    schedule: &HeavyTrafficSchedule,
    m_table: &MaxServiceCdf,
    f: &F,
    x: f64,
) -> Result<f64> {
    let n = schedule.n();
    let lambda_n = schedule.lambda_n();
    if (m_table.lambda() - lambda_n).abs() > 1e-12 * lambda_n {
        return Err(domain("m_table", m_table.lambda(), "table must be solved at lambda_n"));
    }
    if !(x >= 0.0) {
        return Err(domain("x", x, "state must be >= 0"));
    }
    let c = f.support_end();
    let b = m_table.dist().scale();
    let quad = Integrator::new(1e-12, 1e-11);
    let knots: Vec<f64> = std::iter::once(b).chain(m_table.grid().iter().copied()).collect();

    let jump = if x < c {
        let (lo, hi) = (n * x, n * c);
        let mut pts = vec![lo];
        pts.extend(knots.iter().copied().filter(|&w| w > lo && w < hi));
        pts.push(hi);
        let mut g = |w: f64| f.derivative(w / n) * m_table.tail(w);
        quad.integrate_with_breaks(&mut g, &pts)?.value
    } else {
        0.0
    };

    let reach = (n * x).min(45.0 / lambda_n);
    let drift = if reach > 0.0 {
        let top = n * x;
        let mut pts = vec![0.0];
        let mut inner: Vec<f64> = knots
            .iter()
            .map(|&w| top - w)
            .filter(|&z| z > 0.0 && z < reach)
            .collect();
        inner.sort_by(f64::total_cmp);
        pts.extend(inner);
        pts.push(reach);
        let mut g = |z: f64| f.derivative(x - z / n) * (-lambda_n * z).exp() * m_table.cdf(top - z);
        quad.integrate_with_breaks(&mut g, &pts)?.value
    } else {
        0.0
    };
    Ok(jump - drift)
}

/// Monte Carlo `A_n f(x)` with standard error, over `draws` kernel steps.
pub fn discrete_generator_mc<F: TestFunction + ?Sized, S: MaxSampler + ?Sized>(
    kernel: &Kernel,
    sampler: &S,
    f: &F,
    x: f64,
    draws: usize,
    seed: u64,
) -> (f64, f64) {
    let n = kernel.scale;
    let fx = f.value(x);
    let values: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            let e: f64 = rng.sample(Exp1);
            let idle = e / kernel.idle_rate;
            let m = sampler.sample_max(&mut rng);
            n * (f.value((x - idle / n).max(m / n)) - fx)
        })
        .collect();
    mean_and_error(&values)
}

/// Closed-form iterate vs sequential kernel application.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateReport {
    pub ks: f64,
    pub mean_closed: f64,
    pub se_closed: f64,
    pub mean_sequential: f64,
    pub se_sequential: f64,
}

impl IterateReport {
    /// Difference of the two means in combined standard errors.
    pub fn z_score(&self) -> f64 {
        let se = (self.se_closed.powi(2) + self.se_sequential.powi(2)).sqrt();
        if se == 0.0 {
            if self.mean_closed == self.mean_sequential {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean_closed - self.mean_sequential).abs() / se
        }
    }
}

/// Compares independent samples of the unrolled maximum with sequential
/// chain runs from `x` over `[n t]` steps.
pub fn iterate_representation_check<F: TestFunction + ?Sized, S: MaxSampler + ?Sized>(
    kernel: &Kernel,
    sampler: &S,
    f: &F,
    x: f64,
    t: f64,
    reps: usize,
    seed: u64,
) -> Result<IterateReport> {
    let closed = max_representation_sample(kernel, sampler, t, x, reps, derive_seed(seed, 1))?;
    let sequential = run_scaled(kernel, sampler, t, x, reps, derive_seed(seed, 2))?;
    let fc: Vec<f64> = closed.iter().map(|&v| f.value(v)).collect();
    let fs: Vec<f64> = sequential.iter().map(|&v| f.value(v)).collect();
    let (mean_closed, se_closed) = mean_and_error(&fc);
    let (mean_sequential, se_sequential) = mean_and_error(&fs);
    let ks = ks_two_sample(
        &EmpiricalDistribution::new(closed)?,
        &EmpiricalDistribution::new(sequential)?,
    );
    Ok(IterateReport {
        ks,
        mean_closed,
        se_closed,
        mean_sequential,
        se_sequential,
    })
}

/// `max |Φ(t, x + s/λ) Φ(s, x) - Φ(s + t, x)|` over the grid.
pub fn max_convolution_identity_error(cdf: &LimitCdf, s_grid: &[f64], t_grid: &[f64], x_grid: &[f64]) -> f64 {
    let lambda = cdf.lambda();
    s_grid
        .par_iter()
        .map(|&s| {
            let mut worst: f64 = 0.0;
            for &t in t_grid {
                for &x in x_grid {
                    let lhs = cdf.phi(t, x + s / lambda) * cdf.phi(s, x);
                    worst = worst.max((lhs - cdf.phi(s + t, x)).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max)
}

/// Two-sample KS between `max(Z_t - s/λ, Z_s)` and `Z_{s+t}`.
pub fn max_convolution_mc(cdf: &LimitCdf, s: f64, t: f64, draws: usize, seed: u64) -> Result<f64> {
    let lambda = cdf.lambda();
    let (sa, sb) = (derive_seed(seed, 1), derive_seed(seed, 2));
    let combined: Result<Vec<f64>> = (0..draws)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(sa, r as u64);
            let zt = cdf.sample_z(t, &mut rng)?;
            let zs = cdf.sample_z(s, &mut rng)?;
            Ok((zt - s / lambda).max(zs))
        })
        .collect();
    let direct: Result<Vec<f64>> = (0..draws)
        .into_par_iter()
        .map(|r| cdf.sample_z(s + t, &mut stream(sb, r as u64)))
        .collect();
    Ok(ks_two_sample(
        &EmpiricalDistribution::new(combined?)?,
        &EmpiricalDistribution::new(direct?)?,
    ))
}

/// `max_x |P(R⁽ⁿ⁾ <= n x) - Φ(∞, x)|` with the pre-limit steady state
/// taken at `λ_n`.
pub fn steady_state_interchange_error(
    schedule: &HeavyTrafficSchedule,
    law: &SteadyStateLaw,
    cdf: &LimitCdf,
    x_grid: &[f64],
) -> Result<f64> {
    let lambda_n = schedule.lambda_n();
    if (law.maxcdf().lambda() - lambda_n).abs() > 1e-12 * lambda_n {
        return Err(domain("law", law.maxcdf().lambda(), "steady state must be solved at lambda_n"));
    }
    if cdf.kappa().is_constant() {
        return Err(domain("gamma", 0.0, "the stationary limit is degenerate when gamma = 0"));
    }
    let n = schedule.n();
    Ok(x_grid
        .iter()
        .map(|&x| (law.cdf(n * x) - cdf.phi_infinity(x).value).abs())
        .fold(0.0, f64::max))
}
