//! The limit function `κ(y)` and the limit law `Φ(t, x)` of the scaled
//! embedded workload.
//!
//! `κ(y)` is the unique positive root of
//!
//! ```text
//! H(κ) = C_ν E[exp(-λ κ T_ν)] - κ γ y^(ν-1) C_ν - (λ κ)^ν
//! ```
//!
//! with `T_ν` standard Pareto. `H` is strictly decreasing with `H(0) = C_ν`,
//! so Brent's method on `[ε, C_ν^(1/ν)/λ]` always converges.
//!
//! For `γ > 0` the function is cached on a wide log grid as a monotone
//! cubic Hermite interpolant of `ln κ` against `ln y`, with node slopes
//! from implicit differentiation of `H`. Cumulative integrals of
//! `κ(e^u) du` are stored per node, so `Φ(t, x)` costs two table lookups.
//! Below the grid `κ` is held constant; above it decays as `y^(1-ν)`.

use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::heavytail::{laplace_unchecked, pareto_laplace, ServiceDistribution, TailConstant};
use crate::quad::{GaussLegendre, Integrator};
use crate::rng::SimRng;
use crate::roots::{brent, RootTolerance};

/// Parameters of the limit equation. The rate is always `1 / E V`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaParams {
    lambda: f64,
    nu: f64,
    gamma: f64,
    c_nu: f64,
}

impl KappaParams {
    pub fn new(dist: &ServiceDistribution, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(domain("gamma", gamma, "heavy-traffic constant must be finite and >= 0"));
        }
        Ok(KappaParams {
            lambda: 1.0 / dist.mean(),
            nu: dist.nu(),
            gamma,
            c_nu: dist.tail_constant().value(),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tail_constant(&self) -> TailConstant {
        TailConstant::new(self.nu).expect("nu validated at construction")
    }
}

/// `(1/λ) C_ν^(1/ν)`, an upper bound for every `κ(y)`.
pub fn kappa_upper_bound(params: &KappaParams) -> f64 {
    params.c_nu.powf(1.0 / params.nu) / params.lambda
}

/// `H(κ)` at `y`.
pub fn kappa_equation(params: &KappaParams, y: f64, kappa: f64) -> f64 {
    let KappaParams {
        lambda,
        nu,
        gamma,
        c_nu,
    } = *params;
    let drift = if gamma == 0.0 { 0.0 } else { gamma * y.powf(nu - 1.0) };
    c_nu * laplace_unchecked(lambda * kappa, nu) - kappa * drift * c_nu - (lambda * kappa).powf(nu)
}

/// `H(κ)` with the checked transform, for residual reporting.
pub fn kappa_residual(params: &KappaParams, y: f64, kappa: f64) -> Result<f64> {
    let KappaParams {
        lambda,
        nu,
        gamma,
        c_nu,
    } = *params;
    let drift = if gamma == 0.0 { 0.0 } else { gamma * y.powf(nu - 1.0) };
    Ok(c_nu * pareto_laplace(lambda * kappa, nu)? - kappa * drift * c_nu - (lambda * kappa).powf(nu))
}

/// The root `κ(y)`.
pub fn solve_kappa(params: &KappaParams, y: f64) -> Result<f64> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(domain("y", y, "argument must be positive and finite"));
    }
    let hi = kappa_upper_bound(params);
    let mut lo = 1e-14;
    let mut h_lo = kappa_equation(params, y, lo);
    while h_lo <= 0.0 && lo > 1e-300 {
        lo *= 1e-3;
        h_lo = kappa_equation(params, y, lo);
    }
    let tol = RootTolerance {
        x_abs: 0.0,
        max_iter: 500,
    };
    let h = |k: f64| kappa_equation(params, y, k);
    crate::roots::brent_with_values(h, lo, hi, h_lo, h(hi), tol)
}

/// `E[T exp(-s T)]` for standard Pareto `T`, i.e. `-L'(s)`.
fn laplace_slope(s: f64, nu: f64) -> f64 {
    const TAIL_EPS: f64 = 1e-14;
    let cut = ((nu / (s * TAIL_EPS)).ln() / s).max(2.0);
    Integrator::new(1e-14, 1e-12)
        .estimate(|u: f64| nu * ((1.0 - nu) * u - s * u.exp()).exp(), 0.0, cut.ln())
        .value
}

/// `d ln κ / d ln y` at a solved point.
fn log_slope(params: &KappaParams, y: f64, kappa: f64) -> f64 {
    let KappaParams {
        lambda,
        nu,
        gamma,
        c_nu,
    } = *params;
    let drift = gamma * y.powf(nu - 1.0);
    let h_kappa = -c_nu * lambda * laplace_slope(lambda * kappa, nu)
        - drift * c_nu
        - nu * lambda.powf(nu) * kappa.powf(nu - 1.0);
    (nu - 1.0) * drift * c_nu / h_kappa
}

/// Log-spaced cache range for [`KappaFunction`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for KappaGrid {
    /// `[1e-12, 1e12]` with 3072 nodes.
    fn default() -> Self {
        KappaGrid {
            lo: 1e-12,
            hi: 1e12,
            points: 3072,
        }
    }
}

#[derive(Debug, Clone)]
struct Table {
    u: Vec<f64>,
    v: Vec<f64>,
    d: Vec<f64>,
    // cum[i] = ∫_{u_0}^{u_i} κ(e^w) dw
    cum: Vec<f64>,
}

fn gl8() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

impl Table {
    fn hermite(&self, i: usize, u: f64) -> f64 {
        let h = self.u[i + 1] - self.u[i];
        let s = (u - self.u[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.v[i]
            + (s3 - 2.0 * s2 + s) * h * self.d[i]
            + (-2.0 * s3 + 3.0 * s2) * self.v[i + 1]
            + (s3 - s2) * h * self.d[i + 1]
    }

    fn segment(&self, u: f64) -> usize {
        (self.u.partition_point(|&x| x <= u) - 1).min(self.u.len() - 2)
    }

    fn piece_integral(&self, i: usize, a: f64, b: f64) -> f64 {
        gl8().integrate(|w| self.hermite(i, w).exp(), a, b)
    }
}

/// `κ(·)` for fixed parameters.
#[derive(Debug, Clone)]
pub struct KappaFunction {
    params: KappaParams,
    constant: Option<f64>,
    table: Option<Table>,
}

impl KappaFunction {
    /// Builds the cache on [`KappaGrid::default`].
    pub fn build(params: KappaParams) -> Result<Self> {
        Self::with_grid(params, KappaGrid::default())
    }

    pub fn with_grid(params: KappaParams, grid: KappaGrid) -> Result<Self> {
        if params.gamma == 0.0 {
            let k = solve_kappa(&params, 1.0)?;
            return Ok(KappaFunction {
                params,
                constant: Some(k),
                table: None,
            });
        }
        if !(grid.lo > 0.0 && grid.hi > grid.lo && grid.hi.is_finite()) || grid.points < 2 {
            return Err(domain("grid", grid.lo, "cache grid needs 0 < lo < hi and >= 2 points"));
        }
        let (a, b) = (grid.lo.ln(), grid.hi.ln());
        let step = (b - a) / (grid.points - 1) as f64;
        let u: Vec<f64> = (0..grid.points).map(|i| a + step * i as f64).collect();
        let solved: Result<Vec<(f64, f64)>> = u
            .par_iter()
            .map(|&ui| {
                let y = ui.exp();
                let k = solve_kappa(&params, y)?;
                Ok((k.ln(), log_slope(&params, y, k)))
            })
            .collect();
        let (v, mut d): (Vec<f64>, Vec<f64>) = solved?.into_iter().unzip();
        // Fritsch-Carlson limiter: keeps the interpolant monotone.
        for i in 0..u.len() - 1 {
            let delta = (v[i + 1] - v[i]) / (u[i + 1] - u[i]);
            if delta == 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
                continue;
            }
            let (mut al, mut be) = (d[i] / delta, d[i + 1] / delta);
            if al < 0.0 {
                d[i] = 0.0;
                al = 0.0;
            }
            if be < 0.0 {
                d[i + 1] = 0.0;
                be = 0.0;
            }
            let r = al * al + be * be;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                d[i] = tau * al * delta;
                d[i + 1] = tau * be * delta;
            }
        }
        let mut table = Table {
            u,
            v,
            d,
            cum: Vec::new(),
        };
        let mut cum = vec![0.0; table.u.len()];
        for i in 0..table.u.len() - 1 {
            cum[i + 1] = cum[i] + table.piece_integral(i, table.u[i], table.u[i + 1]);
        }
        table.cum = cum;
        Ok(KappaFunction {
            params,
            constant: None,
            table: Some(table),
        })
    }

    pub fn params(&self) -> &KappaParams {
        &self.params
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }

    /// Cache nodes `(y_i, κ(y_i))`; a single node at `y = 1` when constant.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        match (&self.constant, &self.table) {
            (Some(k), _) => vec![(1.0, *k)],
            (None, Some(t)) => t.u.iter().zip(&t.v).map(|(u, v)| (u.exp(), v.exp())).collect(),
            _ => unreachable!(),
        }
    }

    /// `κ(y)`: interpolated on the cache, solved afresh outside it.
    pub fn value(&self, y: f64) -> f64 {
        if let Some(k) = self.constant {
            return k;
        }
        let t = self.table.as_ref().expect("tabulated when gamma > 0");
        let u = y.ln();
        if u < t.u[0] || u > t.u[t.u.len() - 1] || !u.is_finite() {
            return solve_kappa(&self.params, y).expect("kappa root is always bracketed");
        }
        t.hermite(t.segment(u), u).exp()
    }

    /// The integrand model behind [`KappaFunction::log_integral`]: the
    /// interpolant on the cache, constant below, `y^(1-ν)` above.
    pub fn model(&self, y: f64) -> f64 {
        if let Some(k) = self.constant {
            return k;
        }
        let t = self.table.as_ref().expect("tabulated when gamma > 0");
        let u = y.ln();
        let g = t.u.len() - 1;
        if u <= t.u[0] {
            t.v[0].exp()
        } else if u >= t.u[g] {
            (t.v[g] + (1.0 - self.params.nu) * (u - t.u[g])).exp()
        } else {
            t.hermite(t.segment(u), u).exp()
        }
    }

    // ∫_{u_0}^{u} κ(e^w) dw, finite for u = +∞ when γ > 0
    fn antiderivative(&self, t: &Table, u: f64) -> f64 {
        let g = t.u.len() - 1;
        if u <= t.u[0] {
            return t.v[0].exp() * (u - t.u[0]);
        }
        if u >= t.u[g] {
            let k = t.v[g].exp();
            let p = self.params.nu - 1.0;
            let rest = if u == f64::INFINITY {
                k / p
            } else {
                -k * (-p * (u - t.u[g])).exp_m1() / p
            };
            return t.cum[g] + rest;
        }
        let i = t.segment(u);
        t.cum[i] + t.piece_integral(i, t.u[i], u)
    }

    /// `∫_{x1}^{x2} κ(y)/y dy` for `0 < x1 <= x2 <= ∞`.
    pub fn log_integral(&self, x1: f64, x2: f64) -> f64 {
        if x2 <= x1 {
            return 0.0;
        }
        if let Some(k) = self.constant {
            return if x2 == f64::INFINITY {
                f64::INFINITY
            } else {
                k * (x2 / x1).ln()
            };
        }
        let t = self.table.as_ref().expect("tabulated when gamma > 0");
        let (u1, u2) = (x1.ln(), x2.ln());
        // Short intervals inside one cell: integrate directly.
        if u2.is_finite() && u1 >= t.u[0] && u2 <= t.u[t.u.len() - 1] {
            let i = t.segment(u1);
            if u2 <= t.u[i + 1] {
                return t.piece_integral(i, u1, u2);
            }
        }
        self.antiderivative(t, u2) - self.antiderivative(t, u1)
    }

    /// Adaptive-quadrature evaluation of the same integral over a finite
    /// range, using [`KappaFunction::value`] in `u = ln y`.
    pub fn log_integral_by_quadrature(&self, x1: f64, x2: f64) -> Result<f64> {
        let est = Integrator::new(1e-13, 1e-13).integrate(|u: f64| self.value(u.exp()), x1.ln(), x2.ln())?;
        Ok(est.value)
    }
}

/// Least-squares slope of `ln κ` against `ln y` on `points` log-spaced
/// values in `[y_lo, y_hi]`.
pub fn regular_variation_exponent_with(
    kappa: &KappaFunction,
    y_lo: f64,
    y_hi: f64,
    points: usize,
) -> Result<f64> {
    if kappa.params.gamma == 0.0 {
        return Err(domain("gamma", 0.0, "kappa is constant when gamma = 0"));
    }
    if !(y_lo > 0.0 && y_hi / y_lo >= 100.0 && y_hi.is_finite()) {
        return Err(domain("y_hi / y_lo", y_hi / y_lo, "fit range must span at least two decades"));
    }
    if points < 2 {
        return Err(domain("points", points as f64, "need at least two points"));
    }
    let (a, b) = (y_lo.ln(), y_hi.ln());
    let xs: Vec<f64> = (0..points)
        .map(|i| a + (b - a) * i as f64 / (points - 1) as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|x| kappa.value(x.exp()).ln()).collect();
    let n = points as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// [`regular_variation_exponent_with`] on 33 points.
pub fn regular_variation_exponent(kappa: &KappaFunction, y_lo: f64, y_hi: f64) -> Result<f64> {
    regular_variation_exponent_with(kappa, y_lo, y_hi, 33)
}

/// `Φ(∞, x)` and whether the defining integral diverged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiInfinity {
    pub value: f64,
    pub divergent: bool,
}

/// The limit CDFs `Φ(t, ·)` built on a solved `κ`.
#[derive(Debug, Clone)]
pub struct LimitCdf {
    kappa: KappaFunction,
}

impl LimitCdf {
    pub fn new(kappa: KappaFunction) -> Self {
        LimitCdf { kappa }
    }

    pub fn kappa(&self) -> &KappaFunction {
        &self.kappa
    }

    pub fn lambda(&self) -> f64 {
        self.kappa.params.lambda
    }

    /// `Φ(t, x)`.
    pub fn phi(&self, t: f64, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if t <= 0.0 {
            return 1.0;
        }
        if x == 0.0 {
            return 0.0;
        }
        let lambda = self.lambda();
        if let Some(k) = self.kappa.constant {
            return (-lambda * k * (t / (x * lambda)).ln_1p()).exp();
        }
        (-lambda * self.kappa.log_integral(x, x + t / lambda)).exp()
    }

    /// `Φ(t, x)` through the integral form, for either sign of `γ`.
    pub fn phi_by_quadrature(&self, t: f64, x: f64) -> Result<f64> {
        if x <= 0.0 || t <= 0.0 {
            return Ok(self.phi(t, x));
        }
        let lambda = self.lambda();
        let e = self.kappa.log_integral_by_quadrature(x, x + t / lambda)?;
        Ok((-lambda * e).exp())
    }

    /// `∂Φ(t, x)/∂x` for `t, x > 0`.
    pub fn density(&self, t: f64, x: f64) -> f64 {
        if !(x > 0.0 && t > 0.0) {
            return 0.0;
        }
        let lambda = self.lambda();
        let far = x + t / lambda;
        let rate = self.kappa.model(x) / x - self.kappa.model(far) / far;
        self.phi(t, x) * lambda * rate
    }

    /// `exp(-λ ∫_x^∞ κ(y)/y dy)`; zero and flagged divergent when `γ = 0`.
    pub fn phi_infinity(&self, x: f64) -> PhiInfinity {
        if self.kappa.is_constant() {
            return PhiInfinity {
                value: 0.0,
                divergent: true,
            };
        }
        let value = if x <= 0.0 {
            0.0
        } else {
            (-self.lambda() * self.kappa.log_integral(x, f64::INFINITY)).exp()
        };
        PhiInfinity {
            value,
            divergent: false,
        }
    }

    /// The `x` with `Φ(t, x) = u`, by Brent's method in `ln x`.
    pub fn quantile(&self, t: f64, u: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(domain("t", t, "quantiles need t > 0"));
        }
        if !(0.0..1.0).contains(&u) {
            return Err(domain("u", u, "probability level must lie in [0, 1)"));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        let f = |lx: f64| self.phi(t, lx.exp()) - u;
        let tol = RootTolerance {
            x_abs: 1e-13,
            max_iter: 500,
        };
        let (lo, hi) = (-700.0, 700.0);
        match brent(f, lo, hi, tol) {
            Ok(lx) => Ok(lx.exp()),
            Err(Error::NoBracket { .. }) if f(lo) > 0.0 => Ok(lo.exp()),
            Err(e) => Err(e),
        }
    }

    /// One draw of `Z_t`.
    pub fn sample_z(&self, t: f64, rng: &mut SimRng) -> Result<f64> {
        let u: f64 = rng.random();
        self.quantile(t, u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(gamma: f64) -> KappaParams {
        KappaParams::new(&ServiceDistribution::pareto(1.5, 1.0).unwrap(), gamma).unwrap()
    }

    #[test]
    fn upper_bound_closed_form() {
        let expected = 3.0 * (1.0 / (2.0 * std::f64::consts::PI.sqrt())).powf(2.0 / 3.0);
        assert_relative_eq!(kappa_upper_bound(&params(0.0)), expected, max_relative = 1e-13);
    }

    #[test]
    fn equation_endpoints() {
        let p = params(0.5);
        let c = p.tail_constant().value();
        assert_relative_eq!(kappa_equation(&p, 1.0, 0.0), c, max_relative = 1e-14);
        assert!(kappa_equation(&p, 1.0, kappa_upper_bound(&p)) < 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = ServiceDistribution::pareto(1.5, 1.0).unwrap();
        assert!(KappaParams::new(&d, -0.1).is_err());
        assert!(solve_kappa(&params(0.5), 0.0).is_err());
        let k = KappaFunction::build(params(0.0)).unwrap();
        assert!(regular_variation_exponent(&k, 1e3, 1e5).is_err());
    }

    #[test]
    fn boundary_conventions() {
        let cdf = LimitCdf::new(KappaFunction::build(params(0.0)).unwrap());
        assert_eq!(cdf.phi(0.0, 2.0), 1.0);
        assert_eq!(cdf.phi(0.0, 0.0), 1.0);
        assert_eq!(cdf.phi(1.0, 0.0), 0.0);
        assert_eq!(cdf.phi(1.0, -1.0), 0.0);
        assert_eq!(cdf.quantile(1.0, 0.0).unwrap(), 0.0);
        let inf = cdf.phi_infinity(1.0);
        assert!(inf.divergent);
        assert_eq!(inf.value, 0.0);
    }
}
