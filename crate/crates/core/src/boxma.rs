//! The law of the largest service time in an M/G/1 busy period.
//!
//! For arrival rate `λ` and service law `F` with `ρ = λ E V ≤ 1`, the CDF
//! `m(w)` of the busy-period maximum is the unique root in [0, 1] of
//!
//! ```text
//! m = ∫₀ʷ exp(-λ t (1 - m)) dF(t).
//! ```
//!
//! The solver works with the tail `m̄ = 1 - m`, which stays accurate when
//! `m̄` is far below machine epsilon relative to 1. Tables are interpolated
//! linearly in `(ln w, ln m̄)` and extended past the last node with the
//! slope of the final segment.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::heavytail::ServiceDistribution;
use crate::quad::{GaussLegendre, Integrator};
use crate::rng::{open_unit, SimRng};
use crate::roots::{brent_try, RootTolerance};

/// Slack allowed on `ρ <= 1` for rates derived as `1 / mean`.
const RHO_SLACK: f64 = 1e-12;

fn check_rate(lambda: f64, dist: &ServiceDistribution) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain("lambda", lambda, "arrival rate must be positive and finite"));
    }
    let rho = lambda * dist.mean();
    if rho > 1.0 + RHO_SLACK {
        return Err(Error::Unstable { rho });
    }
    Ok(rho)
}

/// Tail `m̄(w) = P(M > w)` of the busy-period maximum.
pub fn solve_tail_at(lambda: f64, dist: &ServiceDistribution, w: f64) -> Result<f64> {
    check_rate(lambda, dist)?;
    if !(w >= 0.0 && w.is_finite()) {
        return Err(domain("w", w, "abscissa must be finite and >= 0"));
    }
    let (nu, b) = (dist.nu(), dist.scale());
    if w <= b {
        return Ok(1.0);
    }
    let span = (w / b).ln();
    let tail_w = dist.tail(w);
    let quad = Integrator::new(1e-16, 1e-13);
    // G(x) = F̄(w) + ∫_b^w (1 - e^{-λ x t}) dF(t) - x, concave and
    // decreasing from G(0) = F̄(w) > 0 to G(1) < 0.
    let g = |x: f64| -> Result<f64> {
        let s = lambda * x * b;
        let integrand = |u: f64| -(-s * u.exp()).exp_m1() * nu * (-nu * u).exp();
        let j = quad.integrate(integrand, 0.0, span)?.value;
        Ok(tail_w + j - x)
    };
    let tol = RootTolerance {
        x_abs: 0.0,
        max_iter: 500,
    };
    let root = brent_try(g, 0.0, 1.0, tol)?;
    Ok(root.clamp(0.0, 1.0))
}

/// `m(w) = P(M <= w)`.
pub fn solve_m_at(lambda: f64, dist: &ServiceDistribution, w: f64) -> Result<f64> {
    Ok(1.0 - solve_tail_at(lambda, dist, w)?)
}

/// Residual `∫₀ʷ exp(-λ t m̄) dF(t) - (1 - m̄)` evaluated with a composite
/// Gauss-Legendre rule, independently of the solver's adaptive integrator.
pub fn fixed_point_residual(lambda: f64, dist: &ServiceDistribution, w: f64, tail: f64) -> f64 {
    let (nu, b) = (dist.nu(), dist.scale());
    let m = 1.0 - tail;
    if w <= b {
        return -m;
    }
    let span = (w / b).ln();
    let panels = ((span / 0.1).ceil() as usize).max(4);
    let s = lambda * tail * b;
    let integral = GaussLegendre::standard().composite(
        |u: f64| nu * (-nu * u - s * u.exp()).exp(),
        0.0,
        span,
        panels,
    );
    integral - m
}

/// Abscissae for [`tabulate`].
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `points` log-spaced values on `[lo, hi]`.
    Log { lo: f64, hi: f64, points: usize },
    Explicit(Vec<f64>),
}

impl GridSpec {
    /// 512 log-spaced points on `[b, 10⁴ b]`.
    pub fn default_for(dist: &ServiceDistribution) -> Self {
        GridSpec::Log {
            lo: dist.scale(),
            hi: 1e4 * dist.scale(),
            points: 512,
        }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        let pts = match self {
            GridSpec::Log { lo, hi, points } => {
                if !(*lo > 0.0 && hi >= lo && hi.is_finite()) || *points == 0 {
                    return Err(domain("grid", *lo, "log grid needs 0 < lo <= hi and points >= 1"));
                }
                log_space(*lo, *hi, *points)
            }
            GridSpec::Explicit(v) => v.clone(),
        };
        if pts.is_empty() {
            return Err(domain("grid", 0.0, "grid must not be empty"));
        }
        if let Some(w) = pts.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(domain("grid", w[1], "grid must be strictly increasing"));
        }
        if let Some(&w) = pts.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(domain("grid", w, "grid points must be finite and >= 0"));
        }
        Ok(pts)
    }
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (points - 1) as f64;
    (0..points)
        .map(|i| match i {
            0 => lo,
            i if i == points - 1 => hi,
            i => (a + step * i as f64).exp(),
        })
        .collect()
}

/// Tabulated busy-period maximum law for a given `(λ, F)`.
#[derive(Debug, Clone)]
pub struct MaxServiceCdf {
    lambda: f64,
    dist: ServiceDistribution,
    grid: Vec<f64>,
    tails: Vec<f64>,
    // interpolation knots in (ln w, ln m̄), starting at w = b
    log_w: Vec<f64>,
    log_tail: Vec<f64>,
    tail_exponent: f64,
}

/// Solves the fixed point at every grid point.
pub fn tabulate(lambda: f64, dist: &ServiceDistribution, grid: &GridSpec) -> Result<MaxServiceCdf> {
    check_rate(lambda, dist)?;
    let grid = grid.points()?;
    let solved: Result<Vec<f64>> = grid
        .par_iter()
        .map(|&w| {
            solve_tail_at(lambda, dist, w).map_err(|e| Error::Tabulation {
                w,
                source: Box::new(e),
            })
        })
        .collect();
    let mut tails = solved?;
    // Round-off can only break monotonicity at the last digit.
    for i in 1..tails.len() {
        tails[i] = tails[i].min(tails[i - 1]);
    }
    Ok(MaxServiceCdf::from_parts(lambda, *dist, grid, tails))
}

impl MaxServiceCdf {
    fn from_parts(lambda: f64, dist: ServiceDistribution, grid: Vec<f64>, tails: Vec<f64>) -> Self {
        let b = dist.scale();
        let mut log_w = vec![b.ln()];
        let mut log_tail = vec![0.0];
        for (&w, &t) in grid.iter().zip(&tails) {
            if w > b {
                log_w.push(w.ln());
                log_tail.push(t.max(f64::MIN_POSITIVE).ln());
            }
        }
        let g = log_w.len();
        let fitted = if g >= 2 {
            -(log_tail[g - 1] - log_tail[g - 2]) / (log_w[g - 1] - log_w[g - 2])
        } else {
            f64::NAN
        };
        let tail_exponent = if fitted > 0.0 { fitted } else { dist.nu() };
        MaxServiceCdf {
            lambda,
            dist,
            grid,
            tails,
            log_w,
            log_tail,
            tail_exponent,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dist(&self) -> &ServiceDistribution {
        &self.dist
    }

    pub fn rho(&self) -> f64 {
        self.lambda * self.dist.mean()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Tabulated `m̄(w_i)`.
    pub fn tails(&self) -> &[f64] {
        &self.tails
    }

    /// Tabulated `m(w_i)`.
    pub fn values(&self) -> Vec<f64> {
        self.tails.iter().map(|t| 1.0 - t).collect()
    }

    /// Decay exponent used beyond the last node.
    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    /// Independently recomputed fixed-point residual at every node.
    pub fn residuals(&self) -> Vec<f64> {
        self.grid
            .par_iter()
            .zip(self.tails.par_iter())
            .map(|(&w, &t)| fixed_point_residual(self.lambda, &self.dist, w, t))
            .collect()
    }

    /// Interpolated `m̄(w)`.
    pub fn tail(&self, w: f64) -> f64 {
        if !(w >= self.dist.scale()) {
            return 1.0;
        }
        let lw = w.ln();
        let g = self.log_w.len() - 1;
        if lw >= self.log_w[g] {
            return (self.log_tail[g] - self.tail_exponent * (lw - self.log_w[g])).exp();
        }
        let i = self.log_w.partition_point(|&x| x <= lw) - 1;
        let frac = (lw - self.log_w[i]) / (self.log_w[i + 1] - self.log_w[i]);
        (self.log_tail[i] + frac * (self.log_tail[i + 1] - self.log_tail[i])).exp()
    }

    /// Interpolated `m(w)`.
    pub fn cdf(&self, w: f64) -> f64 {
        1.0 - self.tail(w)
    }

    /// The `w` with `m̄(w) = q`, for `q` in (0, 1].
    pub fn tail_quantile(&self, q: f64) -> f64 {
        let b = self.dist.scale();
        if !(q < 1.0) {
            return b;
        }
        let lq = q.ln();
        let g = self.log_w.len() - 1;
        if lq <= self.log_tail[g] {
            return (self.log_w[g] + (self.log_tail[g] - lq) / self.tail_exponent).exp();
        }
        // first knot strictly below the target; knot 0 has ln m̄ = 0 > lq
        let i = self.log_tail.partition_point(|&t| t >= lq);
        let (t0, t1) = (self.log_tail[i - 1], self.log_tail[i]);
        let frac = (lq - t0) / (t1 - t0);
        (self.log_w[i - 1] + frac * (self.log_w[i] - self.log_w[i - 1])).exp()
    }

    /// Inverse of [`MaxServiceCdf::cdf`] at `u` in [0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        self.tail_quantile(1.0 - u)
    }

    /// Inverse-CDF draw of the busy-period maximum.
    pub fn sample_max(&self, rng: &mut SimRng) -> f64 {
        self.tail_quantile(open_unit(rng))
    }
}

/// Steady-state law of the embedded Q2 workload for `ρ < 1`:
/// `P(R <= w) = m(w) exp(-λ ∫_w^∞ m̄(y) dy)`.
#[derive(Debug, Clone)]
pub struct SteadyStateLaw {
    maxcdf: MaxServiceCdf,
    // ∫_{w_i}^∞ m̄ at each interpolation knot
    knot_integrals: Vec<f64>,
}

/// `∫₀^L e^{c u} du` without cancellation.
fn exp_integral(c: f64, len: f64) -> f64 {
    let x = c * len;
    if x == 0.0 {
        len
    } else {
        len * x.exp_m1() / x
    }
}

impl SteadyStateLaw {
    pub fn new(maxcdf: MaxServiceCdf) -> Result<Self> {
        let rho = maxcdf.rho();
        if !(rho < 1.0 - RHO_SLACK) {
            return Err(domain("rho", rho, "a steady state exists only for rho < 1"));
        }
        let alpha = maxcdf.tail_exponent;
        if !(alpha > 1.0) {
            return Err(domain(
                "tail_exponent",
                alpha,
                "grid ends before the tail decays faster than 1/w; extend the grid",
            ));
        }
        let (lw, lt) = (&maxcdf.log_w, &maxcdf.log_tail);
        let g = lw.len() - 1;
        let mut knot_integrals = vec![0.0; g + 1];
        knot_integrals[g] = (lt[g] + lw[g]).exp() / (alpha - 1.0);
        for i in (0..g).rev() {
            let slope = (lt[i + 1] - lt[i]) / (lw[i + 1] - lw[i]);
            // ∫ m̄_i (y/w_i)^slope dy over [w_i, w_{i+1}], with y = w_i e^u
            let piece = (lt[i] + lw[i]).exp() * exp_integral(1.0 + slope, lw[i + 1] - lw[i]);
            knot_integrals[i] = knot_integrals[i + 1] + piece;
        }
        Ok(SteadyStateLaw {
            maxcdf,
            knot_integrals,
        })
    }

    pub fn maxcdf(&self) -> &MaxServiceCdf {
        &self.maxcdf
    }

    /// `∫_w^∞ m̄(y) dy` for the interpolated `m̄`.
    pub fn tail_integral(&self, w: f64) -> f64 {
        let m = &self.maxcdf;
        let b = m.dist.scale();
        if w < b {
            return self.knot_integrals[0] + (b - w);
        }
        let (lw, lt) = (&m.log_w, &m.log_tail);
        let g = lw.len() - 1;
        let x = w.ln();
        if x >= lw[g] {
            return m.tail(w) * w / (m.tail_exponent - 1.0);
        }
        let i = lw.partition_point(|&v| v <= x) - 1;
        let slope = (lt[i + 1] - lt[i]) / (lw[i + 1] - lw[i]);
        let rest = m.tail(w) * w * exp_integral(1.0 + slope, lw[i + 1] - x);
        self.knot_integrals[i + 1] + rest
    }

    pub fn cdf(&self, w: f64) -> f64 {
        if w < self.maxcdf.dist.scale() {
            return 0.0;
        }
        self.maxcdf.cdf(w) * (-self.maxcdf.lambda * self.tail_integral(w)).exp()
    }
}

/// `P(R <= w)` under the steady-state law.
pub fn steady_state_cdf(law: &SteadyStateLaw, w: f64) -> f64 {
    law.cdf(w)
}
