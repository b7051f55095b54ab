//! Regularly varying service-time laws.
//!
//! The concrete family is Pareto with tail index `nu` in (1, 2) and lower
//! endpoint `scale`: finite mean, infinite variance, and closed forms for
//! the tail and truncated moments.

use rand::Rng;

use crate::error::{domain, Result};
use crate::quad::Integrator;
use crate::rng::open_unit;

/// Smallest admissible tail index. The open interval (1, 2) is kept with
/// an explicit margin because the tail constant vanishes at 1.
pub const NU_MIN: f64 = 1.0 + 1e-3;
pub const NU_MAX: f64 = 2.0 - 1e-3;

/// Family tag for [`ServiceDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailForm {
    Pareto,
}

/// Service-time law with `P(V > t) = (scale / t)^nu` for `t >= scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceDistribution {
    nu: f64,
    scale: f64,
    form: TailForm,
}

pub fn check_nu(nu: f64) -> Result<()> {
    if (NU_MIN..=NU_MAX).contains(&nu) {
        Ok(())
    } else {
        Err(domain("nu", nu, "tail index must lie in [1.001, 1.999]"))
    }
}

impl ServiceDistribution {
    pub fn pareto(nu: f64, scale: f64) -> Result<Self> {
        check_nu(nu)?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(domain("scale", scale, "scale must be positive and finite"));
        }
        Ok(ServiceDistribution {
            nu,
            scale,
            form: TailForm::Pareto,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn form(&self) -> TailForm {
        self.form
    }

    /// `P(V > t)`.
    pub fn tail(&self, t: f64) -> f64 {
        if t < self.scale {
            1.0
        } else {
            (self.scale / t).powf(self.nu)
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.tail(t)
    }

    pub fn density(&self, t: f64) -> f64 {
        if t < self.scale {
            0.0
        } else {
            self.nu / t * (self.scale / t).powf(self.nu)
        }
    }

    pub fn mean(&self) -> f64 {
        self.nu * self.scale / (self.nu - 1.0)
    }

    /// `∫₀ʷ t^order dF(t)` for order 1 or 2.
    pub fn truncated_moment(&self, w: f64, order: u32) -> Result<f64> {
        let (nu, b) = (self.nu, self.scale);
        match order {
            1 | 2 if w <= b => Ok(0.0),
            1 => Ok(nu * b / (nu - 1.0) * (1.0 - (b / w).powf(nu - 1.0))),
            2 => Ok(nu * b * b / (2.0 - nu) * ((w / b).powf(2.0 - nu) - 1.0)),
            _ => Err(domain(
                "order",
                order as f64,
                "only first and second truncated moments exist",
            )),
        }
    }

    /// Inverse of the tail: the `t` with `P(V > t) = u`, for `u` in (0, 1].
    pub fn tail_quantile(&self, u: f64) -> f64 {
        self.scale * u.powf(-1.0 / self.nu)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.tail_quantile(open_unit(rng))
    }

    /// The normalising constant `-1/Γ(1-nu)` of the tail.
    pub fn tail_constant(&self) -> TailConstant {
        TailConstant::new(self.nu).expect("nu validated at construction")
    }
}

/// `C_nu = -1/Γ(1-nu)`, positive on (1, 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailConstant(f64);

impl TailConstant {
    pub fn new(nu: f64) -> Result<Self> {
        Ok(TailConstant(-1.0 / gamma_one_minus(nu)?))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Lanczos approximation of Γ(x) for `x >= 0.5`.
pub(crate) fn gamma_lanczos(x: f64) -> f64 {
    debug_assert!(x >= 0.5);
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
}

/// Γ(1 - nu) for nu in (1, 2), via Γ(ν)Γ(1-ν) = π / sin(πν).
pub fn gamma_one_minus(nu: f64) -> Result<f64> {
    check_nu(nu)?;
    let pi = std::f64::consts::PI;
    Ok(pi / ((pi * nu).sin() * gamma_lanczos(nu)))
}

/// Laplace transform `E[exp(-s T)]` of the standard Pareto(nu) variable on
/// [1, ∞).
///
/// Integrated adaptively in `u = ln x` up to a cutoff beyond which the
/// analytic tail bound drops below 1e-14.
pub fn pareto_laplace(s: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    if !(s >= 0.0) || !s.is_finite() {
        return Err(domain("s", s, "transform argument must be finite and >= 0"));
    }
    if s == 0.0 {
        return Ok(1.0);
    }
    const TAIL_EPS: f64 = 1e-14;
    // ∫_T^∞ ν x^{-ν-1} e^{-sx} dx <= min(T^{-ν}, ν T^{-ν-1} e^{-sT} / s)
    let power_cut = TAIL_EPS.powf(-1.0 / nu);
    let exp_cut = ((nu / (s * TAIL_EPS)).ln() / s).max(1.0);
    let cut = power_cut.min(exp_cut);
    let integrand = |u: f64| nu * (-s * u.exp() - nu * u).exp();
    let est = Integrator::new(1e-14, 1e-13).integrate(integrand, 0.0, cut.ln())?;
    Ok(est.value.clamp(0.0, 1.0))
}

/// Unchecked transform for inner loops where `s >= 0` and `nu` are already
/// validated; falls back to the best available estimate.
pub(crate) fn laplace_unchecked(s: f64, nu: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    const TAIL_EPS: f64 = 1e-14;
    let power_cut = TAIL_EPS.powf(-1.0 / nu);
    let exp_cut = ((nu / (s * TAIL_EPS)).ln() / s).max(1.0);
    let cut = power_cut.min(exp_cut);
    let integrand = |u: f64| nu * (-s * u.exp() - nu * u).exp();
    Integrator::new(1e-14, 1e-13)
        .estimate(integrand, 0.0, cut.ln())
        .value
        .clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> ServiceDistribution {
        ServiceDistribution::pareto(1.5, 1.0).unwrap()
    }

    #[test]
    fn gamma_at_half_integer() {
        let g = gamma_one_minus(1.5).unwrap();
        assert_relative_eq!(g, -2.0 * std::f64::consts::PI.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn gamma_near_one_blows_up() {
        let g = gamma_one_minus(1.001).unwrap();
        assert!(g < -100.0);
        assert!(TailConstant::new(1.001).unwrap().value() < 1e-2);
    }

    #[test]
    fn gamma_rejects_out_of_range() {
        assert!(gamma_one_minus(1.0).is_err());
        assert!(gamma_one_minus(2.0).is_err());
        assert!(gamma_one_minus(0.5).is_err());
    }

    #[test]
    fn tail_closed_forms() {
        let d = reference();
        assert_relative_eq!(d.tail(2.0), 2f64.powf(-1.5), max_relative = 1e-15);
        assert_eq!(d.tail(0.0), 1.0);
        assert_eq!(d.tail(1.0), 1.0);
        assert_eq!(d.cdf(0.5), 0.0);
    }

    #[test]
    fn means() {
        assert_relative_eq!(reference().mean(), 3.0);
        assert_relative_eq!(ServiceDistribution::pareto(1.5, 2.0).unwrap().mean(), 6.0);
        assert_relative_eq!(ServiceDistribution::pareto(1.25, 1.0).unwrap().mean(), 5.0);
    }

    #[test]
    fn truncated_moments() {
        let d = reference();
        assert_relative_eq!(d.truncated_moment(4.0, 1).unwrap(), 1.5, max_relative = 1e-14);
        assert_relative_eq!(d.truncated_moment(9.0, 2).unwrap(), 6.0, max_relative = 1e-14);
        assert_eq!(d.truncated_moment(1.0, 1).unwrap(), 0.0);
        assert_eq!(d.truncated_moment(1.0, 2).unwrap(), 0.0);
        assert!(d.truncated_moment(9.0, 3).is_err());
    }

    #[test]
    fn quantile_endpoints() {
        let d = reference();
        assert_eq!(d.tail_quantile(1.0), 1.0);
        assert_relative_eq!(d.tail_quantile(2f64.powf(-1.5)), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn construction_guards() {
        assert!(ServiceDistribution::pareto(1.0005, 1.0).is_err());
        assert!(ServiceDistribution::pareto(1.9995, 1.0).is_err());
        assert!(ServiceDistribution::pareto(1.5, 0.0).is_err());
        assert!(ServiceDistribution::pareto(1.5, f64::INFINITY).is_err());
        assert!(ServiceDistribution::pareto(NU_MIN, 1.0).is_ok());
    }

    #[test]
    fn laplace_basics() {
        assert_eq!(pareto_laplace(0.0, 1.5).unwrap(), 1.0);
        assert!(pareto_laplace(0.5, 1.5).unwrap() > pareto_laplace(1.0, 1.5).unwrap());
        assert!(pareto_laplace(-1.0, 1.5).is_err());
    }
}
