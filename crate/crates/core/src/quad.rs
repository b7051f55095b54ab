//! Numerical integration on finite intervals.
//!
//! [`Integrator`] is a globally adaptive Gauss-Kronrod (7/15) scheme in
//! the style of QUADPACK's QAG. [`GaussLegendre`] is a fixed composite rule
//! kept as an independent second route for verification code.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub use crate::error::Estimate;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (1.0f64).min((200.0 * error / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * res_abs);
    }
    Segment { a, b, value, error }
}


/// Globally adaptive Gauss-Kronrod integrator.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_segments: 2000,
        }
    }
}

impl Integrator {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        Integrator {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }

    /// Integrates `f` over `[a, b]`; `a > b` flips the sign.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> Result<Estimate> {
        self.integrate_with_breaks(&mut f, &[a, b])
    }

    /// Like [`Integrator::integrate`] but returns the best estimate even
    /// when the tolerance was not met.
    pub fn estimate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> Estimate {
        match self.integrate_with_breaks(&mut f, &[a, b]) {
            Ok(e) => e,
            Err(Error::Quadrature { best, .. }) => best,
            Err(_) => unreachable!("quadrature only fails with a tolerance miss"),
        }
    }

    /// Integrates over consecutive `points`, using each listed abscissa as
    /// an initial segment boundary (kinks, supports, layer edges).
    pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
        &self,
        f: &mut F,
        points: &[f64],
    ) -> Result<Estimate> {
        assert!(points.len() >= 2);
        let (lo, hi) = (points[0], points[points.len() - 1]);
        if lo == hi {
            return Ok(Estimate {
                value: 0.0,
                error: 0.0,
                evaluations: 0,
            });
        }
        if lo > hi {
            let rev: Vec<f64> = points.iter().rev().copied().collect();
            let e = self.integrate_with_breaks(f, &rev)?;
            return Ok(Estimate {
                value: -e.value,
                ..e
            });
        }
        let mut segments: Vec<Segment> = points
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| kronrod15(f, w[0], w[1]))
            .collect();
        let mut evaluations = 15 * segments.len();
        loop {
            let total: f64 = segments.iter().map(|s| s.value).sum();
            let error: f64 = segments.iter().map(|s| s.error).sum();
            let tolerance = self.abs_tol.max(self.rel_tol * total.abs());
            if error <= tolerance {
                return Ok(Estimate {
                    value: total,
                    error,
                    evaluations,
                });
            }
            // Split the worst segment that is still resolvable.
            let worst = segments
                .iter()
                .enumerate()
                .filter(|(_, s)| {
                    let mid = 0.5 * (s.a + s.b);
                    (s.b - s.a) > 1e3 * f64::EPSILON * mid.abs().max(f64::MIN_POSITIVE)
                })
                .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
                .map(|(i, _)| i);
            let Some(i) = worst else {
                return Err(Error::Quadrature {
                    a: lo,
                    b: hi,
                    error,
                    tolerance,
                    best: Estimate {
                        value: total,
                        error,
                        evaluations,
                    },
                });
            };
            if segments.len() >= self.max_segments {
                return Err(Error::Quadrature {
                    a: lo,
                    b: hi,
                    error,
                    tolerance,
                    best: Estimate {
                        value: total,
                        error,
                        evaluations,
                    },
                });
            }
            let s = segments.swap_remove(i);
            let mid = 0.5 * (s.a + s.b);
            segments.push(kronrod15(f, s.a, mid));
            segments.push(kronrod15(f, mid, s.b));
            evaluations += 30;
        }
    }
}

/// Fixed `n`-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let pn = if n == 1 { x } else { p1 };
                let pm = if n == 1 { 1.0 } else { p0 };
                dp = nf * (x * pn - pm) / (x * x - 1.0);
                let dx = pn / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Shared 20-point rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(20))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }

    /// Composite rule over `panels` equal subintervals.
    pub fn composite<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| {
                let lo = a + h * i as f64;
                self.integrate(&mut f, lo, lo + h)
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kronrod_is_exact_for_smooth_integrands() {
        let q = Integrator::default();
        let e = q.integrate(|x: f64| x.exp(), 0.0, 1.0).unwrap();
        assert_relative_eq!(e.value, std::f64::consts::E - 1.0, epsilon = 1e-14);
        let e = q.integrate(|x: f64| x.sin(), 0.0, std::f64::consts::PI).unwrap();
        assert_relative_eq!(e.value, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn adapts_to_endpoint_singularity() {
        let q = Integrator::new(1e-10, 1e-10);
        let e = q.integrate(|x: f64| x.powf(-0.5), 0.0, 1.0).unwrap();
        assert_relative_eq!(e.value, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let q = Integrator::default();
        let e = q.integrate(|x| x * x, 2.0, 0.0).unwrap();
        assert_relative_eq!(e.value, -8.0 / 3.0, epsilon = 1e-13);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let q = Integrator::default();
        let mut f = |x: f64| (x - 0.3).abs();
        let e = q.integrate_with_breaks(&mut f, &[0.0, 0.3, 1.0]).unwrap();
        assert_relative_eq!(e.value, 0.5 * 0.09 + 0.5 * 0.49, epsilon = 1e-14);
    }

    #[test]
    fn impossible_tolerance_is_reported() {
        let q = Integrator {
            abs_tol: 0.0,
            rel_tol: 0.0,
            max_segments: 10,
        };
        assert!(matches!(
            q.integrate(|x: f64| x.sqrt().sin(), 0.0, 1.0),
            Err(Error::Quadrature { .. })
        ));
    }

    #[test]
    fn gauss_legendre_weights_and_exactness() {
        for n in [1, 2, 5, 20] {
            let gl = GaussLegendre::new(n);
            let total: f64 = gl.weights.iter().sum();
            assert_relative_eq!(total, 2.0, epsilon = 1e-14);
            // exact up to degree 2n - 1
            let deg = 2 * n - 1;
            let v = gl.integrate(|x| x.powi(deg as i32) + 1.0, 0.0, 1.0);
            assert_relative_eq!(v, 1.0 / (deg as f64 + 1.0) + 1.0, epsilon = 1e-13);
        }
    }
}
