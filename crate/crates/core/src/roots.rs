//! Bracketed scalar root finding (Brent's method).

use crate::error::{Error, Result};

/// Termination settings for [`brent`].
#[derive(Debug, Clone, Copy)]
pub struct RootTolerance {
    /// Absolute width at which the bracket is accepted.
    pub x_abs: f64,
    pub max_iter: usize,
}

impl Default for RootTolerance {
    fn default() -> Self {
        RootTolerance {
            x_abs: 1e-15,
            max_iter: 500,
        }
    }
}

/// Finds a root of `f` in `[a, b]`, which must bracket a sign change.
///
/// Combines bisection with secant and inverse quadratic interpolation
/// steps; the bracket shrinks every iteration so convergence is
/// guaranteed for continuous `f`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: RootTolerance) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    brent_with_values(f, a, b, fa, fb, tol)
}

/// Same as [`brent`] with the endpoint values already known.
pub fn brent_with_values<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    tol: RootTolerance,
) -> Result<f64> {
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoBracket { a, b, fa, fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.x_abs;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 {
            d
        } else {
            tol1.copysign(xm)
        };
        fb = f(b);
    }
    Err(Error::RootNotConverged {
        iterations: tol.max_iter,
    })
}

/// [`brent`] for a fallible objective; the first error aborts the search.
pub fn brent_try<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    a: f64,
    b: f64,
    tol: RootTolerance,
) -> Result<f64> {
    let mut failure = None;
    let root = brent(
        |x| match f(x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        a,
        b,
        tol,
    );
    match failure {
        Some(e) => Err(e),
        None => root,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, RootTolerance::default()).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn handles_flat_then_steep() {
        let r = brent(|x: f64| (x - 1e-6).powi(3), 0.0, 1.0, RootTolerance::default()).unwrap();
        assert!((r - 1e-6).abs() < 1e-9);
    }

    #[test]
    fn exact_endpoint_root() {
        assert_eq!(brent(|x| x, 0.0, 1.0, RootTolerance::default()).unwrap(), 0.0);
    }

    #[test]
    fn rejects_missing_bracket() {
        let e = brent(|x| x * x + 1.0, -1.0, 1.0, RootTolerance::default());
        assert!(matches!(e, Err(Error::NoBracket { .. })));
    }

    #[test]
    fn fallible_objective_propagates_errors() {
        let e = brent_try(
            |x| if x > 0.5 { Err(Error::EmptySample) } else { Ok(x - 0.75) },
            0.0,
            1.0,
            RootTolerance::default(),
        );
        assert_eq!(e, Err(Error::EmptySample));
        let r = brent_try(|x| Ok(x - 0.25), 0.0, 1.0, RootTolerance::default()).unwrap();
        assert!((r - 0.25).abs() < 1e-15);
    }

    #[test]
    fn iteration_cap_is_reported() {
        let tol = RootTolerance {
            x_abs: 0.0,
            max_iter: 3,
        };
        let e = brent(|x: f64| x.cbrt() - 0.1, -1.0, 5.0, tol);
        assert!(matches!(e, Err(Error::RootNotConverged { .. })));
    }
}
