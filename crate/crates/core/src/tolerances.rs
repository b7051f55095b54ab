//! Numerical and statistical thresholds used by the verification checks.

/// One record holding every pass/fail threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Fixed-point residual of a tabulated `m(w)`.
    pub fixed_point_residual: f64,
    /// Residual of the `κ` equation.
    pub kappa_residual: f64,
    /// Spread of `κ` when it must be constant.
    pub kappa_constant_spread: f64,
    /// Distance of the fitted `log κ` slope from `1 - ν`.
    pub kappa_slope: f64,
    /// Relative DES-vs-recursion mismatch for `R_n`.
    pub recursion_relative: f64,
    /// KS: DES maxima vs tabulated `m`.
    pub ks_max_law: f64,
    /// KS: long-run chain vs steady-state CDF.
    pub ks_steady_state: f64,
    /// KS: scaled chain vs `Φ(t, ·)`.
    pub ks_limit_law: f64,
    /// KS: `max(Z_t - s/λ, Z_s)` vs `Z_{s+t}`.
    pub ks_max_convolution: f64,
    /// KS: closed-form iterate vs sequential kernel.
    pub ks_iterates: f64,
    /// Generic one-sample KS for sampler checks.
    pub ks_sampler: f64,
    /// Final relative error of `n m̄(ny)` against `κ(y)/y`.
    pub scaled_tail_relative: f64,
    /// `Φ(t, x + s/λ) Φ(s, x) = Φ(s + t, x)`.
    pub max_convolution_identity: f64,
    /// `T(s) T(t) f = T(s + t) f`.
    pub semigroup_property: f64,
    /// Absolute accuracy of one `T(t) f(x)` evaluation.
    pub semigroup_apply: f64,
    /// Absolute accuracy of one `Âf(x)` evaluation.
    pub generator_apply: f64,
    /// Absolute accuracy of one `A_n f(x)` evaluation.
    pub discrete_generator: f64,
    /// Number of standard errors for Monte Carlo agreement.
    pub mc_sigmas: f64,
    /// Cumulative-table `Φ` against its quadrature form.
    pub phi_agreement: f64,
    /// KS between the two halves of a post-burn-in chain.
    pub split_half: f64,
    /// Smallest fitted log-log order of the generator error in `h`.
    pub generator_order: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            fixed_point_residual: 1e-10,
            kappa_residual: 1e-10,
            kappa_constant_spread: 1e-10,
            kappa_slope: 0.05,
            recursion_relative: 1e-9,
            ks_max_law: 0.005,
            ks_steady_state: 0.01,
            ks_limit_law: 0.03,
            ks_max_convolution: 0.01,
            ks_iterates: 0.02,
            ks_sampler: 0.01,
            scaled_tail_relative: 0.05,
            max_convolution_identity: 1e-8,
            semigroup_property: 1e-6,
            semigroup_apply: 1e-8,
            generator_apply: 1e-9,
            discrete_generator: 1e-6,
            mc_sigmas: 3.0,
            phi_agreement: 1e-10,
            split_half: 0.005,
            generator_order: 0.8,
        }
    }
}
