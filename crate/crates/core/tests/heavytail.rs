use approx::assert_relative_eq;
use proptest::prelude::*;
use tandem_core::heavytail::*;
use tandem_core::limits::{ks_distance, mean_and_error, EmpiricalDistribution};
use tandem_core::rng::stream;

fn reference() -> ServiceDistribution {
    ServiceDistribution::pareto(1.5, 1.0).unwrap()
}

#[test]
fn gamma_golden() {
    let g = gamma_one_minus(1.25).unwrap();
    assert_relative_eq!(g, -4.901_666_809_860_710_6, max_relative = 1e-13);
    let c = TailConstant::new(1.5).unwrap().value();
    assert_relative_eq!(c, 1.0 / (2.0 * std::f64::consts::PI.sqrt()), max_relative = 1e-13);
}

#[test]
fn laplace_goldens() {
    let cases = [
        (0.5, 0.397_689_745_423_351_45),
        (1.0, 0.189_731_729_389_881_63),
        (2.0, 0.050_203_142_233_298_31),
        (0.01, 0.973_395_074_118_834_38),
        (1e-4, 0.999_703_529_907_868_48),
    ];
    for (s, expected) in cases {
        assert_relative_eq!(pareto_laplace(s, 1.5).unwrap(), expected, max_relative = 1e-10);
    }
    assert_eq!(pareto_laplace(0.0, 1.5).unwrap(), 1.0);
    assert!(pareto_laplace(-1.0, 1.5).is_err());
}

#[test]
fn laplace_matches_monte_carlo() {
    let d = reference();
    let mut rng = stream(2024, 0);
    let draws: Vec<f64> = (0..400_000).map(|_| d.sample(&mut rng)).collect();
    for s in [0.05, 0.5, 2.0] {
        let values: Vec<f64> = draws.iter().map(|v| (-s * v).exp()).collect();
        let (mean, se) = mean_and_error(&values);
        let exact = pareto_laplace(s, 1.5).unwrap();
        assert!((mean - exact).abs() < 4.0 * se, "s={s}: {mean} vs {exact} (se {se})");
    }
}

#[test]
fn laplace_small_s_expansion() {
    // (L(s) - 1 + s E V) / s^nu tends to 1/C_nu
    let d = reference();
    let target = 1.0 / d.tail_constant().value();
    let mut previous = f64::INFINITY;
    for s in [1e-3, 1e-4, 1e-5, 1e-6] {
        let ratio = (pareto_laplace(s, 1.5).unwrap() - 1.0 + s * d.mean()) / s.powf(1.5);
        let err = (ratio / target - 1.0).abs();
        assert!(err < previous, "s={s}: {err} after {previous}");
        previous = err;
    }
    assert!(previous < 1e-2);
}

#[test]
fn laplace_is_completely_monotone() {
    let h = 0.05;
    let values: Vec<f64> = (0..60).map(|i| pareto_laplace(0.01 + h * i as f64, 1.5).unwrap()).collect();
    let mut diffs = values.clone();
    for order in 1..=3 {
        diffs = diffs.windows(2).map(|w| w[1] - w[0]).collect();
        let sign = if order % 2 == 1 { -1.0 } else { 1.0 };
        assert!(diffs.iter().all(|d| sign * d > 0.0), "order {order}");
    }
}

#[test]
fn sampler_matches_cdf() {
    let d = reference();
    let mut rng = stream(7, 0);
    let sample = EmpiricalDistribution::new((0..100_000).map(|_| d.sample(&mut rng)).collect()).unwrap();
    assert!(ks_distance(&sample, |t| d.cdf(t)) < 0.01);
}

#[test]
fn truncated_moments_match_quadrature() {
    let d = reference();
    for w in [2.0f64, 10.0, 1e3] {
        let n = 200_000;
        let (lo, hi) = (0.0f64, w.ln());
        let h = (hi - lo) / n as f64;
        let mut first = 0.0;
        let mut second = 0.0;
        for i in 0..n {
            let t = (lo + h * (i as f64 + 0.5)).exp();
            first += t * d.density(t) * t * h;
            second += t * t * d.density(t) * t * h;
        }
        assert_relative_eq!(d.truncated_moment(w, 1).unwrap(), first, max_relative = 1e-8);
        assert_relative_eq!(d.truncated_moment(w, 2).unwrap(), second, max_relative = 1e-8);
    }
}

proptest! {
    #[test]
    fn tail_is_a_valid_survival_function(nu in 1.001f64..1.999, b in 0.1f64..10.0, t1 in 0.0f64..1e3, t2 in 0.0f64..1e3) {
        let d = ServiceDistribution::pareto(nu, b).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!((0.0..=1.0).contains(&d.tail(lo)));
        prop_assert!(d.tail(lo) >= d.tail(hi));
        prop_assert!(d.truncated_moment(hi, 1).unwrap() <= d.mean() * (1.0 + 1e-12));
    }

    #[test]
    fn tail_quantile_inverts_tail(nu in 1.001f64..1.999, b in 0.1f64..10.0, u in 1e-9f64..1.0) {
        let d = ServiceDistribution::pareto(nu, b).unwrap();
        let t = d.tail_quantile(u);
        prop_assert!(t >= b);
        prop_assert!((d.tail(t) / u - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_constant_positive(nu in 1.001f64..1.999) {
        prop_assert!(TailConstant::new(nu).unwrap().value() > 0.0);
    }

    #[test]
    fn laplace_bounded_by_jensen(nu in 1.05f64..1.95, s in 0.01f64..5.0) {
        let d = ServiceDistribution::pareto(nu, 1.0).unwrap();
        let l = pareto_laplace(s, nu).unwrap();
        prop_assert!(l > (-s * d.mean()).exp());
        prop_assert!(l < (-s).exp());
    }
}
