use proptest::prelude::*;
use tandem_core::boxma::{tabulate, GridSpec, MaxServiceCdf};
use tandem_core::chain::*;
use tandem_core::heavytail::ServiceDistribution;
use tandem_core::kappa::{KappaFunction, KappaParams};
use tandem_core::limits::{ks_distance, ks_two_sample, mean_and_error, EmpiricalDistribution};
use tandem_core::rng::stream;
use tandem_core::tandemsim::{simulate, BusyPeriodSampler, SimOptions};

fn dist() -> ServiceDistribution {
    ServiceDistribution::pareto(1.5, 1.0).unwrap()
}

fn table(s: &HeavyTrafficSchedule) -> MaxServiceCdf {
    let hi = s.n() * 1e6;
    tabulate(s.lambda_n(), &dist(), &GridSpec::Log { lo: 1.0, hi, points: 2048 }).unwrap()
}

fn ecdf(v: Vec<f64>) -> EmpiricalDistribution {
    EmpiricalDistribution::new(v).unwrap()
}

#[test]
fn schedule_realizes_rate_exactly() {
    for gamma in [0.0, 0.1, 0.5, 2.0] {
        for n in [50.0, 1e2, 1e3, 1e4, 1e6] {
            let s = schedule(&dist(), gamma, n).unwrap();
            let realized = (1.0 - s.rho_n()) / (n * dist().tail(n));
            assert!((realized - gamma).abs() <= 1e-12 * (1.0 + gamma));
            assert!(s.lambda_n() <= s.lambda() && s.rho_n() > 0.0);
        }
    }
}

#[test]
fn monotone_coupling() {
    let s = schedule(&dist(), 0.5, 1e3).unwrap();
    let m = table(&s);
    let k = s.kernel();
    for (lo, hi) in [(0.0, 0.1), (0.5, 0.6), (0.0, 3.0)] {
        let a = run_scaled(&k, &m, 1.0, lo, 500, 17).unwrap();
        let b = run_scaled(&k, &m, 1.0, hi, 500, 17).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| y >= x));
    }
    let (mut x, mut y) = (ChainState::new(0.2), ChainState::new(0.9));
    let (mut rx, mut ry) = (stream(4, 4), stream(4, 4));
    for _ in 0..5_000 {
        x = step(x, &k, &m, &mut rx);
        y = step(y, &k, &m, &mut ry);
        assert!(y.value >= x.value && x.value >= 0.0);
    }
}

#[test]
fn unrolled_maximum_is_the_chain_pathwise() {
    let s = schedule(&dist(), 0.5, 1e3).unwrap();
    let m = table(&s);
    for x0 in [0.0, 0.7] {
        let a = run_scaled(&s.kernel(), &m, 1.3, x0, 300, 9).unwrap();
        let b = max_representation_sample(&s.kernel(), &m, 1.3, x0, 300, 9).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + x));
        }
    }
}

#[test]
fn unrolled_maximum_resampled() {
    let s = schedule(&dist(), 0.5, 1e3).unwrap();
    let m = table(&s);
    let a = run_scaled(&s.kernel(), &m, 1.0, 0.0, 100_000, 1).unwrap();
    let b = max_representation_sample(&s.kernel(), &m, 1.0, 0.0, 100_000, 2).unwrap();
    assert!(ks_two_sample(&ecdf(a), &ecdf(b)) < 0.01);
}

#[test]
fn one_step_matches_kernel() {
    let s = schedule(&dist(), 0.5, 1e3).unwrap();
    let m = table(&s);
    let (n, rate, x) = (s.n(), s.lambda_n(), 1.0);
    let k = s.kernel();
    let draws: Vec<f64> = (0..100_000)
        .map(|r| step(ChainState::new(x), &k, &m, &mut stream(31, r)).value)
        .collect();
    // P(max(x - I/n, M/n) <= z) = m(nz) P(I >= n(x - z))
    let exact = |z: f64| {
        let idle = if z >= x { 1.0 } else { (-rate * n * (x - z)).exp() };
        m.cdf(n * z) * idle
    };
    assert!(ks_distance(&ecdf(draws), exact) < 0.01);
}

#[test]
fn step_from_zero_is_scaled_maximum() {
    let s = schedule(&dist(), 0.5, 1e2).unwrap();
    let m = table(&s);
    let mut r1 = stream(6, 0);
    let mut r2 = stream(6, 0);
    for _ in 0..1_000 {
        let v = step(ChainState::new(0.0), &s.kernel(), &m, &mut r1).value;
        let _: f64 = rand::Rng::sample(&mut r2, rand_distr::Exp1);
        assert_eq!(v, m.sample_max(&mut r2) / 100.0);
    }
}

#[test]
fn chain_matches_tandem_simulation() {
    let s = schedule(&dist(), 0.5, 100.0).unwrap();
    assert!((s.rho_n() - 0.95).abs() < 1e-12);
    let m = table(&s);
    let chain = run_scaled(&s.kernel(), &m, 1.0, 0.0, 10_000, 8).unwrap();
    let des: Vec<f64> = (0..10_000)
        .map(|r| {
            let o = simulate(s.lambda_n(), &dist(), 100, &mut stream(99, r), SimOptions::default()).unwrap();
            o.periods[99].r_value / 100.0
        })
        .collect();
    assert!(ks_two_sample(&ecdf(chain), &ecdf(des)) < 0.02);
}

#[test]
fn samplers_are_interchangeable() {
    let s = schedule(&dist(), 0.5, 100.0).unwrap();
    let m = table(&s);
    let bp = BusyPeriodSampler::new(s.lambda_n(), dist()).unwrap();
    let a = run_scaled(&s.kernel(), &m, 1.0, 0.0, 10_000, 3).unwrap();
    let b = run_scaled(&s.kernel(), &bp, 1.0, 0.0, 10_000, 4).unwrap();
    assert!(ks_two_sample(&ecdf(a), &ecdf(b)) < 0.02);
}

#[test]
fn idle_mean_substitution() {
    let s = schedule(&dist(), 0.5, 1e4).unwrap();
    let m = table(&s);
    let a = max_representation_with(&s.kernel(), &m, 1.0, 0.0, 10_000, 1, false).unwrap();
    let b = max_representation_with(&s.kernel(), &m, 1.0, 0.0, 10_000, 1, true).unwrap();
    assert!(ks_two_sample(&ecdf(a), &ecdf(b)) < 0.02);
}

#[test]
fn idle_sums_flatten() {
    let stats: Vec<f64> = [1e2, 1e3, 1e4]
        .iter()
        .map(|&n| idle_sum_flatness(&schedule(&dist(), 0.5, n).unwrap().kernel(), 1.0, 400, 12))
        .collect();
    assert!(stats.windows(2).all(|w| w[1] < w[0]), "{stats:?}");
    let s = schedule(&dist(), 0.5, 1e2).unwrap();
    assert_eq!(idle_sum_flatness(&s.kernel(), 0.0, 10, 1), 0.0);
    // one step: E|I - 1/λ| = (2/e)/λ for exponential I
    let single = idle_sum_flatness(&s.kernel(), 0.01, 200_000, 5);
    let expected = 2.0 / std::f64::consts::E / s.lambda_n() / 100.0;
    assert!((single / expected - 1.0).abs() < 0.01, "{single} vs {expected}");
}

#[test]
fn probe_converges_to_kappa() {
    let k = KappaFunction::build(KappaParams::new(&dist(), 0.5).unwrap()).unwrap();
    let bound = (2f64.powf(2.0 / 1.5) * dist().mean()).max(1.0);
    let ys = [0.5, 1.0, 2.0, 5.0];
    let mut previous = vec![f64::INFINITY; ys.len()];
    for n in [1e2, 1e3, 1e4] {
        let s = schedule(&dist(), 0.5, n).unwrap();
        let probe = scaled_max_cdf_probe(&s, &ys).unwrap();
        for (i, (&p, &y)) in probe.iter().zip(&ys).enumerate() {
            assert!(p > 0.0 && p <= bound);
            let err = (p - k.value(y) / y).abs();
            assert!(err < previous[i], "n={n} y={y}");
            previous[i] = err;
        }
    }
    assert!(previous.iter().zip(&ys).all(|(e, &y)| e / (k.value(y) / y) < 0.05));
}

#[test]
fn shifted_probe_is_asymptotically_unshifted() {
    let mut previous = f64::INFINITY;
    for n in [1e2, 1e3, 1e4] {
        let s = schedule(&dist(), 0.5, n).unwrap();
        let base = shifted_probe(&s, 1.0, 0.0).unwrap();
        assert_eq!(base, scaled_max_cdf_probe(&s, &[1.0]).unwrap()[0]);
        let worst = [5.0, -5.0]
            .iter()
            .map(|&b| (shifted_probe(&s, 1.0, b).unwrap() / base - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < previous);
        previous = worst;
    }
    assert!(previous < 0.01, "{previous}");
}

#[test]
fn long_run_is_reproducible() {
    let m = tabulate(0.3, &dist(), &GridSpec::default_for(&dist())).unwrap();
    let a = long_run(&Kernel::unscaled(0.3), &m, 0.0, 100, 1_000, 3).unwrap();
    let b = long_run(&Kernel::unscaled(0.3), &m, 0.0, 100, 1_000, 3).unwrap();
    assert_eq!(a, b);
    let (mean, _) = mean_and_error(&a);
    assert!(mean.is_finite() && a.iter().all(|&x| x >= 1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_invariants(gamma in 0.0f64..5.0, ln in 2.0f64..8.0) {
        let n = 10f64.powf(ln);
        if let Ok(s) = schedule(&dist(), gamma, n) {
            prop_assert!(s.rho_n() > 0.0 && s.rho_n() <= 1.0);
            prop_assert!((s.lambda_n() - s.rho_n() / dist().mean()).abs() < 1e-15);
        } else {
            prop_assert!(gamma * n * dist().tail(n) >= 1.0);
        }
    }

    #[test]
    fn zero_steps_keep_start(x0 in 0.0f64..10.0, n in 2.0f64..1e4) {
        let k = Kernel { idle_rate: 0.3, scale: n };
        let v = run_scaled(&k, &BusyPeriodSampler::new(0.3, dist()).unwrap(), 0.99 / n, x0, 4, 1).unwrap();
        prop_assert!(v.iter().all(|&x| x == x0));
    }
}
