use proptest::prelude::*;
use tandem_core::boxma::*;
use tandem_core::chain::{long_run, Kernel};
use tandem_core::heavytail::ServiceDistribution;
use tandem_core::limits::{ks_distance, mean_and_error, EmpiricalDistribution};
use tandem_core::rng::stream;
use tandem_core::tandemsim::{simulate, SimOptions};

const LAMBDA: f64 = 0.3;

fn dist() -> ServiceDistribution {
    ServiceDistribution::pareto(1.5, 1.0).unwrap()
}

/// Composite Simpson residual in `u = ln t`, a third integration scheme.
fn simpson_residual(lambda: f64, w: f64, m: f64) -> f64 {
    let n = 20_000;
    let span = w.ln();
    let h = span / n as f64;
    let g = |u: f64| 1.5 * (-1.5 * u - lambda * u.exp() * (1.0 - m)).exp();
    let mut acc = g(0.0) + g(span);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(h * i as f64);
    }
    acc * h / 3.0 - m
}

#[test]
fn tabulated_residuals_on_default_grid() {
    let m = tabulate(LAMBDA, &dist(), &GridSpec::default_for(&dist())).unwrap();
    assert_eq!(m.grid().len(), 512);
    let worst = m.residuals().iter().fold(0.0f64, |a, r| a.max(r.abs()));
    assert!(worst <= 1e-10, "max residual {worst:e}");
    for &w in &[1.5, 7.0, 300.0, 9000.0] {
        let v = solve_m_at(LAMBDA, &dist(), w).unwrap();
        assert!(simpson_residual(LAMBDA, w, v).abs() < 1e-10, "w={w}");
    }
}

#[test]
fn values_are_a_distribution_function() {
    let m = tabulate(LAMBDA, &dist(), &GridSpec::default_for(&dist())).unwrap();
    let v = m.values();
    assert_eq!(v[0], 0.0);
    assert!(v.windows(2).all(|p| p[0] <= p[1]));
    assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
    assert_eq!(m.cdf(0.5), 0.0);
    // m̄ is of order w^{-ν}/(1-ρ) at the right end
    assert!(1.0 - v[511] < 10.0 * dist().tail(1e4));
}

#[test]
fn tail_decreases_in_load() {
    let rates = [0.05, 0.1, 0.2, 0.3, 0.33, 1.0 / 3.0];
    for w in [1.2, 2.0, 5.0, 50.0, 1e3, 1e5] {
        let tails: Vec<f64> = rates.iter().map(|&l| solve_tail_at(l, &dist(), w).unwrap()).collect();
        assert!(tails.windows(2).all(|p| p[0] < p[1]), "w={w}: {tails:?}");
    }
}

#[test]
fn m_at_five_matches_simulation() {
    let out = simulate(LAMBDA, &dist(), 1_000_000, &mut stream(2718, 0), SimOptions::default()).unwrap();
    let n = out.periods.len() as f64;
    let hits = out.periods.iter().filter(|p| p.max_service <= 5.0).count() as f64;
    let p = solve_m_at(LAMBDA, &dist(), 5.0).unwrap();
    let se = (p * (1.0 - p) / n).sqrt();
    assert!((hits / n - p).abs() < 3.0 * se, "{} vs {p}", hits / n);
}

#[test]
fn sampler_matches_table() {
    let m = tabulate(LAMBDA, &dist(), &GridSpec::default_for(&dist())).unwrap();
    let mut rng = stream(11, 0);
    let e = EmpiricalDistribution::new((0..100_000).map(|_| m.sample_max(&mut rng)).collect()).unwrap();
    assert!(ks_distance(&e, |w| m.cdf(w)) < 0.01);
}

#[test]
fn quantile_hits_nodes() {
    let m = tabulate(LAMBDA, &dist(), &GridSpec::Log { lo: 1.0, hi: 1e3, points: 64 }).unwrap();
    for (i, (&w, &t)) in m.grid().iter().zip(m.tails()).enumerate().skip(1) {
        let q = m.tail_quantile(t);
        assert!((q / w - 1.0).abs() < 1e-10, "node {i}: {q} vs {w}");
    }
    assert!(m.quantile(m.cdf(1.0) / 2.0) <= 1.0 + 1e-12);
    let beyond = m.tail_quantile(m.tails()[63] / 8.0);
    assert!(beyond > 1e3);
}

#[test]
fn extrapolated_tail_is_regular() {
    let m = tabulate(LAMBDA, &dist(), &GridSpec::default_for(&dist())).unwrap();
    assert!((m.tail_exponent() - 1.5).abs() < 0.1, "{}", m.tail_exponent());
    let direct = solve_tail_at(LAMBDA, &dist(), 4e4).unwrap();
    assert!((m.tail(4e4) / direct - 1.0).abs() < 0.02);
}

#[test]
fn steady_state_is_a_valid_cdf() {
    let m = tabulate(LAMBDA, &dist(), &GridSpec::default_for(&dist())).unwrap();
    let law = SteadyStateLaw::new(m).unwrap();
    assert_eq!(steady_state_cdf(&law, 0.5), 0.0);
    let ws = log_space(1.0, 1e14, 4000);
    let f: Vec<f64> = ws.iter().map(|&w| steady_state_cdf(&law, w)).collect();
    assert!(f.windows(2).all(|p| p[0] <= p[1]));
    assert!(f.iter().all(|x| (0.0..=1.0).contains(x)));
    assert!(1.0 - f[f.len() - 1] < 1e-5);
    let ti: Vec<f64> = ws.iter().map(|&w| law.tail_integral(w)).collect();
    assert!(ti.windows(2).all(|p| p[0] >= p[1] && p[1] >= 0.0));
}

#[test]
fn steady_state_rejects_critical_load() {
    let m = tabulate(1.0 / 3.0, &dist(), &GridSpec::default_for(&dist())).unwrap();
    assert!(SteadyStateLaw::new(m).is_err());
}

#[test]
fn steady_state_matches_independent_chains() {
    let m = tabulate(LAMBDA, &dist(), &GridSpec::Log { lo: 1.0, hi: 1e8, points: 2048 }).unwrap();
    let law = SteadyStateLaw::new(m.clone()).unwrap();
    for w in [2.0, 5.0, 50.0] {
        let fractions: Vec<f64> = (0..16)
            .map(|seed| {
                let xs = long_run(&Kernel::unscaled(LAMBDA), &m, 0.0, 100_000, 200_000, seed).unwrap();
                xs.iter().filter(|&&x| x <= w).count() as f64 / xs.len() as f64
            })
            .collect();
        let (mean, se) = mean_and_error(&fractions);
        let exact = steady_state_cdf(&law, w);
        assert!((mean - exact).abs() < 3.0 * se, "w={w}: {mean} ± {se} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn explicit_grids_are_monotone(mut ws in prop::collection::vec(1.0f64..1e5, 1..12), lambda in 0.01f64..0.333) {
        ws.sort_by(f64::total_cmp);
        ws.dedup();
        let m = tabulate(lambda, &dist(), &GridSpec::Explicit(ws)).unwrap();
        let v = m.values();
        prop_assert!(v.windows(2).all(|p| p[0] <= p[1]));
        prop_assert!(v.iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn solver_residual_anywhere(w in 1.0f64..1e6, lambda in 0.01f64..0.3333) {
        let t = solve_tail_at(lambda, &dist(), w).unwrap();
        prop_assert!((0.0..=1.0).contains(&t));
        prop_assert!(fixed_point_residual(lambda, &dist(), w, t).abs() <= 1e-10);
    }
}
