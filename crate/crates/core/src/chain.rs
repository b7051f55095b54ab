//! The embedded max-recursion chain `Y_n(k+1) = max(Y_n(k) - I/n, M/n)`
//! under the heavy-traffic schedule `ρ_n = 1 - γ n F̄(n)`.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::boxma::{solve_tail_at, MaxServiceCdf};
use crate::error::{domain, Result};
use crate::heavytail::ServiceDistribution;
use crate::rng::{stream, SimRng};
use crate::tandemsim::BusyPeriodSampler;

/// Source of busy-period maxima `M`.
pub trait MaxSampler: Sync {
    fn sample_max(&self, rng: &mut SimRng) -> f64;
}

impl MaxSampler for MaxServiceCdf {
    fn sample_max(&self, rng: &mut SimRng) -> f64 {
        MaxServiceCdf::sample_max(self, rng)
    }
}

impl MaxSampler for BusyPeriodSampler {
    fn sample_max(&self, rng: &mut SimRng) -> f64 {
        BusyPeriodSampler::sample_max(self, rng)
    }
}

/// The `n`-th system of the heavy-traffic sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavyTrafficSchedule {
    dist: ServiceDistribution,
    gamma: f64,
    n: f64,
    rho_n: f64,
    lambda_n: f64,
}

/// Builds the schedule with `(1 - ρ_n) / (n F̄(n)) = γ` exactly.
pub fn schedule(dist: &ServiceDistribution, gamma: f64, n: f64) -> Result<HeavyTrafficSchedule> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(domain("gamma", gamma, "heavy-traffic constant must be finite and >= 0"));
    }
    if !(n >= 1.0 && n.is_finite()) {
        return Err(domain("n", n, "scale index must be finite and >= 1"));
    }
    let rho_n = 1.0 - gamma * n * dist.tail(n);
    if !(rho_n > 0.0) {
        return Err(domain("n", n, "gamma * n * tail(n) must be below 1; increase n"));
    }
    Ok(HeavyTrafficSchedule {
        dist: *dist,
        gamma,
        n,
        rho_n,
        lambda_n: rho_n / dist.mean(),
    })
}

impl HeavyTrafficSchedule {
    pub fn dist(&self) -> &ServiceDistribution {
        &self.dist
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn rho_n(&self) -> f64 {
        self.rho_n
    }

    pub fn lambda_n(&self) -> f64 {
        self.lambda_n
    }

    /// Limit rate `1 / E V`.
    pub fn lambda(&self) -> f64 {
        1.0 / self.dist.mean()
    }

    pub fn kernel(&self) -> Kernel {
        Kernel {
            idle_rate: self.lambda_n,
            scale: self.n,
        }
    }
}

/// Transition parameters: idle periods are exponential(`idle_rate`) and
/// both terms are divided by `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub idle_rate: f64,
    pub scale: f64,
}

impl Kernel {
    /// Fixed-load chain on the original scale.
    pub fn unscaled(lambda: f64) -> Self {
        Kernel {
            idle_rate: lambda,
            scale: 1.0,
        }
    }

    /// `[n t]`.
    pub fn steps_for(&self, t: f64) -> u64 {
        (self.scale * t).floor().max(0.0) as u64
    }

    fn idle(&self, rng: &mut SimRng) -> f64 {
        let e: f64 = rng.sample(Exp1);
        e / self.idle_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainState {
    pub value: f64,
    pub step: u64,
}

impl ChainState {
    pub fn new(value: f64) -> Self {
        ChainState { value, step: 0 }
    }
}

/// One transition; `I` is drawn before `M`.
pub fn step<S: MaxSampler + ?Sized>(state: ChainState, kernel: &Kernel, sampler: &S, rng: &mut SimRng) -> ChainState {
    let idle = kernel.idle(rng);
    let m = sampler.sample_max(rng);
    ChainState {
        value: (state.value - idle / kernel.scale).max(m / kernel.scale),
        step: state.step + 1,
    }
}

fn check_start(x0: f64) -> Result<()> {
    if x0 >= 0.0 && x0.is_finite() {
        Ok(())
    } else {
        Err(domain("x0", x0, "initial state must be finite and >= 0"))
    }
}

/// Terminal values `X_n(t)` of `reps` independent chains; replication `r`
/// uses stream `r` of `seed`.
pub fn run_scaled<S: MaxSampler + ?Sized>(
    kernel: &Kernel,
    sampler: &S,
    t: f64,
    x0: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_start(x0)?;
    let steps = kernel.steps_for(t);
    Ok((0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            let mut s = ChainState::new(x0);
            for _ in 0..steps {
                s = step(s, kernel, sampler, &mut rng);
            }
            s.value
        })
        .collect())
}

/// Samples of the unrolled form
/// `max(x0 - Σ_{j≤N} I_j / n, max_{k≤N} (M_k - Σ_{j=k+1}^{N} I_j) / n)`
/// with `N = [n t]`. With the same seed this reproduces [`run_scaled`]
/// pathwise; with another seed it is an independent sample of the same law.
pub fn max_representation_sample<S: MaxSampler + ?Sized>(
    kernel: &Kernel,
    sampler: &S,
    t: f64,
    x0: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    max_representation_with(kernel, sampler, t, x0, reps, seed, false)
}

/// [`max_representation_sample`] with every `I_j` replaced by its mean
/// `1 / idle_rate` when `mean_idle` is set.
pub fn max_representation_with<S: MaxSampler + ?Sized>(
    kernel: &Kernel,
    sampler: &S,
    t: f64,
    x0: f64,
    reps: usize,
    seed: u64,
    mean_idle: bool,
) -> Result<Vec<f64>> {
    check_start(x0)?;
    let steps = kernel.steps_for(t) as usize;
    Ok((0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            let mut idles = Vec::with_capacity(steps);
            let mut maxima = Vec::with_capacity(steps);
            for _ in 0..steps {
                let i = kernel.idle(&mut rng);
                idles.push(if mean_idle { 1.0 / kernel.idle_rate } else { i });
                maxima.push(sampler.sample_max(&mut rng));
            }
            // Step k draws (I_k, M_k); term k subtracts the idles drawn after
            // it, which is the pathwise unrolling of the recursion.
            let mut best = f64::NEG_INFINITY;
            let mut suffix = 0.0;
            for k in (0..steps).rev() {
                best = best.max(maxima[k] - suffix);
                suffix += idles[k];
            }
            (x0 - suffix / kernel.scale).max(best / kernel.scale)
        })
        .collect())
}

/// `n m̄⁽ⁿ⁾(n y)` at each `y`.
pub fn scaled_max_cdf_probe(schedule: &HeavyTrafficSchedule, y_grid: &[f64]) -> Result<Vec<f64>> {
    y_grid.iter().map(|&y| shifted_probe(schedule, y, 0.0)).collect()
}

/// `n m̄⁽ⁿ⁾(n y + shift)`.
pub fn shifted_probe(schedule: &HeavyTrafficSchedule, y: f64, shift: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(domain("y", y, "probe point must be positive"));
    }
    let w = (schedule.n * y + shift).max(0.0);
    Ok(schedule.n * solve_tail_at(schedule.lambda_n, &schedule.dist, w)?)
}

/// Mean over `reps` of `(1/n) max_{k ≤ [nt]} |Σ_{i ≤ k} (I_i - 1/λ_n)|`.
pub fn idle_sum_flatness(kernel: &Kernel, t: f64, reps: usize, seed: u64) -> f64 {
    let steps = kernel.steps_for(t);
    if steps == 0 || reps == 0 {
        return 0.0;
    }
    let mean = 1.0 / kernel.idle_rate;
    let total: f64 = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64);
            let (mut sum, mut worst) = (0.0f64, 0.0f64);
            for _ in 0..steps {
                sum += kernel.idle(&mut rng) - mean;
                worst = worst.max(sum.abs());
            }
            worst / kernel.scale
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    total / reps as f64
}

/// States `burn_in + 1 ..= burn_in + steps` of a single long chain.
pub fn long_run<S: MaxSampler + ?Sized>(
    kernel: &Kernel,
    sampler: &S,
    x0: f64,
    burn_in: u64,
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_start(x0)?;
    let mut rng = stream(seed, 0);
    let mut s = ChainState::new(x0);
    for _ in 0..burn_in {
        s = step(s, kernel, sampler, &mut rng);
    }
    Ok((0..steps)
        .map(|_| {
            s = step(s, kernel, sampler, &mut rng);
            s.value
        })
        .collect())
}
