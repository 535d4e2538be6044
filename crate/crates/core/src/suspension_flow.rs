//! The Poincare skew product over a one-dimensional base map, the
//! logarithmic return time, and the suspension semiflow built from them:
//! SRB averages, the flow variance ratio formula and an empirical flow CLT.
//!
//! The fiber map is affine, `g(x, y) = beta y + delta sign(x - O)`, which
//! preserves the vertical foliation exactly and contracts leaves by `beta`
//! per step. Observables are constant on stable leaves by construction, so
//! the induced return observable depends on the base coordinate alone and
//! the martingale coboundary term vanishes identically after centering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::function_space::GridFunction;
use crate::onedim_maps::{IntervalMap, I_HI, I_LO};
use crate::statistics::{
    center_observable, green_kubo_variance, ks_distance, sample_from_density, step_dithered,
    GreenKuboOptions, VarianceResult,
};
use crate::transfer_operator::UlamOperator;

/// Skew product `F(x, y) = (T(x), beta y + delta sign(x - O))`.
#[derive(Debug, Clone)]
pub struct SkewProduct<M: IntervalMap> {
    pub base: M,
    beta: f64,
    delta: f64,
}

impl<M: IntervalMap> SkewProduct<M> {
    pub fn new(base: M, beta: f64, delta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Precondition(format!(
                "fiber contraction beta = {beta} must lie in (0, 1)"
            )));
        }
        if !(delta > 0.0 && delta <= (1.0 - beta) / 2.0) {
            return Err(Error::Precondition(format!(
                "shift delta = {delta} must lie in (0, (1 - beta)/2] so the fiber image stays in [-1/2, 1/2]"
            )));
        }
        Ok(SkewProduct { base, beta, delta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// One Poincare step. Vertical segments map to vertical segments; the
    /// fiber coordinate contracts by exactly `beta`.
    pub fn step(&self, point: (f64, f64)) -> Result<(f64, f64)> {
        let (x, y) = point;
        let x_next = self.base.eval(x)?;
        let sign = if x > self.base.cut() { 1.0 } else { -1.0 };
        let y_next = self.beta * y + self.delta * sign;
        Ok((x_next, y_next))
    }
}

/// Suspension of the skew product under the capped logarithmic roof
/// `tau(x) = min(-(1/lambda1) log|x - O|, tau_cap)`.
#[derive(Debug, Clone)]
pub struct SuspensionSystem<M: IntervalMap> {
    pub skew: SkewProduct<M>,
    lambda1: f64,
    tau_cap: f64,
}

impl<M: IntervalMap> SuspensionSystem<M> {
    /// `tau_cap` may be `f64::INFINITY` for the uncapped roof. Production
    /// sweeps keep `lambda1 * tau_cap >= 10` so the region where the cap
    /// engages has measure at most `2 exp(-lambda1 tau_cap)`; that budget is
    /// enforced at the experiment-config layer because the constant-roof
    /// collapse regime (cap engaged on all of `I`, `lambda1 tau_cap <= ln 2`)
    /// is also a valid system here.
    pub fn new(skew: SkewProduct<M>, lambda1: f64, tau_cap: f64) -> Result<Self> {
        if !(lambda1 > 0.0) {
            return Err(Error::Precondition(format!(
                "lambda1 = {lambda1} must be positive"
            )));
        }
        if !(tau_cap > 0.0) {
            return Err(Error::Precondition(format!(
                "tau_cap = {tau_cap} must be positive"
            )));
        }
        Ok(SuspensionSystem {
            skew,
            lambda1,
            tau_cap,
        })
    }

    /// Whether the capped region near the cut has negligible measure
    /// (at most `2 exp(-10)`).
    pub fn truncation_is_negligible(&self) -> bool {
        !self.tau_cap.is_finite() || self.lambda1 * self.tau_cap >= 10.0
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    pub fn tau_cap(&self) -> f64 {
        self.tau_cap
    }

    /// Default cap: ten e-foldings of the grid resolution guard.
    pub fn default_tau_cap(lambda1: f64, n_cells: usize) -> f64 {
        10.0 / lambda1 * (n_cells.max(16) as f64).ln()
    }

    /// Return time to the section; diverges logarithmically at the cut and
    /// is capped at `tau_cap`.
    pub fn return_time(&self, x: f64) -> Result<f64> {
        let cut = self.skew.base.cut();
        if x == cut {
            return Err(Error::AtDiscontinuity(cut));
        }
        if !(I_LO..=I_HI).contains(&x) {
            return Err(Error::Precondition(format!("x = {x} outside I")));
        }
        Ok(((-(x - cut).abs().ln()) / self.lambda1).min(self.tau_cap))
    }

    fn return_time_lenient(&self, x: f64) -> f64 {
        let cut = self.skew.base.cut();
        let d = (x - cut).abs().max(1e-300);
        ((-d.ln()) / self.lambda1).min(self.tau_cap)
    }
}

/// `int_0^u (-ln t) dt = u - u ln u`, continued by 0 at u = 0.
fn neg_log_primitive(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        u - u * u.ln()
    }
}

/// Exact `int_s^e min(-(1/lambda1) ln|t|, cap) dt` for `s <= e`.
fn capped_log_integral(s: f64, e: f64, lambda1: f64, cap: f64) -> f64 {
    if e <= s {
        return 0.0;
    }
    let r = if cap.is_finite() {
        (-lambda1 * cap).exp()
    } else {
        0.0
    };
    // positive side beyond the cap radius
    let pos = {
        let lo = s.max(r);
        let hi = e.max(r);
        if hi > lo {
            (neg_log_primitive(hi) - neg_log_primitive(lo)) / lambda1
        } else {
            0.0
        }
    };
    // negative side beyond the cap radius
    let neg = {
        let lo = (-e).max(r);
        let hi = (-s).max(r);
        if hi > lo {
            (neg_log_primitive(hi) - neg_log_primitive(lo)) / lambda1
        } else {
            0.0
        }
    };
    // capped middle
    let mid = if cap.is_finite() {
        let lo = s.max(-r);
        let hi = e.min(r);
        cap * (hi - lo).max(0.0)
    } else {
        0.0
    };
    pos + neg + mid
}

/// Mean return time with its cutoff sequence.
#[derive(Debug, Clone)]
pub struct MeanReturnTime {
    /// `int tau h dx`, with the logarithmic singularity integrated in
    /// closed form against the piecewise-constant density.
    pub value: f64,
    /// `(N, int min(tau, N) h dx)` for a geometric ladder of cutoffs.
    pub cutoffs: Vec<(f64, f64)>,
}

/// Integrate the roof against a grid density. The integral over each cell is
/// exact for the capped logarithm, so the only error is the density's own
/// discretization.
pub fn mean_return_time<M: IntervalMap>(
    system: &SuspensionSystem<M>,
    h: &GridFunction,
) -> MeanReturnTime {
    let cut = system.skew.base.cut();
    let integrate = |cap: f64| -> f64 {
        let w = h.width();
        let mut acc = 0.0;
        for i in 0..h.n() {
            let a = I_LO + i as f64 * w - cut;
            let b = a + w;
            acc += h.values()[i] * capped_log_integral(a, b, system.lambda1, cap);
        }
        acc
    };
    let value = integrate(system.tau_cap);
    let mut cutoffs = Vec::new();
    let mut n = 0.5;
    while n < system.tau_cap.min(64.0) {
        cutoffs.push((n, integrate(n)));
        n *= 2.0;
    }
    cutoffs.push((system.tau_cap, value));
    MeanReturnTime { value, cutoffs }
}

/// Time weight profile `w(t)` of a flow observable.
#[derive(Debug, Clone)]
pub enum TimeProfile {
    /// `w(t) = c` exactly.
    Constant(f64),
    /// Nonnegative samples on the uniform grid over `[0, t_max]`, extended
    /// beyond `t_max` by the final value.
    Sampled { t_max: f64, values: Vec<f64> },
}

impl TimeProfile {
    /// Cumulative integral `W(t) = int_0^t w`, trapezoidal on samples.
    pub fn cumulative(&self, t: f64) -> f64 {
        match self {
            TimeProfile::Constant(c) => c * t,
            TimeProfile::Sampled { t_max, values } => {
                if values.len() < 2 || *t_max <= 0.0 {
                    return 0.0;
                }
                let dt = t_max / (values.len() - 1) as f64;
                let t_eff = t.min(*t_max);
                let k = ((t_eff / dt).floor() as usize).min(values.len() - 2);
                let mut acc = 0.0;
                for j in 0..k {
                    acc += 0.5 * (values[j] + values[j + 1]) * dt;
                }
                let frac = t_eff - k as f64 * dt;
                if frac > 0.0 {
                    let v_end = values[k] + (values[k + 1] - values[k]) * (frac / dt);
                    acc += 0.5 * (values[k] + v_end) * frac;
                }
                if t > *t_max {
                    acc += values[values.len() - 1] * (t - t_max);
                }
                acc
            }
        }
    }
}

/// A flow observable `psi(xi, t) = base_part(pi(xi)) * w(t)`, constant on
/// stable leaves by construction.
#[derive(Debug, Clone)]
pub struct FlowObservableSpec {
    pub base_part: GridFunction,
    pub time_profile: TimeProfile,
}

impl FlowObservableSpec {
    pub fn with_unit_profile(base_part: GridFunction) -> Self {
        FlowObservableSpec {
            base_part,
            time_profile: TimeProfile::Constant(1.0),
        }
    }
}

/// The return integral `Psi(x) = base_part(x) * int_0^{tau(x)} w(t) dt`.
pub fn flow_integral_observable<M: IntervalMap>(
    system: &SuspensionSystem<M>,
    spec: &FlowObservableSpec,
    x: f64,
) -> Result<f64> {
    let tau = system.return_time(x)?;
    Ok(spec.base_part.value_at(x) * spec.time_profile.cumulative(tau))
}

/// Represent `Psi` as a grid function on the carrier grid of `base_part`.
pub fn induced_observable<M: IntervalMap>(
    system: &SuspensionSystem<M>,
    spec: &FlowObservableSpec,
) -> GridFunction {
    let n = spec.base_part.n();
    GridFunction::from_fn(n, |x| {
        spec.base_part.value_at(x) * spec.time_profile.cumulative(system.return_time_lenient(x))
    })
    .expect("n >= 2")
}

/// Flow variance by the ratio formula
/// `sigma^2_X = sigma^2_F(Psi) / int tau dmu_F`, with `sigma^2_F(Psi)` the
/// Green-Kubo variance of the induced base observable.
#[derive(Debug, Clone)]
pub struct FlowVariance {
    pub sigma2_flow: f64,
    /// Variance of the centered return integral under the base map.
    pub sigma2_return: f64,
    pub mean_tau: f64,
    pub gk: VarianceResult,
}

pub fn flow_variance<M: IntervalMap>(
    system: &SuspensionSystem<M>,
    spec: &FlowObservableSpec,
    op: &UlamOperator,
    h: &GridFunction,
    opts: GreenKuboOptions,
) -> Result<FlowVariance> {
    let psi_big = induced_observable(system, spec);
    let obs = center_observable(&psi_big, h, op.eps())?;
    let gk = green_kubo_variance(&obs, h, op, opts)?;
    let mean_tau = mean_return_time(system, h).value;
    if !(mean_tau > 0.0) {
        return Err(Error::Numerical(format!(
            "mean return time {mean_tau} must be positive"
        )));
    }
    Ok(FlowVariance {
        sigma2_flow: gk.sigma2 / mean_tau,
        sigma2_return: gk.sigma2,
        mean_tau,
        gk,
    })
}

/// SRB average of a flow observable by the time-average form of the ratio
/// formula over one long skew-product orbit.
#[derive(Debug, Clone)]
pub struct SrbAverage {
    pub value: f64,
    /// Batch-means standard error of the ratio estimate.
    pub std_error: f64,
    /// Number of exact cut hits that were nudged off by one ulp.
    pub cut_nudges: usize,
    pub orbit_length: usize,
}

const SRB_BURN_IN: usize = 1000;

pub fn srb_flow_average<M: IntervalMap>(
    system: &SuspensionSystem<M>,
    spec: &FlowObservableSpec,
    orbit_length: usize,
    seed: u64,
) -> Result<SrbAverage> {
    if orbit_length < 10_000 {
        return Err(Error::Precondition(format!(
            "orbit_length = {orbit_length} must be >= 10^4"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = rng.random::<f64>() - 0.5;
    let mut y = rng.random::<f64>() - 0.5;
    let mut nudges = 0usize;

    for _ in 0..SRB_BURN_IN {
        if x == system.skew.base.cut() {
            x += f64::EPSILON * x.abs().max(1e-12);
            nudges += 1;
        }
        let (nx, ny) = step_skew_lenient(&system.skew, x, y, &mut rng);
        x = nx;
        y = ny;
    }

    let n_batches = 32usize;
    let batch_len = orbit_length / n_batches;
    let mut batch_ratios = Vec::with_capacity(n_batches);
    let mut num_total = 0.0;
    let mut den_total = 0.0;
    for _ in 0..n_batches {
        let mut num = 0.0;
        let mut den = 0.0;
        for _ in 0..batch_len {
            if x == system.skew.base.cut() {
                x += f64::EPSILON * x.abs().max(1e-12);
                nudges += 1;
            }
            let tau = system.return_time_lenient(x);
            num += spec.base_part.value_at(x) * spec.time_profile.cumulative(tau);
            den += tau;
            let (nx, ny) = step_skew_lenient(&system.skew, x, y, &mut rng);
            x = nx;
            y = ny;
        }
        num_total += num;
        den_total += den;
        if den > 0.0 {
            batch_ratios.push(num / den);
        }
    }
    let value = num_total / den_total;
    let mean_b = batch_ratios.iter().sum::<f64>() / batch_ratios.len() as f64;
    let var_b = batch_ratios
        .iter()
        .map(|r| (r - mean_b).powi(2))
        .sum::<f64>()
        / (batch_ratios.len() - 1).max(1) as f64;
    Ok(SrbAverage {
        value,
        std_error: (var_b / batch_ratios.len() as f64).sqrt(),
        cut_nudges: nudges,
        orbit_length: n_batches * batch_len,
    })
}

fn step_skew_lenient<M: IntervalMap>(
    skew: &SkewProduct<M>,
    x: f64,
    y: f64,
    rng: &mut impl rand::Rng,
) -> (f64, f64) {
    let x_next = step_dithered(&skew.base, x, rng);
    let sign = if x > skew.base.cut() { 1.0 } else { -1.0 };
    (x_next, skew.beta() * y + skew.delta() * sign)
}

/// Monte-Carlo CLT for the suspension semiflow: normalized time integrals
/// `t^{-1/2} int_0^t psi(X(s)) ds` over seeded trajectories started on the
/// section from the base invariant density, compared to the normal law with
/// variance `sigma2_flow`.
pub fn flow_clt_empirical<M: IntervalMap>(
    system: &SuspensionSystem<M>,
    spec: &FlowObservableSpec,
    h: &GridFunction,
    sigma2_flow: f64,
    t_horizon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if sigma2_flow <= 1e-8 {
        return Err(Error::DegenerateVariance {
            sigma2: sigma2_flow,
        });
    }
    if !(t_horizon > 0.0) {
        return Err(Error::Precondition("t_horizon must be positive".into()));
    }
    let mut integrals: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut x = sample_from_density(h, rng.random::<f64>());
            let mut time = 0.0;
            let mut acc = 0.0;
            while time < t_horizon {
                let tau = system.return_time_lenient(x);
                let base = spec.base_part.value_at(x);
                if time + tau >= t_horizon {
                    acc += base * spec.time_profile.cumulative(t_horizon - time);
                    break;
                }
                acc += base * spec.time_profile.cumulative(tau);
                time += tau;
                x = step_dithered(&system.skew.base, x, &mut rng);
            }
            acc / t_horizon.sqrt()
        })
        .collect();
    // center empirically: the observable is centered against the flow
    // measure only up to discretization, which would otherwise bias the
    // comparison by a deterministic O(sqrt(t)) offset
    let mean = integrals.iter().sum::<f64>() / integrals.len() as f64;
    for v in &mut integrals {
        *v -= mean;
    }
    Ok(ks_distance(&mut integrals, sigma2_flow))
}

/// Direct batch-means estimate of the flow variance: the sample variance of
/// the normalized time integrals over seeded trajectories.
pub fn flow_variance_batch_means<M: IntervalMap>(
    system: &SuspensionSystem<M>,
    spec: &FlowObservableSpec,
    h: &GridFunction,
    t_horizon: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let vals: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut x = sample_from_density(h, rng.random::<f64>());
            let mut time = 0.0;
            let mut acc = 0.0;
            while time < t_horizon {
                let tau = system.return_time_lenient(x);
                let base = spec.base_part.value_at(x);
                if time + tau >= t_horizon {
                    acc += base * spec.time_profile.cumulative(t_horizon - time);
                    break;
                }
                acc += base * spec.time_profile.cumulative(tau);
                time += tau;
                x = step_dithered(&system.skew.base, x, &mut rng);
            }
            acc / t_horizon.sqrt()
        })
        .collect();
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    Ok(vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0))
}
