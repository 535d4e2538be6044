//! The classical Lorenz vector field and its C^1 bump perturbations:
//! fixed-step RK4 integration, Poincare-section crossing detection with
//! Hermite refinement, the origin spectrum, the logarithmic return-time fit
//! and the Gronwall closeness bound between perturbed and unperturbed flows.

use crate::error::{Error, Result};

pub type State = [f64; 3];

/// Coefficients of the vector field plus an additive smooth bump of
/// amplitude `bump_amp` (a compactly supported mollifier along the unit
/// diagonal direction, so `||bump||_inf = bump_amp`).
#[derive(Debug, Clone, Copy)]
pub struct VectorFieldParams {
    pub sigma: f64,
    pub r: f64,
    pub b: f64,
    pub bump_amp: f64,
    pub bump_center: State,
    pub bump_width: f64,
}

impl Default for VectorFieldParams {
    fn default() -> Self {
        VectorFieldParams {
            sigma: 10.0,
            r: 28.0,
            b: 8.0 / 3.0,
            bump_amp: 0.0,
            bump_center: [0.0, 0.0, 25.0],
            bump_width: 20.0,
        }
    }
}

impl VectorFieldParams {
    pub fn with_bump(mut self, amp: f64) -> Self {
        self.bump_amp = amp;
        self
    }

    /// Mollifier profile: `exp(1 - 1/(1 - u^2))` inside the unit ball,
    /// zero outside; value 1 at the center.
    fn mollifier(u2: f64) -> f64 {
        if u2 >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - u2)).exp()
        }
    }

    pub fn field(&self, s: State) -> State {
        let [x, y, z] = s;
        let mut f = [
            self.sigma * (y - x),
            self.r * x - y - x * z,
            -self.b * z + x * y,
        ];
        if self.bump_amp != 0.0 {
            let dx = x - self.bump_center[0];
            let dy = y - self.bump_center[1];
            let dz = z - self.bump_center[2];
            let u2 = (dx * dx + dy * dy + dz * dz) / (self.bump_width * self.bump_width);
            let phi = Self::mollifier(u2);
            let e = self.bump_amp * phi / 3f64.sqrt();
            f[0] += e;
            f[1] += e;
            f[2] += e;
        }
        f
    }

    /// Frobenius bound for the Jacobian norm of the unperturbed field over
    /// the box `|x|, |y|, |z| <= radius`, by corner sampling (the entries
    /// are affine in the state, so the maximum sits at a corner).
    pub fn c1_bound(&self, radius: f64) -> f64 {
        let mut worst = 0.0f64;
        for &sx in &[-radius, radius] {
            for &sy in &[-radius, radius] {
                for &sz in &[-radius, radius] {
                    let fro = (2.0 * self.sigma * self.sigma
                        + (self.r - sz).powi(2)
                        + 1.0
                        + sx * sx
                        + sy * sy
                        + sx * sx
                        + self.b * self.b)
                        .sqrt();
                    worst = worst.max(fro);
                }
            }
        }
        worst
    }
}

fn rk4_step(params: &VectorFieldParams, s: State, dt: f64) -> State {
    let add = |a: State, b: State, c: f64| [a[0] + c * b[0], a[1] + c * b[1], a[2] + c * b[2]];
    let k1 = params.field(s);
    let k2 = params.field(add(s, k1, dt / 2.0));
    let k3 = params.field(add(s, k2, dt / 2.0));
    let k4 = params.field(add(s, k3, dt));
    [
        s[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        s[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        s[2] + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    ]
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 * self.dt
    }

    pub fn state_at_time(&self, t: f64) -> State {
        let idx = ((t / self.dt).round() as usize).min(self.states.len() - 1);
        self.states[idx]
    }
}

/// Classic fixed-step RK4; deterministic and reproducible by construction.
pub fn integrate(
    params: &VectorFieldParams,
    state0: State,
    t_total: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt <= 1e-3 + 1e-12) {
        return Err(Error::Precondition(format!("dt = {dt} must be in (0, 1e-3]")));
    }
    if t_total < dt {
        return Err(Error::Precondition(format!(
            "t_total = {t_total} must be at least dt"
        )));
    }
    let steps = (t_total / dt).round() as usize;
    let mut states = Vec::with_capacity(steps + 1);
    let mut s = state0;
    states.push(s);
    for step in 1..=steps {
        s = rk4_step(params, s, dt);
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        states.push(s);
    }
    Ok(Trajectory { dt, states })
}

/// The origin spectrum with the geometric ordering predicate
/// `0 < -lambda3 < lambda1 < -lambda2`.
#[derive(Debug, Clone, Copy)]
pub struct OriginSpectrum {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub ordering_ok: bool,
    pub real: bool,
}

/// Eigenvalues of the Jacobian at the origin, closed form: the (x, y) block
/// gives `lambda = (-(sigma+1) +- sqrt((sigma+1)^2 + 4 sigma (r-1)))/2`, the
/// z-axis decouples with eigenvalue `-b`.
pub fn origin_spectrum(params: &VectorFieldParams) -> OriginSpectrum {
    let disc = (params.sigma + 1.0).powi(2) + 4.0 * params.sigma * (params.r - 1.0);
    if disc < 0.0 {
        return OriginSpectrum {
            lambda1: f64::NAN,
            lambda2: f64::NAN,
            lambda3: -params.b,
            ordering_ok: false,
            real: false,
        };
    }
    let root = disc.sqrt();
    let lambda1 = (-(params.sigma + 1.0) + root) / 2.0;
    let lambda2 = (-(params.sigma + 1.0) - root) / 2.0;
    let lambda3 = -params.b;
    let ordering_ok = 0.0 < -lambda3 && -lambda3 < lambda1 && lambda1 < -lambda2;
    OriginSpectrum {
        lambda1,
        lambda2,
        lambda3,
        ordering_ok,
        real: true,
    }
}

/// A refined transversal crossing of the section plane.
#[derive(Debug, Clone, Copy)]
pub struct SectionCrossing {
    pub x: f64,
    pub y: f64,
    /// Flow time since the previous recorded crossing (since the start of
    /// integration for the first one).
    pub time_since_previous: f64,
    /// Sign of the transversal velocity `zdot`.
    pub direction: i8,
    /// `z - z_section` at the refined point; at most 1e-9 in magnitude.
    pub z_residual: f64,
}

#[derive(Debug, Clone)]
pub struct CrossingReport {
    pub crossings: Vec<SectionCrossing>,
    pub skipped_tangential: usize,
    /// Integration time actually spent.
    pub elapsed: f64,
}

impl CrossingReport {
    /// Return-map pairs `(x_k, dt_{k+1})`: the section coordinate of a
    /// crossing and the flight time from it to the next crossing.
    pub fn return_pairs(&self) -> Vec<(f64, f64)> {
        self.crossings
            .windows(2)
            .map(|w| (w[0].x, w[1].time_since_previous))
            .collect()
    }
}

const TANGENTIAL_VELOCITY: f64 = 1e-6;
const CROSSING_TOL: f64 = 1e-9;

/// Cubic Hermite interpolant within one step.
fn hermite(s0: State, f0: State, s1: State, f1: State, dt: f64, theta: f64) -> State {
    let h00 = (1.0 + 2.0 * theta) * (1.0 - theta) * (1.0 - theta);
    let h10 = theta * (1.0 - theta) * (1.0 - theta);
    let h01 = theta * theta * (3.0 - 2.0 * theta);
    let h11 = theta * theta * (theta - 1.0);
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = h00 * s0[i] + h10 * dt * f0[i] + h01 * s1[i] + h11 * dt * f1[i];
    }
    out
}

/// Stream the flow and collect transversal crossings of `z = z_section`,
/// bisecting the Hermite interpolant inside the bracketing step down to
/// `|z - z_section| <= 1e-9`. Crossings with `|zdot| < 1e-6` are skipped and
/// counted. With `direction_filter = Some(d)` only crossings of that sign
/// are recorded. Integration stops after `n_crossings` or `max_time`.
pub fn section_crossings(
    params: &VectorFieldParams,
    state0: State,
    z_section: f64,
    n_crossings: usize,
    dt: f64,
    max_time: f64,
    direction_filter: Option<i8>,
) -> Result<CrossingReport> {
    if !(dt > 0.0 && dt <= 1e-3 + 1e-12) {
        return Err(Error::Precondition(format!("dt = {dt} must be in (0, 1e-3]")));
    }
    let mut s = state0;
    let mut f = params.field(s);
    let mut t = 0.0;
    let mut last_crossing_t = 0.0;
    let mut crossings = Vec::new();
    let mut skipped = 0usize;
    let mut step = 0usize;
    while crossings.len() < n_crossings && t < max_time {
        let s_next = rk4_step(params, s, dt);
        if !s_next.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp { step });
        }
        let f_next = params.field(s_next);
        let g0 = s[2] - z_section;
        let g1 = s_next[2] - z_section;
        if g0 == 0.0 || g0 * g1 < 0.0 {
            // bisect theta in [0, 1] on the Hermite interpolant
            let mut lo = 0.0f64;
            let mut hi = 1.0f64;
            let mut glo = g0;
            let mut theta = 0.5;
            let mut state = s;
            let mut residual = g0;
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let mid_state = hermite(s, f, s_next, f_next, dt, mid);
                let gm = mid_state[2] - z_section;
                theta = mid;
                state = mid_state;
                residual = gm;
                if gm.abs() <= CROSSING_TOL {
                    break;
                }
                if glo * gm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    glo = gm;
                }
            }
            let t_cross = t + theta * dt;
            let zdot = params.field(state)[2];
            if zdot.abs() < TANGENTIAL_VELOCITY {
                skipped += 1;
            } else {
                let direction = if zdot > 0.0 { 1 } else { -1 };
                if direction_filter.map_or(true, |d| d == direction) {
                    crossings.push(SectionCrossing {
                        x: state[0],
                        y: state[1],
                        time_since_previous: t_cross - last_crossing_t,
                        direction,
                        z_residual: residual,
                    });
                    last_crossing_t = t_cross;
                }
            }
        }
        s = s_next;
        f = f_next;
        t += dt;
        step += 1;
    }
    Ok(CrossingReport {
        crossings,
        skipped_tangential: skipped,
        elapsed: t,
    })
}

/// Fitted logarithmic return-time law `dt = a - c ln|x - o|`.
#[derive(Debug, Clone, Copy)]
pub struct LogFit {
    pub c: f64,
    pub o: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_used: usize,
}

fn linear_fit(us: &[f64], ts: &[f64]) -> Option<(f64, f64, f64)> {
    let n = us.len() as f64;
    if us.len() < 3 {
        return None;
    }
    let mu = us.iter().sum::<f64>() / n;
    let mt = ts.iter().sum::<f64>() / n;
    let sxx: f64 = us.iter().map(|u| (u - mu).powi(2)).sum();
    let syy: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let sxy: f64 = us.iter().zip(ts).map(|(u, t)| (u - mu) * (t - mt)).sum();
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mt - slope * mu;
    let r2 = (sxy * sxy) / (sxx * syy);
    Some((slope, intercept, r2))
}

/// Least-squares fit of flight times against `-ln|x - O|`. The cut `O` is
/// seeded at the coordinate of the longest flight (closest approach) and
/// refined by a shrinking grid search maximizing r^2.
pub fn return_time_log_fit(pairs: &[(f64, f64)]) -> Result<LogFit> {
    if pairs.len() < 1000 {
        return Err(Error::Precondition(format!(
            "need at least 1000 return pairs, got {}",
            pairs.len()
        )));
    }
    let dts: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let dt_min = dts.iter().cloned().fold(f64::INFINITY, f64::min);
    let dt_max = dts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if dt_max - dt_min < 1e-9 {
        return Err(Error::FitFailure(
            "flight times are constant; no logarithmic law to fit".into(),
        ));
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let x_min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let longest = pairs
        .iter()
        .cloned()
        .fold((0.0, f64::NEG_INFINITY), |best, p| {
            if p.1 > best.1 {
                p
            } else {
                best
            }
        });

    let evaluate = |o: f64| -> Option<(f64, f64, f64)> {
        let mut us = Vec::with_capacity(pairs.len());
        let mut ts = Vec::with_capacity(pairs.len());
        for &(x, dt) in pairs {
            let d = (x - o).abs();
            if d < 1e-9 {
                continue;
            }
            us.push(-d.ln());
            ts.push(dt);
        }
        linear_fit(&us, &ts)
    };

    let mut best_o = longest.0;
    let mut best: Option<(f64, f64, f64)> = evaluate(best_o);
    let mut span = 0.05 * (x_max - x_min).max(1e-6);
    for _ in 0..6 {
        let center = best_o;
        for k in -20..=20 {
            let o = center + span * k as f64 / 20.0;
            if let Some(fit) = evaluate(o) {
                if fit.0 > 0.0 && best.map_or(true, |b| fit.2 > b.2) {
                    best = Some(fit);
                    best_o = o;
                }
            }
        }
        span *= 0.2;
    }
    let (slope, intercept, r2) = best.ok_or_else(|| {
        Error::FitFailure("no admissible fit with positive slope found".into())
    })?;
    if slope <= 0.0 {
        return Err(Error::FitFailure(format!(
            "fitted slope {slope} is not positive"
        )));
    }
    Ok(LogFit {
        c: slope,
        o: best_o,
        intercept,
        r_squared: r2,
        n_used: pairs.len(),
    })
}

/// Margins of the flow-closeness inequality
/// `|X_eps(xi, t) - X(xi, t)| <= t ||X_eps - X||_inf exp(||X||_C1 t)`
/// at a ladder of sample times; evaluated in log space since the right side
/// overflows long before the inequality becomes informative.
#[derive(Debug, Clone)]
pub struct GronwallReport {
    /// `(t, lhs, log_rhs, log-margin)` rows; margin = log_rhs - ln(lhs).
    pub rows: Vec<(f64, f64, f64, f64)>,
    pub c1_bound: f64,
    pub sup_field_distance: f64,
    pub violated: bool,
}

pub fn gronwall_check(
    params: &VectorFieldParams,
    eps_amp: f64,
    state0: State,
    t_max: f64,
    dt: f64,
    n_times: usize,
) -> Result<GronwallReport> {
    if !(t_max > 0.0 && t_max <= 2.0) {
        return Err(Error::Precondition(format!(
            "t_max = {t_max} must lie in (0, 2]; the bound is vacuous for large t"
        )));
    }
    let base = VectorFieldParams {
        bump_amp: 0.0,
        ..*params
    };
    let pert = VectorFieldParams {
        bump_amp: eps_amp,
        ..*params
    };
    let traj0 = integrate(&base, state0, t_max, dt)?;
    let traj1 = integrate(&pert, state0, t_max, dt)?;
    let c1 = base.c1_bound(100.0);
    let sup_diff = eps_amp.abs();
    let mut rows = Vec::with_capacity(n_times);
    let mut violated = false;
    for k in 1..=n_times {
        let t = t_max * k as f64 / n_times as f64;
        let a = traj0.state_at_time(t);
        let b = traj1.state_at_time(t);
        let lhs = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        let log_rhs = if sup_diff > 0.0 {
            t.ln() + sup_diff.ln() + c1 * t
        } else {
            f64::NEG_INFINITY
        };
        let margin = if lhs == 0.0 {
            f64::INFINITY
        } else {
            log_rhs - lhs.ln()
        };
        if margin < 0.0 {
            violated = true;
        }
        rows.push((t, lhs, log_rhs, margin));
    }
    Ok(GronwallReport {
        rows,
        c1_bound: c1,
        sup_field_distance: sup_diff,
        violated,
    })
}
