//! Shared helpers for the inequality and acceptance suites: randomized
//! instance generators and the four Keller-type checks, each returning the
//! two sides of its inequality so callers can assert with the documented
//! one-cell discretization slack.

// each test binary uses its own subset of these helpers
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lorenz_stability::function_space::{
    osc_l1, oscillation_restricted, p_variation, seminorm_v11p, GridFunction,
};
use lorenz_stability::onedim_maps::{Branch, IntervalMap};

pub const RHO0: f64 = 0.05;
pub const P: f64 = 4.0;

/// Deterministic RNG for a named suite.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A varied pool of test profiles: indicators, smooth waves, spikes and
/// seeded rough piecewise-constant functions.
pub fn random_function(n: usize, rng: &mut ChaCha8Rng) -> GridFunction {
    match rng.random_range(0..5u32) {
        0 => {
            let a = rng.random_range(-0.5..0.3);
            let b = a + rng.random_range(0.05..f64::max(0.5 - a, 0.06));
            GridFunction::indicator(n, a, b.min(0.5)).unwrap()
        }
        1 => {
            let k = rng.random_range(1..6) as f64;
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            GridFunction::from_fn(n, |x| (k * std::f64::consts::TAU * x + phase).sin()).unwrap()
        }
        2 => {
            let c = rng.random_range(-0.4..0.4);
            GridFunction::from_fn(n, |x| ((x - c).abs() + 0.03).powf(-0.25)).unwrap()
        }
        3 => {
            // piecewise constant on a coarse random partition
            let blocks = rng.random_range(3..10usize);
            let mut levels = Vec::new();
            for _ in 0..blocks {
                levels.push(rng.random_range(-1.0..1.0));
            }
            GridFunction::from_fn(n, |x| {
                let idx = (((x + 0.5) * blocks as f64) as usize).min(blocks - 1);
                levels[idx]
            })
            .unwrap()
        }
        _ => {
            let slope = rng.random_range(-2.0..2.0);
            let jump = rng.random_range(-1.0..1.0);
            let at = rng.random_range(-0.3..0.3);
            GridFunction::from_fn(n, |x| slope * x + if x > at { jump } else { 0.0 }).unwrap()
        }
    }
}

/// `V_{1,1/p}(f) <= 2^{1/p} V_p(f)`: returns (lhs, rhs).
pub fn fact2_sides(f: &GridFunction) -> (f64, f64) {
    let lhs = seminorm_v11p(f, RHO0, P).unwrap().v11p;
    let rhs = 2f64.powf(1.0 / P) * p_variation(f, P).unwrap();
    (lhs, rhs)
}

/// Localization inequality for `f * 1_Y` on an interval `Y` with
/// `|Y| >= 4 rho0`: returns (lhs, rhs).
pub fn fact1_sides(f: &GridFunction, y_lo: usize, y_hi: usize, rho: f64) -> (f64, f64) {
    let n = f.n();
    let w = f.width();
    let y_len = (y_hi - y_lo + 1) as f64 * w;
    let cut = GridFunction::new(
        (0..n)
            .map(|i| {
                if i >= y_lo && i <= y_hi {
                    f.values()[i]
                } else {
                    0.0
                }
            })
            .collect(),
    )
    .unwrap();
    let lhs = osc_l1(&cut, rho).unwrap();

    let mut osc_int = 0.0;
    let mut abs_int = 0.0;
    for i in y_lo..=y_hi {
        osc_int += oscillation_restricted(f, rho, f.midpoint(i), y_lo, y_hi).unwrap() * w;
        abs_int += f.values()[i].abs() * w;
    }
    let rhs = (2.0 + 8.0 * RHO0 / (y_len - 2.0 * RHO0)) * osc_int + 4.0 * rho / y_len * abs_int;
    (lhs, rhs)
}

/// Sampled oscillation of an arbitrary function given as ordered
/// `(point, value)` samples: max minus min over samples in the open ball.
fn sampled_osc(samples: &[(f64, f64)], rho: f64, x: f64) -> f64 {
    let mut mn = f64::INFINITY;
    let mut mx = f64::NEG_INFINITY;
    for &(z, v) in samples {
        if (z - x).abs() < rho {
            mn = mn.min(v);
            mx = mx.max(v);
        }
    }
    if mx < mn {
        0.0
    } else {
        mx - mn
    }
}

/// Composition inequality through one differentiable branch `T: Y -> Z`:
/// returns (lhs, rhs). `f` lives on the carrier grid; the composed
/// functions are sampled on `m` points of `Z`.
pub fn fact3_sides(
    map: &impl IntervalMap,
    branch: Branch,
    f: &GridFunction,
    y_lo: f64,
    y_hi: f64,
    rho: f64,
    m: usize,
) -> (f64, f64) {
    let c_theta = map.min_slope();
    let z_lo = map.eval_branch(branch, y_lo);
    let z_hi = map.eval_branch(branch, y_hi);
    let dz = (z_hi - z_lo) / m as f64;

    // samples of (f / T') o T^{-1} and of (1 / T') o T^{-1} over Z
    let mut comp = Vec::with_capacity(m);
    let mut inv_deriv = Vec::with_capacity(m);
    for k in 0..m {
        let z = z_lo + (k as f64 + 0.5) * dz;
        let x = map.branch_inverse(branch, z).unwrap();
        let d = map.derivative_branch(branch, x);
        comp.push((z, f.value_at(x) / d));
        inv_deriv.push((z, 1.0 / d));
    }
    let lhs: f64 = comp
        .iter()
        .map(|&(z, _)| sampled_osc(&comp, rho, z) * dz)
        .sum();

    // right side: oscillation of f over Y at the contracted radius, plus the
    // product correction
    let w = f.width();
    let lo_cell = f.cell_of(y_lo + 1e-12);
    let hi_cell = f.cell_of(y_hi - 1e-12);
    let mut osc_y_contracted = 0.0;
    let mut osc_y_rho0 = 0.0;
    let mut abs_y = 0.0;
    for i in lo_cell..=hi_cell {
        let x = f.midpoint(i);
        osc_y_contracted +=
            oscillation_restricted(f, rho / c_theta, x, lo_cell, hi_cell).unwrap() * w;
        osc_y_rho0 += oscillation_restricted(f, RHO0, x, lo_cell, hi_cell).unwrap() * w;
        abs_y += f.values()[i].abs() * w;
    }
    let y_len = (hi_cell - lo_cell + 1) as f64 * w;
    let osc_inv: f64 = inv_deriv
        .iter()
        .map(|&(z, _)| sampled_osc(&inv_deriv, rho, z) * dz)
        .sum();
    let rhs = osc_y_contracted + 5.0 * osc_inv * (abs_y / y_len + osc_y_rho0 / RHO0);
    (lhs, rhs)
}

/// Duality pairing bound `|int f u dx| <= (1 + rho0^{1/p}) ||f||_{1,1/p}
/// sup_z |int_{x<=z} u dx|`: returns (lhs, rhs). `u` must be simple with
/// `||u||_inf <= 1`; blocks comparable to `rho0` or wider keep the primitive
/// at the oscillation scale the seminorm controls.
pub fn skeller_sides(f: &GridFunction, u: &GridFunction) -> (f64, f64) {
    let lhs = f.inner(u).unwrap().abs();
    let norm = seminorm_v11p(f, RHO0, P).unwrap().norm;
    let w = u.width();
    let mut acc = 0.0;
    let mut sup = 0.0f64;
    for &v in u.values() {
        acc += v * w;
        sup = sup.max(acc.abs());
    }
    let rhs = (1.0 + RHO0.powf(1.0 / P)) * norm * sup;
    (lhs, rhs)
}

/// Random coarse sign function with blocks at least `2 rho0` wide.
pub fn random_sign_blocks(n: usize, rng: &mut ChaCha8Rng) -> GridFunction {
    let max_blocks = ((1.0 / (2.0 * RHO0)) as usize).max(2);
    let blocks = rng.random_range(2..=max_blocks);
    let mut levels = Vec::with_capacity(blocks);
    for _ in 0..blocks {
        levels.push(if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    }
    GridFunction::from_fn(n, |x| {
        let idx = (((x + 0.5) * blocks as f64) as usize).min(blocks - 1);
        levels[idx]
    })
    .unwrap()
}

/// Random cell-aligned interval `[lo, hi]` (inclusive cell range) with
/// length at least `4 rho0`.
pub fn random_wide_interval(n: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
    let min_cells = ((4.0 * RHO0) * n as f64).ceil() as usize + 1;
    let len = rng.random_range(min_cells..=n);
    let lo = rng.random_range(0..=(n - len));
    (lo, lo + len - 1)
}

/// Exact grid coboundary `nu o T - nu` for a map whose branch inverses halve
/// scales: `nu` lives on an `n`-cell grid, the output on the `2n`-cell grid,
/// where the pullback `nu o T` is again piecewise constant (each fine cell
/// maps into exactly one coarse cell).
pub fn exact_coboundary(map: &impl IntervalMap, nu: &GridFunction) -> GridFunction {
    let m = 2 * nu.n();
    GridFunction::from_fn(m, |x| {
        let y = map
            .eval(x)
            .unwrap_or_else(|_| map.eval(x + 1e-13).unwrap());
        nu.value_at(y) - nu.value_at(x)
    })
    .unwrap()
}
