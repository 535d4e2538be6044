//! Acceptance suite: one test per criterion, each printing a [PASS]/[FAIL]
//! line with its runtime. Run `cargo test --test acceptance -- --nocapture`
//! to see every line.
//!
//! Criterion 7 carries a known red leg: the duality pairing bound with the
//! constant `1 + rho0^{1/p}` is violated by one instance of its committed
//! randomized suite; `keller_inequalities.rs` pins that counterexample. The
//! assertion here is intentionally kept as specified rather than loosened.

mod common;

use std::time::Instant;

use common::*;
use rand::Rng;

use lorenz_stability::config::ExperimentConfig;
use lorenz_stability::experiments;
use lorenz_stability::function_space::{normalize_bv, standard_basket, GridFunction};
use lorenz_stability::onedim_maps::{DoublingMap, IntervalMap, ModelFamily, ModelMapParams};
use lorenz_stability::statistics::{
    center_observable, clt_empirical, green_kubo_variance, variance_continuity_curve,
    GreenKuboOptions, VarianceCurveConfig,
};
use lorenz_stability::suspension_flow::{
    flow_variance, flow_variance_batch_means, mean_return_time, srb_flow_average,
    FlowObservableSpec, SkewProduct, SuspensionSystem,
};
use lorenz_stability::transfer_operator::{
    invariant_density, lasota_yorke_probe, mixed_norm_distance, ulam_matrix, LasotaYorkeEstimate,
    UlamOperator,
};

const EPS_GRID: [f64; 5] = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4];

fn criterion(
    number: u32,
    name: &str,
    limit_secs: Option<f64>,
    body: impl FnOnce() -> Result<String, String>,
) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed().as_secs_f64();
    match &outcome {
        Ok(summary) => println!("[PASS] C{number} {name}: {summary} ({elapsed:.2} s)"),
        Err(reason) => println!("[FAIL] C{number} {name}: {reason} ({elapsed:.2} s)"),
    }
    if let Some(limit) = limit_secs {
        assert!(
            elapsed < limit,
            "C{number} exceeded its runtime budget: {elapsed:.2} s >= {limit} s"
        );
    }
    if let Err(reason) = outcome {
        panic!("C{number} {name} failed: {reason}");
    }
}

fn model_density(eps: f64, n: usize, tol: f64) -> (ModelMapParams, UlamOperator, GridFunction) {
    let map = ModelMapParams::new(0.75, eps).unwrap();
    let op = ulam_matrix(&map, n).unwrap();
    let h = invariant_density(&op, tol, 200_000).unwrap().h;
    (map, op, h)
}

fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

#[test]
fn c01_oracle_density() {
    criterion(1, "oracle density", Some(5.0), || {
        let op = ulam_matrix(&DoublingMap, 1024).map_err(|e| e.to_string())?;
        let res = invariant_density(&op, 1e-10, 100_000).map_err(|e| e.to_string())?;
        let gap = res
            .h
            .l1_distance(&GridFunction::constant(1024, 1.0))
            .unwrap();
        if gap <= 1e-8 {
            Ok(format!("||h - 1||_1 = {gap:.2e} at n = 1024"))
        } else {
            Err(format!("||h - 1||_1 = {gap:.2e} exceeds 1e-8"))
        }
    });
}

#[test]
fn c02_oracle_variance() {
    criterion(2, "oracle variance", Some(10.0), || {
        use std::f64::consts::TAU;
        // independent oracle: Fourier orthogonality of the first three
        // correlation integrals, by Simpson quadrature
        let simpson = |g: &dyn Fn(f64) -> f64| -> f64 {
            let panels = 4096;
            let h = 1.0 / panels as f64;
            let mut acc = g(0.0) + g(1.0);
            for k in 1..panels {
                acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
            }
            acc * h / 3.0
        };
        for k in 1..=3i32 {
            let scale = 2f64.powi(k);
            let corr = simpson(&|u| (TAU * u).cos() * (TAU * scale * u).cos());
            if corr.abs() >= 1e-6 {
                return Err(format!("oracle correlation at lag {k} is {corr:.2e}"));
            }
        }
        let op = ulam_matrix(&DoublingMap, 1024).unwrap();
        let h = invariant_density(&op, 1e-12, 10_000).unwrap().h;
        let psi = GridFunction::from_fn(1024, |x| (TAU * (x + 0.5)).cos()).unwrap();
        let obs = center_observable(&psi, &h, 0.0).unwrap();
        let gk = green_kubo_variance(&obs, &h, &op, GreenKuboOptions::default())
            .map_err(|e| e.to_string())?;
        if (gk.sigma2 - 0.5).abs() <= 1e-3 {
            Ok(format!(
                "sigma^2 = {:.6} (oracle 0.5, N = {})",
                gk.sigma2, gk.truncation
            ))
        } else {
            Err(format!("sigma^2 = {} not within 1e-3 of 0.5", gk.sigma2))
        }
    });
}

#[test]
fn c03_coboundary_degeneracy() {
    criterion(3, "coboundary degeneracy", None, || {
        let n = 256;
        let m = 2 * n;
        let op = ulam_matrix(&DoublingMap, m).unwrap();
        let h = invariant_density(&op, 1e-12, 10_000).unwrap().h;
        let mut r = rng(33);
        let nus: Vec<(String, GridFunction)> = vec![
            ("indicator_quarter".into(), GridFunction::indicator(n, 0.0, 0.25).unwrap()),
            ("indicator_left".into(), GridFunction::indicator(n, -0.25, 0.0).unwrap()),
            ("hat".into(), GridFunction::from_fn(n, |x| 1.0 - 2.0 * x.abs()).unwrap()),
            (
                "cosine".into(),
                GridFunction::from_fn(n, |x| (std::f64::consts::TAU * (x + 0.5)).cos()).unwrap(),
            ),
            ("random_blocks".into(), {
                let blocks = 8;
                let mut levels = Vec::new();
                for _ in 0..blocks {
                    levels.push(r.random_range(-1.0..1.0));
                }
                GridFunction::from_fn(n, |x| {
                    levels[(((x + 0.5) * blocks as f64) as usize).min(blocks - 1)]
                })
                .unwrap()
            }),
        ];
        let mut worst = 0.0f64;
        for (name, nu) in &nus {
            let psi_hat = exact_coboundary(&DoublingMap, nu);
            let obs = center_observable(&psi_hat, &h, 0.0).unwrap();
            let gk = green_kubo_variance(&obs, &h, &op, GreenKuboOptions::default())
                .map_err(|e| e.to_string())?;
            worst = worst.max(gk.sigma2);
            if gk.sigma2 > 1e-6 {
                return Err(format!("nu = {name}: sigma^2 = {:.2e} exceeds 1e-6", gk.sigma2));
            }
        }
        Ok(format!("5 coboundary choices, worst sigma^2 = {worst:.2e}"))
    });
}

#[test]
fn c04_statistical_stability() {
    criterion(4, "statistical stability", Some(120.0), || {
        let n = 8192;
        let (_, _, h0) = model_density(0.0, n, 1e-10);
        let mut gaps = Vec::new();
        for eps in EPS_GRID {
            let (_, _, h) = model_density(eps, n, 1e-10);
            gaps.push(h.l1_distance(&h0).unwrap());
        }
        if !strictly_decreasing(&gaps) {
            return Err(format!("||h_eps - h_0||_1 not strictly decreasing: {gaps:?}"));
        }
        let last = *gaps.last().unwrap();
        if last > 5e-2 {
            return Err(format!("final distance {last:.3e} exceeds 5e-2"));
        }
        Ok(format!(
            "distances {:.2e} .. {:.2e}, strictly decreasing at n = 8192",
            gaps[0], last
        ))
    });
}

#[test]
fn c05_mixed_norm_continuity() {
    criterion(5, "mixed-norm continuity", None, || {
        let n = 4096;
        let alpha = 0.25;
        let (map0, _, h0) = model_density(0.0, n, 1e-10);
        let mut basket = Vec::new();
        for (_, f) in standard_basket(n).into_iter().take(4) {
            basket.push(normalize_bv(&f, RHO0, 4.0).unwrap().0);
        }
        basket.push(normalize_bv(&h0, RHO0, 4.0).unwrap().0);
        let mut distances = Vec::new();
        for eps in EPS_GRID {
            let map = ModelMapParams::new(0.75, eps).unwrap();
            distances.push(mixed_norm_distance(&map, &map0, &basket, 32_768).unwrap());
        }
        if !strictly_decreasing(&distances) {
            return Err(format!("distances not strictly decreasing: {distances:?}"));
        }
        let last = *distances.last().unwrap();
        if last > 1e-1 {
            return Err(format!("final distance {last:.3e} exceeds 1e-1"));
        }
        // log-log slope
        let xs: Vec<f64> = EPS_GRID.iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = distances.iter().map(|d| d.ln()).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        if slope < 0.5 * alpha {
            return Err(format!("log-log slope {slope:.3} below 0.5 alpha = {}", 0.5 * alpha));
        }
        Ok(format!(
            "strictly decreasing, final {last:.2e}, slope {slope:.3} >= {}",
            0.5 * alpha
        ))
    });
}

#[test]
fn c06_uniform_lasota_yorke() {
    criterion(6, "uniform Lasota-Yorke", None, || {
        let n = 2048;
        let p = 4.0;
        let tol = 4.0 / n as f64;
        let (_, op0, h0) = model_density(0.0, n, 1e-10);
        let mut basket: Vec<(String, GridFunction)> = standard_basket(n)
            .into_iter()
            .take(4)
            .map(|(name, f)| (name.to_string(), f))
            .collect();
        basket.push(("invariant_density".into(), h0));
        let probe_all = |op: &UlamOperator| {
            let mut probes = Vec::new();
            for (label, f) in &basket {
                for it in 1..=6 {
                    probes.push(lasota_yorke_probe(op, f, it, RHO0, p, label).unwrap());
                }
            }
            probes
        };
        let probes0 = probe_all(&op0);
        let cert = LasotaYorkeEstimate::fit(&probes0, tol).unwrap();
        if cert.kappa > 0.9 {
            return Err(format!("fitted kappa = {} exceeds 0.9", cert.kappa));
        }
        let mut all = probes0;
        for eps in EPS_GRID {
            let map = ModelMapParams::new(0.75, eps).unwrap();
            let op = ulam_matrix(&map, n).unwrap();
            all.extend(probe_all(&op));
        }
        let violations = cert.violations(&all, tol);
        if !violations.is_empty() {
            return Err(format!(
                "{} probes violate the certificate; first: {}",
                violations.len(),
                violations[0]
            ));
        }
        Ok(format!(
            "one certificate (A1 = {:.3}, A2 = {:.3}, kappa = {:.3}) fits {} probes across the sweep",
            cert.a1,
            cert.a2,
            cert.kappa,
            all.len()
        ))
    });
}

#[test]
fn c07_keller_inequalities() {
    criterion(7, "Keller inequalities", None, || {
        let n = 1024;
        let slack = 4.0 / n as f64;
        let mut failures: Vec<String> = Vec::new();

        let mut r = rng(71);
        for i in 0..24 {
            let f = random_function(n, &mut r);
            let (lo, hi) = random_wide_interval(n, &mut r);
            let rho = r.random_range(0.005..RHO0);
            let (lhs, rhs) = fact1_sides(&f, lo, hi, rho);
            if lhs > rhs + slack {
                failures.push(format!("localization instance {i}: {lhs:.4} > {rhs:.4}"));
            }
        }

        let mut r = rng(72);
        for i in 0..24 {
            let f = random_function(n, &mut r);
            let (lhs, rhs) = fact2_sides(&f);
            if lhs > rhs + slack {
                failures.push(format!("variation-comparison instance {i}: {lhs:.4} > {rhs:.4}"));
            }
        }

        let mut r = rng(74);
        for i in 0..20 {
            let map = ModelMapParams::new(0.75, r.random_range(-0.04..0.04)).unwrap();
            let f = random_function(n, &mut r);
            let branch = if r.random_bool(0.5) {
                lorenz_stability::onedim_maps::Branch::Left
            } else {
                lorenz_stability::onedim_maps::Branch::Right
            };
            let (dlo, dhi) = map.branch_domain(branch);
            let span = dhi - dlo;
            let y_lo = r.random_range(dlo + 0.02 * span..dhi - 0.2 * span);
            let y_hi = r.random_range(y_lo + 0.1 * span..dhi - 0.01 * span);
            let rho = r.random_range(0.005..RHO0);
            let (lhs, rhs) = fact3_sides(&map, branch, &f, y_lo, y_hi, rho, 3000);
            if lhs > rhs + slack {
                failures.push(format!("composition instance {i}: {lhs:.4} > {rhs:.4}"));
            }
        }

        // the committed pairing-bound suite; the constant is known to admit
        // counterexamples (see keller_inequalities.rs), the assertion stays
        // as specified
        let mut r = rng(7);
        for i in 0..24 {
            let f = random_function(n, &mut r);
            let u = random_sign_blocks(n, &mut r);
            let (lhs, rhs) = skeller_sides(&f, &u);
            if lhs > rhs + slack {
                failures.push(format!(
                    "pairing-bound instance {i}: {lhs:.4} > {rhs:.4} (documented counterexample class)"
                ));
            }
        }

        if failures.is_empty() {
            Ok("localization, variation-comparison, composition and pairing suites all passed".into())
        } else {
            Err(failures.join("; "))
        }
    });
}

#[test]
fn c08_map_clt() {
    criterion(8, "map CLT", Some(60.0), || {
        let n = 4096;
        let (map, op, h) = model_density(0.0, n, 1e-10);
        let obs = center_observable(&GridFunction::coordinate(n), &h, 0.0).unwrap();
        let gk = green_kubo_variance(&obs, &h, &op, GreenKuboOptions::default())
            .map_err(|e| e.to_string())?;
        let ks = clt_empirical(&map, &obs, &h, gk.sigma2, 10_000, 2000, 42)
            .map_err(|e| e.to_string())?;
        if ks <= 0.05 {
            Ok(format!("KS = {ks:.4} (sigma^2 = {:.4}, seed 42)", gk.sigma2))
        } else {
            Err(format!("KS = {ks:.4} exceeds 0.05"))
        }
    });
}

#[test]
fn c09_variance_continuity() {
    criterion(9, "variance continuity", None, || {
        let cfg = VarianceCurveConfig {
            n_cells: 4096,
            gk_terms: 120,
            block_len: 10,
            ..Default::default()
        };
        let psi = GridFunction::coordinate(4096);
        let curve =
            variance_continuity_curve(&ModelFamily { gamma: 0.75 }, &psi, &EPS_GRID, cfg)
                .map_err(|e| e.to_string())?;
        if !curve.violations.is_empty() {
            return Err(curve.violations.join("; "));
        }
        let gaps: Vec<f64> = curve.points.iter().map(|p| p.gap).collect();
        let le1: Vec<f64> = curve.points.iter().map(|p| p.le1_term).collect();
        let le2: Vec<f64> = curve.points.iter().map(|p| p.le2_block).collect();
        let tails: Vec<f64> = curve.points.iter().map(|p| p.tail_gap).collect();
        for (name, series) in [
            ("variance gap", &gaps),
            ("le1 term", &le1),
            ("le2 block", &le2),
            ("tail mismatch", &tails),
        ] {
            if !strictly_decreasing(series) {
                return Err(format!("{name} not strictly decreasing: {series:?}"));
            }
        }
        Ok(format!(
            "sigma^2_0 = {:.4}; gap {:.2e} -> {:.2e}, all diagnostics decreasing",
            curve.sigma2_zero,
            gaps[0],
            gaps.last().unwrap()
        ))
    });
}

#[test]
fn c10_flow_formulas() {
    criterion(10, "flow formulas", None, || {
        // constant-roof collapse identities, exact to 1e-8
        let c = 2.0;
        let n = 1024;
        let op = ulam_matrix(&DoublingMap, n).unwrap();
        let h = invariant_density(&op, 1e-12, 10_000).unwrap().h;
        let skew = SkewProduct::new(DoublingMap, 0.3, 0.3).unwrap();
        let sys = SuspensionSystem::new(skew, 0.25, c).unwrap();
        let mrt = mean_return_time(&sys, &h);
        if (mrt.value - c).abs() > 1e-8 {
            return Err(format!("constant roof mean return {} != {c}", mrt.value));
        }
        let cosine =
            GridFunction::from_fn(n, |x| (std::f64::consts::TAU * (x + 0.5)).cos()).unwrap();
        let spec = FlowObservableSpec::with_unit_profile(cosine.clone());
        let fv = flow_variance(&sys, &spec, &op, &h, GreenKuboOptions::default())
            .map_err(|e| e.to_string())?;
        let base = green_kubo_variance(
            &center_observable(&cosine, &h, 0.0).unwrap(),
            &h,
            &op,
            GreenKuboOptions::default(),
        )
        .unwrap();
        if (fv.sigma2_flow - c * base.sigma2).abs() > 1e-8 {
            return Err(format!(
                "collapse identity broken: {} vs {}",
                fv.sigma2_flow,
                c * base.sigma2
            ));
        }
        let ones = FlowObservableSpec::with_unit_profile(GridFunction::constant(n, 1.0));
        let avg = srb_flow_average(&sys, &ones, 20_000, 10).unwrap();
        if (avg.value - 1.0).abs() > 1e-8 {
            return Err(format!("SRB normalization broken: {}", avg.value));
        }

        // ratio formula vs batch means on the model suspension
        let nm = 4096;
        let lambda1 = 11.8277238;
        let (map, opm, hm) = model_density(0.0, nm, 1e-10);
        let skew = SkewProduct::new(map, 0.3, 0.3).unwrap();
        let cap = SuspensionSystem::<ModelMapParams>::default_tau_cap(lambda1, nm);
        let sysm = SuspensionSystem::new(skew, lambda1, cap).unwrap();
        let spec = FlowObservableSpec::with_unit_profile(GridFunction::coordinate(nm));
        let fvm = flow_variance(&sysm, &spec, &opm, &hm, GreenKuboOptions::default())
            .map_err(|e| e.to_string())?;
        let batch = flow_variance_batch_means(&sysm, &spec, &hm, 1000.0, 1000, 42).unwrap();
        let rel = (fvm.sigma2_flow - batch).abs() / fvm.sigma2_flow;
        if rel > 0.15 {
            return Err(format!(
                "ratio {} vs batch means {batch}: {:.1}% > 15%",
                fvm.sigma2_flow,
                100.0 * rel
            ));
        }

        // flow variance continuity along the sweep
        let run_flow = |eps: f64| {
            let (map, op, h) = model_density(eps, nm, 1e-10);
            let skew = SkewProduct::new(map, 0.3, 0.3).unwrap();
            let sys = SuspensionSystem::new(skew, lambda1, cap).unwrap();
            let spec = FlowObservableSpec::with_unit_profile(GridFunction::coordinate(nm));
            flow_variance(&sys, &spec, &op, &h, GreenKuboOptions::default())
                .unwrap()
                .sigma2_flow
        };
        let s0 = run_flow(0.0);
        let gaps: Vec<f64> = EPS_GRID.iter().map(|&e| (run_flow(e) - s0).abs()).collect();
        if !strictly_decreasing(&gaps) {
            return Err(format!("flow variance gaps not decreasing: {gaps:?}"));
        }
        Ok(format!(
            "collapse exact, ratio vs batch {:.1}%, gaps {:.1e} -> {:.1e}",
            100.0 * rel,
            gaps[0],
            gaps.last().unwrap()
        ))
    });
}

#[test]
fn c11_return_time_continuity() {
    criterion(11, "return-time continuity", None, || {
        // closed-form oracle at lambda1 = 1, h = 1, O = 0, uncapped
        let map = ModelMapParams::new(0.75, 0.0).unwrap();
        let skew = SkewProduct::new(map, 0.3, 0.3).unwrap();
        let sys = SuspensionSystem::new(skew, 1.0, f64::INFINITY).unwrap();
        let ones = GridFunction::constant(4096, 1.0);
        let mrt = mean_return_time(&sys, &ones);
        let oracle = 1.0 + std::f64::consts::LN_2;
        if (mrt.value - oracle).abs() > 1e-6 {
            return Err(format!("oracle 1 + ln 2 missed: {} vs {oracle}", mrt.value));
        }

        // model sweep: mean return times converge to the unperturbed value
        let n = 8192;
        let lambda1 = 11.8277238;
        let cap = SuspensionSystem::<ModelMapParams>::default_tau_cap(lambda1, n);
        let run = |eps: f64| {
            let (map, _, h) = model_density(eps, n, 1e-12);
            let skew = SkewProduct::new(map, 0.3, 0.3).unwrap();
            let sys = SuspensionSystem::new(skew, lambda1, cap).unwrap();
            mean_return_time(&sys, &h).value
        };
        let m0 = run(0.0);
        let gaps: Vec<f64> = EPS_GRID.iter().map(|&e| (run(e) - m0).abs()).collect();
        if !strictly_decreasing(&gaps) {
            return Err(format!("return-time gaps not strictly decreasing: {gaps:?}"));
        }
        Ok(format!(
            "oracle within 1e-6; sweep gaps {:.1e} -> {:.1e}",
            gaps[0],
            gaps.last().unwrap()
        ))
    });
}

#[test]
fn c12_ode_validation() {
    criterion(12, "ODE validation", Some(180.0), || {
        use lorenz_stability::lorenz_ode::*;
        let params = VectorFieldParams::default();
        let spec = origin_spectrum(&params);
        if (spec.lambda1 - 11.8277).abs() > 5e-5
            || (spec.lambda2 + 22.8277).abs() > 5e-5
            || (spec.lambda3 + 8.0 / 3.0).abs() > 5e-5
            || !spec.ordering_ok
        {
            return Err(format!(
                "spectrum ({}, {}, {}) or ordering off",
                spec.lambda1, spec.lambda2, spec.lambda3
            ));
        }

        for state0 in [[1.0, 1.0, 1.0], [-5.0, -5.0, 20.0], [10.0, 8.0, 25.0]] {
            for amp in [1e-4, 1e-3] {
                let rep = gronwall_check(&params, amp, state0, 1.0, 1e-3, 10)
                    .map_err(|e| e.to_string())?;
                if rep.violated {
                    return Err(format!("closeness bound violated: start {state0:?}, amp {amp}"));
                }
            }
        }

        let report =
            section_crossings(&params, [1.0, 1.0, 1.0], 27.0, 10_000, 1e-3, 12_000.0, Some(-1))
                .map_err(|e| e.to_string())?;
        let mut pairs: Vec<(f64, f64)> = report
            .crossings
            .windows(2)
            .map(|w| (w[0].x.abs(), w[1].time_since_previous))
            .collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
        let decile = &pairs[..(pairs.len() / 10).max(1000)];
        let fit = return_time_log_fit(decile).map_err(|e| e.to_string())?;
        if fit.r_squared < 0.9 {
            return Err(format!("log fit r^2 = {} below 0.9", fit.r_squared));
        }
        Ok(format!(
            "spectrum to 4 decimals; closeness bound clean; log fit r^2 = {:.4}, c = {:.4}",
            fit.r_squared, fit.c
        ))
    });
}

#[test]
fn c13_determinism() {
    criterion(13, "determinism", None, || {
        let src = "kind = \"stability-curve\"\n\
                   [grid]\nn_cells = 512\n\
                   [sweep]\neps = [1e-2, 1e-3]\n";
        let cfg = ExperimentConfig::from_toml(src).unwrap();
        let base = std::env::temp_dir()
            .join("lorenz_stability_acceptance")
            .join(format!("det_{}", std::process::id()));
        let d1 = base.join("run1");
        let d2 = base.join("run2");
        for d in [&d1, &d2] {
            let _ = std::fs::remove_dir_all(d);
            std::fs::create_dir_all(d).unwrap();
        }
        experiments::run(&cfg, src, &d1).map_err(|e| e.to_string())?;
        experiments::run(&cfg, src, &d2).map_err(|e| e.to_string())?;
        let a = std::fs::read(d1.join("stability_curve.csv")).unwrap();
        let b = std::fs::read(d2.join("stability_curve.csv")).unwrap();
        if a != b {
            return Err("stability-curve CSV bodies differ between reruns".into());
        }

        let src2 = "kind = \"clt\"\n\
                    [map]\nfamily = \"doubling\"\n\
                    [grid]\nn_cells = 512\n\
                    [observable]\nkind = \"cosine\"\n\
                    [seeds]\nmaster = 7\nn_samples = 400\nn_steps = 2000\n";
        let cfg2 = ExperimentConfig::from_toml(src2).unwrap();
        let d3 = base.join("run3");
        let d4 = base.join("run4");
        for d in [&d3, &d4] {
            let _ = std::fs::remove_dir_all(d);
            std::fs::create_dir_all(d).unwrap();
        }
        experiments::run(&cfg2, src2, &d3).map_err(|e| e.to_string())?;
        experiments::run(&cfg2, src2, &d4).map_err(|e| e.to_string())?;
        let a = std::fs::read(d3.join("clt.csv")).unwrap();
        let b = std::fs::read(d4.join("clt.csv")).unwrap();
        if a != b {
            return Err("clt CSV bodies differ between reruns".into());
        }
        Ok("byte-identical CSV bodies across reruns for two experiment kinds".into())
    });
}
