//! Python bindings for the main types and operations: the model map family,
//! grid-function norms, invariant densities, Green-Kubo variance, the
//! suspension roof integral and the origin spectrum, plus the experiment
//! runner itself.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lorenz_stability::config::ExperimentConfig;
use lorenz_stability::error::Error;
use lorenz_stability::experiments;
use lorenz_stability::function_space::{p_variation, seminorm_v11p, GridFunction};
use lorenz_stability::onedim_maps::{Branch, DoublingMap, IntervalMap, ModelMapParams};
use lorenz_stability::statistics::{center_observable, clt_empirical, green_kubo_variance, GreenKuboOptions};
use lorenz_stability::suspension_flow::{mean_return_time, SkewProduct, SuspensionSystem};
use lorenz_stability::transfer_operator::{invariant_density, ulam_matrix, UlamOperator};

fn err(e: Error) -> PyErr {
    match e {
        Error::Precondition(_) | Error::Validation(_) | Error::ConfigParse(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn parse_branch(branch: &str) -> PyResult<Branch> {
    match branch {
        "left" => Ok(Branch::Left),
        "right" => Ok(Branch::Right),
        other => Err(PyValueError::new_err(format!(
            "branch must be 'left' or 'right', got '{other}'"
        ))),
    }
}

enum AnyMap {
    Model(ModelMapParams),
    Doubling(DoublingMap),
}

fn parse_map(family: &str, gamma: f64, eps: f64) -> PyResult<AnyMap> {
    match family {
        "model" => Ok(AnyMap::Model(ModelMapParams::new(gamma, eps).map_err(err)?)),
        "doubling" => Ok(AnyMap::Doubling(DoublingMap)),
        other => Err(PyValueError::new_err(format!(
            "family must be 'model' or 'doubling', got '{other}'"
        ))),
    }
}

fn parse_observable(kind: &str, n: usize) -> PyResult<GridFunction> {
    Ok(match kind {
        "coordinate" => GridFunction::coordinate(n),
        "cosine" => GridFunction::from_fn(n, |x| (std::f64::consts::TAU * (x + 0.5)).cos())
            .map_err(err)?,
        "indicator" => GridFunction::indicator(n, 0.0, 0.5).map_err(err)?,
        other => {
            return Err(PyValueError::new_err(format!(
                "observable must be 'coordinate', 'cosine' or 'indicator', got '{other}'"
            )))
        }
    })
}

fn density_for(map: &AnyMap, n_cells: usize) -> PyResult<(UlamOperator, GridFunction, f64, usize)> {
    let op = match map {
        AnyMap::Model(m) => ulam_matrix(m, n_cells),
        AnyMap::Doubling(m) => ulam_matrix(m, n_cells),
    }
    .map_err(err)?;
    let res = invariant_density(&op, 1e-10, 100_000).map_err(err)?;
    Ok((op, res.h, res.residual, res.iterations))
}

/// The piecewise expanding model map `T_eps` on `[-1/2, 1/2]`.
#[pyclass]
struct ModelMap {
    inner: ModelMapParams,
}

#[pymethods]
impl ModelMap {
    #[new]
    fn new(gamma: f64, eps: f64) -> PyResult<Self> {
        Ok(ModelMap {
            inner: ModelMapParams::new(gamma, eps).map_err(err)?,
        })
    }

    /// The discontinuity point `O_eps`.
    #[getter]
    fn cut(&self) -> f64 {
        self.inner.cut()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.inner.eps()
    }

    /// Variation exponent `p = 1/(1 - gamma)`.
    #[getter]
    fn p(&self) -> f64 {
        self.inner.p()
    }

    fn eval(&self, x: f64) -> PyResult<f64> {
        self.inner.eval(x).map_err(err)
    }

    fn derivative(&self, x: f64) -> PyResult<f64> {
        self.inner.derivative(x).map_err(err)
    }

    fn branch_inverse(&self, branch: &str, y: f64) -> PyResult<f64> {
        self.inner
            .branch_inverse(parse_branch(branch)?, y)
            .map_err(err)
    }

    fn min_slope(&self) -> f64 {
        self.inner.min_slope()
    }
}

/// Invariant density of the Ulam-discretized transfer operator.
/// Returns (midpoints, values, residual, iterations).
#[pyfunction]
#[pyo3(signature = (family, n_cells, gamma = 0.75, eps = 0.0))]
fn invariant_density_of(
    family: &str,
    n_cells: usize,
    gamma: f64,
    eps: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, f64, usize)> {
    let map = parse_map(family, gamma, eps)?;
    let (_, h, residual, iterations) = density_for(&map, n_cells)?;
    let mids = (0..h.n()).map(|i| h.midpoint(i)).collect();
    Ok((mids, h.values().to_vec(), residual, iterations))
}

/// Green-Kubo variance of a named observable centered against the invariant
/// density. Returns (sigma2, static_term, truncation).
#[pyfunction]
#[pyo3(signature = (family, observable, n_cells, gamma = 0.75, eps = 0.0))]
fn green_kubo(
    family: &str,
    observable: &str,
    n_cells: usize,
    gamma: f64,
    eps: f64,
) -> PyResult<(f64, f64, usize)> {
    let map = parse_map(family, gamma, eps)?;
    let (op, h, _, _) = density_for(&map, n_cells)?;
    let psi = parse_observable(observable, n_cells)?;
    let obs = center_observable(&psi, &h, eps).map_err(err)?;
    let gk = green_kubo_variance(&obs, &h, &op, GreenKuboOptions::default()).map_err(err)?;
    Ok((gk.sigma2, gk.static_term, gk.truncation))
}

/// Kolmogorov-Smirnov distance of normalized Birkhoff sums to the normal law
/// with the Green-Kubo variance.
#[pyfunction]
#[pyo3(signature = (family, observable, n_cells, n_steps, n_samples, seed, gamma = 0.75, eps = 0.0))]
#[allow(clippy::too_many_arguments)]
fn clt_ks(
    family: &str,
    observable: &str,
    n_cells: usize,
    n_steps: usize,
    n_samples: usize,
    seed: u64,
    gamma: f64,
    eps: f64,
) -> PyResult<f64> {
    let map = parse_map(family, gamma, eps)?;
    let (op, h, _, _) = density_for(&map, n_cells)?;
    let psi = parse_observable(observable, n_cells)?;
    let obs = center_observable(&psi, &h, eps).map_err(err)?;
    let gk = green_kubo_variance(&obs, &h, &op, GreenKuboOptions::default()).map_err(err)?;
    match &map {
        AnyMap::Model(m) => clt_empirical(m, &obs, &h, gk.sigma2, n_steps, n_samples, seed),
        AnyMap::Doubling(m) => clt_empirical(m, &obs, &h, gk.sigma2, n_steps, n_samples, seed),
    }
    .map_err(err)
}

/// Universally bounded p-variation of cell values on the uniform grid.
#[pyfunction]
fn p_variation_of(values: Vec<f64>, p: f64) -> PyResult<f64> {
    let f = GridFunction::new(values).map_err(err)?;
    p_variation(&f, p).map_err(err)
}

/// Oscillation norm report: returns (l1, v11p, norm).
#[pyfunction]
#[pyo3(signature = (values, rho0 = 0.05, p = 4.0))]
fn osc_norm(values: Vec<f64>, rho0: f64, p: f64) -> PyResult<(f64, f64, f64)> {
    let f = GridFunction::new(values).map_err(err)?;
    let rep = seminorm_v11p(&f, rho0, p).map_err(err)?;
    Ok((rep.l1, rep.v11p, rep.norm))
}

/// Eigenvalues of the vector field at the origin and the geometric ordering
/// predicate `0 < -l3 < l1 < -l2`. Returns (l1, l2, l3, ordering_ok).
#[pyfunction]
#[pyo3(signature = (sigma = 10.0, r = 28.0, b = 8.0/3.0))]
fn origin_spectrum(sigma: f64, r: f64, b: f64) -> (f64, f64, f64, bool) {
    let params = lorenz_stability::lorenz_ode::VectorFieldParams {
        sigma,
        r,
        b,
        ..Default::default()
    };
    let s = lorenz_stability::lorenz_ode::origin_spectrum(&params);
    (s.lambda1, s.lambda2, s.lambda3, s.ordering_ok)
}

/// Mean return time of the logarithmic suspension roof against the model
/// invariant density; `tau_cap = 0` means uncapped.
#[pyfunction]
#[pyo3(signature = (gamma, eps, n_cells, lambda1, tau_cap = 0.0))]
fn mean_return_time_of(
    gamma: f64,
    eps: f64,
    n_cells: usize,
    lambda1: f64,
    tau_cap: f64,
) -> PyResult<f64> {
    let map = ModelMapParams::new(gamma, eps).map_err(err)?;
    let (_, h, _, _) = density_for(&AnyMap::Model(map), n_cells)?;
    let skew = SkewProduct::new(map, 0.3, 0.3).map_err(err)?;
    let cap = if tau_cap == 0.0 { f64::INFINITY } else { tau_cap };
    let sys = SuspensionSystem::new(skew, lambda1, cap).map_err(err)?;
    Ok(mean_return_time(&sys, &h).value)
}

/// Run one experiment from TOML source; returns the derived constants as a
/// list of (name, value) pairs.
#[pyfunction]
fn run_experiment(config_toml: &str, out_dir: &str) -> PyResult<Vec<(String, f64)>> {
    let cfg = ExperimentConfig::from_toml(config_toml).map_err(err)?;
    let manifest =
        experiments::run(&cfg, config_toml, std::path::Path::new(out_dir)).map_err(err)?;
    Ok(manifest
        .derived
        .iter()
        .map(|d| (d.name.clone(), d.value))
        .collect())
}

#[pymodule]
fn lorenz_stability_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ModelMap>()?;
    m.add_function(wrap_pyfunction!(invariant_density_of, m)?)?;
    m.add_function(wrap_pyfunction!(green_kubo, m)?)?;
    m.add_function(wrap_pyfunction!(clt_ks, m)?)?;
    m.add_function(wrap_pyfunction!(p_variation_of, m)?)?;
    m.add_function(wrap_pyfunction!(osc_norm, m)?)?;
    m.add_function(wrap_pyfunction!(origin_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(mean_return_time_of, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
