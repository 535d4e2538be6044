//! Declarative experiment configuration: flat TOML with one section per
//! subsystem, unknown keys rejected, and a validator that lists every
//! violated precondition without running anything.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::onedim_maps::DEFAULT_EPS_MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Density,
    StabilityCurve,
    LyProbe,
    MixedNorm,
    VarianceCurve,
    Clt,
    FlowVariance,
    FlowStability,
    OdeValidate,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Density,
        ExperimentKind::StabilityCurve,
        ExperimentKind::LyProbe,
        ExperimentKind::MixedNorm,
        ExperimentKind::VarianceCurve,
        ExperimentKind::Clt,
        ExperimentKind::FlowVariance,
        ExperimentKind::FlowStability,
        ExperimentKind::OdeValidate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Density => "density",
            ExperimentKind::StabilityCurve => "stability-curve",
            ExperimentKind::LyProbe => "ly-probe",
            ExperimentKind::MixedNorm => "mixed-norm",
            ExperimentKind::VarianceCurve => "variance-curve",
            ExperimentKind::Clt => "clt",
            ExperimentKind::FlowVariance => "flow-variance",
            ExperimentKind::FlowStability => "flow-stability",
            ExperimentKind::OdeValidate => "ode-validate",
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            ExperimentKind::Density => "invariant density of one map on one grid",
            ExperimentKind::StabilityCurve => "eps sweep of ||h_eps - h_0||_1",
            ExperimentKind::LyProbe => "uniform Lasota-Yorke certificate over the sweep",
            ExperimentKind::MixedNorm => "strong-to-weak operator distance along the sweep",
            ExperimentKind::VarianceCurve => "Green-Kubo variance continuity with diagnostics",
            ExperimentKind::Clt => "empirical CLT of Birkhoff sums vs the normal law",
            ExperimentKind::FlowVariance => "suspension flow variance: ratio formula vs batch means",
            ExperimentKind::FlowStability => "eps sweep of flow SRB averages and mean return times",
            ExperimentKind::OdeValidate => "origin spectrum, Gronwall margins, return-time log fit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Model,
    Doubling,
}

impl Default for FamilyKind {
    fn default() -> Self {
        FamilyKind::Model
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapSection {
    pub family: FamilyKind,
    pub gamma: f64,
    /// Perturbation of the single map used by non-sweep experiments.
    pub eps: f64,
    pub eps_max: f64,
}

impl Default for MapSection {
    fn default() -> Self {
        MapSection {
            family: FamilyKind::Model,
            gamma: 0.75,
            eps: 0.0,
            eps_max: DEFAULT_EPS_MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n_cells: usize,
    pub rho0: f64,
    /// Quadrature resolution for pointwise operator distances.
    pub n_quad: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            n_cells: 4096,
            rho0: 0.05,
            n_quad: 16384,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Perturbation sizes, sorted decreasing toward zero.
    pub eps: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            eps: vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservableKind {
    /// The coordinate x.
    Coordinate,
    /// Indicator of [a, b).
    Indicator,
    /// cos(2 pi (x + 1/2)).
    Cosine,
}

impl Default for ObservableKind {
    fn default() -> Self {
        ObservableKind::Coordinate
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservableSection {
    pub kind: ObservableKind,
    pub a: f64,
    pub b: f64,
}

impl Default for ObservableSection {
    fn default() -> Self {
        ObservableSection {
            kind: ObservableKind::Coordinate,
            a: 0.0,
            b: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeedSection {
    pub master: u64,
    pub n_samples: usize,
    pub n_steps: usize,
}

impl Default for SeedSection {
    fn default() -> Self {
        SeedSection {
            master: 42,
            n_samples: 2000,
            n_steps: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSection {
    pub density_residual: f64,
    pub max_power_iters: usize,
    pub gk_tol: f64,
    pub gk_max_terms: usize,
    /// Fixed shared truncation for continuity sweeps.
    pub gk_fixed_terms: usize,
    pub ly_block: usize,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        ToleranceSection {
            density_residual: 1e-10,
            max_power_iters: 100_000,
            gk_tol: 1e-9,
            gk_max_terms: 200,
            gk_fixed_terms: 120,
            ly_block: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuspensionSection {
    pub beta: f64,
    pub delta: f64,
    pub lambda1: f64,
    /// 0 means "use the default cap for the configured grid".
    pub tau_cap: f64,
    pub t_horizon: f64,
    pub flow_samples: usize,
    pub orbit_length: usize,
}

impl Default for SuspensionSection {
    fn default() -> Self {
        SuspensionSection {
            beta: 0.3,
            delta: 0.3,
            lambda1: 11.8277238,
            tau_cap: 0.0,
            t_horizon: 1000.0,
            flow_samples: 1000,
            orbit_length: 200_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdeSection {
    pub sigma: f64,
    pub r: f64,
    pub b: f64,
    pub dt: f64,
    pub z_section: f64,
    pub n_crossings: usize,
    pub max_time: f64,
    pub bump_amps: Vec<f64>,
    pub t_gronwall: f64,
}

impl Default for OdeSection {
    fn default() -> Self {
        OdeSection {
            sigma: 10.0,
            r: 28.0,
            b: 8.0 / 3.0,
            dt: 1e-3,
            z_section: 27.0,
            n_crossings: 3000,
            max_time: 4000.0,
            bump_amps: vec![1e-4, 1e-3],
            t_gronwall: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Worker pool size; 0 uses the rayon default.
    pub threads: usize,
    /// Output directory; empty defers to LORENZ_STABILITY_OUT or cwd.
    pub out_dir: String,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            threads: 0,
            out_dir: String::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub map: MapSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub observable: ObservableSection,
    #[serde(default)]
    pub seeds: SeedSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub suspension: SuspensionSection,
    #[serde(default)]
    pub ode: OdeSection,
    #[serde(default)]
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        toml::from_str(src).map_err(|e| Error::ConfigParse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// List every violated precondition; an empty report means the config is
    /// runnable.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        let m = &self.map;
        if m.family == FamilyKind::Model {
            if !(m.gamma > 0.5 && m.gamma < 1.0) {
                v.push(format!("map.gamma = {} not in (0.5, 1)", m.gamma));
            }
            if !(m.eps_max > 0.0 && m.eps_max < m.gamma - 0.5) {
                v.push(format!(
                    "map.eps_max = {} must lie in (0, gamma - 1/2 = {})",
                    m.eps_max,
                    m.gamma - 0.5
                ));
            }
            if m.eps.abs() > m.eps_max {
                v.push(format!(
                    "map.eps = {} exceeds eps_max = {}",
                    m.eps, m.eps_max
                ));
            }
            for &e in &self.sweep.eps {
                if e.abs() > m.eps_max {
                    v.push(format!("sweep.eps entry {e} exceeds eps_max = {}", m.eps_max));
                }
            }
        }
        if self.sweep.eps.is_empty() {
            v.push("sweep.eps must be nonempty".into());
        }
        if self.sweep.eps.windows(2).any(|w| w[1] >= w[0]) {
            v.push("sweep.eps must be sorted strictly decreasing toward 0".into());
        }
        if self.grid.n_cells < 16 {
            v.push(format!("grid.n_cells = {} must be >= 16", self.grid.n_cells));
        }
        if self.grid.rho0 < 4.0 / self.grid.n_cells as f64 {
            v.push(format!(
                "grid.rho0 = {} must be >= 4/n_cells = {}",
                self.grid.rho0,
                4.0 / self.grid.n_cells as f64
            ));
        }
        if self.observable.kind == ObservableKind::Indicator && self.observable.a >= self.observable.b
        {
            v.push(format!(
                "observable interval [{}, {}) is empty",
                self.observable.a, self.observable.b
            ));
        }
        if self.seeds.n_samples == 0 || self.seeds.n_steps == 0 {
            v.push("seeds.n_samples and seeds.n_steps must be positive".into());
        }
        if !(self.tolerances.density_residual > 0.0) {
            v.push("tolerances.density_residual must be positive".into());
        }
        if self.tolerances.gk_max_terms == 0 || self.tolerances.gk_fixed_terms == 0 {
            v.push("Green-Kubo term budgets must be positive".into());
        }
        if self.tolerances.ly_block < 2 {
            v.push("tolerances.ly_block must be at least 2".into());
        }
        let s = &self.suspension;
        if !(s.beta > 0.0 && s.beta < 1.0) {
            v.push(format!("suspension.beta = {} not in (0, 1)", s.beta));
        } else if !(s.delta > 0.0 && s.delta <= (1.0 - s.beta) / 2.0) {
            v.push(format!(
                "suspension.delta = {} not in (0, (1 - beta)/2 = {}]",
                s.delta,
                (1.0 - s.beta) / 2.0
            ));
        }
        if !(s.lambda1 > 0.0) {
            v.push(format!("suspension.lambda1 = {} must be positive", s.lambda1));
        }
        if s.tau_cap != 0.0 && s.tau_cap.is_finite() && s.lambda1 * s.tau_cap < 10.0 {
            v.push(format!(
                "suspension.tau_cap = {} too small: lambda1 * tau_cap must be >= 10",
                s.tau_cap
            ));
        }
        if s.orbit_length < 10_000 {
            v.push(format!(
                "suspension.orbit_length = {} must be >= 10^4",
                s.orbit_length
            ));
        }
        let o = &self.ode;
        if !(o.dt > 0.0 && o.dt <= 1e-3) {
            v.push(format!("ode.dt = {} must lie in (0, 1e-3]", o.dt));
        }
        if !(o.t_gronwall > 0.0 && o.t_gronwall <= 2.0) {
            v.push(format!(
                "ode.t_gronwall = {} must lie in (0, 2]",
                o.t_gronwall
            ));
        }
        v
    }
}
