//! Grid functions on `I = [-1/2, 1/2]` and the oscillation-based norms used
//! throughout: the local oscillation `osc(f, rho, x)`, its `L1` average
//! `osc_1(f, rho)`, the seminorm
//! `V_{1,1/p}(f) = sup_{0 < rho <= rho_0} osc_1(f, rho) / rho^{1/p}` and the
//! universally bounded p-variation `V_p`.
//!
//! Everything is computed exactly on piecewise-constant carriers: the
//! essential supremum becomes a max over cells, the sup over `rho` is taken
//! on a geometric grid (osc_1 is monotone in `rho`, so the grid bounds the
//! continuum sup up to a factor `2^{1/p}` between grid points), and all
//! downstream inequality checks carry a one-cell discretization slack.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::onedim_maps::{I_HI, I_LO};

/// Default `rho_0`; satisfies `rho_0 < K/10` for the model family, whose
/// branch images have length 1.
pub const DEFAULT_RHO0: f64 = 0.05;

/// A piecewise-constant function on the uniform `n`-cell partition of `I`.
/// Cell `i` covers `[-1/2 + i/n, -1/2 + (i+1)/n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Precondition(
                "a grid function needs at least 2 cells".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition(
                "grid function values must be finite".into(),
            ));
        }
        Ok(GridFunction { values })
    }

    pub fn constant(n: usize, c: f64) -> Self {
        GridFunction {
            values: vec![c; n.max(2)],
        }
    }

    /// Sample a function at cell midpoints.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let width = 1.0 / n as f64;
        GridFunction::new(
            (0..n)
                .map(|i| f(I_LO + (i as f64 + 0.5) * width))
                .collect(),
        )
    }

    /// Indicator of `[a, b)`, resolved at cell-midpoint precision.
    pub fn indicator(n: usize, a: f64, b: f64) -> Result<Self> {
        GridFunction::from_fn(n, |x| if x >= a && x < b { 1.0 } else { 0.0 })
    }

    /// The coordinate observable `x`.
    pub fn coordinate(n: usize) -> Self {
        GridFunction::from_fn(n, |x| x).expect("n >= 2")
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn width(&self) -> f64 {
        1.0 / self.n() as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn midpoint(&self, i: usize) -> f64 {
        I_LO + (i as f64 + 0.5) * self.width()
    }

    /// Index of the cell containing `x` (clamped to `I`).
    pub fn cell_of(&self, x: f64) -> usize {
        let n = self.n();
        let idx = ((x - I_LO) * n as f64).floor() as isize;
        idx.clamp(0, n as isize - 1) as usize
    }

    pub fn value_at(&self, x: f64) -> f64 {
        self.values[self.cell_of(x)]
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.width()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.width()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `int f g dx` on a shared grid.
    pub fn inner(&self, other: &GridFunction) -> Result<f64> {
        if self.n() != other.n() {
            return Err(Error::Precondition(format!(
                "grid mismatch: {} vs {} cells",
                self.n(),
                other.n()
            )));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.width())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<GridFunction> {
        if self.n() != other.n() {
            return Err(Error::Precondition("grid mismatch".into()));
        }
        Ok(GridFunction {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, c: f64) -> GridFunction {
        self.map(|v| c * v)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip(other, |a, b| a - b)
    }

    pub fn l1_distance(&self, other: &GridFunction) -> Result<f64> {
        Ok(self.sub(other)?.l1_norm())
    }

    /// Two-column CSV export: cell midpoint, value. Lines starting with `#`
    /// are comments.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.midpoint(i), v)?;
        }
        Ok(())
    }

    pub fn to_csv_path(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_csv(&mut f)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let reader = BufReader::new(f);
        let mut values = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let _mid: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Precondition(format!("bad CSV line: {line}")))?;
            let v: f64 = parts
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Precondition(format!("bad CSV line: {line}")))?;
            values.push(v);
        }
        let g = GridFunction::new(values)?;
        Ok(g)
    }
}

/// Oscillation of `f` over the ball `S_rho(x) = (x - rho, x + rho)`,
/// realized as max minus min of the cell values over cells meeting the ball.
pub fn oscillation(f: &GridFunction, rho: f64, x: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Precondition(format!("rho = {rho} must be > 0")));
    }
    if !(I_LO..=I_HI).contains(&x) {
        return Err(Error::Precondition(format!("x = {x} outside I")));
    }
    Ok(oscillation_cells(f, rho, x, 0, f.n() - 1))
}

/// Oscillation of the restriction of `f` to the inclusive cell range
/// `[cell_lo, cell_hi]`, as needed by the localization inequalities.
pub fn oscillation_restricted(
    f: &GridFunction,
    rho: f64,
    x: f64,
    cell_lo: usize,
    cell_hi: usize,
) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Precondition(format!("rho = {rho} must be > 0")));
    }
    if cell_hi >= f.n() || cell_lo > cell_hi {
        return Err(Error::Precondition(format!(
            "bad cell range [{cell_lo}, {cell_hi}] for {} cells",
            f.n()
        )));
    }
    Ok(oscillation_cells(f, rho, x, cell_lo, cell_hi))
}

fn oscillation_cells(f: &GridFunction, rho: f64, x: f64, lo: usize, hi: usize) -> f64 {
    let n = f.n() as f64;
    let from = (((x + 0.5 - rho) * n).floor().max(0.0)) as usize;
    let to = (((x + 0.5 + rho) * n).ceil() - 1.0).max(0.0) as usize;
    let from = from.max(lo);
    let to = to.min(hi).min(f.n() - 1);
    if from > to {
        return 0.0;
    }
    // Cells only partially inside the open ball count: the essential sup
    // over S_rho(x) sees any overlap of positive measure.
    let mut mn = f64::INFINITY;
    let mut mx = f64::NEG_INFINITY;
    for &v in &f.values()[from..=to] {
        mn = mn.min(v);
        mx = mx.max(v);
    }
    mx - mn
}

/// `osc_1(f, rho) = || osc(f, rho, .) ||_1` by midpoint quadrature over the
/// carrier grid, computed with sliding-window min/max in `O(n)`.
pub fn osc_l1(f: &GridFunction, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::Precondition(format!("rho = {rho} must be > 0")));
    }
    let n = f.n();
    // Cells meeting (mid_i - rho, mid_i + rho) are [i - k, i + k].
    let k = ((rho * n as f64 - 0.5).ceil().max(0.0)) as usize;
    let values = f.values();
    let mut total = 0.0;
    let mut max_deque: std::collections::VecDeque<usize> = Default::default();
    let mut min_deque: std::collections::VecDeque<usize> = Default::default();
    let mut right = 0usize;
    for i in 0..n {
        let window_hi = (i + k).min(n - 1);
        let window_lo = i.saturating_sub(k);
        while right <= window_hi {
            while let Some(&b) = max_deque.back() {
                if values[b] <= values[right] {
                    max_deque.pop_back();
                } else {
                    break;
                }
            }
            max_deque.push_back(right);
            while let Some(&b) = min_deque.back() {
                if values[b] >= values[right] {
                    min_deque.pop_back();
                } else {
                    break;
                }
            }
            min_deque.push_back(right);
            right += 1;
        }
        while let Some(&fr) = max_deque.front() {
            if fr < window_lo {
                max_deque.pop_front();
            } else {
                break;
            }
        }
        while let Some(&fr) = min_deque.front() {
            if fr < window_lo {
                min_deque.pop_front();
            } else {
                break;
            }
        }
        total += values[*max_deque.front().unwrap()] - values[*min_deque.front().unwrap()];
    }
    Ok(total * f.width())
}

/// Full norm data for one grid function.
#[derive(Debug, Clone)]
pub struct NormReport {
    pub l1: f64,
    /// `(rho, osc_1(f, rho))` over the geometric rho grid.
    pub osc1_profile: Vec<(f64, f64)>,
    /// `V_{1,1/p}(f)` approximated over the rho grid.
    pub v11p: f64,
    /// `||f||_{1,1/p} = V_{1,1/p}(f) + ||f||_1`.
    pub norm: f64,
    pub rho0: f64,
}

/// Evaluate the `BV_{1,1/p}` norm of `f`. The sup over `rho` runs over the
/// geometric grid `rho_0 * 2^-k` down to one cell width.
pub fn seminorm_v11p(f: &GridFunction, rho0: f64, p: f64) -> Result<NormReport> {
    let n = f.n() as f64;
    if !(rho0 >= 4.0 / n) {
        return Err(Error::Precondition(format!(
            "rho0 = {rho0} must be >= 4/n_cells = {} for the oscillation to be resolvable",
            4.0 / n
        )));
    }
    if !(p >= 1.0) {
        return Err(Error::Precondition(format!("p = {p} must be >= 1")));
    }
    let mut profile = Vec::new();
    let mut v11p = 0.0f64;
    let mut rho = rho0;
    while rho * n >= 1.0 {
        let o = osc_l1(f, rho)?;
        profile.push((rho, o));
        v11p = v11p.max(o / rho.powf(1.0 / p));
        rho *= 0.5;
    }
    let l1 = f.l1_norm();
    Ok(NormReport {
        l1,
        osc1_profile: profile,
        v11p,
        norm: l1 + v11p,
        rho0,
    })
}

/// Universally bounded p-variation, exact on grid functions: dynamic
/// programming over cell values maximizes `sum |f(x_i) - f(x_{i-1})|^p`
/// over all increasing sample sequences.
pub fn p_variation(f: &GridFunction, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Precondition(format!("p = {p} must be >= 1")));
    }
    Ok(p_variation_values(f.values(), p))
}

/// p-variation of an arbitrary ordered sample sequence.
pub fn p_variation_values(values: &[f64], p: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mut dp = vec![0.0f64; n];
    let mut best = 0.0f64;
    for i in 1..n {
        let mut m = 0.0f64;
        for j in 0..i {
            let cand = dp[j] + (values[i] - values[j]).abs().powf(p);
            if cand > m {
                m = cand;
            }
        }
        dp[i] = m;
        if m > best {
            best = m;
        }
    }
    best.powf(1.0 / p)
}

/// Scale `f` to unit `BV_{1,1/p}` norm.
pub fn normalize_bv(f: &GridFunction, rho0: f64, p: f64) -> Result<(GridFunction, NormReport)> {
    let report = seminorm_v11p(f, rho0, p)?;
    if report.norm <= 0.0 {
        return Err(Error::Precondition(
            "cannot normalize the zero function".into(),
        ));
    }
    Ok((f.scale(1.0 / report.norm), report))
}

/// The fixed basket of test profiles used by the operator-distance and
/// Lasota-Yorke probes: indicators, a power-law spike, trigonometric
/// profiles and a hat function. Callers append the invariant density.
pub fn standard_basket(n: usize) -> Vec<(&'static str, GridFunction)> {
    vec![
        (
            "indicator_right",
            GridFunction::indicator(n, 0.0, 0.5).expect("n >= 2"),
        ),
        (
            "indicator_mid",
            GridFunction::indicator(n, -0.25, 0.25).expect("n >= 2"),
        ),
        (
            "cosine",
            GridFunction::from_fn(n, |x| (2.0 * std::f64::consts::PI * (x + 0.5)).cos())
                .expect("n >= 2"),
        ),
        (
            "power_spike",
            GridFunction::from_fn(n, |x| (x.abs() + 0.02).powf(-0.25)).expect("n >= 2"),
        ),
        (
            "hat",
            GridFunction::from_fn(n, |x| 1.0 - 2.0 * x.abs()).expect("n >= 2"),
        ),
    ]
}
