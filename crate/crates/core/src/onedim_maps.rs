//! Piecewise expanding interval maps on `I = [-1/2, 1/2]` with one
//! discontinuity, modelling the one-dimensional factor of a Lorenz-type
//! Poincare map.
//!
//! The concrete family is the odd power law
//! `T0(x) = 2^gamma * x^gamma - 1/2` on `(0, 1/2]` (and its odd reflection on
//! `[-1/2, 0)`), perturbed by pre-composing with the affine change of
//! variables that moves the discontinuity from `0` to `O_eps = eps`.  Both
//! branches are full, monotone increasing, with derivative blowing up like
//! `|x - O_eps|^(gamma-1)` at the cut, and the branch inverses are in closed
//! form, which keeps Ulam matrix entries exact.

use crate::error::{Error, Result};

/// Left endpoint of the phase interval `I`.
pub const I_LO: f64 = -0.5;
/// Right endpoint of the phase interval `I`.
pub const I_HI: f64 = 0.5;

/// Largest admissible |eps| for the model family; keeps the minimal branch
/// slope `2*gamma / (1 + 2|eps|)` above 1 for every gamma in (0.55, 1).
pub const DEFAULT_EPS_MAX: f64 = 0.05;

/// The two monotonicity branches of a Lorenz-type interval map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Domain `[-1/2, O_eps]`, image `[-1/2, 1/2]` for full-branch maps.
    Left,
    /// Domain `[O_eps, 1/2]`, image `[-1/2, 1/2]` for full-branch maps.
    Right,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Left, Branch::Right];
}

/// A full-branch piecewise monotone expanding map of `I` with a single
/// discontinuity. The trait carries exactly what the transfer-operator and
/// suspension machinery needs: branchwise evaluation extended continuously to
/// the closed branch, derivatives, and closed-form branch inverses.
pub trait IntervalMap: Sync {
    /// The discontinuity point `O`.
    fn cut(&self) -> f64;

    /// The perturbation parameter this map realizes (0 for rigid maps).
    fn perturbation(&self) -> f64 {
        0.0
    }

    /// Evaluate the branch, extended continuously to the closed branch
    /// domain. At the cut this returns the one-sided limit: -1/2 on the
    /// right branch, +1/2 on the left branch.
    fn eval_branch(&self, branch: Branch, x: f64) -> f64;

    /// Branch derivative; diverges at the cut for the model family.
    fn derivative_branch(&self, branch: Branch, x: f64) -> f64;

    /// Inverse of the branch on its image `[-1/2, 1/2]`.
    fn branch_inverse(&self, branch: Branch, y: f64) -> Result<f64>;

    /// Uniform lower bound for the slope over both branches.
    fn min_slope(&self) -> f64;

    fn branch_of(&self, x: f64) -> Result<Branch> {
        let cut = self.cut();
        if !(I_LO..=I_HI).contains(&x) {
            return Err(Error::Precondition(format!(
                "x = {x} lies outside I = [-1/2, 1/2]"
            )));
        }
        if x == cut {
            return Err(Error::AtDiscontinuity(cut));
        }
        Ok(if x < cut { Branch::Left } else { Branch::Right })
    }

    /// Branch domain `[lo, hi]`.
    fn branch_domain(&self, branch: Branch) -> (f64, f64) {
        match branch {
            Branch::Left => (I_LO, self.cut()),
            Branch::Right => (self.cut(), I_HI),
        }
    }

    fn eval(&self, x: f64) -> Result<f64> {
        let branch = self.branch_of(x)?;
        Ok(self.eval_branch(branch, x))
    }

    fn derivative(&self, x: f64) -> Result<f64> {
        let branch = self.branch_of(x)?;
        Ok(self.derivative_branch(branch, x))
    }
}

/// Parameters of the model family `T_eps`.
///
/// `gamma` is the branch exponent in (1/2, 1); the Hoelder exponent of
/// `1/T'` is `alpha = 1 - gamma` and `p = 1/alpha`. `eps` is the signed
/// offset of the discontinuity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMapParams {
    gamma: f64,
    eps: f64,
}

impl ModelMapParams {
    pub fn new(gamma: f64, eps: f64) -> Result<Self> {
        if !(gamma > 0.5 && gamma < 1.0) {
            return Err(Error::Precondition(format!(
                "gamma = {gamma} must lie in (0.5, 1)"
            )));
        }
        if !(eps.abs() <= DEFAULT_EPS_MAX && eps.abs() < gamma - 0.5) {
            return Err(Error::Precondition(format!(
                "|eps| = {} must be <= {} and < gamma - 1/2 = {}",
                eps.abs(),
                DEFAULT_EPS_MAX,
                gamma - 0.5
            )));
        }
        Ok(ModelMapParams { gamma, eps })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Hoelder exponent of `1/T'`: `alpha = 1 - gamma`.
    pub fn alpha(&self) -> f64 {
        1.0 - self.gamma
    }

    /// Variation exponent `p = 1/alpha`.
    pub fn p(&self) -> f64 {
        1.0 / self.alpha()
    }

    /// Affine change of variables taking the perturbed branch domain onto
    /// the unperturbed one. Right: `[eps, 1/2] -> [0, 1/2]`,
    /// left: `[-1/2, eps] -> [-1/2, 0]`.
    fn affine(&self, branch: Branch, x: f64) -> f64 {
        let t = (x - self.eps) * self.affine_slope(branch);
        match branch {
            Branch::Right => t.clamp(0.0, 0.5),
            Branch::Left => t.clamp(-0.5, 0.0),
        }
    }

    fn affine_slope(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Right => 1.0 / (1.0 - 2.0 * self.eps),
            Branch::Left => 1.0 / (1.0 + 2.0 * self.eps),
        }
    }

    // 2^gamma t^gamma written as (2t)^gamma, which keeps the branch
    // endpoints exact: (2 * 1/2)^gamma = 1 in floating point.
    fn t0(&self, branch: Branch, t: f64) -> f64 {
        match branch {
            Branch::Right => (2.0 * t).powf(self.gamma) - 0.5,
            Branch::Left => 0.5 - (-2.0 * t).powf(self.gamma),
        }
    }

    fn t0_derivative(&self, t_abs: f64) -> f64 {
        if t_abs == 0.0 {
            return f64::INFINITY;
        }
        2.0 * self.gamma * (2.0 * t_abs).powf(self.gamma - 1.0)
    }
}

impl IntervalMap for ModelMapParams {
    fn cut(&self) -> f64 {
        self.eps
    }

    fn perturbation(&self) -> f64 {
        self.eps
    }

    fn eval_branch(&self, branch: Branch, x: f64) -> f64 {
        let t = self.affine(branch, x);
        self.t0(branch, t).clamp(I_LO, I_HI)
    }

    fn derivative_branch(&self, branch: Branch, x: f64) -> f64 {
        let t = self.affine(branch, x);
        self.t0_derivative(t.abs()) * self.affine_slope(branch)
    }

    fn branch_inverse(&self, branch: Branch, y: f64) -> Result<f64> {
        if !(I_LO..=I_HI).contains(&y) {
            return Err(Error::OutOfRange {
                value: y,
                lo: I_LO,
                hi: I_HI,
            });
        }
        let t = match branch {
            Branch::Right => (y + 0.5).powf(1.0 / self.gamma) / 2.0,
            Branch::Left => -((0.5 - y).powf(1.0 / self.gamma)) / 2.0,
        };
        let x = self.eps + t / self.affine_slope(branch);
        let (lo, hi) = self.branch_domain(branch);
        Ok(x.clamp(lo, hi))
    }

    fn min_slope(&self) -> f64 {
        2.0 * self.gamma / (1.0 + 2.0 * self.eps.abs())
    }
}

/// Piecewise linear full-branch test map of slope 2 with its cut at 0:
/// `D(x) = 2x + 1/2` on `[-1/2, 0)` and `D(x) = 2x - 1/2` on `[0, 1/2]`.
/// Lebesgue measure is exactly invariant, which makes it the oracle map for
/// the operator and variance pipelines.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoublingMap;

impl IntervalMap for DoublingMap {
    fn cut(&self) -> f64 {
        0.0
    }

    fn eval_branch(&self, branch: Branch, x: f64) -> f64 {
        match branch {
            Branch::Left => (2.0 * x + 0.5).clamp(I_LO, I_HI),
            Branch::Right => (2.0 * x - 0.5).clamp(I_LO, I_HI),
        }
    }

    fn derivative_branch(&self, _branch: Branch, _x: f64) -> f64 {
        2.0
    }

    fn branch_inverse(&self, branch: Branch, y: f64) -> Result<f64> {
        if !(I_LO..=I_HI).contains(&y) {
            return Err(Error::OutOfRange {
                value: y,
                lo: I_LO,
                hi: I_HI,
            });
        }
        Ok(match branch {
            Branch::Left => (y - 0.5) / 2.0,
            Branch::Right => (y + 0.5) / 2.0,
        })
    }

    fn min_slope(&self) -> f64 {
        2.0
    }
}

/// A one-parameter family of interval maps indexed by the perturbation size.
pub trait MapFamily: Sync {
    type Map: IntervalMap;

    fn at(&self, eps: f64) -> Result<Self::Map>;
}

/// The model family `eps -> T_eps` at fixed exponent.
#[derive(Debug, Clone, Copy)]
pub struct ModelFamily {
    pub gamma: f64,
}

impl MapFamily for ModelFamily {
    type Map = ModelMapParams;

    fn at(&self, eps: f64) -> Result<ModelMapParams> {
        ModelMapParams::new(self.gamma, eps)
    }
}

/// Rigid family: the doubling map for every eps. Useful as a null family in
/// which all stability curves must be exactly constant.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoublingFamily;

impl MapFamily for DoublingFamily {
    type Map = DoublingMap;

    fn at(&self, _eps: f64) -> Result<DoublingMap> {
        Ok(DoublingMap)
    }
}

/// Uniform expansion data for the family: `(T_eps^n)'(x) >= C theta^n` with
/// `C = 1`, `theta = 2 gamma / (1 + 2 eps_max)`, a branchwise p-variation
/// bound `W` for `1/T'`, and minimal cylinder lengths `delta_n`.
#[derive(Debug, Clone)]
pub struct ExpansionCertificate {
    pub c: f64,
    pub theta: f64,
    pub w: f64,
    /// `(level, min cylinder length over the probed eps values)`.
    pub delta_n: Vec<(usize, f64)>,
}

impl ExpansionCertificate {
    /// Certificate for the model family with |eps| <= eps_max. `delta_n` is
    /// probed at the supplied eps values and levels.
    pub fn for_model_family(
        gamma: f64,
        eps_max: f64,
        probe_eps: &[f64],
        levels: &[usize],
    ) -> Result<Self> {
        let theta = 2.0 * gamma / (1.0 + 2.0 * eps_max);
        if theta <= 1.0 {
            return Err(Error::Precondition(format!(
                "expansion rate theta = {theta} must exceed 1"
            )));
        }
        // 1/T_eps' is branchwise monotone, so its p-variation equals its
        // range, at most (1 + 2 eps_max)/(2 gamma).
        let w = (1.0 + 2.0 * eps_max) / (2.0 * gamma);
        let mut delta_n = Vec::with_capacity(levels.len());
        for &level in levels {
            let mut min_len = f64::INFINITY;
            for &eps in probe_eps {
                let map = ModelMapParams::new(gamma, eps)?;
                let part = cylinder_partition(&map, level)?;
                min_len = min_len.min(part.min_length());
            }
            if !(min_len > 0.0) {
                return Err(Error::Numerical(format!(
                    "degenerate cylinder at level {level}"
                )));
            }
            delta_n.push((level, min_len));
        }
        Ok(ExpansionCertificate {
            c: 1.0,
            theta,
            w,
            delta_n,
        })
    }

    /// The telescoped variation constant
    /// `W(l) = (C^l + C - 2) / (C^(l-1) (C - 1)) * W`, continued to its limit
    /// `(l + 1) W` at `C = 1`.
    pub fn w_ell(&self, ell: usize) -> f64 {
        let c = self.c;
        if (c - 1.0).abs() < 1e-9 {
            return (ell as f64 + 1.0) * self.w;
        }
        (c.powi(ell as i32) + c - 2.0) / (c.powi(ell as i32 - 1) * (c - 1.0)) * self.w
    }
}

/// Dynamical cylinder partition `P^(n)` of a full-branch map, represented by
/// its ordered breakpoints.
#[derive(Debug, Clone)]
pub struct CylinderPartition {
    breakpoints: Vec<f64>,
}

const MAX_CYLINDER_LEVEL: usize = 30;

/// Level-`n` cylinders of a full-branch map: `2^n` intervals whose
/// breakpoints are the preimages of the cut under up to `n - 1` iterates.
pub fn cylinder_partition(map: &impl IntervalMap, n: usize) -> Result<CylinderPartition> {
    if n == 0 {
        return Err(Error::Precondition("cylinder level must be >= 1".into()));
    }
    if n > MAX_CYLINDER_LEVEL {
        return Err(Error::Resource {
            requested: n,
            max: MAX_CYLINDER_LEVEL,
        });
    }
    let base = [I_LO, map.cut(), I_HI];
    let mut breaks: Vec<f64> = base.to_vec();
    for _ in 1..n {
        let mut next: Vec<f64> = base.to_vec();
        next.reserve(2 * breaks.len());
        for &b in &breaks {
            for branch in Branch::BOTH {
                next.push(map.branch_inverse(branch, b)?);
            }
        }
        next.sort_by(f64::total_cmp);
        next.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        breaks = next;
    }
    Ok(CylinderPartition { breakpoints: breaks })
}

impl CylinderPartition {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.breakpoints.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn len(&self) -> usize {
        self.breakpoints.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Minimal cylinder length; the empirical `delta_n`.
    pub fn min_length(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// The interval `H` around `{0, O_eps}` excluded from the closeness
/// supremum, together with its target width `eta`.
#[derive(Debug, Clone, Copy)]
pub struct NeighborhoodH {
    pub eta: f64,
    pub lo: f64,
    pub hi: f64,
}

impl NeighborhoodH {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Closeness of `T_eps` to `T_0` away from the cut:
/// `d(T, T_eps) = sup_{x in H^c} (|T_eps(x) - T(x)| + |T_eps'(x) - T'(x)|)`.
///
/// `H` is the symmetric interval of half-width `max(2|eps|, eta/4)`, clipped
/// below `eta/2`. The supremum is taken over a dense sample of `H^c` with
/// geometric refinement towards the endpoints of `H`, where the derivative
/// difference peaks.
pub fn perturbation_distance(map: &ModelMapParams, eta: f64) -> Result<(NeighborhoodH, f64)> {
    let eps = map.eps();
    if !(eta > 2.0 * eps.abs()) {
        return Err(Error::Precondition(format!(
            "eta = {eta} must exceed 2|eps| = {}",
            2.0 * eps.abs()
        )));
    }
    let mut half = (2.0 * eps.abs()).max(eta / 4.0);
    if 2.0 * half >= eta {
        half = 0.49999 * eta;
    }
    if half <= eps.abs() {
        return Err(Error::Precondition(format!(
            "cannot fit both 0 and O_eps = {eps} inside an interval of width < eta = {eta}"
        )));
    }
    let h = NeighborhoodH {
        eta,
        lo: -half,
        hi: half,
    };
    let unperturbed = ModelMapParams::new(map.gamma(), 0.0)?;

    let mut sup = 0.0f64;
    let mut probe = |x: f64| {
        if !(I_LO..=I_HI).contains(&x) || (h.lo..=h.hi).contains(&x) {
            return;
        }
        let branch_p = if x < map.cut() { Branch::Left } else { Branch::Right };
        let branch_0 = if x < 0.0 { Branch::Left } else { Branch::Right };
        let d = (map.eval_branch(branch_p, x) - unperturbed.eval_branch(branch_0, x)).abs()
            + (map.derivative_branch(branch_p, x) - unperturbed.derivative_branch(branch_0, x))
                .abs();
        if d > sup {
            sup = d;
        }
    };

    let n_uniform = 12_000usize;
    for (lo, hi) in [(I_LO, h.lo), (h.hi, I_HI)] {
        if hi <= lo {
            continue;
        }
        let len = hi - lo;
        for i in 0..=n_uniform / 2 {
            probe(lo + len * i as f64 / (n_uniform / 2) as f64);
        }
        // Geometric clustering toward the H endpoint nearest the cut.
        for k in 1..50 {
            let offset = len * 0.5f64.powi(k);
            probe(lo + offset);
            probe(hi - offset);
        }
    }
    Ok((h, sup))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(gamma: f64, eps: f64) -> ModelMapParams {
        ModelMapParams::new(gamma, eps).unwrap()
    }

    #[test]
    fn eval_fixed_endpoint() {
        let map = model(0.75, 0.0);
        assert_eq!(map.eval(0.5).unwrap(), 0.5);
        assert_eq!(map.eval(-0.5).unwrap(), -0.5);
    }

    #[test]
    fn eval_quarter_point() {
        let map = model(0.75, 0.0);
        // 2^0.75 * 0.25^0.75 - 1/2 = 2^(-0.75) - 1/2
        let expected = (-0.75f64 * std::f64::consts::LN_2).exp() - 0.5;
        let got = map.eval(0.25).unwrap();
        assert!((got - expected).abs() < 1e-14);
        assert!((got - 0.0946035575013605).abs() < 1e-12);
    }

    #[test]
    fn one_sided_limits_at_cut() {
        let map = model(0.75, 0.01);
        assert!((map.eval_branch(Branch::Right, 0.01) - (-0.5)).abs() < 1e-15);
        assert!((map.eval_branch(Branch::Left, 0.01) - 0.5).abs() < 1e-15);
        let next = 0.01f64 + 1e-12;
        assert!(map.eval(next).unwrap() < -0.499);
    }

    #[test]
    fn eval_at_cut_is_domain_error() {
        let map = model(0.75, 0.01);
        assert!(matches!(map.eval(0.01), Err(Error::AtDiscontinuity(_))));
        assert!(matches!(map.derivative(0.01), Err(Error::AtDiscontinuity(_))));
    }

    #[test]
    fn derivative_examples() {
        let map = model(0.75, 0.0);
        assert!((map.derivative(0.5).unwrap() - 1.5).abs() < 1e-13);
        let map6 = model(0.6, 0.0);
        assert!((map6.derivative(0.5).unwrap() - 1.2).abs() < 1e-13);
        // near-cut blow-up: 2^0.75 * 0.75 * (1e-6)^(-0.25)
        let d = map.derivative(1e-6).unwrap();
        let expected = 2f64.powf(0.75) * 0.75 * 1e-6f64.powf(-0.25);
        assert!((d - expected).abs() / expected < 1e-12);
        assert!((d - 39.86).abs() < 0.05);
    }

    #[test]
    fn branch_inverse_round_trip() {
        let map = model(0.75, 0.0);
        assert_eq!(map.branch_inverse(Branch::Right, 0.5).unwrap(), 0.5);
        assert_eq!(map.branch_inverse(Branch::Left, -0.5).unwrap(), -0.5);
        let y = (-0.75f64 * std::f64::consts::LN_2).exp() - 0.5;
        let x = map.branch_inverse(Branch::Right, y).unwrap();
        assert!((x - 0.25).abs() < 1e-13);

        let map = model(0.8, -0.03);
        for &y in &[-0.49, -0.2, 0.0, 0.3, 0.499] {
            for branch in Branch::BOTH {
                let x = map.branch_inverse(branch, y).unwrap();
                assert!((map.eval_branch(branch, x) - y).abs() < 1e-12);
            }
        }
        assert!(map.branch_inverse(Branch::Right, 0.7).is_err());
    }

    #[test]
    fn branch_monotonicity() {
        let map = model(0.75, 0.02);
        for branch in Branch::BOTH {
            let (lo, hi) = map.branch_domain(branch);
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=500 {
                let x = lo + (hi - lo) * i as f64 / 500.0;
                let v = map.eval_branch(branch, x);
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn cylinders_level_one_and_two() {
        let map = model(0.75, 0.0);
        let p1 = cylinder_partition(&map, 1).unwrap();
        assert_eq!(p1.breakpoints(), &[-0.5, 0.0, 0.5]);
        assert!((p1.min_length() - 0.5).abs() < 1e-15);

        let p2 = cylinder_partition(&map, 2).unwrap();
        assert_eq!(p2.len(), 4);
        let pre = map.branch_inverse(Branch::Right, 0.0).unwrap();
        assert!((p2.breakpoints()[3] - pre).abs() < 1e-14);
        assert!((p2.breakpoints()[1] + pre).abs() < 1e-14);

        let shifted = model(0.75, 0.01);
        let p1s = cylinder_partition(&shifted, 1).unwrap();
        assert_eq!(p1s.breakpoints(), &[-0.5, 0.01, 0.5]);

        assert!(matches!(
            cylinder_partition(&map, 31),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn perturbation_distance_zero_and_decreasing() {
        let map0 = model(0.75, 0.0);
        let (_, d0) = perturbation_distance(&map0, 0.05).unwrap();
        assert_eq!(d0, 0.0);

        let mut prev = f64::INFINITY;
        for &eps in &[1e-2, 1e-3, 1e-4] {
            let (h, d) = perturbation_distance(&model(0.75, eps), 0.05).unwrap();
            assert!(h.lo <= 0.0 && h.hi >= eps && h.width() < 0.05);
            assert!(d > 0.0 && d < prev);
            prev = d;
        }
    }

    #[test]
    fn perturbation_distance_precondition() {
        let map = model(0.75, 0.01);
        assert!(perturbation_distance(&map, 0.02).is_err());
        assert!(perturbation_distance(&map, 0.021).is_ok());
    }

    #[test]
    fn certificate_constants() {
        let cert =
            ExpansionCertificate::for_model_family(0.75, 0.05, &[0.0, 0.05], &[1, 2, 3]).unwrap();
        assert!((cert.theta - 1.5 / 1.1).abs() < 1e-15);
        assert!((cert.w - 1.1 / 1.5).abs() < 1e-15);
        // C = 1 limit of the telescoped constant.
        assert!((cert.w_ell(2) - 3.0 * cert.w).abs() < 1e-12);
        for (level, d) in &cert.delta_n {
            assert!(*d > 0.0, "delta_{level} must be positive");
        }
    }

    #[test]
    fn doubling_map_basics() {
        let d = DoublingMap;
        assert_eq!(d.eval(0.25).unwrap(), 0.0);
        assert_eq!(d.eval(-0.25).unwrap(), 0.0);
        assert_eq!(d.branch_inverse(Branch::Right, 0.0).unwrap(), 0.25);
        assert!((d.eval_branch(Branch::Right, 0.0) - (-0.5)).abs() < 1e-15);
    }
}
