//! Double maxima `D = P(sup_{λ₁+𝓔₁} X_u > m_{λ₁}, sup_{λ₂+𝓔₂} X_u > m_{λ₂})`, the uniform
//! exponential bound on them, a fit-and-verify harness for its constant, and the
//! Bonferroni bracket of a union of cell exceedances.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simkit::CholeskyFactor;
use crate::special::{clopper_pearson, clopper_pearson_upper, survival_psi};
use crate::stats::{replicate, Estimate};
use crate::tailprob::{ScalarFn, CI_LEVEL};

/// Cap on the number of points of a joint two-box grid.
pub const JOINT_GRID_LIMIT: usize = 1 << 12;

/// Axis-aligned closed box `∏[lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::config("box corners need the same positive dimension"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::config(format!("empty or unbounded box {lo:?}..{hi:?}")));
        }
        Ok(Self { lo, hi })
    }

    /// `[0, s]^d`.
    pub fn cube(d: usize, s: f64) -> Result<Self> {
        Self::new(vec![0.0; d], vec![s; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn translate(&self, shift: &[f64]) -> Self {
        let add = |v: &[f64]| v.iter().zip(shift).map(|(a, b)| a + b).collect();
        Self { lo: add(&self.lo), hi: add(&self.hi) }
    }

    pub fn contains_box(&self, other: &BoxRegion) -> bool {
        (0..self.dim()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    /// Grid points with spacing `step` along every axis; a degenerate axis contributes one point.
    pub fn grid_points(&self, step: f64) -> Result<Vec<Vec<f64>>> {
        if !(step > 0.0) {
            return Err(Error::config("grid step must be positive"));
        }
        let mut axes = Vec::with_capacity(self.dim());
        for (&a, &b) in self.lo.iter().zip(&self.hi) {
            let k = (b - a) / step;
            let n = k.round();
            if (k - n).abs() > 1e-9 * k.max(1.0) {
                return Err(Error::config(format!("step {step} does not divide [{a}, {b}]")));
            }
            let n = n as usize;
            axes.push((0..=n).map(|j| if j == n { b } else { a + j as f64 * step }).collect::<Vec<f64>>());
        }
        let mut pts = vec![vec![]];
        for ax in &axes {
            pts = pts
                .into_iter()
                .flat_map(|p: Vec<f64>| {
                    ax.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        Ok(pts)
    }
}

/// `F(A, B) = inf_{s∈A, t∈B} ‖s − t‖` for axis-aligned boxes.
pub fn separation(a: &BoxRegion, b: &BoxRegion) -> f64 {
    assert_eq!(a.dim(), b.dim(), "boxes of different dimension");
    (0..a.dim())
        .map(|i| {
            let gap = (b.lo[i] - a.hi[i]).max(a.lo[i] - b.hi[i]).max(0.0);
            gap * gap
        })
        .sum::<f64>()
        .sqrt()
}

/// Constants of the exponential bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BoundParams {
    pub c1: f64,
    pub c2: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub s1: f64,
    pub s2: f64,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c2 > 0.0 && self.beta > 0.0 && self.s1 > 0.0) {
            return Err(Error::config("C1, C2, β and S1 must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(Error::config(format!("α must lie in (0, 2], got {}", self.alpha)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::config(format!("δ must lie in (0, 1], got {}", self.delta)));
        }
        if !(self.s2 > 1.0) {
            return Err(Error::config(format!("S2 must exceed 1, got {}", self.s2)));
        }
        Ok(())
    }
}

/// `β = ½ min_i min(α_{i,0}, α_{i,∞}, 2)` for structure functions regularly varying at zero and infinity.
pub fn beta_regularly_varying(indices: &[(f64, f64)]) -> f64 {
    0.5 * indices.iter().fold(2.0_f64, |m, &(a0, ai)| m.min(a0).min(ai))
}

/// `β = ½ min(2, min_i α_{i,0})` for structure functions observed on a bounded scaled range.
pub fn beta_local(indices: &[f64]) -> f64 {
    0.5 * indices.iter().fold(2.0_f64, |m, &a| m.min(a))
}

/// Correlation `r_u(s, t)` of a unit-variance field family.
pub type CorrelationFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;

/// Two translated boxes of one unit-variance field family with their thresholds.
#[derive(Clone)]
pub struct DoubleMaximaConfig {
    pub label: String,
    pub correlation: CorrelationFn,
    pub lambda1: Vec<f64>,
    pub cell1: BoxRegion,
    pub lambda2: Vec<f64>,
    pub cell2: BoxRegion,
    pub m1: ScalarFn,
    pub m2: ScalarFn,
    /// Reference threshold `m(u)`.
    pub m: ScalarFn,
    pub params: BoundParams,
    /// Allowed `|m_{λ_i}(u)/m(u) − 1|`.
    pub threshold_tolerance: f64,
}

impl fmt::Debug for DoubleMaximaConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DoubleMaximaConfig")
            .field("label", &self.label)
            .field("lambda1", &self.lambda1)
            .field("cell1", &self.cell1)
            .field("lambda2", &self.lambda2)
            .field("cell2", &self.cell2)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl DoubleMaximaConfig {
    /// Boxes `[0, S2]^d` at offsets `0` and `(S2 + sep) e_1`, common threshold `m(u)`.
    pub fn separated_cubes(
        label: impl Into<String>,
        d: usize,
        sep: f64,
        correlation: CorrelationFn,
        m: ScalarFn,
        params: BoundParams,
    ) -> Result<Self> {
        if !(sep >= 0.0) {
            return Err(Error::config("separation must be nonnegative"));
        }
        let cell = BoxRegion::cube(d, params.s2)?;
        let mut lambda2 = vec![0.0; d];
        lambda2[0] = params.s2 + sep;
        Ok(Self {
            label: label.into(),
            correlation,
            lambda1: vec![0.0; d],
            cell1: cell.clone(),
            lambda2,
            cell2: cell,
            m1: m.clone(),
            m2: m.clone(),
            m,
            params,
            threshold_tolerance: 0.05,
        })
    }

    pub fn dim(&self) -> usize {
        self.cell1.dim()
    }

    pub fn region1(&self) -> BoxRegion {
        self.cell1.translate(&self.lambda1)
    }

    pub fn region2(&self) -> BoxRegion {
        self.cell2.translate(&self.lambda2)
    }

    pub fn separation(&self) -> f64 {
        separation(&self.region1(), &self.region2())
    }

    /// Static checks: dimensions, cells inside `[0, S2]^d`, bound constants.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let d = self.dim();
        if self.cell2.dim() != d || self.lambda1.len() != d || self.lambda2.len() != d {
            return Err(Error::config("boxes and offsets must share one dimension"));
        }
        let frame = BoxRegion::cube(d, self.params.s2)?;
        if !frame.contains_box(&self.cell1) || !frame.contains_box(&self.cell2) {
            return Err(Error::config(format!("cells must lie in [0, {}]^{d}", self.params.s2)));
        }
        Ok(())
    }

    /// Swap the roles of the two boxes.
    pub fn swapped(&self) -> Self {
        let mut c = self.clone();
        std::mem::swap(&mut c.lambda1, &mut c.lambda2);
        std::mem::swap(&mut c.cell1, &mut c.cell2);
        std::mem::swap(&mut c.m1, &mut c.m2);
        c
    }
}

/// Numerical check of the bound's assumptions on the joint grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundConditionReport {
    /// `min m²(1 − r)/(C1 ‖s − t‖^β)` over pairs at distance `≥ S1` (`None` if there are none).
    pub lower_growth: Option<f64>,
    /// `max m²(1 − r)/(C2 ‖s − t‖^α)` over distinct pairs with `s − t ∈ [−1, 1]^d`.
    pub local_holder: Option<f64>,
    pub min_correlation: f64,
    pub threshold_deviation: f64,
    pub pass: bool,
}

pub fn check_bound_conditions(cfg: &DoubleMaximaConfig, u: f64, step: f64) -> Result<BoundConditionReport> {
    cfg.validate()?;
    let mut pts = cfg.region1().grid_points(step)?;
    pts.extend(cfg.region2().grid_points(step)?);
    let p = &cfg.params;
    let m = (cfg.m)(u);
    let (mut lower, mut local, mut rmin) = (None::<f64>, None::<f64>, f64::INFINITY);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (s, t) = (&pts[i], &pts[j]);
            let dist = s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if dist == 0.0 {
                continue;
            }
            let r = (cfg.correlation)(u, s, t);
            rmin = rmin.min(r);
            let v = m * m * (1.0 - r);
            if dist >= p.s1 {
                let q = v / (p.c1 * dist.powf(p.beta));
                lower = Some(lower.map_or(q, |x| x.min(q)));
            }
            if s.iter().zip(t).all(|(a, b)| (a - b).abs() <= 1.0) {
                let q = v / (p.c2 * dist.powf(p.alpha));
                local = Some(local.map_or(q, |x| x.max(q)));
            }
        }
    }
    let dev = [(cfg.m1)(u), (cfg.m2)(u)].iter().map(|mi| (mi / m - 1.0).abs()).fold(0.0, f64::max);
    let pass = lower.is_none_or(|x| x >= 1.0)
        && local.is_none_or(|x| x <= 1.0)
        && rmin > p.delta - 1.0
        && dev <= cfg.threshold_tolerance;
    Ok(BoundConditionReport { lower_growth: lower, local_holder: local, min_correlation: rmin, threshold_deviation: dev, pass })
}

/// Joint exceedance estimate with the two single-box tails from the same samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DoubleMaximaEstimate {
    pub estimate: Estimate,
    pub hits: u64,
    pub tail1: Estimate,
    pub tail2: Estimate,
    pub points: (usize, usize),
}

fn binomial(hits: u64, n: usize) -> Estimate {
    let p = hits as f64 / n as f64;
    let mut e = Estimate::new(p, (p * (1.0 - p) / n as f64).sqrt(), n);
    e.ci95 = if hits == 0 {
        (0.0, clopper_pearson_upper(0, n as u64, CI_LEVEL))
    } else {
        clopper_pearson(hits, n as u64, CI_LEVEL)
    };
    e
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Monte Carlo estimate of `D` from one Cholesky factor of the stacked two-box covariance.
///
/// The boxes are stacked in a canonical order, so swapping them reproduces the same samples.
pub fn estimate_double_maxima(
    cfg: &DoubleMaximaConfig,
    u: f64,
    step: f64,
    n_reps: usize,
    seed: u64,
) -> Result<DoubleMaximaEstimate> {
    cfg.validate()?;
    if n_reps == 0 {
        return Err(Error::config("need at least one replication"));
    }
    let (r1, r2) = (cfg.region1(), cfg.region2());
    let (m1, m2) = ((cfg.m1)(u), (cfg.m2)(u));
    let key = |r: &BoxRegion, m: f64| (r.lo.clone(), r.hi.clone(), m);
    let (k1, k2) = (key(&r1, m1), key(&r2, m2));
    let flip = lex(&k1.0, &k2.0).then(lex(&k1.1, &k2.1)).then(k1.2.total_cmp(&k2.2)) == Ordering::Greater;
    let (a, b, ma, mb) = if flip { (&r2, &r1, m2, m1) } else { (&r1, &r2, m1, m2) };
    let pa = a.grid_points(step)?;
    let pb = b.grid_points(step)?;
    let na = pa.len();
    let pts: Vec<Vec<f64>> = pa.into_iter().chain(pb).collect();
    if pts.len() > JOINT_GRID_LIMIT {
        return Err(Error::Budget { what: "joint grid points", requested: pts.len(), limit: JOINT_GRID_LIMIT });
    }
    let factor = CholeskyFactor::new(pts.len(), |i, j| if i == j { 1.0 } else { (cfg.correlation)(u, &pts[i], &pts[j]) })?;
    let flags = replicate(seed, n_reps, |s| {
        let z = factor.sample(&mut s.rng());
        let sa = z[..na].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sb = z[na..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (sa > ma, sb > mb)
    });
    let count = |f: &dyn Fn(&(bool, bool)) -> bool| flags.iter().filter(|x| f(x)).count() as u64;
    let hits = count(&|&(x, y)| x && y);
    let (ha, hb) = (count(&|x| x.0), count(&|x| x.1));
    let (h1, h2) = if flip { (hb, ha) } else { (ha, hb) };
    let (n1, n2) = if flip { (pts.len() - na, na) } else { (na, pts.len() - na) };
    Ok(DoubleMaximaEstimate {
        estimate: binomial(hits, n_reps),
        hits,
        tail1: binomial(h1, n_reps),
        tail2: binomial(h2, n_reps),
        points: (n1, n2),
    })
}

/// `C · S2^{2d} · Ψ(min(m_{λ₁}, m_{λ₂})) · exp(−C1 F^β / 8)`.
pub fn eval_double_bound(cfg: &DoubleMaximaConfig, u: f64, c: f64) -> f64 {
    let p = &cfg.params;
    let m = (cfg.m1)(u).min((cfg.m2)(u));
    let f = cfg.separation();
    c * p.s2.powi(2 * cfg.dim() as i32) * survival_psi(m) * (-p.c1 * f.powf(p.beta) / 8.0).exp()
}

/// One configuration entering the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundObservation {
    pub separation: f64,
    pub s2: f64,
    pub u: f64,
    pub estimate: Estimate,
    /// The bound with `C = 1`.
    pub unit_bound: f64,
}

impl BoundObservation {
    pub fn new(cfg: &DoubleMaximaConfig, u: f64, estimate: Estimate) -> Self {
        Self { separation: cfg.separation(), s2: cfg.params.s2, u, estimate, unit_bound: eval_double_bound(cfg, u, 1.0) }
    }

    pub fn ci_upper(&self) -> f64 {
        self.estimate.ci95.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundFit {
    /// Smallest `C` with every CI upper end below the bound.
    pub fitted_c: f64,
    /// `ln(C · bound / CI upper)` per observation.
    pub slack: Vec<f64>,
    /// Some `(S2, u)` group needs a `C` that grows significantly with separation.
    pub unbounded: bool,
    pub pass: bool,
}

/// Fit `C` and flag growth of the required constant with separation.
///
/// Within each `(S2, u)` group the required constant is flagged as growing when the
/// CI-lower requirement at the largest separation exceeds the CI-upper requirement at
/// the smallest one.
pub fn fit_bound_constant(obs: &[BoundObservation]) -> Result<BoundFit> {
    if obs.is_empty() {
        return Err(Error::config("no configurations to fit"));
    }
    let need: Vec<f64> = obs.iter().map(|o| o.ci_upper() / o.unit_bound).collect();
    let fitted_c = need.iter().copied().fold(0.0, f64::max);
    // ln(C / need) is exactly zero at the configuration that fixes C
    let slack = need.iter().map(|&c| (fitted_c / c).ln()).collect();
    let mut unbounded = false;
    for o in obs {
        let group: Vec<&BoundObservation> = obs.iter().filter(|p| p.s2 == o.s2 && p.u == o.u).collect();
        let near = group.iter().min_by(|a, b| a.separation.total_cmp(&b.separation)).expect("nonempty");
        let far = group.iter().max_by(|a, b| a.separation.total_cmp(&b.separation)).expect("nonempty");
        if far.separation > near.separation && far.estimate.ci95.0 / far.unit_bound > near.ci_upper() / near.unit_bound {
            unbounded = true;
        }
    }
    let pass = fitted_c.is_finite() && fitted_c > 0.0 && !unbounded;
    Ok(BoundFit { fitted_c, slack, unbounded, pass })
}

/// A pairwise double-exceedance term `p_{kl}` of cells `k < l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairTerm {
    pub k: usize,
    pub l: usize,
    pub estimate: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bracket {
    pub lower: f64,
    pub upper: f64,
    pub lower_stderr: f64,
    pub upper_stderr: f64,
}

/// `(Σ p_k − Σ_{k≠l} p_{kl}, Σ p_k)`; every unordered pair enters the lower sum twice.
/// Standard errors assume independent estimates.
pub fn bonferroni_bracket(cells: &[Estimate], pairs: &[PairTerm]) -> Result<Bracket> {
    for p in pairs {
        if p.k >= p.l || p.l >= cells.len() {
            return Err(Error::config(format!("pair ({}, {}) does not index two distinct cells", p.k, p.l)));
        }
    }
    let upper: f64 = cells.iter().map(|e| e.value).sum();
    let double: f64 = pairs.iter().map(|p| p.estimate.value).sum();
    let var_up: f64 = cells.iter().map(|e| e.stderr * e.stderr).sum();
    let var_pairs: f64 = pairs.iter().map(|p| p.estimate.stderr * p.estimate.stderr).sum();
    Ok(Bracket {
        lower: upper - 2.0 * double,
        upper,
        lower_stderr: (var_up + 4.0 * var_pairs).sqrt(),
        upper_stderr: var_up.sqrt(),
    })
}

/// `r_u(s,t) = exp(−‖s − t‖²/m(u)²)` with `m(u) = u`, `C1 = 0.4`, `β = 1`, `C2 = 1`, `α = 2`.
pub fn gaussian_preset(sep: f64, s2: f64) -> Result<DoubleMaximaConfig> {
    let corr: CorrelationFn = Arc::new(|u, s, t| {
        let d2: f64 = s.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
        (-d2 / (u * u)).exp()
    });
    let params = BoundParams { c1: 0.4, c2: 1.0, alpha: 2.0, beta: beta_local(&[2.0]), delta: 1.0, s1: 0.5, s2 };
    DoubleMaximaConfig::separated_cubes("doublesum-gaussian", 1, sep, corr, Arc::new(|u| u), params)
}

/// Flat correlation `r ≡ 0.9` off the diagonal with a claimed `C1 = 2`, `β = 1`.
pub fn flat_preset(sep: f64, s2: f64) -> Result<DoubleMaximaConfig> {
    let corr: CorrelationFn = Arc::new(|_, _, _| 0.9);
    let params = BoundParams { c1: 2.0, c2: 1.0, alpha: 2.0, beta: 1.0, delta: 1.0, s1: 0.5, s2 };
    DoubleMaximaConfig::separated_cubes("doublesum-flat", 1, sep, corr, Arc::new(|u| u), params)
}
