//! Tail probabilities `P(Γ(ξ_{u,τ}) > g_{u,τ})` of thresholded families, by crude
//! Monte Carlo and by conditioning on the value at the origin, together with the
//! uniform-ratio audit and the closed-form asymptotic evaluators.
//!
//! Conditioning on `Z(0) = g − w/g` gives
//!
//! `P = e^{−g²/2}/(√(2π) g) ∫ e^{w − w²/(2g²)} P(Γ(χ_w) > w) dw`,
//!
//! `χ_w(t) = (g R(t) − g²(1 − r(t,0)) − g² h(t) + w (1 − r(t,0) + h(t))) / (1 + h(t))`
//! with `R(t) = Z(t) − r(t,0) Z(0)` independent of `Z(0)`.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::covariance::{LimitComponent, ThresholdedFamily};
use crate::error::{Error, Result};
use crate::functional::FunctionalSpec;
use crate::simkit::{CholeskyFactor, GridSpec, ResidualGenerator};
use crate::special::{
    clopper_pearson, clopper_pearson_upper, exp_power_integral, integrate_to_inf, log_survival_psi, normal_cdf,
    normal_quantile,
};
use crate::stats::{replicate, Estimate};

pub use crate::special::survival_psi;

/// Confidence level of the binomial intervals.
pub const CI_LEVEL: f64 = 0.95;

/// A tail-probability estimate at one `(u, τ)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TailEstimate {
    pub u: f64,
    pub tau: f64,
    /// Threshold `g_{u,τ}`.
    pub g: f64,
    pub estimate: Estimate,
    /// `P̂ / Ψ(g)`, accumulated directly so that it survives underflow of `Ψ(g)`.
    pub relative: Estimate,
    /// `Ψ(g)`.
    pub psi: f64,
    /// Exceedance count (crude Monte Carlo only).
    pub hits: Option<u64>,
    /// No exceedances were observed; the interval is one-sided.
    pub low_confidence: bool,
    /// Bound on the mass cut off by truncating the conditioning level (sampled scheme only).
    pub truncation_bound: Option<f64>,
}

impl TailEstimate {
    /// `P̂ / Ψ(g)`.
    pub fn ratio(&self) -> f64 {
        self.relative.value
    }

    pub fn ratio_stderr(&self) -> f64 {
        self.relative.stderr
    }
}

fn drift_scale(family: &ThresholdedFamily, u: f64, tau: f64, pts: &[Vec<f64>]) -> Result<Vec<f64>> {
    pts.iter()
        .map(|t| {
            let h = family.drift(u, tau, t);
            if h.is_finite() && h > -1.0 {
                Ok(1.0 / (1.0 + h))
            } else {
                Err(Error::Numerical(format!("drift {h} at {t:?} makes the variance undefined")))
            }
        })
        .collect()
}

/// Crude binomial estimate of `P(Γ(ξ_{u,τ}) > g_{u,τ})` from the full correlation on `grid`.
///
/// The interval is exact Clopper–Pearson; with no hits the estimate is 0 with the
/// one-sided upper bound and `low_confidence` set.
#[allow(clippy::too_many_arguments)]
pub fn crude_mc_tail(
    family: &ThresholdedFamily,
    u: f64,
    tau: f64,
    gamma: &FunctionalSpec,
    grid: &GridSpec,
    n_reps: usize,
    seed: u64,
) -> Result<TailEstimate> {
    if n_reps == 0 {
        return Err(Error::config("need at least one replication"));
    }
    if family.dim() != grid.dim() {
        return Err(Error::config("family and grid dimensions differ"));
    }
    let pts = grid.points();
    let factor = CholeskyFactor::new(pts.len(), |i, j| family.correlation(u, tau, &pts[i], &pts[j]))?;
    let scale = drift_scale(family, u, tau, &pts)?;
    let g = family.threshold(u, tau);
    gamma.apply_values(grid, &scale)?;

    let hits = replicate(seed, n_reps, |s| {
        let mut z = factor.sample(&mut s.rng());
        for (v, k) in z.iter_mut().zip(&scale) {
            *v *= k;
        }
        gamma.apply_values(grid, &z).map(|x| x > g).unwrap_or(false)
    })
    .into_iter()
    .filter(|&b| b)
    .count() as u64;

    let n = n_reps as u64;
    let p = hits as f64 / n as f64;
    let mut estimate = Estimate::new(p, (p * (1.0 - p) / n as f64).sqrt(), n_reps);
    let low_confidence = hits == 0;
    estimate.ci95 = if low_confidence {
        (0.0, clopper_pearson_upper(0, n, CI_LEVEL))
    } else {
        clopper_pearson(hits, n, CI_LEVEL)
    };
    let psi = survival_psi(g);
    Ok(TailEstimate {
        u,
        tau,
        g,
        estimate,
        relative: estimate.scaled(1.0 / psi),
        psi,
        hits: Some(hits),
        low_confidence,
        truncation_bound: None,
    })
}

/// How the conditioning level `w` is handled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum WScheme {
    /// For a monotone `Γ` and `r(·,0) ≥ 0` the event `{Γ(χ_w) > w}` is `{w < w*}`;
    /// each replication scores `P(w < w*) = Ψ(g − w*/g)` exactly.
    Integrated,
    /// Draw `w` from the density `∝ e^{w − w²/(2g²)}` on `[−M, M]` and score the indicator.
    /// `None` selects `M = max(10, 5c)` with `c` the functional's dominance constant.
    Sampled { truncation: Option<f64> },
}

/// Conditional sampler of `χ_w` for a thresholded family.
#[derive(Debug, Clone)]
pub struct ConditionalSampler {
    family: ThresholdedFamily,
    scheme: WScheme,
}

/// Grid tables of the conditioned field at one `(u, τ)`: `χ_w = scale·R + a + w·b`.
#[derive(Debug, Clone)]
pub struct ConditionedField {
    gen: ResidualGenerator,
    g: f64,
    scale: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ConditionedField {
    pub fn threshold(&self) -> f64 {
        self.g
    }

    /// `E χ_w(t)` on the grid.
    pub fn mean(&self, w: f64) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a + w * b).collect()
    }

    /// `χ_w − w` without its `w`-dependent part: `scale·R + a`, and the slope `r(t,0)/(1+h(t))`.
    fn sample_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let res = self.gen.sample(rng);
        let off = res.iter().zip(&self.scale).zip(&self.a).map(|((r, s), a)| s * r + a).collect();
        let slope = self.b.iter().map(|b| 1.0 - b).collect();
        (off, slope)
    }

    /// One draw of `χ_w` on the grid.
    pub fn sample_chi<R: Rng + ?Sized>(&self, w: f64, rng: &mut R) -> Vec<f64> {
        let res = self.gen.sample(rng);
        res.iter()
            .zip(&self.scale)
            .zip(self.a.iter().zip(&self.b))
            .map(|((r, s), (a, b))| s * r + a + w * b)
            .collect()
    }
}

impl ConditionalSampler {
    pub fn new(family: ThresholdedFamily) -> Self {
        Self { family, scheme: WScheme::Integrated }
    }

    pub fn with_scheme(mut self, scheme: WScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn family(&self) -> &ThresholdedFamily {
        &self.family
    }

    pub fn scheme(&self) -> WScheme {
        self.scheme
    }

    /// Closed-form `E χ_w(t)`:
    /// `(1 + h) E χ_w = −g²(1 − r(t,0)) − g² h + w (1 − r(t,0) + h)`.
    pub fn mean(&self, u: f64, tau: f64, t: &[f64], w: f64) -> f64 {
        let g = self.family.threshold(u, tau);
        let zero = vec![0.0; t.len()];
        let r = self.family.correlation(u, tau, t, &zero);
        let h = self.family.drift(u, tau, t);
        (-g * g * (1.0 - r) - g * g * h + w * (1.0 - r + h)) / (1.0 + h)
    }

    /// Precompute the conditioned field on `grid`, which must contain the origin.
    pub fn condition(&self, u: f64, tau: f64, grid: &GridSpec) -> Result<ConditionedField> {
        let gen = ResidualGenerator::new(&self.family, u, tau, grid)?;
        let pts = grid.points();
        let inv = drift_scale(&self.family, u, tau, &pts)?;
        let g = self.family.threshold(u, tau);
        if !(g > 0.0) {
            return Err(Error::config(format!("conditioning needs a positive threshold, got g = {g}")));
        }
        let mut a = Vec::with_capacity(pts.len());
        let mut b = Vec::with_capacity(pts.len());
        for (i, t) in pts.iter().enumerate() {
            let r = gen.r0()[i];
            let h = self.family.drift(u, tau, t);
            a.push((-g * g * (1.0 - r) - g * g * h) * inv[i]);
            b.push((1.0 - r + h) * inv[i]);
        }
        let scale = inv.iter().map(|k| g * k).collect();
        Ok(ConditionedField { gen, g, scale, a, b })
    }
}

/// Largest `w` with `Γ(off − w·slope) > 0`, for nonnegative `slope` and monotone `Γ`.
///
/// `±∞` when the event holds for every or for no `w`.
pub fn exceedance_level(gamma: &FunctionalSpec, grid: &GridSpec, off: &[f64], slope: &[f64]) -> f64 {
    match gamma {
        FunctionalSpec::Sup => {
            let mut best = f64::NEG_INFINITY;
            for (&a, &c) in off.iter().zip(slope) {
                if c > 0.0 {
                    best = best.max(a / c);
                } else if a > 0.0 {
                    return f64::INFINITY;
                }
            }
            best
        }
        FunctionalSpec::Inf => {
            let mut best = f64::INFINITY;
            for (&a, &c) in off.iter().zip(slope) {
                if c > 0.0 {
                    best = best.min(a / c);
                } else if a <= 0.0 {
                    return f64::NEG_INFINITY;
                }
            }
            best
        }
        _ => {
            let mut buf = vec![0.0; off.len()];
            let mut f = |w: f64| {
                for ((b, a), c) in buf.iter_mut().zip(off).zip(slope) {
                    *b = a - w * c;
                }
                gamma.apply_values(grid, &buf).unwrap_or(f64::NAN) > 0.0
            };
            const FAR: f64 = 1e12;
            let (mut lo, mut hi);
            if f(0.0) {
                lo = 0.0;
                hi = 1.0;
                while f(hi) {
                    lo = hi;
                    hi *= 2.0;
                    if hi > FAR {
                        return f64::INFINITY;
                    }
                }
            } else {
                hi = 0.0;
                lo = -1.0;
                while !f(lo) {
                    hi = lo;
                    lo *= 2.0;
                    if lo < -FAR {
                        return f64::NEG_INFINITY;
                    }
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if hi - lo <= 1e-13 * hi.abs().max(1.0) || mid == lo || mid == hi {
                    break;
                }
                if f(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}

/// Default truncation `M = max(10, 5c)`.
pub fn default_truncation(gamma: &FunctionalSpec) -> f64 {
    (5.0 * gamma.f1_constant()).max(10.0)
}

/// Bound on the probability mass outside `|w| ≤ M`:
/// `e^{−g²/2}/(√(2π) g) · (e^{−M} + ∫_M^∞ e^w Ψ(w/c) dw)`.
pub fn truncation_bound(g: f64, c: f64, m: f64) -> f64 {
    let tail = integrate_to_inf(|w| (w + log_survival_psi(w / c)).exp(), m, 1e-10 * (-m).exp());
    let pre = (-0.5 * g * g).exp() / ((2.0 * std::f64::consts::PI).sqrt() * g);
    pre * ((-m).exp() + tail)
}

/// Estimate `P(Γ(ξ_{u,τ}) > g_{u,τ})` through the conditioning identity.
///
/// The `Integrated` scheme is unbiased for the full integral and needs a monotone
/// `Γ` and `r(·,0) ≥ 0` on the grid. The `Sampled` scheme is unbiased for the
/// integral over `[−M, M]` and reports the truncation bound.
#[allow(clippy::too_many_arguments)]
pub fn conditional_tail(
    sampler: &ConditionalSampler,
    u: f64,
    tau: f64,
    gamma: &FunctionalSpec,
    grid: &GridSpec,
    n_reps: usize,
    seed: u64,
) -> Result<TailEstimate> {
    if n_reps == 0 {
        return Err(Error::config("need at least one replication"));
    }
    grid.require_origin()?;
    let field = sampler.condition(u, tau, grid)?;
    let g = field.g;
    gamma.apply_values(grid, &field.a)?;

    let (samples, bound) = match sampler.scheme {
        WScheme::Integrated => {
            if !gamma.is_monotone() {
                return Err(Error::config("the integrated scheme needs a monotone functional"));
            }
            if field.b.iter().any(|&b| b > 1.0 + 1e-12) {
                return Err(Error::config("the integrated scheme needs r(t, 0) >= 0 on the grid"));
            }
            let log_psi = log_survival_psi(g);
            let s = replicate(seed, n_reps, |s| {
                let (off, slope) = field.sample_offset(&mut s.rng());
                let w = exceedance_level(gamma, grid, &off, &slope);
                (log_survival_psi(g - w / g) - log_psi).exp()
            });
            (s, None)
        }
        WScheme::Sampled { truncation } => {
            let m = truncation.unwrap_or_else(|| default_truncation(gamma));
            if !(m > 0.0) {
                return Err(Error::config("truncation must be positive"));
            }
            let lo = normal_cdf((-m - g * g) / g);
            let hi = normal_cdf((m - g * g) / g);
            let mass = hi - lo;
            let weight = mass / survival_psi(g);
            let s = replicate(seed, n_reps, |s| {
                let uu: f64 = s.aux().rng().random();
                let w = g * g + g * normal_quantile(lo + uu * mass);
                let w = w.clamp(-m, m);
                let chi = field.sample_chi(w, &mut s.rng());
                let v = gamma.apply_values(grid, &chi).unwrap_or(f64::NAN);
                if v > w { weight } else { 0.0 }
            });
            (s, Some(truncation_bound(g, gamma.f1_constant(), m)))
        }
    };
    let psi = survival_psi(g);
    let relative = Estimate::from_samples(&samples);
    Ok(TailEstimate {
        u,
        tau,
        g,
        estimate: relative.scaled(psi),
        relative,
        psi,
        hits: None,
        low_confidence: false,
        truncation_bound: bound,
    })
}

/// One `(u, τ)` cell of an audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditCell {
    pub tail: TailEstimate,
    pub ratio: f64,
    /// `|ratio / Ĥ − 1|`.
    pub deviation: f64,
    pub deviation_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditRow {
    pub u: f64,
    pub cells: Vec<AuditCell>,
    pub max_deviation: f64,
    /// Standard error of the cell attaining the maximum.
    pub stderr: f64,
    /// `max_deviation < tol + 3·stderr`.
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditReport {
    pub constant: Estimate,
    pub tolerance: f64,
    pub rows: Vec<AuditRow>,
    pub decreasing: bool,
    pub pass: bool,
}

/// Audit `sup_{τ ∈ K_u} |P̂/Ψ(g_{u,τ}) / Ĥ − 1|` along `u_schedule`.
///
/// All cells share the seed, so the audit runs on common random numbers. Passes
/// when the per-`u` maxima strictly decrease and the last one is below
/// `tol + 3·stderr`.
#[allow(clippy::too_many_arguments)]
pub fn uniform_ratio_audit(
    sampler: &ConditionalSampler,
    gamma: &FunctionalSpec,
    constant: &Estimate,
    u_schedule: &[f64],
    grid: &GridSpec,
    n_reps: usize,
    seed: u64,
    tol: f64,
) -> Result<AuditReport> {
    if u_schedule.is_empty() {
        return Err(Error::config("empty threshold schedule"));
    }
    if !(constant.value > 0.0) {
        return Err(Error::config("the reference constant must be positive"));
    }
    let h = constant.value;
    let mut rows = Vec::with_capacity(u_schedule.len());
    for &u in u_schedule {
        let taus = sampler.family().index_grid(u);
        if taus.is_empty() {
            return Err(Error::config(format!("empty index grid at u = {u}")));
        }
        let mut cells = Vec::with_capacity(taus.len());
        for tau in taus {
            let tail = conditional_tail(sampler, u, tau, gamma, grid, n_reps, seed)?;
            let ratio = tail.ratio();
            let se = ((tail.ratio_stderr() / h).powi(2) + (ratio * constant.stderr / (h * h)).powi(2)).sqrt();
            cells.push(AuditCell { tail, ratio, deviation: (ratio / h - 1.0).abs(), deviation_stderr: se });
        }
        let worst = cells
            .iter()
            .max_by(|a, b| a.deviation.total_cmp(&b.deviation))
            .copied()
            .expect("nonempty");
        rows.push(AuditRow {
            u,
            cells,
            max_deviation: worst.deviation,
            stderr: worst.deviation_stderr,
            within_tolerance: worst.deviation < tol + 3.0 * worst.deviation_stderr,
        });
    }
    let decreasing = rows.windows(2).all(|w| w[1].max_deviation < w[0].max_deviation);
    let pass = decreasing && rows.last().is_some_and(|r| r.within_tolerance);
    Ok(AuditReport { constant: *constant, tolerance: tol, rows, decreasing, pass })
}

/// `T · H · Ψ(u) / q(u)` with `q(u) = u^{−2/α}`.
pub fn eval_pickands_formula(t: f64, alpha: f64, u: f64, h: f64) -> Result<f64> {
    if !(u > 0.0) || !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::config(format!("need u > 0 and α in (0, 2], got u = {u}, α = {alpha}")));
    }
    Ok(t * h * survival_psi(u) * u.powf(2.0 / alpha))
}

/// A function of the threshold parameter `u`.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Setup of the `d + n`-dimensional exact-asymptotics formula.
///
/// Coordinates `1..=d1` have `γ_i = 0`, `d1+1..=d2` have `γ_i ∈ (0, ∞)`,
/// `d2+1..=d` have `γ_i = ∞`, and the `n` trailing ones have `γ_i ∈ [0, ∞)`.
#[derive(Clone)]
pub struct AsymptoticSetup {
    pub d: usize,
    pub n: usize,
    pub d1: usize,
    pub d2: usize,
    pub betas: Vec<f64>,
    pub g_fns: Vec<ScalarFn>,
    pub m_fn: ScalarFn,
    pub gammas: Vec<f64>,
    /// `(y_{i,1}, y_{i,2})` for `i ≤ d1`; infinite ends allowed.
    pub y_range: Vec<(f64, f64)>,
    /// `(a_i, b_i)` for `d1 < i ≤ d2`.
    pub ab_limits: Vec<(f64, f64)>,
    /// Limit components `V_{φ_i}`, one per coordinate (may be left empty).
    pub limit_components: Vec<LimitComponent>,
}

impl fmt::Debug for AsymptoticSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AsymptoticSetup")
            .field("d", &self.d)
            .field("n", &self.n)
            .field("d1", &self.d1)
            .field("d2", &self.d2)
            .field("betas", &self.betas)
            .field("gammas", &self.gammas)
            .field("y_range", &self.y_range)
            .field("ab_limits", &self.ab_limits)
            .finish_non_exhaustive()
    }
}

impl AsymptoticSetup {
    pub fn validate(&self) -> Result<()> {
        let k = self.d + self.n;
        if self.d1 > self.d2 || self.d2 > self.d {
            return Err(Error::config(format!("need d1 <= d2 <= d, got {} {} {}", self.d1, self.d2, self.d)));
        }
        if self.betas.len() != k || self.gammas.len() != k || self.g_fns.len() != k {
            return Err(Error::config(format!("betas, gammas and g functions need {k} entries")));
        }
        if !self.limit_components.is_empty() && self.limit_components.len() != k {
            return Err(Error::config(format!("limit components need {k} entries")));
        }
        if self.betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::config("every β_i must be positive"));
        }
        for (i, &g) in self.gammas.iter().enumerate() {
            let ok = if i < self.d1 {
                g == 0.0
            } else if i < self.d2 {
                g > 0.0 && g.is_finite()
            } else if i < self.d {
                g == f64::INFINITY
            } else {
                g >= 0.0 && g.is_finite()
            };
            if !ok {
                return Err(Error::config(format!("γ_{} = {g} does not match its regime", i + 1)));
            }
        }
        if self.y_range.len() != self.d1 {
            return Err(Error::config(format!("need {} y ranges", self.d1)));
        }
        if self.y_range.iter().any(|(a, b)| a.is_nan() || b.is_nan() || a >= b) {
            return Err(Error::config("every y range needs y1 < y2"));
        }
        if self.ab_limits.len() != self.d2 - self.d1 {
            return Err(Error::config(format!("need {} (a, b) limits", self.d2 - self.d1)));
        }
        if self.ab_limits.iter().any(|&(a, b)| !(a <= 0.0 && 0.0 <= b)) {
            return Err(Error::config("every (a, b) limit needs a <= 0 <= b"));
        }
        Ok(())
    }

    /// `h_i(s) = γ_i |s|^{β_i}` for `d1 < i ≤ d2` (0-based `i`).
    pub fn drift(&self, i: usize, s: f64) -> f64 {
        self.gammas[i] * s.abs().powf(self.betas[i])
    }

    /// `h̃(t) = Σ_i γ_{d+i} |t_i|^{β_{d+i}}`.
    pub fn h_tilde(&self, t: &[f64]) -> f64 {
        t.iter().enumerate().map(|(i, &x)| self.drift(self.d + i, x)).sum()
    }
}

/// Constants entering the exact-asymptotics formula.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MainmConstants {
    /// `H_{V_{φ_i}}` for `i ≤ d1`.
    pub pickands: Vec<f64>,
    /// `P^{h_i}_{V_{φ_i}}[a_i, b_i]` for `d1 < i ≤ d2`.
    pub piterbarg: Vec<f64>,
    /// `H^{Γ*}_{Ṽ, h̃}(E)`.
    pub h_star: f64,
}

/// `∏H · ∏P · H^{Γ*} · ∏∫_{y_{i,1}}^{y_{i,2}} e^{−|s|^{β_i}} ds · ∏(g_i/m²)^{1/β_i} · Ψ(m)`,
/// the products over `i ≤ d1` except for `P` (over `d1 < i ≤ d2`).
pub fn eval_mainm_formula(setup: &AsymptoticSetup, u: f64, constants: &MainmConstants) -> Result<f64> {
    setup.validate()?;
    if constants.pickands.len() != setup.d1 || constants.piterbarg.len() != setup.d2 - setup.d1 {
        return Err(Error::config("constants do not match the setup"));
    }
    let m = (setup.m_fn)(u);
    if !(m > 0.0) {
        return Err(Error::config(format!("m(u) must be positive, got {m}")));
    }
    let mut out = constants.h_star * survival_psi(m);
    out *= constants.pickands.iter().product::<f64>();
    out *= constants.piterbarg.iter().product::<f64>();
    for i in 0..setup.d1 {
        let (y1, y2) = setup.y_range[i];
        let beta = setup.betas[i];
        out *= exp_power_integral(beta, y1, y2);
        out *= ((setup.g_fns[i])(u) / (m * m)).powf(1.0 / beta);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simkit::Axis;
    use crate::special::normal_pdf;

    fn single_point() -> GridSpec {
        GridSpec::line(0.0, 0.0, 1).unwrap()
    }

    fn constant_family(g: f64) -> ThresholdedFamily {
        ThresholdedFamily::new("flat", 1, |_, _, _: &[f64], _: &[f64]| 1.0, move |_, _| g)
    }

    #[test]
    fn psi_values() {
        assert_eq!(survival_psi(0.0), 0.5);
        assert!((survival_psi(1.0) / 0.158_655_253_931_457_05 - 1.0).abs() < 1e-14);
        let x: f64 = 10.0;
        let lo = normal_pdf(x) * (1.0 / x - 1.0 / x.powi(3));
        let hi = normal_pdf(x) / x;
        assert!(lo < survival_psi(x) && survival_psi(x) < hi);
        assert!((survival_psi(x) / (hi * 0.99) - 1.0).abs() < 0.01);
    }

    #[test]
    fn integrated_scheme_at_single_point_is_exact() {
        for g in [3.0, 5.0, 8.0] {
            let s = ConditionalSampler::new(constant_family(g));
            let t = conditional_tail(&s, g, 0.0, &FunctionalSpec::Sup, &single_point(), 16, 1).unwrap();
            assert!((t.ratio() - 1.0).abs() < 1e-12);
            assert_eq!(t.estimate.stderr, 0.0);
        }
    }

    #[test]
    fn degenerate_family_reduces_to_psi() {
        let s = ConditionalSampler::new(constant_family(4.0));
        let grid = GridSpec::line(0.0, 1.0, 5).unwrap();
        let t = conditional_tail(&s, 4.0, 0.0, &FunctionalSpec::Sup, &grid, 8, 1).unwrap();
        assert!((t.ratio() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_scheme_at_single_point() {
        // P = Ψ(g) − Ψ(g + M/g) exactly; the indicator is 1 iff w < 0.
        let g = 3.0;
        let s = ConditionalSampler::new(constant_family(g)).with_scheme(WScheme::Sampled { truncation: None });
        let t = conditional_tail(&s, g, 0.0, &FunctionalSpec::Sup, &single_point(), 40_000, 3).unwrap();
        let exact = survival_psi(g) - survival_psi(g + 10.0 / g);
        assert!((t.estimate.value - exact).abs() < 4.0 * t.estimate.stderr, "{t:?} vs {exact}");
        let b = t.truncation_bound.unwrap();
        assert!(b > 0.0 && b < 1e-4 * survival_psi(g));
    }

    #[test]
    fn crude_with_negative_threshold_always_hits() {
        let fam = ThresholdedFamily::new(
            "ou",
            1,
            |_, _, s: &[f64], t: &[f64]| (-(s[0] - t[0]).abs()).exp(),
            |_, _| -10.0,
        );
        let grid = GridSpec::line(0.0, 1.0, 6).unwrap();
        let t = crude_mc_tail(&fam, 1.0, 0.0, &FunctionalSpec::Sup, &grid, 500, 2).unwrap();
        assert_eq!(t.hits, Some(500));
        assert_eq!(t.estimate.value, 1.0);
        assert!(t.estimate.ci95.0 > 0.99);
    }

    #[test]
    fn crude_zero_hits_is_flagged() {
        let t = crude_mc_tail(&constant_family(9.0), 9.0, 0.0, &FunctionalSpec::Sup, &single_point(), 200, 2).unwrap();
        assert!(t.low_confidence);
        assert_eq!(t.estimate.value, 0.0);
        assert_eq!(t.estimate.ci95.0, 0.0);
        assert!(t.estimate.ci95.1 > 0.0 && t.estimate.ci95.1 < 0.02);
    }

    #[test]
    fn exceedance_level_closed_forms_match_bisection() {
        let grid = GridSpec::new(vec![Axis { lo: 0.0, hi: 1.0, n: 2 }, Axis { lo: 0.0, hi: 1.0, n: 2 }]).unwrap();
        let off = [0.0, 0.3, -0.5, 1.2];
        let slope = [1.0, 0.8, 0.5, 0.9];
        let composed = FunctionalSpec::composed(FunctionalSpec::Sup, vec![0]);
        let a = exceedance_level(&FunctionalSpec::Sup, &grid, &off, &slope);
        let b = exceedance_level(&composed, &grid, &off, &slope);
        assert!((a - 1.2 / 0.9).abs() < 1e-12);
        assert!((a - b).abs() < 1e-10, "{a} {b}");
        let mix = FunctionalSpec::Mix(0.5);
        let w = exceedance_level(&mix, &grid, &off, &slope);
        let at = |w: f64| {
            let v: Vec<f64> = off.iter().zip(&slope).map(|(a, c)| a - w * c).collect();
            mix.apply_flat(&v)
        };
        assert!(at(w - 1e-8) > 0.0 && at(w + 1e-8) <= 0.0);
        assert_eq!(exceedance_level(&FunctionalSpec::Sup, &grid, &[0.0, 1.0, 0.0, 0.0], &[1.0, 0.0, 1.0, 1.0]), f64::INFINITY);
        assert_eq!(exceedance_level(&FunctionalSpec::Inf, &grid, &[0.0, -1.0, 0.0, 0.0], &[1.0, 0.0, 1.0, 1.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn mean_matches_identity() {
        let fam = ThresholdedFamily::new(
            "ou",
            1,
            |_, _, s: &[f64], t: &[f64]| (-(s[0] - t[0]).abs() / 9.0).exp(),
            |u, _| u,
        )
        .with_drift(|_, _, t: &[f64]| 0.1 * t[0]);
        let s = ConditionalSampler::new(fam);
        let (g, t, w) = (3.0_f64, 0.7_f64, 1.3);
        let r = (-t / 9.0).exp();
        let h = 0.07;
        let lhs = (1.0 + h) * s.mean(g, 0.0, &[t], w);
        let rhs = -g * g * (1.0 - r) - g * g * h + w * (1.0 - r + h);
        assert!((lhs - rhs).abs() < 1e-12);
        let grid = GridSpec::line(0.0, 0.7, 2).unwrap();
        let f = s.condition(g, 0.0, &grid).unwrap();
        assert!((f.mean(w)[1] - s.mean(g, 0.0, &[t], w)).abs() < 1e-12);
        assert_eq!(f.mean(w)[0], 0.0);
    }

    #[test]
    fn integrated_scheme_rejects_non_monotone_functional() {
        let s = ConditionalSampler::new(constant_family(3.0));
        let e = conditional_tail(&s, 3.0, 0.0, &FunctionalSpec::Mix(1.5), &single_point(), 4, 0).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        let grid = GridSpec::line(0.5, 1.0, 3).unwrap();
        assert!(conditional_tail(&s, 3.0, 0.0, &FunctionalSpec::Sup, &grid, 4, 0).is_err());
    }

    #[test]
    fn pickands_formula_examples() {
        let v = eval_pickands_formula(1.0, 2.0, 3.0, 1.0 / std::f64::consts::PI.sqrt()).unwrap();
        assert!((v / (3.0 * survival_psi(3.0) / std::f64::consts::PI.sqrt()) - 1.0).abs() < 1e-14);
        let v2 = eval_pickands_formula(2.0, 2.0, 3.0, 1.0 / std::f64::consts::PI.sqrt()).unwrap();
        assert_eq!(v2, 2.0 * v);
        let v3 = eval_pickands_formula(1.0, 1.0, 4.0, 1.0).unwrap();
        assert!((v3 / (16.0 * survival_psi(4.0)) - 1.0).abs() < 1e-14);
    }

    fn setup(d1: usize, d2: usize, d: usize, n: usize, gammas: Vec<f64>) -> AsymptoticSetup {
        let k = d + n;
        AsymptoticSetup {
            d,
            n,
            d1,
            d2,
            betas: vec![2.0; k],
            g_fns: (0..k).map(|_| Arc::new(|u: f64| u.powi(4)) as ScalarFn).collect(),
            m_fn: Arc::new(|u| u),
            gammas,
            y_range: vec![(f64::NEG_INFINITY, f64::INFINITY); d1],
            ab_limits: vec![(0.0, f64::INFINITY); d2 - d1],
            limit_components: vec![],
        }
    }

    #[test]
    fn mainm_formula_examples() {
        let pure = setup(0, 0, 0, 0, vec![]);
        let c = MainmConstants { pickands: vec![], piterbarg: vec![], h_star: 1.7 };
        assert!((eval_mainm_formula(&pure, 4.0, &c).unwrap() - 1.7 * survival_psi(4.0)).abs() < 1e-20);

        let one = setup(1, 1, 1, 0, vec![0.0]);
        let c = MainmConstants { pickands: vec![1.0], piterbarg: vec![], h_star: 1.0 };
        let v = eval_mainm_formula(&one, 3.0, &c).unwrap();
        let expect = std::f64::consts::PI.sqrt() * (81.0_f64 / 9.0).sqrt() * survival_psi(3.0);
        assert!((v / expect - 1.0).abs() < 1e-12);
        let c2 = MainmConstants { h_star: 2.0, ..c };
        assert_eq!(eval_mainm_formula(&one, 3.0, &c2).unwrap(), 2.0 * v);
    }

    #[test]
    fn mainm_regime_mismatch_is_rejected() {
        let bad = [
            setup(1, 1, 1, 0, vec![0.5]),
            setup(0, 1, 1, 0, vec![0.0]),
            setup(0, 0, 1, 0, vec![3.0]),
            setup(0, 0, 0, 1, vec![f64::INFINITY]),
        ];
        for s in bad {
            let c = MainmConstants { pickands: vec![1.0; s.d1], piterbarg: vec![1.0; s.d2 - s.d1], h_star: 1.0 };
            assert!(matches!(eval_mainm_formula(&s, 3.0, &c), Err(Error::Config(_))), "{s:?}");
        }
        let ok = setup(0, 1, 2, 1, vec![0.5, f64::INFINITY, 0.0]);
        let c = MainmConstants { pickands: vec![], piterbarg: vec![2.0], h_star: 1.0 };
        assert!((eval_mainm_formula(&ok, 3.0, &c).unwrap() - 2.0 * survival_psi(3.0)).abs() < 1e-18);
    }
}
