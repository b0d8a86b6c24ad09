//! Variance and correlation models, drift functions, limit-field specifications
//! and threshold-dependent Gaussian families, together with numerical checks of
//! the structural conditions the tail approximations rely on.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Increment autocovariance of fractional Brownian motion with `Var B(t) = t^alpha`
/// on a grid of step `step`: `γ(k) = ½ δ^α (|k+1|^α + |k-1|^α - 2|k|^α)`.
pub fn fgn_autocovariance(alpha: f64, step: f64, lag: u64) -> Result<f64> {
    check_fbm_index(alpha)?;
    if !(step > 0.0) {
        return Err(Error::config(format!("grid step must be positive, got {step}")));
    }
    let k = lag as f64;
    if lag == 0 {
        return Ok(step.powf(alpha));
    }
    // Written so that α = 1 gives exact zeros and α = 2 gives exactly δ².
    let v = 0.5 * step.powf(alpha) * ((k + 1.0).powf(alpha) + (k - 1.0).powf(alpha) - 2.0 * k.powf(alpha));
    Ok(v)
}

fn check_fbm_index(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 2.0 {
        Ok(())
    } else {
        Err(Error::config(format!("fBm index must lie in (0, 2], got {alpha}")))
    }
}

/// Which closed form or table backs a [`VarianceFunction`].
#[derive(Debug, Clone, PartialEq)]
pub enum VarianceKind {
    /// `σ²(t) = t^alpha`.
    Fbm { alpha: f64 },
    /// `σ²(t) = Σ w_i t^{a_i}`.
    SumOfFbm { terms: Vec<(f64, f64)> },
    /// Tabulated `(t, σ²(t))` knots, interpolated linearly in log–log coordinates.
    Custom { knots: Vec<(f64, f64)> },
}

/// Variance function `σ²(t)` of a process with stationary increments, with the
/// regular-variation indices of `σ²` at zero and at infinity.
///
/// Both indices are those of `σ²` itself, so an fBm with `σ²(t) = t^α` has
/// `alpha0 = alpha_inf = α ∈ (0, 2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceFunction {
    kind: VarianceKind,
    alpha0: f64,
    alpha_inf: f64,
    range: (f64, f64),
}

impl VarianceFunction {
    pub fn fbm(alpha: f64) -> Result<Self> {
        check_fbm_index(alpha)?;
        Ok(Self {
            kind: VarianceKind::Fbm { alpha },
            alpha0: alpha,
            alpha_inf: alpha,
            range: (0.0, f64::INFINITY),
        })
    }

    /// Sum of independent fBm variances; the smallest exponent governs zero,
    /// the largest governs infinity.
    pub fn sum_of_fbm(terms: Vec<(f64, f64)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::config("sumOfFbm needs at least one term"));
        }
        for &(w, a) in &terms {
            check_fbm_index(a)?;
            if !(w > 0.0) {
                return Err(Error::config(format!("sumOfFbm weight must be positive, got {w}")));
            }
        }
        let alpha0 = terms.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
        let alpha_inf = terms.iter().map(|t| t.1).fold(0.0, f64::max);
        Ok(Self {
            kind: VarianceKind::SumOfFbm { terms },
            alpha0,
            alpha_inf,
            range: (0.0, f64::INFINITY),
        })
    }

    /// Tabulated model. Queries are valid at `0` and within `[t_first, t_last]`.
    pub fn custom(mut knots: Vec<(f64, f64)>, alpha0: f64, alpha_inf: f64) -> Result<Self> {
        check_fbm_index(alpha0)?;
        check_fbm_index(alpha_inf)?;
        knots.retain(|k| k.0 != 0.0);
        if knots.len() < 2 {
            return Err(Error::config("custom table needs at least two knots with t > 0"));
        }
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in knots.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::config(format!("duplicate knot at t = {}", w[0].0)));
            }
        }
        if knots.iter().any(|&(t, v)| !(t > 0.0) || !(v > 0.0)) {
            return Err(Error::config("custom table needs t > 0 and σ²(t) > 0"));
        }
        let range = (knots[0].0, knots[knots.len() - 1].0);
        Ok(Self { kind: VarianceKind::Custom { knots }, alpha0, alpha_inf, range })
    }

    pub fn kind(&self) -> &VarianceKind {
        &self.kind
    }

    /// Regular-variation index of `σ²` at zero.
    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    /// Regular-variation index of `σ²` at infinity.
    pub fn alpha_inf(&self) -> f64 {
        self.alpha_inf
    }

    /// Evaluable range `(lo, hi)` for positive lags (zero is always valid).
    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    /// `Some(α)` when the model is exactly `t^α`.
    pub fn as_fbm(&self) -> Option<f64> {
        match self.kind {
            VarianceKind::Fbm { alpha } => Some(alpha),
            _ => None,
        }
    }

    /// `σ²(|t|)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        let t = t.abs();
        if t == 0.0 {
            return Ok(0.0);
        }
        if t.is_nan() || t < self.range.0 * (1.0 - 1e-12) || t > self.range.1 * (1.0 + 1e-12) {
            return Err(Error::OutOfRange { t, lo: self.range.0, hi: self.range.1 });
        }
        Ok(match &self.kind {
            VarianceKind::Fbm { alpha } => t.powf(*alpha),
            VarianceKind::SumOfFbm { terms } => terms.iter().map(|(w, a)| w * t.powf(*a)).sum(),
            VarianceKind::Custom { knots } => interp_loglog(knots, t),
        })
    }

    /// `Cov(X(s), X(t)) = ½(σ²(|s|) + σ²(|t|) − σ²(|t−s|))` for the two-sided process with `X(0) = 0`.
    pub fn covariance(&self, s: f64, t: f64) -> Result<f64> {
        Ok(0.5 * (self.eval(s)? + self.eval(t)? - self.eval(t - s)?))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let def: VarianceDef = serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        def.build()
    }

    pub fn to_def(&self) -> VarianceDef {
        match &self.kind {
            VarianceKind::Fbm { alpha } => VarianceDef::Fbm { alpha: *alpha },
            VarianceKind::SumOfFbm { terms } => VarianceDef::SumOfFbm { terms: terms.iter().map(|&(w, a)| [w, a]).collect() },
            VarianceKind::Custom { knots } => VarianceDef::Custom {
                table: knots.iter().map(|&(t, v)| [t, v]).collect(),
                alpha0: self.alpha0,
                alpha_inf: self.alpha_inf,
            },
        }
    }
}

fn interp_loglog(knots: &[(f64, f64)], t: f64) -> f64 {
    let idx = knots.partition_point(|k| k.0 < t);
    if idx == 0 {
        return knots[0].1;
    }
    if idx >= knots.len() {
        return knots[knots.len() - 1].1;
    }
    let (t0, v0) = knots[idx - 1];
    let (t1, v1) = knots[idx];
    if t == t1 {
        return v1;
    }
    let w = (t.ln() - t0.ln()) / (t1.ln() - t0.ln());
    (v0.ln() + w * (v1.ln() - v0.ln())).exp()
}

/// JSON form of a variance model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum VarianceDef {
    #[serde(rename = "fbm")]
    Fbm { alpha: f64 },
    #[serde(rename = "sumOfFbm")]
    SumOfFbm { terms: Vec<[f64; 2]> },
    #[serde(rename = "custom")]
    Custom {
        table: Vec<[f64; 2]>,
        alpha0: f64,
        #[serde(rename = "alphaInf")]
        alpha_inf: f64,
    },
}

impl VarianceDef {
    pub fn build(&self) -> Result<VarianceFunction> {
        match self {
            VarianceDef::Fbm { alpha } => VarianceFunction::fbm(*alpha),
            VarianceDef::SumOfFbm { terms } => VarianceFunction::sum_of_fbm(terms.iter().map(|p| (p[0], p[1])).collect()),
            VarianceDef::Custom { table, alpha0, alpha_inf } => {
                VarianceFunction::custom(table.iter().map(|p| (p[0], p[1])).collect(), *alpha0, *alpha_inf)
            }
        }
    }
}

/// Limit point for a regular-variation check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LimitPoint {
    Zero,
    Infinity,
}

/// Default relative tolerance at the extreme of the test grid.
pub const RV_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularVariationReport {
    /// `max |σ²(λt)/σ²(t) − λ^index|` over the whole grid.
    pub max_deviation: f64,
    /// Largest relative deviation at the grid point closest to the limit point.
    pub extreme_relative_deviation: f64,
    /// Per grid point, the largest relative deviation over the ratios.
    pub trace: Vec<(f64, f64)>,
    pub pass: bool,
}

/// Geometric grid of `n` points between `lo` and `hi` (inclusive).
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|i| lo * (r * i as f64).exp()).collect()
}

/// Check `σ²(λt)/σ²(t) → λ^index` as `t` tends to `limit`, where `index` is the
/// declared index of `vf` at that point.
pub fn check_regular_variation(
    vf: &VarianceFunction,
    limit: LimitPoint,
    ratios: &[f64],
    t_grid: &[f64],
    tolerance: f64,
) -> Result<RegularVariationReport> {
    if t_grid.is_empty() || ratios.is_empty() {
        return Err(Error::config("regular-variation check needs a nonempty grid and ratio list"));
    }
    let index = match limit {
        LimitPoint::Zero => vf.alpha0(),
        LimitPoint::Infinity => vf.alpha_inf(),
    };
    let mut max_dev: f64 = 0.0;
    let mut trace = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let base = vf.eval(t)?;
        let mut rel: f64 = 0.0;
        for &lambda in ratios {
            let target = lambda.powf(index);
            let ratio = vf.eval(lambda * t)? / base;
            max_dev = max_dev.max((ratio - target).abs());
            rel = rel.max((ratio / target - 1.0).abs());
        }
        trace.push((t, rel));
    }
    let extreme = match limit {
        LimitPoint::Zero => trace.iter().min_by(|a, b| a.0.total_cmp(&b.0)),
        LimitPoint::Infinity => trace.iter().max_by(|a, b| a.0.total_cmp(&b.0)),
    }
    .map(|p| p.1)
    .unwrap_or(f64::INFINITY);
    Ok(RegularVariationReport {
        max_deviation: max_dev,
        extreme_relative_deviation: extreme,
        trace,
        pass: extreme < tolerance,
    })
}

pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// `(u, τ, t) ↦ value`.
pub type FamilyPointFn = Arc<dyn Fn(f64, f64, &[f64]) -> f64 + Send + Sync>;
/// `(u, τ, s, t) ↦ value`.
pub type FamilyPairFn = Arc<dyn Fn(f64, f64, &[f64], &[f64]) -> f64 + Send + Sync>;

/// A drift `h ∈ C₀(E)`, optionally with a threshold-dependent family `h_{u,τ}`.
#[derive(Clone)]
pub struct DriftFunction {
    eval: PointFn,
    family: Option<FamilyPointFn>,
    label: String,
}

impl fmt::Debug for DriftFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftFunction").field("label", &self.label).field("family", &self.family.is_some()).finish()
    }
}

impl DriftFunction {
    pub fn new(label: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(eval), family: None, label: label.into() }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0)
    }

    /// `h(t) = Σ_i coef_i |t_i|^{exponent_i}`.
    pub fn power_sum(coef: Vec<f64>, exponent: Vec<f64>) -> Result<Self> {
        if coef.len() != exponent.len() {
            return Err(Error::config("power drift needs as many exponents as coefficients"));
        }
        if exponent.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::config("power drift exponents must be positive"));
        }
        let label = format!("power{coef:?}^{exponent:?}");
        Ok(Self::new(label, move |t: &[f64]| {
            coef.iter().zip(&exponent).zip(t).map(|((c, b), x)| c * x.abs().powf(*b)).sum()
        }))
    }

    pub fn with_family(mut self, family: impl Fn(f64, f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.family = Some(Arc::new(family));
        self
    }

    pub fn eval(&self, t: &[f64]) -> f64 {
        (self.eval)(t)
    }

    pub fn family(&self) -> Option<&FamilyPointFn> {
        self.family.as_ref()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Verify `h(0) = 0`.
    pub fn check_vanishes_at_origin(&self, dim: usize) -> Result<()> {
        let v = self.eval(&vec![0.0; dim]);
        if v.abs() > 1e-14 {
            return Err(Error::config(format!("drift {} does not vanish at the origin (h(0) = {v})", self.label)));
        }
        Ok(())
    }

    pub fn from_def(def: &DriftDef) -> Result<Self> {
        match def {
            DriftDef::Zero => Ok(Self::zero()),
            DriftDef::Power { coef, exponent } => Self::power_sum(coef.clone(), exponent.clone()),
        }
    }
}

/// JSON form of a drift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DriftDef {
    #[default]
    Zero,
    Power { coef: Vec<f64>, exponent: Vec<f64> },
}

/// Limiting mode `φ_i` of the scaling function along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Zero,
    Finite(f64),
    Infinity,
}

/// How a limit component is simulated.
#[derive(Debug, Clone, PartialEq)]
pub enum ComponentProcess {
    /// Fractional Brownian motion with `Var = |t|^alpha`.
    Fbm(f64),
    /// `η_i(φ t) / σ_i(φ)` for a general stationary-increment model.
    StatIncr { vf: VarianceFunction, phi: f64 },
}

/// One independent axis-aligned summand `√c · W(t_axis)` of a limit field.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitComponent {
    pub axis: usize,
    pub scale: f64,
    pub mode: Mode,
    pub variance: VarianceFunction,
}

impl LimitComponent {
    pub fn new(axis: usize, scale: f64, mode: Mode, variance: VarianceFunction) -> Result<Self> {
        if !(scale >= 0.0) || !scale.is_finite() {
            return Err(Error::config(format!("component scale must be finite and >= 0, got {scale}")));
        }
        if let Mode::Finite(phi) = mode {
            if !(phi > 0.0) || !phi.is_finite() {
                return Err(Error::config(format!("finite mode needs 0 < φ < ∞, got {phi}")));
            }
            variance.eval(phi)?;
        }
        Ok(Self { axis, scale, mode, variance })
    }

    /// `√scale · B_alpha` along `axis`.
    pub fn fbm(axis: usize, scale: f64, alpha: f64) -> Result<Self> {
        Self::new(axis, scale, Mode::Zero, VarianceFunction::fbm(alpha)?)
    }

    /// The process the mode selects: fBm with the local index at zero or infinity,
    /// or the rescaled stationary-increment process for a finite mode.
    pub fn process(&self) -> ComponentProcess {
        match self.mode {
            Mode::Zero => ComponentProcess::Fbm(self.variance.alpha0()),
            Mode::Infinity => ComponentProcess::Fbm(self.variance.alpha_inf()),
            Mode::Finite(phi) => ComponentProcess::StatIncr { vf: self.variance.clone(), phi },
        }
    }

    /// `Var W(t)` of the unscaled component (without `c`).
    pub fn unit_variance(&self, t: f64) -> Result<f64> {
        match self.process() {
            ComponentProcess::Fbm(alpha) => Ok(t.abs().powf(alpha)),
            ComponentProcess::StatIncr { vf, phi } => Ok(vf.eval(phi * t)? / vf.eval(phi)?),
        }
    }

    /// `Cov(W(s), W(t))` of the unscaled two-sided component.
    pub fn unit_covariance(&self, s: f64, t: f64) -> Result<f64> {
        Ok(0.5 * (self.unit_variance(s)? + self.unit_variance(t)? - self.unit_variance(t - s)?))
    }

    /// Smallest local (at zero) regularity index of the unscaled component's variance.
    pub fn local_index(&self) -> f64 {
        match self.process() {
            ComponentProcess::Fbm(a) => a,
            ComponentProcess::StatIncr { vf, .. } => vf.alpha0(),
        }
    }

    pub fn global_index(&self) -> f64 {
        match self.process() {
            ComponentProcess::Fbm(a) => a,
            ComponentProcess::StatIncr { vf, .. } => vf.alpha_inf(),
        }
    }
}

/// The additive limit field `η(t) = Σ_i √c_i W_i(t_{axis_i})` with independent summands.
///
/// An empty component list is the degenerate field `η ≡ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitFieldSpec {
    dim: usize,
    components: Vec<LimitComponent>,
}

impl LimitFieldSpec {
    pub fn new(dim: usize, components: Vec<LimitComponent>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("limit field dimension must be at least 1"));
        }
        if let Some(c) = components.iter().find(|c| c.axis >= dim) {
            return Err(Error::config(format!("component axis {} outside dimension {dim}", c.axis)));
        }
        if !components.is_empty() && components.iter().map(|c| c.scale).sum::<f64>() <= 0.0 {
            return Err(Error::config("limit field scales must have a positive sum"));
        }
        Ok(Self { dim, components })
    }

    pub fn degenerate(dim: usize) -> Self {
        Self { dim, components: Vec::new() }
    }

    /// One-dimensional `√c · B_alpha`.
    pub fn fbm(scale: f64, alpha: f64) -> Result<Self> {
        Self::new(1, vec![LimitComponent::fbm(0, scale, alpha)?])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[LimitComponent] {
        &self.components
    }

    pub fn is_degenerate(&self) -> bool {
        self.components.iter().all(|c| c.scale == 0.0)
    }

    /// `Var η(t) = Σ c_i Var W_i(t_i)`, evaluated analytically.
    pub fn variance(&self, t: &[f64]) -> Result<f64> {
        let mut v = 0.0;
        for c in &self.components {
            if c.scale != 0.0 {
                v += c.scale * c.unit_variance(t[c.axis])?;
            }
        }
        Ok(v)
    }

    /// `Cov(η(s), η(t))`.
    pub fn covariance(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        let mut v = 0.0;
        for c in &self.components {
            if c.scale != 0.0 {
                v += c.scale * c.unit_covariance(s[c.axis], t[c.axis])?;
            }
        }
        Ok(v)
    }

    /// Local regularity of the roughest component (1 for the degenerate field).
    pub fn local_index(&self) -> f64 {
        self.components.iter().filter(|c| c.scale > 0.0).map(LimitComponent::local_index).fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a)))).unwrap_or(1.0)
    }

    pub fn global_index(&self) -> f64 {
        self.components.iter().filter(|c| c.scale > 0.0).map(LimitComponent::global_index).fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a)))).unwrap_or(1.0)
    }

    pub fn from_def(def: &LimitFieldDef) -> Result<Self> {
        let comps = def
            .components
            .iter()
            .map(|c| LimitComponent::new(c.axis, c.scale, c.mode, c.variance.build()?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(def.dim, comps)
    }

    pub fn to_def(&self) -> LimitFieldDef {
        LimitFieldDef {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| LimitComponentDef { axis: c.axis, scale: c.scale, mode: c.mode, variance: c.variance.to_def() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitComponentDef {
    #[serde(default)]
    pub axis: usize,
    pub scale: f64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub variance: VarianceDef,
}

fn default_mode() -> Mode {
    Mode::Zero
}

/// JSON form of a limit field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitFieldDef {
    pub dim: usize,
    #[serde(default)]
    pub components: Vec<LimitComponentDef>,
}

/// A family `ξ_{u,τ}(t) = Z_{u,τ}(t) / (1 + h_{u,τ}(t))` with unit-variance `Z_{u,τ}`,
/// thresholds `g_{u,τ}` and a finite index grid `K_u`.
#[derive(Clone)]
pub struct ThresholdedFamily {
    dim: usize,
    correlation: FamilyPairFn,
    threshold: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    index_grid: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    drift: Option<FamilyPointFn>,
    structure: Option<FamilyPairFn>,
    label: String,
}

impl fmt::Debug for ThresholdedFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ThresholdedFamily").field("label", &self.label).field("dim", &self.dim).finish()
    }
}

impl ThresholdedFamily {
    /// A family with a single index value `τ = 0` and no drift.
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        correlation: impl Fn(f64, f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
        threshold: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            correlation: Arc::new(correlation),
            threshold: Arc::new(threshold),
            index_grid: Arc::new(|_| vec![0.0]),
            drift: None,
            structure: None,
            label: label.into(),
        }
    }

    pub fn with_index_grid(mut self, grid: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.index_grid = Arc::new(grid);
        self
    }

    pub fn with_drift(mut self, drift: impl Fn(f64, f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.drift = Some(Arc::new(drift));
        self
    }

    pub fn with_structure(mut self, theta: impl Fn(f64, f64, &[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.structure = Some(Arc::new(theta));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn correlation(&self, u: f64, tau: f64, s: &[f64], t: &[f64]) -> f64 {
        (self.correlation)(u, tau, s, t)
    }

    pub fn threshold(&self, u: f64, tau: f64) -> f64 {
        (self.threshold)(u, tau)
    }

    pub fn index_grid(&self, u: f64) -> Vec<f64> {
        (self.index_grid)(u)
    }

    pub fn has_drift(&self) -> bool {
        self.drift.is_some()
    }

    /// `h_{u,τ}(t)`, zero when the family carries no drift.
    pub fn drift(&self, u: f64, tau: f64, t: &[f64]) -> f64 {
        self.drift.as_ref().map_or(0.0, |h| h(u, tau, t))
    }

    pub fn structure(&self) -> Option<&FamilyPairFn> {
        self.structure.as_ref()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleCheck {
    /// `(u, value)` per scheduled threshold parameter.
    pub trace: Vec<(f64, f64)>,
    pub pass: bool,
}

/// Condition C0: `inf_{τ ∈ K_u} g_{u,τ}` increases along the schedule.
pub fn check_c0(family: &ThresholdedFamily, u_schedule: &[f64]) -> ScheduleCheck {
    let trace: Vec<(f64, f64)> = u_schedule
        .iter()
        .map(|&u| {
            let inf = family.index_grid(u).iter().map(|&tau| family.threshold(u, tau)).fold(f64::INFINITY, f64::min);
            (u, inf)
        })
        .collect();
    let pass = trace.windows(2).all(|w| w[1].1 > w[0].1) && trace.iter().all(|p| p.1 > 0.0);
    ScheduleCheck { trace, pass }
}

/// Default absolute tolerance for the drift and structure checks.
pub const CONDITION_TOLERANCE: f64 = 1e-2;

fn decreasing_to(trace: &[(f64, f64)], tolerance: f64) -> bool {
    let monotone = trace.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-12) + 1e-15);
    monotone && trace.last().is_some_and(|p| p.1 < tolerance)
}

/// Condition C1: `sup_{τ,t} |g²_{u,τ} h_{u,τ}(t) − h(t)|` per `u`.
///
/// The drift family is taken from `family` if it has one, otherwise from `h`.
pub fn check_c1(
    family: &ThresholdedFamily,
    h: &DriftFunction,
    u_schedule: &[f64],
    points: &[Vec<f64>],
    tolerance: f64,
) -> Result<ScheduleCheck> {
    let drift: &FamilyPointFn = family
        .drift
        .as_ref()
        .or(h.family())
        .ok_or_else(|| Error::config("condition C1 needs a drift family h_{u,τ}"))?;
    let trace = u_schedule
        .iter()
        .map(|&u| {
            let mut sup: f64 = 0.0;
            for tau in family.index_grid(u) {
                let g2 = family.threshold(u, tau).powi(2);
                for t in points {
                    sup = sup.max((g2 * drift(u, tau, t) - h.eval(t)).abs());
                }
            }
            (u, sup)
        })
        .collect::<Vec<_>>();
    let pass = decreasing_to(&trace, tolerance);
    Ok(ScheduleCheck { trace, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderFit {
    pub exponent: f64,
    /// `(u, sup θ(s,t) / Σ|s_i − t_i|^a)`.
    pub trace: Vec<(f64, f64)>,
    pub bounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    /// `(u, sup_{t,τ} |g² Var(Z(t) − Z(0)) − 2 Var η(t)|)`.
    pub variance_trace: Vec<(f64, f64)>,
    pub candidates: Vec<HolderFit>,
    /// Candidate exponent with the smallest bounded Hölder ratio.
    pub best_exponent: Option<f64>,
    pub pass: bool,
}

/// Checks the variance form of the structure conditions together with the
/// Hölder bound on `θ`, reporting every candidate exponent.
pub fn check_c2_c3_equivalence(
    family: &ThresholdedFamily,
    eta: &LimitFieldSpec,
    u_schedule: &[f64],
    points: &[Vec<f64>],
    tolerance: f64,
    holder_bound: f64,
) -> Result<EquivalenceReport> {
    let origin = vec![0.0; family.dim()];
    let mut variance_trace = Vec::with_capacity(u_schedule.len());
    for &u in u_schedule {
        let mut sup: f64 = 0.0;
        for tau in family.index_grid(u) {
            let g2 = family.threshold(u, tau).powi(2);
            for t in points {
                let incr = 2.0 * (1.0 - family.correlation(u, tau, t, &origin));
                sup = sup.max((g2 * incr - 2.0 * eta.variance(t)?).abs());
            }
        }
        variance_trace.push((u, sup));
    }

    let a0 = eta.local_index();
    let ainf = eta.global_index();
    let mut exps = vec![a0 / 2.0, a0, a0.min(ainf)];
    exps.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let theta = |u: f64, tau: f64, s: &[f64], t: &[f64]| -> f64 {
        match family.structure() {
            Some(th) => th(u, tau, s, t),
            None => family.threshold(u, tau).powi(2) * (1.0 - family.correlation(u, tau, s, t)),
        }
    };
    let mut candidates = Vec::new();
    for &a in &exps {
        let mut trace = Vec::with_capacity(u_schedule.len());
        for &u in u_schedule {
            let mut sup: f64 = 0.0;
            for tau in family.index_grid(u) {
                for (i, s) in points.iter().enumerate() {
                    for t in &points[i + 1..] {
                        let d: f64 = s.iter().zip(t).map(|(x, y)| (x - y).abs().powf(a)).sum();
                        if d > 0.0 {
                            sup = sup.max(theta(u, tau, s, t) / d);
                        }
                    }
                }
            }
            trace.push((u, sup));
        }
        let bounded = trace.iter().all(|p| p.1.is_finite() && p.1 <= holder_bound);
        candidates.push(HolderFit { exponent: a, trace, bounded });
    }
    let best_exponent = candidates
        .iter()
        .filter(|c| c.bounded)
        .min_by(|x, y| {
            let fx = x.trace.last().map_or(f64::INFINITY, |p| p.1);
            let fy = y.trace.last().map_or(f64::INFINITY, |p| p.1);
            fx.total_cmp(&fy)
        })
        .map(|c| c.exponent);
    let pass = decreasing_to(&variance_trace, tolerance) && best_exponent.is_some();
    Ok(EquivalenceReport { variance_trace, candidates, best_exponent, pass })
}
