//! Monte Carlo estimation of the generalized constant `H^Γ_{η,h}(E) = E exp(Γ(η^h))`
//! with `η^h = √2 η − Var η − h`, of Pickands and Piterbarg constants through
//! domain growth and grid refinement, and of the generalized Piterbarg constant
//! `P_X^b([0,S],[0,T])`.
//!
//! Two samplers are provided. `Crude` averages `exp(Γ(η^h))` under the original
//! law. `Tilted` samples from the mixture `Q = Σ_k w_k Q_k`, `w_k ∝ e^{−h(t_k)}`,
//! where `dQ_k/dP = exp(√2 η(t_k) − Var η(t_k))` shifts the mean of `√2 η` by
//! `2 Cov(η(·), η(t_k))`; the likelihood ratio is `Z / Σ_k e^{η^h(t_k)}` with
//! `Z = Σ_k e^{−h(t_k)}`, so for `Γ ≤ sup` every weighted sample lies in `[0, Z]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covariance::{DriftFunction, LimitFieldSpec, VarianceFunction};
use crate::error::{Error, Result};
use crate::functional::FunctionalSpec;
use crate::rng::RngStream;
use crate::simkit::{GridSpec, LimitFieldGenerator};
use crate::special::log_sum_exp;
use crate::stats::{combined_stderr, replicate, Estimate};

/// Sampling scheme for the constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Crude,
    #[default]
    Tilted,
}

/// Draws `η^h` on a grid together with the log likelihood ratio `ln dP/dQ`.
#[derive(Debug, Clone)]
pub struct ExponentSampler {
    gen: LimitFieldGenerator,
    offset: Vec<f64>,
    cum_weights: Vec<f64>,
    log_z: f64,
    method: Method,
}

impl ExponentSampler {
    /// `offset_h` is the drift part `h(t_i)` at each grid point.
    pub fn new(gen: LimitFieldGenerator, h: Vec<f64>, method: Method) -> Result<Self> {
        if h.len() != gen.grid().len() {
            return Err(Error::config("drift values do not match the grid"));
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("drift is not finite on the grid".into()));
        }
        let var = gen.variance();
        let offset: Vec<f64> = var.iter().zip(&h).map(|(v, hh)| -v - hh).collect();
        let neg_h: Vec<f64> = h.iter().map(|x| -x).collect();
        let log_z = log_sum_exp(&neg_h);
        let mut acc = 0.0;
        let cum_weights = neg_h
            .iter()
            .map(|x| {
                acc += (x - log_z).exp();
                acc
            })
            .collect();
        let method = if gen.is_degenerate() { Method::Crude } else { method };
        Ok(Self { gen, offset, cum_weights, log_z, method })
    }

    pub fn for_limit_field(eta: &LimitFieldSpec, h: &DriftFunction, grid: &GridSpec, method: Method) -> Result<Self> {
        let gen = LimitFieldGenerator::new(eta, grid)?;
        let h_vals = grid.points().iter().map(|t| h.eval(t)).collect();
        Self::new(gen, h_vals, method)
    }

    pub fn grid(&self) -> &GridSpec {
        self.gen.grid()
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// `η^h` on the grid and `ln dP/dQ` (zero for the crude scheme).
    pub fn sample(&self, stream: RngStream) -> (Vec<f64>, f64) {
        let eta = self.gen.sample(&mut stream.rng());
        let mut vals: Vec<f64> = eta.iter().zip(&self.offset).map(|(e, o)| std::f64::consts::SQRT_2 * e + o).collect();
        match self.method {
            Method::Crude => (vals, 0.0),
            Method::Tilted => {
                let u: f64 = stream.aux().rng().random();
                let k = self.cum_weights.partition_point(|&c| c < u).min(self.cum_weights.len() - 1);
                self.gen.add_covariance(&mut vals, k, 2.0);
                let lw = self.log_z - log_sum_exp(&vals);
                (vals, lw)
            }
        }
    }
}

/// A constant estimate with the number of non-finite samples that were discarded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantEstimate {
    pub estimate: Estimate,
    pub overflow: usize,
    pub method: Method,
}

fn grid_meta(grid: &GridSpec) -> (f64, f64) {
    let step = grid.axes().iter().filter(|a| a.n > 1).map(|a| a.step()).fold(f64::INFINITY, f64::min);
    let size = grid.axes().iter().map(|a| a.hi - a.lo).fold(0.0, f64::max);
    (if step.is_finite() { step } else { 0.0 }, size)
}

fn finite_estimate(samples: Vec<f64>) -> Result<(Estimate, usize)> {
    let n = samples.len();
    let finite: Vec<f64> = samples.into_iter().filter(|v| v.is_finite()).collect();
    let overflow = n - finite.len();
    if finite.is_empty() {
        return Err(Error::Numerical(format!("all {n} samples overflowed")));
    }
    Ok((Estimate::from_samples(&finite), overflow))
}

/// `E exp(min_i Γ_i(η^h))`; with one functional this is `H^Γ_{η,h}(E)`.
pub fn estimate_joint_constant(
    eta: &LimitFieldSpec,
    h: &DriftFunction,
    gammas: &[FunctionalSpec],
    grid: &GridSpec,
    n_reps: usize,
    seed: u64,
    method: Method,
) -> Result<ConstantEstimate> {
    if gammas.is_empty() {
        return Err(Error::config("at least one functional is required"));
    }
    if n_reps == 0 {
        return Err(Error::config("number of replications must be positive"));
    }
    let zeros = vec![0.0; grid.len()];
    for g in gammas {
        g.apply_values(grid, &zeros)?;
    }
    let sampler = ExponentSampler::for_limit_field(eta, h, grid, method)?;
    let (step, size) = grid_meta(grid);
    if eta.is_degenerate() {
        // η ≡ 0: the exponent is −h on every replication
        let vals: Vec<f64> = sampler.offset.clone();
        let m = gammas
            .iter()
            .map(|g| g.apply_values(grid, &vals))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let est = Estimate::exact(m.exp(), n_reps).with_meta(step, size);
        return Ok(ConstantEstimate { estimate: est, overflow: 0, method: sampler.method() });
    }
    let samples = replicate(seed, n_reps, |s| {
        let (vals, lw) = sampler.sample(s);
        let m = gammas
            .iter()
            .map(|g| g.apply_values(grid, &vals).expect("functional validated against the grid"))
            .fold(f64::INFINITY, f64::min);
        (m + lw).exp()
    });
    let (est, overflow) = finite_estimate(samples)?;
    Ok(ConstantEstimate { estimate: est.with_meta(step, size), overflow, method: sampler.method() })
}

/// `H^Γ_{η,h}(E) = E exp(Γ(√2 η − Var η − h))` on the grid discretisation of `E`.
pub fn estimate_generalized_constant(
    eta: &LimitFieldSpec,
    h: &DriftFunction,
    gamma: &FunctionalSpec,
    grid: &GridSpec,
    n_reps: usize,
    seed: u64,
    method: Method,
) -> Result<ConstantEstimate> {
    estimate_joint_constant(eta, h, std::slice::from_ref(gamma), grid, n_reps, seed, method)
}

/// Domain sizes and grid steps for the limit studies, with the plateau rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ExtrapolationSchedule {
    pub domain_sizes: Vec<f64>,
    pub grid_steps: Vec<f64>,
    /// Relative change below which consecutive levels form a plateau
    /// (the threshold is `max(stop_rule · |value|, 2 · combined stderr)`).
    #[serde(default = "default_stop_rule")]
    pub stop_rule: f64,
}

fn default_stop_rule() -> f64 {
    0.01
}

impl Default for ExtrapolationSchedule {
    fn default() -> Self {
        Self {
            domain_sizes: vec![2.0, 4.0, 8.0, 16.0],
            grid_steps: vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            stop_rule: default_stop_rule(),
        }
    }
}

fn is_multiple(x: f64, step: f64) -> bool {
    let k = x / step;
    (k - k.round()).abs() <= 1e-9 * k.abs().max(1.0)
}

impl ExtrapolationSchedule {
    pub fn validate(&self) -> Result<()> {
        Self::check_domains(&self.domain_sizes)?;
        let s = &self.grid_steps;
        if s.len() < 3 {
            return Err(Error::config("schedule needs at least three grid steps"));
        }
        if s.iter().any(|&x| !(x > 0.0)) || s.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("grid steps must be positive and decreasing"));
        }
        let fine = s[s.len() - 1];
        if s.iter().any(|&x| !is_multiple(x, fine)) {
            return Err(Error::config("every grid step must be a multiple of the finest step"));
        }
        for &d in &self.domain_sizes {
            if s.iter().any(|&x| !is_multiple(d, x)) {
                return Err(Error::config(format!("domain size {d} is not a multiple of every grid step")));
            }
        }
        if !(self.stop_rule > 0.0) {
            return Err(Error::config("stop rule must be positive"));
        }
        Ok(())
    }

    fn check_domains(d: &[f64]) -> Result<()> {
        if d.len() < 3 {
            return Err(Error::config("schedule needs at least three domain sizes"));
        }
        if d[0] < 0.0 || d.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("domain sizes must be nonnegative and increasing"));
        }
        Ok(())
    }

    /// `|b − a| ≤ max(stop_rule · |b|, 2 · combined stderr)`.
    pub fn is_plateau(&self, a: &Estimate, b: &Estimate) -> bool {
        (b.value - a.value).abs() <= (self.stop_rule * b.value.abs()).max(2.0 * combined_stderr(a, b))
    }
}

/// Outcome of a limit study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceStatus {
    Plateau,
    NoPlateau,
    Diverging,
    NotConverged,
}

/// One `(domain, step)` cell of a limit study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelRow {
    pub domain: f64,
    pub step: f64,
    /// Constant on the whole domain at this step.
    pub raw: Estimate,
    /// Level value used for the limit: the increment quotient for Pickands
    /// constants, the raw value otherwise.
    pub value: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleResult {
    pub rows: Vec<LevelRow>,
    /// Per domain, the two-step extrapolation to zero step.
    pub extrapolated: Vec<Estimate>,
    /// Value at the largest domain and the finest step.
    pub finest: Estimate,
    /// Returned estimate: the extrapolated value at the largest domain.
    pub estimate: Estimate,
    pub status: ConvergenceStatus,
    /// Exponent `p` of the assumed `step^p` discretisation bias.
    pub rate: f64,
    pub overflow: usize,
    pub warnings: Vec<String>,
}

impl ScheduleResult {
    /// Raw per-level constants divided by the domain size.
    pub fn per_unit(&self) -> Vec<(f64, f64, Estimate)> {
        self.rows.iter().filter(|r| r.domain > 0.0).map(|r| (r.domain, r.step, r.raw.scaled(1.0 / r.domain))).collect()
    }
}

/// `(r·fine − coarse)/(r − 1)` with `r = (δ_coarse/δ_fine)^p`.
pub fn richardson(coarse: f64, fine: f64, step_coarse: f64, step_fine: f64, rate: f64) -> f64 {
    let r = (step_coarse / step_fine).powf(rate);
    (r * fine - coarse) / (r - 1.0)
}

#[derive(Clone, Copy, PartialEq)]
enum Study {
    Pickands,
    Piterbarg,
}

/// Domain shape for Piterbarg constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    /// `[0, S]`.
    #[default]
    OneSided,
    /// `[−S, S]`.
    TwoSided,
}

#[allow(clippy::too_many_arguments)]
fn run_schedule(
    eta: &LimitFieldSpec,
    h: &DriftFunction,
    kind: DomainKind,
    schedule: &ExtrapolationSchedule,
    n_reps: usize,
    seed: u64,
    method: Method,
    study: Study,
) -> Result<ScheduleResult> {
    if eta.dim() != 1 {
        return Err(Error::config("limit studies need a one-dimensional limit process"));
    }
    schedule.validate()?;
    if n_reps == 0 {
        return Err(Error::config("number of replications must be positive"));
    }
    let doms = &schedule.domain_sizes;
    let steps = &schedule.grid_steps;
    let fine = *steps.last().unwrap();
    let smax = *doms.last().unwrap();
    let lo = if kind == DomainKind::TwoSided { -smax } else { 0.0 };
    let grid = GridSpec::new(vec![GridSpec::stepped_axis(lo, smax, fine)?])?;
    let sampler = ExponentSampler::for_limit_field(eta, h, &grid, method)?;
    let z = grid.zero_index(0).expect("domain contains zero");
    let stride: Vec<usize> = steps.iter().map(|&s| (s / fine).round() as usize).collect();
    let reach: Vec<usize> = doms.iter().map(|&d| (d / fine).round() as usize).collect();
    let (nd, ns) = (doms.len(), steps.len());

    let samples: Vec<Vec<f64>> = replicate(seed, n_reps, |s| {
        let (vals, lw) = sampler.sample(s);
        let mut out = vec![0.0; nd * ns];
        for (i, &m) in stride.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut done = 0usize;
            for (j, &r) in reach.iter().enumerate() {
                // extend the running sup from reach `done` to reach `r`
                let start = if j == 0 { 0 } else { done + m };
                let mut k = start;
                while k <= r {
                    best = best.max(vals[z + k]);
                    if kind == DomainKind::TwoSided {
                        best = best.max(vals[z - k]);
                    }
                    k += m;
                }
                done = r;
                out[j * ns + i] = (best + lw).exp();
            }
        }
        out
    });

    let mut overflow = 0;
    let mut rows = Vec::with_capacity(nd * ns);
    let mut level_samples = vec![Vec::with_capacity(n_reps); nd * ns];
    let mut raw_samples = vec![Vec::with_capacity(n_reps); nd * ns];
    for smp in &samples {
        if smp.iter().any(|v| !v.is_finite()) {
            overflow += 1;
            continue;
        }
        for j in 0..nd {
            for i in 0..ns {
                let v = smp[j * ns + i];
                raw_samples[j * ns + i].push(v);
                let lv = match study {
                    Study::Piterbarg => v,
                    Study::Pickands => {
                        let (prev, dprev) = if j == 0 { (1.0, 0.0) } else { (smp[(j - 1) * ns + i], doms[j - 1]) };
                        (v - prev) / (doms[j] - dprev)
                    }
                };
                level_samples[j * ns + i].push(lv);
            }
        }
    }
    if overflow == samples.len() {
        return Err(Error::Numerical(format!("all {overflow} samples overflowed")));
    }
    for j in 0..nd {
        for i in 0..ns {
            rows.push(LevelRow {
                domain: doms[j],
                step: steps[i],
                raw: Estimate::from_samples(&raw_samples[j * ns + i]).with_meta(steps[i], doms[j]),
                value: Estimate::from_samples(&level_samples[j * ns + i]).with_meta(steps[i], doms[j]),
            });
        }
    }

    let rate = eta.local_index() / 2.0;
    let (ic, ifine) = (ns - 2, ns - 1);
    let ex_samples: Vec<Vec<f64>> = (0..nd)
        .map(|j| {
            let c = &level_samples[j * ns + ic];
            let f = &level_samples[j * ns + ifine];
            c.iter().zip(f).map(|(&a, &b)| richardson(a, b, steps[ic], steps[ifine], rate)).collect()
        })
        .collect();
    let extrapolated: Vec<Estimate> =
        ex_samples.iter().zip(doms).map(|(ex, &d)| Estimate::from_samples(ex).with_meta(0.0, d)).collect();
    // levels share paths, so the change between them is measured replication by replication
    let change_se = |j: usize| {
        let d: Vec<f64> = ex_samples[j].iter().zip(&ex_samples[j - 1]).map(|(b, a)| b - a).collect();
        Estimate::from_samples(&d).stderr
    };
    let threshold = |j: usize| (schedule.stop_rule * extrapolated[j].value.abs()).max(2.0 * change_se(j));

    let last = nd - 1;
    let plateau = (extrapolated[last].value - extrapolated[last - 1].value).abs() <= threshold(last);
    let status = if plateau {
        ConvergenceStatus::Plateau
    } else if study == Study::Piterbarg && (1..nd).all(|j| extrapolated[j].value - extrapolated[j - 1].value > threshold(j)) {
        ConvergenceStatus::Diverging
    } else {
        ConvergenceStatus::NoPlateau
    };

    let mut warnings = Vec::new();
    if study == Study::Piterbarg {
        let at = |t: f64| h.eval(&[t]);
        let grows = at(smax) > at(doms[0]) && (kind == DomainKind::OneSided || at(-smax) > at(-doms[0]));
        if !grows {
            warnings.push(format!("drift {} does not grow along the domain; the limit may be infinite", h.label()));
        }
    }
    if overflow > 0 {
        warnings.push(format!("{overflow} replications produced non-finite values and were discarded"));
    }
    Ok(ScheduleResult {
        finest: rows[last * ns + ifine].value,
        estimate: extrapolated[last],
        rows,
        extrapolated,
        status,
        rate,
        overflow,
        warnings,
    })
}

/// Pickands constant `H_η = lim_S H_η([0,S])/S`, estimated from the increment
/// quotients `(H([0,S_j]) − H([0,S_{j−1}]))/(S_j − S_{j−1})` (with `H([0,0]) = 1`)
/// at every step of the schedule, all levels sharing one path per replication.
pub fn estimate_pickands(
    eta: &LimitFieldSpec,
    schedule: &ExtrapolationSchedule,
    n_reps: usize,
    seed: u64,
    method: Method,
) -> Result<ScheduleResult> {
    run_schedule(eta, &DriftFunction::zero(), DomainKind::OneSided, schedule, n_reps, seed, method, Study::Pickands)
}

/// Piterbarg constant `P^h_η = lim_S H^{sup}_{η,h}(domain)`.
pub fn estimate_piterbarg(
    eta: &LimitFieldSpec,
    h: &DriftFunction,
    kind: DomainKind,
    schedule: &ExtrapolationSchedule,
    n_reps: usize,
    seed: u64,
    method: Method,
) -> Result<ScheduleResult> {
    run_schedule(eta, h, kind, schedule, n_reps, seed, method, Study::Piterbarg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneralizedPiterbargResult {
    /// `(T, estimate of P_X^b([0,S],[0,T]))`.
    pub levels: Vec<(f64, Estimate)>,
    pub estimate: Estimate,
    pub status: ConvergenceStatus,
    /// Levels are nondecreasing within two combined standard errors.
    pub nondecreasing: bool,
    /// `σ²` is regularly varying with index at most 2 at infinity and below 2 at zero.
    pub assumptions_hold: bool,
    pub overflow: usize,
}

/// `sup_{a ≤ A} min_{0 ≤ c ≤ w} y[z + a − c]` for every `A` in `ends` (sorted).
pub fn sup_window_min(y: &[f64], z: usize, w: usize, ends: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(ends.len());
    let mut dq: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let mut best = f64::NEG_INFINITY;
    let mut next = 0;
    let last = ends.last().copied().unwrap_or(0);
    // prime the window with indices z − w .. z − 1
    for idx in z - w..z {
        while dq.back().is_some_and(|&b| y[b] >= y[idx]) {
            dq.pop_back();
        }
        dq.push_back(idx);
    }
    for a in 0..=last {
        let idx = z + a;
        while dq.back().is_some_and(|&b| y[b] >= y[idx]) {
            dq.pop_back();
        }
        dq.push_back(idx);
        while dq.front().is_some_and(|&f| f + w < idx) {
            dq.pop_front();
        }
        best = best.max(y[*dq.front().unwrap()]);
        while next < ends.len() && ends[next] == a {
            out.push(best);
            next += 1;
        }
    }
    out
}

/// `P_X^b([0,S],[0,T]) = E sup_{t∈[0,T]} inf_{s∈[0,S]} exp(√2 X(t−s) − (1+b) σ²(|t−s|))`
/// for every `T` in the schedule's domain sizes, on a lag grid of step `grid_step`
/// covering `[−S, T_max]`. The schedule's grid steps are not used.
#[allow(clippy::too_many_arguments)]
pub fn estimate_generalized_piterbarg(
    vf: &VarianceFunction,
    b: f64,
    s: f64,
    t_schedule: &ExtrapolationSchedule,
    grid_step: f64,
    n_reps: usize,
    seed: u64,
    method: Method,
) -> Result<GeneralizedPiterbargResult> {
    if !(b >= 0.0) || !(s >= 0.0) {
        return Err(Error::config("need b >= 0 and S >= 0"));
    }
    ExtrapolationSchedule::check_domains(&t_schedule.domain_sizes)?;
    if n_reps == 0 {
        return Err(Error::config("number of replications must be positive"));
    }
    let ts = &t_schedule.domain_sizes;
    for &x in ts.iter().chain(std::iter::once(&s)) {
        if !is_multiple(x, grid_step) {
            return Err(Error::config(format!("{x} is not a multiple of the grid step {grid_step}")));
        }
    }
    let tmax = *ts.last().unwrap();
    let grid = if s == 0.0 && tmax == 0.0 {
        GridSpec::line(0.0, 0.0, 1)?
    } else {
        GridSpec::new(vec![GridSpec::stepped_axis(-s, tmax, grid_step)?])?
    };
    let gen = LimitFieldGenerator::from_variance(vf, &grid)?;
    let h: Vec<f64> = grid.axis_coords(0).iter().map(|&x| Ok(b * vf.eval(x)?)).collect::<Result<_>>()?;
    let sampler = ExponentSampler::new(gen, h, method)?;
    let z = grid.zero_index(0).expect("lag grid contains zero");
    let w = (s / grid_step).round() as usize;
    let ends: Vec<usize> = ts.iter().map(|&t| (t / grid_step).round() as usize).collect();

    let samples = replicate(seed, n_reps, |st| {
        let (y, lw) = sampler.sample(st);
        sup_window_min(&y, z, w, &ends).into_iter().map(|g| (g + lw).exp()).collect::<Vec<f64>>()
    });
    let mut overflow = 0;
    let mut cols = vec![Vec::with_capacity(n_reps); ts.len()];
    for smp in samples {
        if smp.iter().any(|v| !v.is_finite()) {
            overflow += 1;
            continue;
        }
        for (c, v) in cols.iter_mut().zip(smp) {
            c.push(v);
        }
    }
    if cols[0].is_empty() {
        return Err(Error::Numerical("all samples overflowed".into()));
    }
    let levels: Vec<(f64, Estimate)> =
        ts.iter().zip(&cols).map(|(&t, c)| (t, Estimate::from_samples(c).with_meta(grid_step, t))).collect();
    let nondecreasing = levels.windows(2).all(|p| p[1].1.value >= p[0].1.value - 2.0 * combined_stderr(&p[0].1, &p[1].1));
    let n = levels.len();
    let status = if t_schedule.is_plateau(&levels[n - 2].1, &levels[n - 1].1) {
        ConvergenceStatus::Plateau
    } else {
        ConvergenceStatus::NotConverged
    };
    Ok(GeneralizedPiterbargResult {
        estimate: levels[n - 1].1,
        levels,
        status,
        nondecreasing,
        assumptions_hold: vf.alpha_inf() <= 2.0 && vf.alpha0() < 2.0,
        overflow,
    })
}
