//! Ready-made thresholded families used by the audits, the demos and the CLI presets.

use std::sync::Arc;

use crate::covariance::{LimitComponent, ThresholdedFamily};
use crate::error::{Error, Result};
use crate::tailprob::{AsymptoticSetup, ScalarFn};

/// Stationary `r(t) = exp(−|t|^α)` observed on `t = u^{−2/α} s`, threshold `g = u`.
///
/// In the `s` coordinates `r_u(s, s') = exp(−|s − s'|^α / u²)`.
pub fn stationary_short_interval(alpha: f64) -> Result<ThresholdedFamily> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::config(format!("α must lie in (0, 2], got {alpha}")));
    }
    Ok(ThresholdedFamily::new(
        format!("stationary exp(-|t|^{alpha})"),
        1,
        move |u, _, s: &[f64], t: &[f64]| (-(s[0] - t[0]).abs().powf(alpha) / (u * u)).exp(),
        |u, _| u,
    ))
}

/// Berman-type family indexed by `k = −k_max..=k_max`:
/// `g_{u,k} = u + kε/u`, `r_{u,k}(s,t) = exp(−|s − t| / g²)`,
/// `h_{u,k}(t) = (1 + k/(10u²)) · b t / g²`.
///
/// Its limit is `η = B_1` with drift `h(t) = b t` for every `k`.
pub fn berman_family(eps: f64, b: f64, k_max: u32) -> Result<ThresholdedFamily> {
    if !(eps >= 0.0) || !(b >= 0.0) {
        return Err(Error::config("ε and b must be nonnegative"));
    }
    let g = move |u: f64, k: f64| u + k * eps / u;
    Ok(ThresholdedFamily::new(
        "berman",
        1,
        move |u, k, s: &[f64], t: &[f64]| {
            let gk = g(u, k);
            (-(s[0] - t[0]).abs() / (gk * gk)).exp()
        },
        g,
    )
    .with_index_grid(move |_| (-(k_max as i64)..=k_max as i64).map(|k| k as f64).collect())
    .with_drift(move |u, k, t: &[f64]| {
        let gk = g(u, k);
        (1.0 + k / (10.0 * u * u)) * b * t[0] / (gk * gk)
    }))
}

/// One-dimensional family with a variance peak at the origin:
/// `ξ_u(s) = Z_u(s)/(1 + |s|^β/g(u))`, `r_u(s, s') = exp(−|s − s'|^α/m²)`, threshold `m = u`,
/// `g(u) = u^p`, together with its asymptotic setup (`d = d1 = 1`, `n = 0`, `γ = 0`).
pub fn peak_family(alpha: f64, beta: f64, p: f64) -> Result<(ThresholdedFamily, AsymptoticSetup)> {
    if !(alpha > 0.0 && alpha <= 2.0) || !(beta > 0.0) || !(p > 2.0) {
        return Err(Error::config("need α in (0, 2], β > 0 and g(u) = u^p with p > 2"));
    }
    let fam = ThresholdedFamily::new(
        "peak",
        1,
        move |u, _, s: &[f64], t: &[f64]| (-(s[0] - t[0]).abs().powf(alpha) / (u * u)).exp(),
        |u, _| u,
    )
    .with_drift(move |u, _, s: &[f64]| s[0].abs().powf(beta) / u.powf(p));
    let setup = AsymptoticSetup {
        d: 1,
        n: 0,
        d1: 1,
        d2: 1,
        betas: vec![beta],
        g_fns: vec![Arc::new(move |u: f64| u.powf(p)) as ScalarFn],
        m_fn: Arc::new(|u| u),
        gammas: vec![0.0],
        y_range: vec![(f64::NEG_INFINITY, f64::INFINITY)],
        ab_limits: vec![],
        limit_components: vec![LimitComponent::fbm(0, 1.0, alpha)?],
    };
    Ok((fam, setup))
}

/// Cells of the ruin problem `P(sup_t X(t) − c t > u)` for `X = fBm(α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuinCells {
    pub alpha: f64,
    pub c: f64,
    /// Cell length in local units.
    pub cell: f64,
}

impl RuinCells {
    pub fn new(alpha: f64, c: f64, cell: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) || !(c > 0.0) || !(cell > 0.0) {
            return Err(Error::config("need α in (0, 2), c > 0 and a positive cell length"));
        }
        Ok(Self { alpha, c, cell })
    }

    /// Maximiser of the standard deviation of `X(uτ)/(u(1 + cτ))`.
    pub fn peak(&self) -> f64 {
        self.alpha / (self.c * (2.0 - self.alpha))
    }

    /// `1 / max_τ sd(X(uτ)/(u(1 + cτ)))`.
    pub fn level(&self, u: f64) -> f64 {
        let t = self.peak();
        u.powf(1.0 - self.alpha / 2.0) * (1.0 + self.c * t) / t.powf(self.alpha / 2.0)
    }

    /// Time scale `w(u)` (in units of `τ = t/u`) on which the level-scaled correlation is `1 − |s|^α`.
    pub fn scale(&self, u: f64) -> f64 {
        let v = self.level(u);
        (2.0 * self.peak().powf(self.alpha) / (v * v)).powf(1.0 / self.alpha)
    }

    fn time(&self, u: f64, k: f64, s: f64) -> f64 {
        self.peak() + (s + k * self.cell) * self.scale(u)
    }

    fn sd(&self, tau: f64) -> f64 {
        tau.powf(self.alpha / 2.0) / (1.0 + self.c * tau)
    }

    /// Family over cells `k = −k_max..=k_max`, each observed on `s ∈ [0, cell]`.
    ///
    /// `g_{u,k} = v_k(u)` is the inverse of the largest standard deviation on the cell,
    /// and `1 + h_{u,k}` is the ratio of that maximum to the local standard deviation.
    pub fn family(&self, k_max: u32) -> ThresholdedFamily {
        let me = *self;
        let alpha = self.alpha;
        let peak_sd = move |u: f64, k: f64| {
            let (a, b) = (me.time(u, k, 0.0), me.time(u, k, me.cell));
            let p = me.peak();
            if a <= p && p <= b { me.sd(p) } else { me.sd(a).max(me.sd(b)) }
        };
        ThresholdedFamily::new(
            format!("ruin fBm({alpha})"),
            1,
            move |u, k, s: &[f64], t: &[f64]| {
                let (a, b) = (me.time(u, k, s[0]), me.time(u, k, t[0]));
                (a.powf(alpha) + b.powf(alpha) - (a - b).abs().powf(alpha)) / (2.0 * (a * b).powf(alpha / 2.0))
            },
            move |u, k| me.level(u) * me.sd(me.peak()) / peak_sd(u, k),
        )
        .with_index_grid(move |_| (-(k_max as i64)..=k_max as i64).map(|k| k as f64).collect())
        .with_drift(move |u, k, s: &[f64]| peak_sd(u, k) / me.sd(me.time(u, k, s[0])) - 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn berman_family_limits() {
        let f = berman_family(1.0, 1.0, 10).unwrap();
        assert_eq!(f.index_grid(3.0).len(), 21);
        for u in [30.0, 300.0] {
            let g = f.threshold(u, 4.0);
            assert!((g * g * (1.0 - f.correlation(u, 4.0, &[0.5], &[1.5])) - 1.0).abs() < 2.0 / (g * g));
            assert!((g * g * f.drift(u, 4.0, &[2.0]) - 2.0).abs() < 1.0 / (u * u));
        }
    }

    #[test]
    fn ruin_cells_are_normalised() {
        let cells = RuinCells::new(1.2, 1.0, 2.0).unwrap();
        let f = cells.family(3);
        let u = 50.0;
        // the cell holding the peak has g = v(u) and h ≥ 0 vanishing at the peak
        assert!((f.threshold(u, 0.0) - cells.level(u)).abs() < 1e-9 * cells.level(u));
        assert_eq!(f.drift(u, 0.0, &[0.0]), 0.0);
        for k in [-3.0, 2.0] {
            assert!(f.threshold(u, k) > cells.level(u));
            for s in [0.0, 1.0, 2.0] {
                assert!(f.drift(u, k, &[s]) >= -1e-15);
            }
        }
        // the level-scaled correlation approaches 1 − |s|^α slowly
        let u = 1e4;
        let v = cells.level(u);
        let r = f.correlation(u, 2.0, &[0.0], &[1.0]);
        assert!((v * v * (1.0 - r) - 1.0).abs() < 0.01);
    }

    #[test]
    fn peak_family_setup_is_valid() {
        let (f, s) = peak_family(1.0, 2.0, 6.0).unwrap();
        s.validate().unwrap();
        assert_eq!(f.drift(4.0, 0.0, &[0.0]), 0.0);
        assert!((f.drift(2.0, 0.0, &[4.0]) - 0.25).abs() < 1e-15);
    }
}
