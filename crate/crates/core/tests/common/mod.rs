#![allow(dead_code)]

use gexr_core::covariance::ThresholdedFamily;
use gexr_core::functional::FunctionalSpec;
use gexr_core::simkit::GridSpec;
use gexr_core::RngStream;
use rand::Rng;

/// A small tail-probability instance where crude Monte Carlo still sees hits.
pub struct SmallInstance {
    pub family: ThresholdedFamily,
    pub u: f64,
    pub gamma: FunctionalSpec,
    pub grid: GridSpec,
    pub label: String,
}

/// Stationary `exp(−|s − t|^α / u²)` with drift `b |t| / u²`, random `α, u ≤ 2.5, b`,
/// domain and functional.
pub fn small_instance(seed: u64, k: u64) -> SmallInstance {
    let mut rng = RngStream::new(seed, k, 0).rng();
    let alpha: f64 = rng.random_range(0.5..=2.0);
    let u: f64 = rng.random_range(1.5..=2.5);
    let b: f64 = rng.random_range(0.0..1.0);
    let t = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let grid = if rng.random_bool(0.5) {
        GridSpec::stepped(0.0, t, t / 16.0).unwrap()
    } else {
        GridSpec::stepped(-t / 2.0, t / 2.0, t / 16.0).unwrap()
    };
    let gamma = if rng.random_bool(0.7) { FunctionalSpec::Sup } else { FunctionalSpec::Mix(0.7) };
    let family = ThresholdedFamily::new(
        "small",
        1,
        move |u, _, s: &[f64], t: &[f64]| (-(s[0] - t[0]).abs().powf(alpha) / (u * u)).exp(),
        |u, _| u,
    )
    .with_drift(move |u, _, t: &[f64]| b * t[0].abs() / (u * u));
    let label = format!("α={alpha:.2} u={u:.2} b={b:.2} T={t} {gamma:?} on [{}, {}]", grid.axis(0).lo, grid.axis(0).hi);
    SmallInstance { family, u, gamma, grid, label }
}
