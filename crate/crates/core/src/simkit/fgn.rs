use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::covariance::fgn_autocovariance;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::simkit::grid::GridSpec;
use crate::simkit::path::SamplePath;

/// Negative circulant eigenvalues below `-EIGEN_TOLERANCE * γ(0)` are fatal.
pub const EIGEN_TOLERANCE: f64 = 1e-8;

/// Circulant-embedding sampler for `n` fractional Gaussian noise increments on a grid of step `step`.
///
/// The spectrum and FFT plan are computed once and shared read-only.
#[derive(Clone)]
pub struct FgnGenerator {
    alpha: f64,
    n: usize,
    step: f64,
    /// `sqrt(λ_k / m)` for the size-`m` embedding; empty for α = 2.
    scale: Vec<f64>,
    fft: Option<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for FgnGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FgnGenerator").field("alpha", &self.alpha).field("n", &self.n).field("step", &self.step).finish()
    }
}

/// Size of the circulant embedding for `n` increments.
pub fn embedding_size(n: usize) -> usize {
    (2 * n.saturating_sub(1)).next_power_of_two().max(2)
}

/// Eigenvalues of the circulant embedding of the fGn autocovariance.
pub fn circulant_spectrum(alpha: f64, n: usize, step: f64) -> Result<Vec<f64>> {
    let m = embedding_size(n);
    let half = m / 2;
    let mut row = Vec::with_capacity(m);
    for k in 0..=half {
        row.push(fgn_autocovariance(alpha, step, k as u64)?);
    }
    for k in (1..half).rev() {
        row.push(row[k]);
    }
    let mut buf: Vec<Complex64> = row.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    Ok(buf.iter().map(|c| c.re).collect())
}

impl FgnGenerator {
    pub fn new(alpha: f64, n: usize, step: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("fGn needs at least one increment"));
        }
        let gamma0 = fgn_autocovariance(alpha, step, 0)?;
        if alpha == 2.0 {
            // Perfectly correlated increments: every increment is step * Z.
            return Ok(Self { alpha, n, step, scale: Vec::new(), fft: None });
        }
        let eig = circulant_spectrum(alpha, n, step)?;
        let m = eig.len();
        let mut scale = Vec::with_capacity(m);
        for (k, &l) in eig.iter().enumerate() {
            if l < -EIGEN_TOLERANCE * gamma0 {
                return Err(Error::Numerical(format!(
                    "circulant eigenvalue {k} is {l:e} (alpha = {alpha}, n = {n})"
                )));
            }
            scale.push((l.max(0.0) / m as f64).sqrt());
        }
        let fft = FftPlanner::new().plan_fft_forward(m);
        Ok(Self { alpha, n, step, scale, fft: Some(fft) })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Two independent increment vectors (real and imaginary parts of one transform).
    pub fn sample_increment_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let Some(fft) = &self.fft else {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            return (vec![a * self.step; self.n], vec![b * self.step; self.n]);
        };
        let mut buf: Vec<Complex64> = self
            .scale
            .iter()
            .map(|&s| Complex64::new(s * rng.sample::<f64, _>(StandardNormal), s * rng.sample::<f64, _>(StandardNormal)))
            .collect();
        fft.process(&mut buf);
        buf.truncate(self.n);
        (buf.iter().map(|c| c.re).collect(), buf.iter().map(|c| c.im).collect())
    }

    pub fn sample_increments<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_increment_pair(rng).0
    }

    /// Cumulative sums `B(0) = 0, B(δ), …, B(nδ)`.
    pub fn sample_cumulative<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        cumulate(&self.sample_increments(rng))
    }
}

pub(crate) fn cumulate(incr: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(incr.len() + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for &x in incr {
        acc += x;
        out.push(acc);
    }
    out
}

/// A fractional Brownian motion path `B_α` on `{0, δ, …, nδ}` with `Var B_α(t) = t^α`.
pub fn simulate_fgn(alpha: f64, n: usize, step: f64, rng: RngStream) -> Result<SamplePath> {
    let gen = FgnGenerator::new(alpha, n, step)?;
    let grid = GridSpec::line(0.0, n as f64 * step, n + 1)?;
    let mut r = rng.rng();
    let mut values = gen.sample_cumulative(&mut r);
    // Grid coordinates are kδ; keep α = 2 paths exactly linear in them.
    if alpha == 2.0 {
        let z = values[1] / step;
        values = (0..=n).map(|k| grid.coord(0, k) * z).collect();
    }
    SamplePath::new(grid, values)
}

/// An fBm sampler on an arbitrary uniform one-dimensional axis containing zero,
/// pinned so that the value at zero is exactly zero.
#[derive(Debug, Clone)]
pub struct FbmAxisGenerator {
    gen: Option<FgnGenerator>,
    zero: usize,
    len: usize,
    coords: Vec<f64>,
}

impl FbmAxisGenerator {
    pub fn new(alpha: f64, grid: &GridSpec, axis: usize) -> Result<Self> {
        let a = grid.axis(axis);
        let zero = grid
            .zero_index(axis)
            .ok_or_else(|| Error::config(format!("axis {axis} must contain zero")))?;
        let gen = if a.n > 1 { Some(FgnGenerator::new(alpha, a.n - 1, a.step())?) } else { None };
        Ok(Self { gen, zero, len: a.n, coords: grid.axis_coords(axis) })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let Some(gen) = &self.gen else {
            return vec![0.0; self.len];
        };
        if gen.alpha() == 2.0 {
            let z: f64 = rng.sample(StandardNormal);
            return self.coords.iter().map(|t| t * z).collect();
        }
        let mut v = gen.sample_cumulative(rng);
        let base = v[self.zero];
        for x in &mut v {
            *x -= base;
        }
        v[self.zero] = 0.0;
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_is_nonnegative_for_fgn() {
        for &alpha in &[0.1, 0.5, 1.0, 1.5, 1.9, 1.99] {
            for &n in &[1usize, 2, 3, 10, 1000, 1 << 14] {
                let eig = circulant_spectrum(alpha, n, 1.0).unwrap();
                let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
                assert!(min >= -EIGEN_TOLERANCE, "alpha={alpha} n={n}: {min}");
            }
        }
    }

    #[test]
    fn embedding_sizes() {
        assert_eq!(embedding_size(1), 2);
        assert_eq!(embedding_size(2), 2);
        assert_eq!(embedding_size(3), 4);
        assert_eq!(embedding_size(1025), 2048);
    }

    #[test]
    fn alpha_two_is_linear() {
        let p = simulate_fgn(2.0, 50, 0.1, RngStream::new(1, 0, 0)).unwrap();
        let z = p.values[10] / p.grid.coord(0, 10);
        for (k, v) in p.values.iter().enumerate() {
            assert!((v - p.grid.coord(0, k) * z).abs() <= 1e-14 * (1.0 + v.abs()));
        }
        assert_eq!(p.values[0], 0.0);
    }

    #[test]
    fn reproducible_per_stream() {
        let a = simulate_fgn(1.3, 100, 0.5, RngStream::new(9, 4, 0)).unwrap();
        let b = simulate_fgn(1.3, 100, 0.5, RngStream::new(9, 4, 0)).unwrap();
        let c = simulate_fgn(1.3, 100, 0.5, RngStream::new(9, 5, 0)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn two_sided_axis_pins_zero() {
        let g = GridSpec::line(-1.0, 2.0, 13).unwrap();
        let gen = FbmAxisGenerator::new(1.0, &g, 0).unwrap();
        let v = gen.sample(&mut RngStream::new(3, 0, 0).rng());
        assert_eq!(v[4], 0.0);
        assert_eq!(v.len(), 13);
    }
}
