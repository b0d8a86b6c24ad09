//! Monte Carlo point estimates with batch-means standard errors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::RngStream;

/// Default number of batches for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 32;

/// Where an estimate was computed (discretisation step, domain size).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateMeta {
    pub grid_step: f64,
    pub domain_size: f64,
}

/// A Monte Carlo point estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n_reps: usize,
    pub ci95: (f64, f64),
    pub meta: EstimateMeta,
}

impl Estimate {
    pub fn new(value: f64, stderr: f64, n_reps: usize) -> Self {
        Self {
            value,
            stderr,
            n_reps,
            ci95: (value - 1.96 * stderr, value + 1.96 * stderr),
            meta: EstimateMeta::default(),
        }
    }

    /// A deterministic value with zero standard error.
    pub fn exact(value: f64, n_reps: usize) -> Self {
        Self::new(value, 0.0, n_reps)
    }

    /// Mean of `samples` with a batch-means standard error over `DEFAULT_BATCHES` batches.
    pub fn from_samples(samples: &[f64]) -> Self {
        Self::from_samples_batched(samples, DEFAULT_BATCHES)
    }

    /// Batch-means estimate. With fewer samples than batches every sample is its own batch.
    pub fn from_samples_batched(samples: &[f64], batches: usize) -> Self {
        let n = samples.len();
        assert!(n > 0, "no samples");
        let mean = kahan_sum(samples.iter().copied()) / n as f64;
        let nb = batches.min(n).max(1);
        if nb < 2 {
            return Self::new(mean, 0.0, n);
        }
        let base = n / nb;
        let extra = n % nb;
        let mut means = Vec::with_capacity(nb);
        let mut start = 0;
        for b in 0..nb {
            let len = base + usize::from(b < extra);
            let chunk = &samples[start..start + len];
            means.push(kahan_sum(chunk.iter().copied()) / len as f64);
            start += len;
        }
        // Unequal batch sizes differ by at most one; weight them equally.
        let bm = kahan_sum(means.iter().copied()) / nb as f64;
        let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (nb - 1) as f64;
        Self::new(mean, (var / nb as f64).sqrt(), n)
    }

    pub fn with_meta(mut self, grid_step: f64, domain_size: f64) -> Self {
        self.meta = EstimateMeta { grid_step, domain_size };
        self
    }

    /// Scale value, standard error and interval by a positive constant.
    pub fn scaled(self, k: f64) -> Self {
        let mut e = Self::new(self.value * k, self.stderr * k.abs(), self.n_reps);
        e.meta = self.meta;
        e
    }

    pub fn relative_stderr(&self) -> f64 {
        if self.value == 0.0 { 0.0 } else { self.stderr / self.value.abs() }
    }
}

/// Combined standard error of a difference of independent estimates.
pub fn combined_stderr(a: &Estimate, b: &Estimate) -> f64 {
    a.stderr.hypot(b.stderr)
}

/// Compensated summation.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in it {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Run `n` independent replications in parallel, collecting results in replication order.
///
/// Each call receives the stream for component 0 of its replication; derive
/// further components with [`RngStream::component`].
pub fn replicate<T, F>(seed: u64, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(RngStream) -> T + Sync + Send,
{
    (0..n as u64)
        .into_par_iter()
        .map(|rep| f(RngStream::new(seed, rep, 0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_is_symmetric() {
        let e = Estimate::new(2.0, 0.5, 10);
        assert_eq!(e.ci95, (2.0 - 0.98, 2.0 + 0.98));
    }

    #[test]
    fn constant_samples_have_zero_error() {
        let e = Estimate::from_samples(&[3.0; 100]);
        assert_eq!(e.value, 3.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn batch_means_of_iid_uniforms() {
        use rand::Rng;
        let xs: Vec<f64> = replicate(11, 64_000, |s| s.rng().random::<f64>());
        let e = Estimate::from_samples(&xs);
        let exact_se = (1.0f64 / 12.0 / 64_000.0).sqrt();
        assert!((e.value - 0.5).abs() < 4.0 * exact_se);
        // 31 degrees of freedom: the ratio of estimated to true se is within ±40% w.h.p.
        assert!((e.stderr / exact_se - 1.0).abs() < 0.4, "{}", e.stderr / exact_se);
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let v = std::iter::once(1e16).chain(std::iter::repeat_n(1.0, 1000)).chain(std::iter::once(-1e16));
        assert_eq!(kahan_sum(v), 1000.0);
    }
}
