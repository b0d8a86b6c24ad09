use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::covariance::VarianceFunction;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::simkit::grid::GridSpec;
use crate::simkit::path::SamplePath;

/// Largest covariance matrix the Cholesky generators will factor.
pub const CHOLESKY_LIMIT: usize = 1 << 13;

/// Diagonal jitter, relative to the largest variance, tried in turn.
pub const JITTER_SCHEDULE: [f64; 3] = [0.0, 1e-12, 1e-10];

/// Lower Cholesky factor of a covariance matrix, stored row by row.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    packed: Vec<f64>,
    jitter: f64,
}

impl CholeskyFactor {
    /// Factor the `n × n` covariance `cov(i, j)`.
    pub fn new(n: usize, cov: impl Fn(usize, usize) -> f64) -> Result<Self> {
        if n > CHOLESKY_LIMIT {
            return Err(Error::Budget { what: "Cholesky dimension", requested: n, limit: CHOLESKY_LIMIT });
        }
        let mut m = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let c = cov(i, j);
                m[(i, j)] = c;
                m[(j, i)] = c;
            }
        }
        Self::from_matrix(m)
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::ModelRejected("covariance matrix has non-finite entries".into()));
        }
        let max_diag = (0..n).map(|i| m[(i, i)]).fold(0.0, f64::max);
        if max_diag == 0.0 {
            if m.iter().all(|&x| x == 0.0) {
                return Ok(Self { n, packed: vec![0.0; n * (n + 1) / 2], jitter: 0.0 });
            }
            return Err(Error::ModelRejected("zero variances with nonzero covariances".into()));
        }
        for &rel in &JITTER_SCHEDULE {
            let mut a = m.clone();
            for i in 0..n {
                a[(i, i)] += rel * max_diag;
            }
            if let Some(ch) = a.cholesky() {
                let l = ch.l();
                let mut packed = Vec::with_capacity(n * (n + 1) / 2);
                for i in 0..n {
                    for j in 0..=i {
                        packed.push(l[(i, j)]);
                    }
                }
                return Ok(Self { n, packed, jitter: rel });
            }
        }
        Err(Error::ModelRejected(format!(
            "covariance matrix of size {n} is not nonnegative definite (Cholesky failed with jitter up to {:e})",
            JITTER_SCHEDULE[JITTER_SCHEDULE.len() - 1]
        )))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Relative jitter that was needed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `L z` for a fresh standard normal vector `z`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        self.apply(&z)
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n);
        let mut start = 0;
        for i in 0..self.n {
            let row = &self.packed[start..start + i + 1];
            out.push(row.iter().zip(z).map(|(a, b)| a * b).sum());
            start += i + 1;
        }
        out
    }
}

/// Stationary-increment process `X` with `X(0) = 0` on a one-dimensional grid.
#[derive(Debug, Clone)]
pub struct StatIncrGenerator {
    factor: CholeskyFactor,
    zero: Option<usize>,
    len: usize,
}

impl StatIncrGenerator {
    /// `Var X(t) = var(t)`, `Cov(X(s), X(t)) = ½(var(s) + var(t) − var(t − s))`.
    pub fn from_variance(coords: &[f64], var: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let zero = coords.iter().position(|&t| t == 0.0);
        let pts: Vec<f64> = coords.iter().copied().filter(|&t| t != 0.0).collect();
        let diag = pts.iter().map(|&t| var(t)).collect::<Result<Vec<_>>>()?;
        let n = pts.len();
        let mut m = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = diag[i];
            for j in 0..i {
                let c = 0.5 * (diag[i] + diag[j] - var(pts[i] - pts[j])?);
                m[(i, j)] = c;
                m[(j, i)] = c;
            }
        }
        Ok(Self { factor: CholeskyFactor::from_matrix(m)?, zero, len: coords.len() })
    }

    pub fn new(vf: &VarianceFunction, grid: &GridSpec) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::config("stationary-increment simulation needs a one-dimensional grid"));
        }
        grid.require_origin()?;
        Self::from_variance(&grid.axis_coords(0), |t| vf.eval(t))
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let inner = self.factor.sample(rng);
        match self.zero {
            None => inner,
            Some(z) => {
                let mut out = Vec::with_capacity(self.len);
                out.extend_from_slice(&inner[..z]);
                out.push(0.0);
                out.extend_from_slice(&inner[z..]);
                out
            }
        }
    }
}

/// A path of the stationary-increment process with variance function `vf`.
pub fn simulate_statincr(vf: &VarianceFunction, grid: &GridSpec, rng: RngStream) -> Result<SamplePath> {
    let gen = StatIncrGenerator::new(vf, grid)?;
    SamplePath::new(grid.clone(), gen.sample(&mut rng.rng()))
}
