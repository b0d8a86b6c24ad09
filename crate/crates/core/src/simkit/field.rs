use rand::Rng;

use crate::covariance::{ComponentProcess, LimitFieldSpec, ThresholdedFamily, VarianceFunction};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::simkit::cholesky::{CholeskyFactor, StatIncrGenerator};
use crate::simkit::fgn::FbmAxisGenerator;
use crate::simkit::grid::GridSpec;
use crate::simkit::path::SamplePath;

#[derive(Debug, Clone)]
enum AxisGenerator {
    Fbm(FbmAxisGenerator),
    StatIncr(StatIncrGenerator),
}

impl AxisGenerator {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            AxisGenerator::Fbm(g) => g.sample(rng),
            AxisGenerator::StatIncr(g) => g.sample(rng),
        }
    }
}

#[derive(Debug, Clone)]
struct Part {
    axis: usize,
    scale: f64,
    gen: AxisGenerator,
    /// Unit variance at each axis coordinate.
    var_axis: Vec<f64>,
    /// Unit variance at each lag `j · step`.
    var_lag: Vec<f64>,
}

/// Sampler for the additive field `η(t) = Σ_i √c_i W_i(t_{axis_i})` on a fixed grid,
/// with analytic variance and covariance tables.
#[derive(Debug, Clone)]
pub struct LimitFieldGenerator {
    grid: GridSpec,
    shape: Vec<usize>,
    strides: Vec<usize>,
    parts: Vec<Part>,
}

impl LimitFieldGenerator {
    pub fn new(eta: &LimitFieldSpec, grid: &GridSpec) -> Result<Self> {
        if eta.dim() != grid.dim() {
            return Err(Error::config(format!("limit field of dimension {} on a {}-d grid", eta.dim(), grid.dim())));
        }
        let mut parts = Vec::new();
        for c in eta.components() {
            if c.scale == 0.0 {
                continue;
            }
            if grid.zero_index(c.axis).is_none() {
                return Err(Error::config(format!("axis {} must contain zero", c.axis)));
            }
            let gen = match c.process() {
                ComponentProcess::Fbm(alpha) => AxisGenerator::Fbm(FbmAxisGenerator::new(alpha, grid, c.axis)?),
                ComponentProcess::StatIncr { .. } => AxisGenerator::StatIncr(StatIncrGenerator::from_variance(
                    &grid.axis_coords(c.axis),
                    |t| c.unit_variance(t),
                )?),
            };
            parts.push(Self::part(grid, c.axis, c.scale, gen, |t| c.unit_variance(t))?);
        }
        Ok(Self::assemble(grid, parts))
    }

    /// The stationary-increment process with variance function `vf`, on a one-dimensional grid containing zero.
    pub fn from_variance(vf: &VarianceFunction, grid: &GridSpec) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(Error::config("stationary-increment simulation needs a one-dimensional grid"));
        }
        grid.require_origin()?;
        let gen = match vf.as_fbm() {
            Some(alpha) => AxisGenerator::Fbm(FbmAxisGenerator::new(alpha, grid, 0)?),
            None => AxisGenerator::StatIncr(StatIncrGenerator::new(vf, grid)?),
        };
        let part = Self::part(grid, 0, 1.0, gen, |t| vf.eval(t))?;
        Ok(Self::assemble(grid, vec![part]))
    }

    fn part(grid: &GridSpec, axis: usize, scale: f64, gen: AxisGenerator, var: impl Fn(f64) -> Result<f64>) -> Result<Part> {
        let coords = grid.axis_coords(axis);
        let step = grid.step(axis);
        let var_axis = coords.iter().map(|&t| var(t)).collect::<Result<Vec<_>>>()?;
        let var_lag = (0..coords.len()).map(|j| var(j as f64 * step)).collect::<Result<Vec<_>>>()?;
        Ok(Part { axis, scale, gen, var_axis, var_lag })
    }

    fn assemble(grid: &GridSpec, parts: Vec<Part>) -> Self {
        let shape = grid.shape();
        let strides = (0..shape.len()).map(|a| shape[a + 1..].iter().product()).collect();
        Self { grid: grid.clone(), shape, strides, parts }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn is_degenerate(&self) -> bool {
        self.parts.is_empty()
    }

    fn axis_index(&self, part: &Part, flat: usize) -> usize {
        (flat / self.strides[part.axis]) % self.shape[part.axis]
    }

    /// Field values in grid storage order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for p in &self.parts {
            let w = p.gen.sample(rng);
            let sc = p.scale.sqrt();
            for (flat, v) in out.iter_mut().enumerate() {
                *v += sc * w[self.axis_index(p, flat)];
            }
        }
        out
    }

    /// `Var η(t)` at every grid point.
    pub fn variance(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for p in &self.parts {
            for (flat, v) in out.iter_mut().enumerate() {
                *v += p.scale * p.var_axis[self.axis_index(p, flat)];
            }
        }
        out
    }

    /// `out[i] += factor · Cov(η(t_i), η(t_k))` for every grid point `t_i`.
    pub fn add_covariance(&self, out: &mut [f64], k: usize, factor: f64) {
        for p in &self.parts {
            let b = self.axis_index(p, k);
            let vb = p.var_axis[b];
            let f = 0.5 * factor * p.scale;
            for (flat, v) in out.iter_mut().enumerate() {
                let a = self.axis_index(p, flat);
                *v += f * (p.var_axis[a] + vb - p.var_lag[a.abs_diff(b)]);
            }
        }
    }
}

/// A sample of the limit field `eta` on `grid`.
pub fn simulate_limit_field(eta: &LimitFieldSpec, grid: &GridSpec, rng: RngStream) -> Result<SamplePath> {
    let gen = LimitFieldGenerator::new(eta, grid)?;
    SamplePath::new(grid.clone(), gen.sample(&mut rng.rng()))
}

/// Sampler for the residual `R(t) = Z(t) − r(t,0) Z(0)` of a family member `(u, τ)`
/// on a grid containing the origin. `Z(0)` is never drawn; the residual
/// covariance `r(s,t) − r(s,0) r(t,0)` is factored directly.
#[derive(Debug, Clone)]
pub struct ResidualGenerator {
    grid: GridSpec,
    origin: usize,
    factor: CholeskyFactor,
    /// `r(t, 0)` per grid point.
    r0: Vec<f64>,
}

impl ResidualGenerator {
    pub fn new(family: &ThresholdedFamily, u: f64, tau: f64, grid: &GridSpec) -> Result<Self> {
        if family.dim() != grid.dim() {
            return Err(Error::config("family and grid dimensions differ"));
        }
        let origin = grid.require_origin()?;
        let pts = grid.points();
        let zero = &pts[origin];
        let r0: Vec<f64> = pts.iter().map(|t| family.correlation(u, tau, t, zero)).collect();
        let idx: Vec<usize> = (0..pts.len()).filter(|&i| i != origin).collect();
        let factor = CholeskyFactor::new(idx.len(), |a, b| {
            let (i, j) = (idx[a], idx[b]);
            family.correlation(u, tau, &pts[i], &pts[j]) - r0[i] * r0[j]
        })?;
        Ok(Self { grid: grid.clone(), origin, factor, r0 })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    /// `r(t, 0)` on the grid.
    pub fn r0(&self) -> &[f64] {
        &self.r0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut v = self.factor.sample(rng);
        v.insert(self.origin, 0.0);
        v
    }
}

pub fn simulate_conditional_residual(
    family: &ThresholdedFamily,
    u: f64,
    tau: f64,
    grid: &GridSpec,
    rng: RngStream,
) -> Result<SamplePath> {
    let gen = ResidualGenerator::new(family, u, tau, grid)?;
    SamplePath::new(grid.clone(), gen.sample(&mut rng.rng()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{LimitComponent, Mode, VarianceFunction};
    use crate::simkit::grid::Axis;

    #[test]
    fn degenerate_field_is_zero() {
        let g = GridSpec::line(-1.0, 1.0, 5).unwrap();
        let p = simulate_limit_field(&LimitFieldSpec::degenerate(1), &g, RngStream::new(0, 0, 0)).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn additive_field_is_sum_along_axes() {
        let g = GridSpec::new(vec![Axis { lo: 0.0, hi: 1.0, n: 3 }, Axis { lo: -1.0, hi: 1.0, n: 3 }]).unwrap();
        let eta = LimitFieldSpec::new(
            2,
            vec![LimitComponent::fbm(0, 1.0, 1.0).unwrap(), LimitComponent::fbm(1, 1.0, 1.0).unwrap()],
        )
        .unwrap();
        let p = simulate_limit_field(&eta, &g, RngStream::new(2, 0, 0)).unwrap();
        // η(t1, t2) = W1(t1) + W2(t2): rectangle increments vanish
        let v = |i: usize, j: usize| p.at(&[i, j]);
        assert_eq!(v(0, 1), 0.0);
        for i in 1..3 {
            for j in 1..3 {
                let rect = v(i, j) - v(i, j - 1) - v(i - 1, j) + v(i - 1, j - 1);
                assert!(rect.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn finite_mode_component_builds() {
        let g = GridSpec::line(0.0, 2.0, 9).unwrap();
        let c = LimitComponent::new(0, 1.0, Mode::Finite(2.0), VarianceFunction::fbm(1.4).unwrap()).unwrap();
        let eta = LimitFieldSpec::new(1, vec![c]).unwrap();
        let p = simulate_limit_field(&eta, &g, RngStream::new(2, 0, 0)).unwrap();
        assert_eq!(p.values[0], 0.0);
    }

    #[test]
    fn covariance_tables_match_analytic_model() {
        let g = GridSpec::new(vec![Axis { lo: -1.0, hi: 1.0, n: 5 }, Axis { lo: 0.0, hi: 1.5, n: 4 }]).unwrap();
        let eta = LimitFieldSpec::new(
            2,
            vec![
                LimitComponent::fbm(0, 0.7, 1.3).unwrap(),
                LimitComponent::new(1, 0.4, Mode::Finite(2.0), VarianceFunction::sum_of_fbm(vec![(1.0, 0.5), (1.0, 1.5)]).unwrap()).unwrap(),
            ],
        )
        .unwrap();
        let gen = LimitFieldGenerator::new(&eta, &g).unwrap();
        let pts = g.points();
        let var = gen.variance();
        for k in [0, 7, 19] {
            let mut cov = vec![0.0; g.len()];
            gen.add_covariance(&mut cov, k, 1.0);
            for i in 0..g.len() {
                assert!((cov[i] - eta.covariance(&pts[i], &pts[k]).unwrap()).abs() < 1e-12);
                assert!((var[i] - eta.variance(&pts[i]).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn residual_of_constant_correlation_vanishes() {
        let fam = ThresholdedFamily::new("one", 1, |_, _, _: &[f64], _: &[f64]| 1.0, |u, _| u);
        let g = GridSpec::line(0.0, 2.0, 5).unwrap();
        let p = simulate_conditional_residual(&fam, 3.0, 0.0, &g, RngStream::new(1, 0, 0)).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
    }
}
