use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of points in a grid.
pub const DEFAULT_GRID_BUDGET: usize = 1 << 20;

/// One axis of a uniform grid: `n` points from `lo` to `hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn step(&self) -> f64 {
        if self.n <= 1 { 0.0 } else { (self.hi - self.lo) / (self.n - 1) as f64 }
    }
}

/// A box-shaped uniform grid in `d` dimensions, stored row-major (last axis fastest).
///
/// When an axis straddles zero, zero is required to be a grid point and every
/// coordinate is computed as an integer multiple of the step, so the origin is
/// represented exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    axes: Vec<Axis>,
    /// Index of the point closest to zero on each axis (exactly zero if the axis straddles it).
    zero_index: Vec<Option<usize>>,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        Self::with_budget(axes, DEFAULT_GRID_BUDGET)
    }

    pub fn with_budget(axes: Vec<Axis>, budget: usize) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::config("grid needs at least one axis"));
        }
        let mut total: usize = 1;
        let mut zero_index = Vec::with_capacity(axes.len());
        for a in &axes {
            if !a.lo.is_finite() || !a.hi.is_finite() || a.lo > a.hi {
                return Err(Error::config(format!("invalid axis range [{}, {}]", a.lo, a.hi)));
            }
            if a.n == 0 || (a.n == 1) != (a.lo == a.hi) {
                return Err(Error::config(format!(
                    "axis [{}, {}] with {} points: a single point needs lo = hi, otherwise at least two points",
                    a.lo, a.hi, a.n
                )));
            }
            total = total.saturating_mul(a.n);
            zero_index.push(if a.lo <= 0.0 && 0.0 <= a.hi {
                if a.n == 1 {
                    Some(0)
                } else {
                    let k = -a.lo / a.step();
                    let k0 = k.round();
                    if (k - k0).abs() > 1e-9 * k.abs().max(1.0) {
                        return Err(Error::config(format!(
                            "axis [{}, {}] with {} points does not contain zero as a grid point",
                            a.lo, a.hi, a.n
                        )));
                    }
                    Some(k0 as usize)
                }
            } else {
                None
            });
        }
        if total > budget {
            return Err(Error::Budget { what: "grid points", requested: total, limit: budget });
        }
        Ok(Self { axes, zero_index })
    }

    /// One-dimensional grid with `n` points.
    pub fn line(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(vec![Axis { lo, hi, n }])
    }

    /// Axis from `lo` to `hi` with the given step; `(hi - lo)/step` must be an integer.
    pub fn stepped_axis(lo: f64, hi: f64, step: f64) -> Result<Axis> {
        if !(step > 0.0) {
            return Err(Error::config(format!("grid step must be positive, got {step}")));
        }
        let k = (hi - lo) / step;
        let n = k.round();
        if (k - n).abs() > 1e-9 * k.abs().max(1.0) {
            return Err(Error::config(format!("step {step} does not divide [{lo}, {hi}]")));
        }
        Ok(Axis { lo, hi, n: n as usize + 1 })
    }

    /// One-dimensional grid with the given step.
    pub fn stepped(lo: f64, hi: f64, step: f64) -> Result<Self> {
        Self::new(vec![Self::stepped_axis(lo, hi, step)?])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self, axis: usize) -> f64 {
        self.axes[axis].step()
    }

    /// Index of zero along `axis`, if the axis contains it.
    pub fn zero_index(&self, axis: usize) -> Option<usize> {
        self.zero_index[axis]
    }

    /// Coordinate of the `k`-th point on `axis`.
    pub fn coord(&self, axis: usize, k: usize) -> f64 {
        let a = &self.axes[axis];
        match self.zero_index[axis] {
            Some(_) if a.n == 1 => 0.0,
            Some(k0) => (k as f64 - k0 as f64) * (a.hi - a.lo) / (a.n - 1) as f64,
            None if a.n == 1 => a.lo,
            None => a.lo + k as f64 * (a.hi - a.lo) / (a.n - 1) as f64,
        }
    }

    pub fn axis_coords(&self, axis: usize) -> Vec<f64> {
        (0..self.axes[axis].n).map(|k| self.coord(axis, k)).collect()
    }

    /// Flat index of the multi-index `idx`.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, a)| acc * a.n + i)
    }

    /// Multi-index of the flat index `flat`.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for (i, a) in self.axes.iter().enumerate().rev() {
            idx[i] = flat % a.n;
            flat /= a.n;
        }
        idx
    }

    /// Coordinates of the point with flat index `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().enumerate().map(|(ax, &k)| self.coord(ax, k)).collect()
    }

    /// All grid points in storage order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Flat index of the origin, if every axis contains zero.
    pub fn origin_index(&self) -> Option<usize> {
        let idx: Option<Vec<usize>> = self.zero_index.iter().copied().collect();
        idx.map(|i| self.flat_index(&i))
    }

    pub fn require_origin(&self) -> Result<usize> {
        self.origin_index().ok_or_else(|| Error::config("grid must contain the origin"))
    }
}
