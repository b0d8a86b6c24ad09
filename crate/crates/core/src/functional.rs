//! Homogeneous functionals `Γ` of grid-discretised paths: `sup`, `inf`, their
//! affine mixtures, and composed functionals `sup_s Γ*(f(s, ·))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simkit::{GridSpec, SamplePath};

/// A functional of a path or field sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionalSpec {
    Sup,
    Inf,
    /// `a · sup + (1 − a) · inf`.
    Mix(f64),
    /// `sup` over the `s_axes` block of `inner` applied to each slice over the remaining axes.
    Composed { inner: Box<FunctionalSpec>, s_axes: Vec<usize> },
}

impl FunctionalSpec {
    pub fn composed(inner: FunctionalSpec, s_axes: Vec<usize>) -> Self {
        FunctionalSpec::Composed { inner: Box::new(inner), s_axes }
    }

    /// Declared constant `c` in `Γ(f) ≤ c · sup f`.
    pub fn f1_constant(&self) -> f64 {
        match self {
            FunctionalSpec::Sup | FunctionalSpec::Inf => 1.0,
            FunctionalSpec::Mix(a) => (a.abs() + (1.0 - a).abs()).max(1.0),
            FunctionalSpec::Composed { inner, .. } => inner.f1_constant(),
        }
    }

    /// Whether `f ≤ g` pointwise implies `Γ(f) ≤ Γ(g)`.
    pub fn is_monotone(&self) -> bool {
        match self {
            FunctionalSpec::Sup | FunctionalSpec::Inf => true,
            FunctionalSpec::Mix(a) => (0.0..=1.0).contains(a),
            FunctionalSpec::Composed { inner, .. } => inner.is_monotone(),
        }
    }

    /// `Γ(f) ≤ sup f` for every `f`.
    pub fn dominated_by_sup(&self) -> bool {
        match self {
            FunctionalSpec::Sup | FunctionalSpec::Inf => true,
            FunctionalSpec::Mix(a) => (0.0..=1.0).contains(a),
            FunctionalSpec::Composed { inner, .. } => inner.dominated_by_sup(),
        }
    }

    /// Apply to the values of `path`.
    pub fn apply(&self, path: &SamplePath) -> Result<f64> {
        self.apply_values(&path.grid, &path.values)
    }

    /// Apply to `values` laid out row-major on `grid`.
    pub fn apply_values(&self, grid: &GridSpec, values: &[f64]) -> Result<f64> {
        if values.len() != grid.len() || values.is_empty() {
            return Err(Error::config("values do not match the grid"));
        }
        match self {
            FunctionalSpec::Composed { inner, s_axes } => {
                let shape = grid.shape();
                check_axes(s_axes, shape.len())?;
                Ok(composed(inner, &shape, s_axes, values))
            }
            _ => Ok(self.apply_flat(values)),
        }
    }

    /// Apply a non-composed functional to a flat slice of values.
    ///
    /// # Panics
    /// For `Composed`, which needs the grid shape.
    pub fn apply_flat(&self, values: &[f64]) -> f64 {
        match self {
            FunctionalSpec::Sup => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            FunctionalSpec::Inf => values.iter().copied().fold(f64::INFINITY, f64::min),
            FunctionalSpec::Mix(a) => {
                let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
                a * hi + (1.0 - a) * lo
            }
            FunctionalSpec::Composed { .. } => panic!("composed functionals need the grid shape"),
        }
    }

    /// Apply to the values at the listed indices of `values`.
    pub fn apply_indexed(&self, values: &[f64], idx: &[usize]) -> f64 {
        match self {
            FunctionalSpec::Sup => idx.iter().map(|&i| values[i]).fold(f64::NEG_INFINITY, f64::max),
            FunctionalSpec::Inf => idx.iter().map(|&i| values[i]).fold(f64::INFINITY, f64::min),
            FunctionalSpec::Mix(a) => {
                let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &i| (l.min(values[i]), h.max(values[i])));
                a * hi + (1.0 - a) * lo
            }
            FunctionalSpec::Composed { .. } => panic!("composed functionals need the grid shape"),
        }
    }

    pub fn from_def(def: &FunctionalDef) -> Result<Self> {
        Ok(match def {
            FunctionalDef::Name(n) => match n.as_str() {
                "sup" => FunctionalSpec::Sup,
                "inf" => FunctionalSpec::Inf,
                other => return Err(Error::config(format!("unknown functional {other:?}"))),
            },
            FunctionalDef::Mix { mix } => {
                if !mix.is_finite() {
                    return Err(Error::config("mix weight must be finite"));
                }
                FunctionalSpec::Mix(*mix)
            }
            FunctionalDef::Composed { composed } => {
                FunctionalSpec::composed(Self::from_def(&composed.inner)?, composed.s_axes.clone())
            }
        })
    }

    pub fn to_def(&self) -> FunctionalDef {
        match self {
            FunctionalSpec::Sup => FunctionalDef::Name("sup".into()),
            FunctionalSpec::Inf => FunctionalDef::Name("inf".into()),
            FunctionalSpec::Mix(a) => FunctionalDef::Mix { mix: *a },
            FunctionalSpec::Composed { inner, s_axes } => FunctionalDef::Composed {
                composed: ComposedDef { inner: Box::new(inner.to_def()), s_axes: s_axes.clone() },
            },
        }
    }
}

fn check_axes(s_axes: &[usize], d: usize) -> Result<()> {
    let mut seen = vec![false; d];
    for &a in s_axes {
        if a >= d || seen[a] {
            return Err(Error::config(format!("invalid s-axis {a} for a {d}-dimensional grid")));
        }
        seen[a] = true;
    }
    if s_axes.len() == d {
        return Err(Error::config("composed functional needs at least one t-axis"));
    }
    Ok(())
}

fn composed(inner: &FunctionalSpec, shape: &[usize], s_axes: &[usize], values: &[f64]) -> f64 {
    let d = shape.len();
    let t_axes: Vec<usize> = (0..d).filter(|a| !s_axes.contains(a)).collect();
    let strides: Vec<usize> = (0..d).map(|a| shape[a + 1..].iter().product()).collect();
    let n_s: usize = s_axes.iter().map(|&a| shape[a]).product();
    let n_t: usize = t_axes.iter().map(|&a| shape[a]).product();
    let offsets = |axes: &[usize], mut k: usize| -> usize {
        let mut off = 0;
        for &a in axes.iter().rev() {
            off += (k % shape[a]) * strides[a];
            k /= shape[a];
        }
        off
    };
    let t_off: Vec<usize> = (0..n_t).map(|k| offsets(&t_axes, k)).collect();
    let t_shape: Vec<usize> = t_axes.iter().map(|&a| shape[a]).collect();
    let mut slice = vec![0.0; n_t];
    let mut best = f64::NEG_INFINITY;
    for ks in 0..n_s {
        let base = offsets(s_axes, ks);
        for (dst, &o) in slice.iter_mut().zip(&t_off) {
            *dst = values[base + o];
        }
        let v = match inner {
            FunctionalSpec::Composed { inner: i2, s_axes: s2 } => composed(i2, &t_shape, s2, &slice),
            other => other.apply_flat(&slice),
        };
        best = best.max(v);
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComposedDef {
    pub inner: Box<FunctionalDef>,
    #[serde(rename = "sAxes")]
    pub s_axes: Vec<usize>,
}

/// JSON form: `"sup" | "inf" | {"mix": a} | {"composed": {"inner": ..., "sAxes": [...]}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FunctionalDef {
    Name(String),
    Mix { mix: f64 },
    Composed { composed: ComposedDef },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct F1F2Report {
    pub max_f2_violation: f64,
    pub f1_holds: bool,
}

/// Check `Γ(af + b) = aΓ(f) + b` and `Γ(f) ≤ c · sup f` on the given paths.
pub fn verify_f1_f2(spec: &FunctionalSpec, paths: &[SamplePath], scalars: &[(f64, f64)]) -> Result<F1F2Report> {
    if paths.len() < 100 {
        return Err(Error::config("F1/F2 verification needs at least 100 paths"));
    }
    let c = spec.f1_constant();
    let mut max_viol: f64 = 0.0;
    let mut f1 = true;
    for p in paths {
        let g = spec.apply(p)?;
        let sup = FunctionalSpec::Sup.apply(p)?;
        if g > c * sup + 1e-9 {
            f1 = false;
        }
        for &(a, b) in scalars {
            if !(a > 0.0) {
                return Err(Error::config("F2 scalars need a > 0"));
            }
            let vals: Vec<f64> = p.values.iter().map(|v| a * v + b).collect();
            let lhs = spec.apply_values(&p.grid, &vals)?;
            max_viol = max_viol.max((lhs - (a * g + b)).abs());
        }
    }
    Ok(F1F2Report { max_f2_violation: max_viol, f1_holds: f1 })
}
