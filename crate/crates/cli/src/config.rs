use std::path::{Path, PathBuf};

use gexr_core::constants::{DomainKind, ExtrapolationSchedule, Method};
use gexr_core::covariance::{DriftDef, LimitFieldDef, VarianceDef};
use gexr_core::functional::FunctionalDef;
use gexr_core::simkit::{GridSpec, DEFAULT_GRID_BUDGET};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Environment variable overriding the replication and grid caps.
pub const BUDGET_VAR: &str = "GEXR_BUDGET";
pub const DEFAULT_REPS_BUDGET: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Constants,
    Tail,
    Audit,
    Doublesum,
    Formula,
    RuinDemo,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Constants => "constants",
            Kind::Tail => "tail",
            Kind::Audit => "audit",
            Kind::Doublesum => "doublesum",
            Kind::Formula => "formula",
            Kind::RuinDemo => "ruin-demo",
        }
    }
}

/// Top-level experiment file. `params` is checked against the schema of `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Results only show qualitative behaviour; no statistical claim is attached.
    #[serde(default)]
    pub qualitative: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub params: serde_json::Value,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub dump_paths: bool,
}

/// A validated experiment ready to run.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub id: String,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out_dir: PathBuf,
    pub params: Params,
    pub budget: Budget,
    pub dump_paths: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn resolve(mut self, ov: &Overrides, budget: Budget) -> CliResult<Resolved> {
        if let Some(s) = ov.seed {
            self.seed = Some(s);
        }
        let seed = self.seed.ok_or_else(|| CliError::Config("missing field `seed`".into()))?;
        let workers = ov.workers.or(self.workers);
        if workers == Some(0) {
            return Err(CliError::Config("workers must be positive".into()));
        }
        let out_dir = ov.out_dir.clone().or_else(|| self.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
        let params = Params::parse(self.kind, &self.params)?;
        let needs_reps = !matches!(params, Params::Formula(_));
        match self.reps {
            None if needs_reps => return Err(CliError::Config(format!("kind {} needs `reps`", self.kind.name()))),
            Some(0) => return Err(CliError::Config("reps must be positive".into())),
            Some(n) if n > budget.reps => {
                return Err(CliError::Budget(format!("replications {n} exceed the budget {} (set {BUDGET_VAR})", budget.reps)))
            }
            _ => {}
        }
        let id = self.id.clone().unwrap_or_else(|| self.kind.name().to_string());
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.') {
            return Err(CliError::Config(format!("experiment id {id:?} must be a plain file stem")));
        }
        self.seed = Some(seed);
        Ok(Resolved { config: self, id, seed, workers, out_dir, params, budget, dump_paths: ov.dump_paths })
    }
}

impl Resolved {
    pub fn reps(&self) -> usize {
        self.config.reps.unwrap_or(0)
    }

    /// SHA-256 of the canonical JSON of every input that affects the numbers
    /// (output location and worker count excluded).
    pub fn config_hash(&self) -> String {
        let mut c = self.config.clone();
        c.out_dir = None;
        c.workers = None;
        let canonical = serde_json::to_string(&serde_json::to_value(&c).expect("config serializes")).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn grid(&self, g: &GridDef) -> CliResult<GridSpec> {
        let axis = GridSpec::stepped_axis(g.lo, g.hi, g.step)?;
        Ok(GridSpec::with_budget(vec![axis], self.budget.grid_points)?)
    }
}

/// Caps on replications per estimate and on grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub reps: usize,
    pub grid_points: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self { reps: DEFAULT_REPS_BUDGET, grid_points: DEFAULT_GRID_BUDGET }
    }
}

impl Budget {
    /// `N` caps replications; `reps=N,grid=M` sets either cap.
    pub fn parse(text: &str) -> CliResult<Self> {
        let bad = || CliError::Config(format!("cannot parse {BUDGET_VAR}={text:?}; expected N or reps=N,grid=M"));
        let mut b = Self::default();
        if let Ok(n) = text.trim().parse::<usize>() {
            b.reps = n;
            return Ok(b);
        }
        for part in text.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            let v: usize = v.trim().parse().map_err(|_| bad())?;
            match k.trim() {
                "reps" => b.reps = v,
                "grid" => b.grid_points = v,
                _ => return Err(bad()),
            }
        }
        Ok(b)
    }

    pub fn from_env() -> CliResult<Self> {
        match std::env::var(BUDGET_VAR) {
            Ok(v) => Self::parse(&v),
            Err(_) => Ok(Self::default()),
        }
    }
}

/// A one-dimensional grid `lo, lo + step, ..., hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDef {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

/// Reference to a built-in thresholded family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilyDef {
    Stationary { alpha: f64 },
    Berman {
        eps: f64,
        b: f64,
        #[serde(rename = "kMax")]
        k_max: u32,
    },
    Peak { alpha: f64, beta: f64, p: f64 },
    Ruin {
        alpha: f64,
        c: f64,
        cell: f64,
        #[serde(rename = "kMax")]
        k_max: u32,
    },
}

/// Pass/fail rule `|estimate / value − 1| ≤ rel`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Target {
    pub value: f64,
    pub rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "study", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstantsParams {
    Pickands {
        limit: LimitFieldDef,
        #[serde(default)]
        schedule: Option<ExtrapolationSchedule>,
        #[serde(default)]
        method: Method,
        #[serde(default)]
        target: Option<Target>,
    },
    #[serde(rename_all = "camelCase")]
    Piterbarg {
        limit: LimitFieldDef,
        drift: DriftDef,
        #[serde(default)]
        domain: DomainKind,
        #[serde(default)]
        schedule: Option<ExtrapolationSchedule>,
        #[serde(default)]
        method: Method,
        #[serde(default)]
        target: Option<Target>,
    },
    Generalized {
        limit: LimitFieldDef,
        #[serde(default)]
        drift: DriftDef,
        #[serde(default = "sup")]
        functional: FunctionalDef,
        grid: GridDef,
        #[serde(default)]
        method: Method,
        #[serde(default)]
        target: Option<Target>,
    },
    #[serde(rename_all = "camelCase")]
    GeneralizedPiterbarg {
        variance: VarianceDef,
        b: f64,
        s: f64,
        t_schedule: Vec<f64>,
        grid_step: f64,
        #[serde(default = "gp_stop_rule")]
        stop_rule: f64,
        #[serde(default)]
        method: Method,
    },
}

fn sup() -> FunctionalDef {
    FunctionalDef::Name("sup".into())
}

fn gp_stop_rule() -> f64 {
    0.02
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    #[default]
    Conditional,
    Crude,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailParams {
    pub family: FamilyDef,
    pub u: Vec<f64>,
    #[serde(default)]
    pub tau: f64,
    #[serde(default = "sup")]
    pub functional: FunctionalDef,
    pub grid: GridDef,
    #[serde(default)]
    pub estimator: Estimator,
}

/// Reference constant of an audit: given, or estimated on the audit grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum ConstantSource {
    Fixed {
        value: f64,
        #[serde(default)]
        stderr: f64,
    },
    Estimate {
        limit: LimitFieldDef,
        #[serde(default)]
        drift: DriftDef,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct AuditParams {
    pub family: FamilyDef,
    #[serde(default = "sup")]
    pub functional: FunctionalDef,
    pub u_schedule: Vec<f64>,
    pub grid: GridDef,
    pub constant: ConstantSource,
    #[serde(default = "audit_tolerance")]
    pub tolerance: f64,
}

fn audit_tolerance() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoublesumPreset {
    Gaussian,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct DoublesumParams {
    pub preset: DoublesumPreset,
    pub separations: Vec<f64>,
    pub s2: Vec<f64>,
    pub u: Vec<f64>,
    pub step: f64,
    /// Distances from which the lower growth condition is checked; each is reported.
    #[serde(default)]
    pub s1: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "formula", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FormulaParams {
    /// `T · H · Ψ(u) · u^{2/α}`.
    Pickands { t: f64, alpha: f64, u: Vec<f64>, h: f64 },
    /// Exact-asymptotics formula of the variance-peak family.
    Peak { alpha: f64, beta: f64, p: f64, u: Vec<f64>, pickands: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct RuinParams {
    pub alpha: f64,
    pub c: f64,
    pub cell: f64,
    pub k_max: u32,
    pub u: Vec<f64>,
    pub grid_step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Constants(ConstantsParams),
    Tail(TailParams),
    Audit(AuditParams),
    Doublesum(DoublesumParams),
    Formula(FormulaParams),
    RuinDemo(RuinParams),
}

fn typed<T: DeserializeOwned>(kind: Kind, v: &serde_json::Value) -> CliResult<T> {
    T::deserialize(v).map_err(|e| CliError::Config(format!("params of kind {}: {e}", kind.name())))
}

fn nonempty(name: &str, v: &[f64]) -> CliResult<()> {
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(CliError::Config(format!("`{name}` must be a nonempty list of finite numbers")));
    }
    Ok(())
}

impl Params {
    pub fn parse(kind: Kind, v: &serde_json::Value) -> CliResult<Self> {
        let p = match kind {
            Kind::Constants => Params::Constants(typed(kind, v)?),
            Kind::Tail => Params::Tail(typed(kind, v)?),
            Kind::Audit => Params::Audit(typed(kind, v)?),
            Kind::Doublesum => Params::Doublesum(typed(kind, v)?),
            Kind::Formula => Params::Formula(typed(kind, v)?),
            Kind::RuinDemo => Params::RuinDemo(typed(kind, v)?),
        };
        match &p {
            Params::Tail(t) => nonempty("u", &t.u)?,
            Params::Audit(a) => nonempty("uSchedule", &a.u_schedule)?,
            Params::Doublesum(d) => {
                nonempty("separations", &d.separations)?;
                nonempty("s2", &d.s2)?;
                nonempty("u", &d.u)?;
                if let Some(s1) = &d.s1 {
                    nonempty("s1", s1)?;
                }
            }
            Params::Formula(FormulaParams::Pickands { u, .. } | FormulaParams::Peak { u, .. }) => nonempty("u", u)?,
            Params::RuinDemo(r) => nonempty("u", &r.u)?,
            Params::Constants(ConstantsParams::GeneralizedPiterbarg { t_schedule, .. }) => nonempty("tSchedule", t_schedule)?,
            Params::Constants(_) => {}
        }
        Ok(p)
    }
}
