use crate::config::{Budget, ExperimentConfig, Overrides};
use crate::error::{CliError, CliResult};

/// Built-in experiment: name and embedded config.
pub struct Preset {
    pub name: &'static str,
    pub json: &'static str,
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "pickands-alpha-1", json: include_str!("../presets/pickands-alpha-1.json") },
    Preset { name: "pickands-alpha-2", json: include_str!("../presets/pickands-alpha-2.json") },
    Preset { name: "piterbarg-gamma", json: include_str!("../presets/piterbarg-gamma.json") },
    Preset { name: "generalized-piterbarg", json: include_str!("../presets/generalized-piterbarg.json") },
    Preset { name: "uniform-audit-stationary", json: include_str!("../presets/uniform-audit-stationary.json") },
    Preset { name: "ruin-demo", json: include_str!("../presets/ruin-demo.json") },
    Preset { name: "doublesum-gaussian", json: include_str!("../presets/doublesum-gaussian.json") },
];

pub fn find(name: &str) -> CliResult<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
        CliError::Config(format!("unknown preset {name:?}; available: {}", names.join(", ")))
    })
}

impl Preset {
    pub fn config(&self) -> CliResult<ExperimentConfig> {
        ExperimentConfig::from_json(self.json)
    }

    pub fn description(&self) -> String {
        self.config().ok().and_then(|c| c.description).unwrap_or_default()
    }

    pub fn qualitative(&self) -> bool {
        self.config().is_ok_and(|c| c.qualitative)
    }

    /// Parse and validate without running.
    pub fn validate(&self) -> CliResult<()> {
        self.config()?.resolve(&Overrides::default(), Budget::default()).map(|_| ())
    }
}
