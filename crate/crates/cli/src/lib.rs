//! Experiment runner behind the `gexr` binary: JSON configs, presets and result files.

pub mod config;
pub mod dump;
pub mod error;
pub mod output;
pub mod presets;
pub mod run;

pub use config::{Budget, ExperimentConfig, Kind, Overrides, Resolved};
pub use error::{CliError, CliResult};
pub use output::{write_outputs, ResultRecord, Written};
pub use run::{execute, Report, Status};

/// Resolve, run and write one experiment. Returns the written files and the exit code.
pub fn run_config(cfg: ExperimentConfig, ov: &Overrides, budget: Budget) -> CliResult<(Written, u8)> {
    let r = cfg.resolve(ov, budget)?;
    let report = execute(&r)?;
    let mut w = write_outputs(&r, &report)?;
    if r.dump_paths {
        w.paths = Some(dump::write_paths(&r)?);
    }
    let code = if report.status == Status::Pass { error::EXIT_PASS } else { error::EXIT_STATISTICAL_FAIL };
    Ok((w, code))
}

/// Grid on which a constants study simulates its limit field.
pub fn constants_grid(r: &Resolved, p: &config::ConstantsParams) -> CliResult<gexr_core::GridSpec> {
    use config::ConstantsParams as C;
    use gexr_core::constants::DomainKind;
    let stepped = |lo: f64, hi: f64, step: f64| -> CliResult<gexr_core::GridSpec> {
        let axis = gexr_core::GridSpec::stepped_axis(lo, hi, step)?;
        Ok(gexr_core::GridSpec::with_budget(vec![axis], r.budget.grid_points)?)
    };
    match p {
        C::Pickands { schedule, .. } | C::Piterbarg { schedule, .. } => {
            let sch = schedule.clone().unwrap_or_default();
            sch.validate()?;
            let (smax, fine) = (*sch.domain_sizes.last().unwrap(), *sch.grid_steps.last().unwrap());
            let two_sided = matches!(p, C::Piterbarg { domain: DomainKind::TwoSided, .. });
            stepped(if two_sided { -smax } else { 0.0 }, smax, fine)
        }
        C::Generalized { grid, .. } => r.grid(grid),
        C::GeneralizedPiterbarg { s, t_schedule, grid_step, .. } => stepped(-s, *t_schedule.last().unwrap(), *grid_step),
    }
}
