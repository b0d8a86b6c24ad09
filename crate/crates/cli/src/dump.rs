use std::io::BufWriter;
use std::path::PathBuf;

use gexr_core::covariance::{LimitFieldSpec, ThresholdedFamily};
use gexr_core::simkit::{simulate_limit_field, CholeskyFactor, GridSpec, LimitFieldGenerator, SamplePath};
use gexr_core::RngStream;

use crate::config::{ConstantsParams, GridDef, Params, Resolved};
use crate::constants_grid;
use crate::error::{CliError, CliResult};
use crate::run::build_family;

/// Paths written by `--dump-paths`.
pub const DUMP_COUNT: usize = 4;

fn stream(r: &Resolved, rep: usize) -> RngStream {
    // auxiliary streams, so dumping never perturbs the estimates
    RngStream::new(r.seed, rep as u64, 0).aux()
}

fn family_paths(r: &Resolved, fam: &ThresholdedFamily, u: f64, tau: f64, grid: GridSpec) -> CliResult<Vec<SamplePath>> {
    let pts = grid.points();
    let chol = CholeskyFactor::new(pts.len(), |i, j| fam.correlation(u, tau, &pts[i], &pts[j]))?;
    let scale: Vec<f64> = pts.iter().map(|t| 1.0 / (1.0 + fam.drift(u, tau, t))).collect();
    (0..DUMP_COUNT)
        .map(|k| {
            let z = chol.sample(&mut stream(r, k).rng());
            Ok(SamplePath::new(grid.clone(), z.iter().zip(&scale).map(|(x, s)| x * s).collect())?)
        })
        .collect()
}

fn limit_paths(r: &Resolved, eta: &LimitFieldSpec, grid: &GridSpec) -> CliResult<Vec<SamplePath>> {
    (0..DUMP_COUNT).map(|k| Ok(simulate_limit_field(eta, grid, stream(r, k))?)).collect()
}

/// Sample paths of the experiment's model field: the limit field for constants,
/// the unconditional `ξ_{u,τ}` at the first threshold for tail probabilities.
pub fn sample_paths(r: &Resolved) -> CliResult<Vec<SamplePath>> {
    match &r.params {
        Params::Constants(p) => match p {
            ConstantsParams::Pickands { limit, .. } | ConstantsParams::Piterbarg { limit, .. } | ConstantsParams::Generalized { limit, .. } => {
                let grid = constants_grid(r, p)?;
                limit_paths(r, &LimitFieldSpec::from_def(limit)?, &grid)
            }
            ConstantsParams::GeneralizedPiterbarg { variance, .. } => {
                let grid = constants_grid(r, p)?;
                let gen = LimitFieldGenerator::from_variance(&variance.build()?, &grid)?;
                (0..DUMP_COUNT).map(|k| Ok(SamplePath::new(grid.clone(), gen.sample(&mut stream(r, k).rng()))?)).collect()
            }
        },
        Params::Tail(p) => family_paths(r, &build_family(&p.family)?, p.u[0], p.tau, r.grid(&p.grid)?),
        Params::Audit(p) => {
            let fam = build_family(&p.family)?;
            let u = p.u_schedule[0];
            let tau = fam.index_grid(u).first().copied().unwrap_or(0.0);
            family_paths(r, &fam, u, tau, r.grid(&p.grid)?)
        }
        Params::RuinDemo(p) => {
            let fam = build_family(&crate::config::FamilyDef::Ruin { alpha: p.alpha, c: p.c, cell: p.cell, k_max: p.k_max })?;
            family_paths(r, &fam, p.u[0], 0.0, r.grid(&GridDef { lo: 0.0, hi: p.cell, step: p.grid_step })?)
        }
        Params::Doublesum(_) | Params::Formula(_) => {
            Err(CliError::Config(format!("--dump-paths is not available for kind {}", r.config.kind.name())))
        }
    }
}

/// Write `<id>.paths.bin`: the dumps of [`DUMP_COUNT`] paths back to back.
pub fn write_paths(r: &Resolved) -> CliResult<PathBuf> {
    let paths = sample_paths(r)?;
    let file = r.out_dir.join(format!("{}.paths.bin", r.id));
    let f = std::fs::File::create(&file).map_err(|e| CliError::io(&file, e))?;
    let mut w = BufWriter::new(f);
    for p in &paths {
        p.write_dump(&mut w).map_err(|e| CliError::io(&file, e))?;
    }
    Ok(file)
}
