//! Exact-in-distribution simulation of Gaussian paths and fields on uniform grids.

pub mod cholesky;
pub mod fgn;
pub mod field;
pub mod grid;
pub mod path;

pub use cholesky::{simulate_statincr, CholeskyFactor, StatIncrGenerator};
pub use fgn::{simulate_fgn, FbmAxisGenerator, FgnGenerator};
pub use field::{simulate_conditional_residual, simulate_limit_field, LimitFieldGenerator, ResidualGenerator};
pub use grid::{Axis, GridSpec, DEFAULT_GRID_BUDGET};
pub use path::{read_dump, SamplePath};
