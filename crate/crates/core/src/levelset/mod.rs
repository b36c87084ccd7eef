//! Level sets of `|phi|` and `arg phi`, slab projections, and invariance/damping metrics.

mod metrics;
mod projection;
mod raster;

pub use metrics::{damping_metric, fit_log_linear, invariance_metric, DampingFit, LinearFit};
pub use projection::{poincare_project, Epoch, ProjectedPoint, ProjectedPoints, DEFAULT_EPSILON};
pub use raster::{rasterize_level_sets, LevelSetGrid, LevelSetMetadata, SliceSpec};
