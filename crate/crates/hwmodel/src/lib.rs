//! Performance and power model of a pipelined butterfly array running the
//! transforms of a block-circulant network, and a `(p, d)` design search.

pub mod defaults;
pub mod error;
pub mod model;
pub mod optimize;
pub mod workload;

pub use defaults::Defaults;
pub use error::{Error, Result};
pub use model::{estimate, estimate_perf, estimate_power, CostParams, CostReport, HwConfig, Pipelining, PerfReport};
pub use optimize::{explore_grid, grid_argmax, metric, optimize_design, ternary_search_max, write_grid_csv, Design, GridPoint, MetricMode};
pub use workload::{workload_of, TransformKind, Workload, WorkloadEntry};
