//! Configuration files, named experiment presets, the experiment runner and
//! its CSV and SVG writers.

pub mod config;
pub mod plot;
pub mod presets;
pub mod run;
pub mod solve;
pub mod validation;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CACHEBANDIT_OUT";

pub use config::{ExperimentConfig, PolicyConfig, SweepAxis};
pub use presets::{preset, PRESETS};
pub use run::{execute, run, write_outputs, Metric, ResultRow};
pub use solve::solve_cmd;
pub use validation::validate_spo;
