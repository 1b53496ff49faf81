//! Configuration files, seeded sweeps and CSV output for the command-line
//! tool.

mod config;
mod sweep;

pub use config::{check_scale, ExperimentConfig, Preset, DESK_MAX_NODES, DESK_MAX_SIM_TIME};
pub use sweep::{expand, mean_std, run_points, run_sweep, write_csv, Axis, SweepPoint, SweepRow, CSV_HEADER};
