//! Configuration files and output writers.

pub mod config;
pub mod driver;
pub mod output;

pub use config::{load_config, parse_config, OutputSpec, SimConfig, SnapshotField, TimeConfig};
pub use driver::{run_to_disk, RunSummary};
pub use output::{format_row, write_series, write_snapshot, SeriesWriter, SERIES_COLUMNS};
