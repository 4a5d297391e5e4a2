//! Harness library: file formats, experiment orchestration, logging and
//! plotting for the warden simulator. The `warden` binary is a thin CLI
//! over these modules.

pub mod checkpoint;
pub mod config_file;
pub mod csv_out;
pub mod dataset_file;
pub mod experiment;
pub mod plot;
pub mod runlog;
pub mod scenario_file;
