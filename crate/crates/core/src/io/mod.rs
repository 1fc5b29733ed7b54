//! Job files, reports, mesh export and loop files.

pub mod config;
pub mod job;
pub mod loopfile;
pub mod mesh;
pub mod report;

pub use config::{load_config, parse_config, ConfigError, JobSpec};
pub use job::{run_job, JobError, JobOutput, Verb};
