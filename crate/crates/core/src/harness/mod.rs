//! Scenario files, the command-line runner, CSV/JSON emission and the
//! verification suite.

use std::path::PathBuf;

mod cli;
mod config;
mod output;
mod report;
mod run;
mod verify;

pub use cli::{main_with_args, Cli};
pub use config::{
    load_config, AgeConfig, Format, GridConfig, Mode, NegativeControl, OutputConfig, ProfileSpec, ProfilesConfig,
    RunConfig, ScenarioConfig, Tolerances, VerifyConfig, MISNORMALIZATION,
};
pub use output::{branch_csv, fmt_num, Num, BRANCH_HEADER, SEMITRIVIAL_HEADER};
pub use report::{CheckRecord, RunReport};
pub use run::{
    run_bifpoints, run_continue, run_diagram, run_eigen, run_mode, run_semitrivial, BifPointsSummary, PointEntry,
    RunOptions, RunOutcome,
};
pub use verify::{
    b3_settings, discretization_slack, intensity_cap, s3_settings, verify_suite, B3_ETA, DERIVATIVE_AT, KERNEL_ETAS,
    KERNEL_XI, POINT_SWEEP, RESOLUTION_FRACTION, S3_LIMIT, S3_XI, SUBCRITICAL, SUPERCRITICAL,
};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("cannot read config {}: {source}", path.display())]
    ReadConfig {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(#[from] crate::error::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("output error: {0}")]
    Output(String),
}

impl HarnessError {
    /// 1 for bad input, 2 for solver or output failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::ReadConfig { .. } | HarnessError::Parse(_) | HarnessError::Validation(_) => 1,
            HarnessError::Solver(_) | HarnessError::Io { .. } | HarnessError::Output(_) => 2,
        }
    }
}
