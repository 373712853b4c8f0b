//! Consortium configs, end-to-end scenarios, the DP sweep, benchmarks and
//! reports.

pub mod bench;
pub mod config;
pub mod report;
pub mod scenario;
pub mod sweep;

use thiserror::Error;

pub use bench::{run_bench, Axis, BenchBase, BenchPoint};
pub use config::{load_config, ConsortiumConfig, MemberConfig, CONFIG_VERSION};
pub use report::{ScenarioReport, REPORT_VERSION};
pub use scenario::{run_dp_only, run_scenario, run_session, Consortium, Mode, SessionRun, RIDGE};
pub use sweep::{bootstrap_ci, dp_sweep, non_increasing_within_ci, DpTable, Summary, SweepRow};

/// Environment variable that overrides the configured master seed.
pub const SEED_ENV: &str = "CURIE_SEED";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("policy of {member} ({path}): {message}")]
    Policy {
        member: String,
        path: String,
        message: String,
    },
    #[error("{phase}: {message}")]
    Phase {
        phase: &'static str,
        message: String,
    },
}

pub(crate) fn phase<E: std::fmt::Display>(phase: &'static str) -> impl Fn(E) -> HarnessError {
    move |e| HarnessError::Phase {
        phase,
        message: e.to_string(),
    }
}
