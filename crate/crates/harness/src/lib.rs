//! Batch experiment runner for the coverage/capacity trainer: sweep plans,
//! resumable cells, CSV tables, SVG charts and a self-verification suite.

pub mod chart;
pub mod plan;
pub mod run;
pub mod table;
pub mod verify;

pub use plan::{Axis, Budget, Cell, ExperimentPlan, StrategySpec};
pub use run::{run_plan, RunOptions};
pub use table::{ResultRow, ResultTable};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("plan error: {0}")]
    Plan(String),
    #[error(transparent)]
    Core(#[from] cco_core::CcoError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{0}")]
    Format(String),
}

impl HarnessError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.display().to_string(), source }
    }

    pub fn csv(path: &std::path::Path, source: csv::Error) -> Self {
        HarnessError::Csv { path: path.display().to_string(), source }
    }
}
