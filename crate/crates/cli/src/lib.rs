//! Configuration, batch execution and report files for filterlab.
//!
//! A batch is the grid of (attack, response) or (scenario, mode) cells
//! crossed with the configured seeds. Each run writes its trace CSV; the
//! summary holds per-cell means in deterministic cell order.

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod batch;
pub mod config;

pub use batch::{
    emit_figure_data, emit_figures, prepare_cells, run_batch, run_single, BatchReport, CellRun,
    RunRecord, SummaryRow, Trace,
};
pub use config::{
    config_to_string, load_config, parse_config, write_config, Grid, ScenarioConfig, Simulator,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] filterlab_core::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("cell {cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: filterlab_core::Error,
    },
}

impl CliError {
    fn core(&self) -> Option<&filterlab_core::Error> {
        match self {
            Self::Core(e) | Self::Cell { source: e, .. } => Some(e),
            Self::Parse(_) => None,
        }
    }

    /// Process exit status: 2 validation, 3 infeasible synthesis, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        use filterlab_core::Error as E;
        match self.core() {
            None => 2,
            Some(E::Validation { .. } | E::UnknownNode(_) | E::GainsFormat(_)) => 2,
            Some(E::Infeasible(_)) => 3,
            Some(_) => 4,
        }
    }
}
