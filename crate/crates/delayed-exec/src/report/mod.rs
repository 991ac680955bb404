//! Figure tables and parameter sweeps: each produces a [`SweepResult`] that
//! is written as CSV with a JSON manifest of the inputs.

mod figures;
mod overrides;
mod sweep;
mod table;

pub use figures::{
    figure_table, FairnessGrid, FigureId, FigureParams, HcaCompareParams, HonestGrid, QueueHistParams, ZetaGrid,
};
pub use overrides::{apply_override, parse_override};
pub use sweep::{metric_value, run_sweep, SweepSpec, METRIC_NAMES};
pub use table::{mean_ci, write_atomic, write_table, SweepResult, SweepRow};

use thiserror::Error;

use crate::analytic::AnalyticError;
use crate::markov::MarkovError;
use crate::sim::SimError;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown figure {0:?}; expected one of fig2, fig9, fig11, fig13, queue_hist, hca_compare")]
    UnknownFigure(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
