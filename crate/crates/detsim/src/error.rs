use delayed_exec::analytic::AnalyticError;
use delayed_exec::report::ReportError;
use delayed_exec::sim::SimError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Analytic(#[from] AnalyticError),
    #[error("{0}")]
    Report(String),
    #[error("{0}")]
    UnknownFigure(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Analytic(AnalyticError::Saturation { .. }) => "saturation",
            CliError::Analytic(AnalyticError::Utilization { .. }) => "utilization",
            CliError::Analytic(_) => "analytic",
            CliError::Report(_) => "report",
            CliError::UnknownFigure(_) => "unknown_figure",
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        json!({"error": {"kind": self.kind(), "message": self.to_string()}}).to_string()
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Config(m) => CliError::Config(m),
            ReportError::Sim(SimError::Config(m)) => CliError::Config(m),
            ReportError::Analytic(a) => CliError::Analytic(a),
            ReportError::Io(io) => CliError::Io(io.to_string()),
            e @ ReportError::UnknownFigure(_) => CliError::UnknownFigure(e.to_string()),
            other => CliError::Report(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(m) => CliError::Config(m),
        }
    }
}
