//! Scenario files, bundled scenarios and report export.

mod bundled;
mod document;
mod export;

pub use bundled::{bundled_names, bundled_text, load_bundled, load_scenario, SCENARIO_DIR_ENV};
pub use document::*;
pub use export::{export_plot_data, export_report, format_value, import_report_json, ReportFormat};

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceError {
    /// 1-based line of the first mention of the offending id, when found.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ReferenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },

    #[error("unsupported schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("unresolved references:\n{}", join_lines(.0))]
    References(Vec<ReferenceError>),

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn join_lines(errors: &[ReferenceError]) -> String {
    errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
}
