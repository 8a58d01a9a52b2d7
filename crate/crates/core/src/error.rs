use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular system: zero pivot at position {pivot}")]
    SingularSystem { pivot: usize },

    #[error("covered weight of the partial sum ({partial}) exceeds the total ({total})")]
    NegativeWeight { partial: f64, total: f64 },

    #[error("division by zero: label {label} has zero Hessian and the L2 weight is 0")]
    DivisionByZero { label: usize },

    #[error("missing value for attribute {attribute}")]
    MissingValue { attribute: usize },

    #[error("no candidate condition can be formed from the available attributes")]
    DegenerateData,

    #[error("shape mismatch: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    ShapeMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing values in {} cell(s): {}", cells.len(), format_cells(cells))]
    MissingValues { cells: Vec<MissingCell> },

    #[error("invalid fold count {k} for {examples} examples")]
    InvalidFoldCount { k: usize, examples: usize },

    #[error("incompatible reports: {0}")]
    IncompatibleReports(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A cell that held a missing value (`?` or an empty field) in an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MissingCell {
    /// 1-based line number in the source file.
    pub line: usize,
    /// 0-based column index in the source row.
    pub column: usize,
}

fn format_cells(cells: &[MissingCell]) -> String {
    const SHOWN: usize = 10;
    let mut out = cells
        .iter()
        .take(SHOWN)
        .map(|c| format!("line {} column {}", c.line, c.column))
        .collect::<Vec<_>>()
        .join(", ");
    if cells.len() > SHOWN {
        out.push_str(&format!(", ... ({} more)", cells.len() - SHOWN));
    }
    out
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
