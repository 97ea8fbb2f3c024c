use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("node index {index} out of range for n={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("degenerate placement: cell {cell} at level {level} is empty")]
    DegeneratePlacement { level: usize, cell: usize },

    #[error("cooperation invariance violated at {node}: {detail}")]
    Invariance { node: String, detail: String },

    #[error("no dense squarelet available at recursion level {level} (histogram: {histogram:?})")]
    RelayFailure { level: usize, histogram: Vec<usize> },

    #[error("{0}")]
    Domain(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;
