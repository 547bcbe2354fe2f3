use std::path::PathBuf;

use crate::graph::Gender;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A row that does not parse. `line` is 1-based and counts the header.
    #[error("{path}:{line}: column `{column}`: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{path}:{line}: unknown node {id}")]
    UnknownNode { path: PathBuf, line: u64, id: String },

    #[error("{path}:{line}: unknown gender `{value}` (expected F or M)")]
    UnknownGender { path: PathBuf, line: u64, value: String },

    #[error("{path}:{line}: duplicate node {id}")]
    DuplicateNode { path: PathBuf, line: u64, id: String },

    #[error("node {0} is not in the graph")]
    NodeNotFound(String),

    #[error("score table does not cover node {0}")]
    MissingScore(String),

    #[error("score file is missing {count} node(s): {}", .ids.join(", "))]
    MissingScores { count: usize, ids: Vec<String> },

    #[error("{path}:{line}: score {value} outside [0, 1]")]
    ScoreOutOfRange { path: PathBuf, line: u64, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty sample: {0}")]
    EmptySample(&'static str),

    #[error("no {gender} nodes in the graph")]
    EmptyGenderGroup { gender: Gender },

    #[error("not enough {gender} nodes: need {needed}, have {available} (short by {})", .needed - .available)]
    InsufficientNodes {
        gender: Gender,
        needed: usize,
        available: usize,
    },

    #[error("exact enumeration supports at most {max} edges, graph has {edges}")]
    TooManyEdges { edges: usize, max: usize },

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
