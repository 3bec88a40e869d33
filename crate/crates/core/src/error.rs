use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Stage of the registration pipeline that declared a degenerate configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenerateStage {
    Rotation,
    Translation,
}

impl std::fmt::Display for DegenerateStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DegenerateStage::Rotation => write!(f, "rotation"),
            DegenerateStage::Translation => write!(f, "translation"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is rank deficient: numerical rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("closest-point vector undefined for landmark {id}: it passes through the origin")]
    UndefinedCp { id: u64 },

    #[error("landmark {id} has no `{attribute}` attribute")]
    MissingAttribute { id: u64, attribute: &'static str },

    #[error("landmark set is empty")]
    EmptySet,

    #[error("selection is empty")]
    EmptySelection,

    #[error("instance too large for exhaustive search: m = {m} > {max}")]
    TooLarge { m: usize, max: usize },

    #[error("degenerate {stage} estimate (condition number {kappa:.3e})")]
    Degenerate { stage: DegenerateStage, kappa: f64 },

    #[error("scene generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("true matches of the generated pair are not well conditioned: {0}")]
    DegenerateTruthScene(String),

    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
