use std::path::PathBuf;

use crate::dataset::IngestSummary;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong inside the segmentation engine.
///
/// Variants fall into two families that the CLI maps onto distinct exit
/// codes: data errors (bad files, invalid inputs, contract violations) and
/// numerical errors (degenerate inputs on which a formula is undefined).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("line {line}: cannot parse timestamp {value:?}")]
    Timestamp { line: u64, value: String },

    #[error("line {line}: timestamp {value:?} is not aligned to a {resolution_minutes}-minute grid")]
    InconsistentResolution {
        line: u64,
        value: String,
        resolution_minutes: u32,
    },

    #[error("no valid profiles after filtering ({} days dropped)", summary.days_dropped)]
    NoValidProfiles { summary: IngestSummary },

    #[error("invalid profile set: {0}")]
    InvalidProfileSet(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("series must contain at least {required} samples, got {actual}")]
    SeriesTooShort { required: usize, actual: usize },

    #[error("band half-width {band} cannot connect series of lengths {left} and {right}")]
    InfeasibleBand {
        band: usize,
        left: usize,
        right: usize,
    },

    #[error("invalid cluster count k={k} for {n} profiles")]
    InvalidK { k: usize, n: usize },

    #[error("cluster library does not cover the profile set: {0}")]
    Coverage(String),

    #[error("{0} requires at least {1} clusters")]
    TooFewClusters(&'static str, usize),

    #[error("clusters {0} and {1} have coincident centroids")]
    CoincidentCentroids(usize, usize),

    #[error("degenerate curve: {0}")]
    DegenerateCurve(String),

    #[error("merge exhausted at K={reached}: no pair satisfies the density cap")]
    MergeExhausted { reached: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for configuration mistakes the caller can fix by changing parameters.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Stage { source, .. } => source.is_usage(),
            _ => false,
        }
    }

    /// True for failures caused by degenerate numerical input rather than bad data.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::CoincidentCentroids(..)
            | Error::DegenerateCurve(_)
            | Error::MergeExhausted { .. }
            | Error::TooFewClusters(..) => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
