use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    #[error("value out of range in {context}: {value}")]
    ValueOutOfRange { context: String, value: f64 },

    #[error("io failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no sequences found under {root}")]
    EmptyDataset { root: PathBuf },

    #[error("duplicate sequence entry {subject}/{condition}/{view}")]
    DuplicateEntry {
        subject: String,
        condition: String,
        view: String,
    },

    #[error("expected a binary grid in {context}")]
    NonBinaryInput { context: String },

    #[error("dimension mismatch in {context}: expected {expected_h}x{expected_w}, got {got_h}x{got_w}")]
    DimensionMismatch {
        context: String,
        expected_h: usize,
        expected_w: usize,
        got_h: usize,
        got_w: usize,
    },

    #[error("length mismatch in {context}: expected {expected}, got {got}")]
    LengthMismatch {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("edge and interior masks overlap at ({row}, {col})")]
    OverlappingMasks { row: usize, col: usize },

    #[error("non-finite input in {context}")]
    NonFiniteInput { context: String },

    #[error("mask has no foreground pixels")]
    EmptyMask,

    #[error("alignment box has zero area")]
    DegenerateBox,

    #[error("rendered body does not fit the frame with a 2 px margin (subject {subject})")]
    BodyOutOfFrame { subject: String },

    #[error("no valid gallery candidates for probe {subject}/{condition}/{view}")]
    NoValidCandidates {
        subject: String,
        condition: String,
        view: String,
    },

    #[error("evaluation protocol is empty: {what}")]
    EmptyProtocol { what: String },

    #[error("non-finite result in {context}")]
    NonFiniteResult { context: String },

    #[error("invalid parameter: {what}")]
    InvalidParameter { what: String },

    #[error("bad config: {reason}")]
    Config { reason: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
