//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("frame {index}: {source}")]
    AtFrame {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no frame files matching `{pattern}` in {dir}")]
    EmptySequence { dir: PathBuf, pattern: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("sequence has no points")]
    NoPoints,

    #[error("degenerate sequence: {0}")]
    Degenerate(String),

    #[error("point direction undefined at the origin")]
    UndefinedDirection,

    #[error("|y| = {y_abs} exceeds sphere radius {radius}")]
    OutOfSphereDomain { y_abs: f64, radius: f64 },

    #[error("cannot rasterize an empty frame")]
    EmptyFrame,

    #[error("all {dropped} points fell outside the image or sphere domain")]
    AllPointsDropped { dropped: usize },

    #[error("no valid pixels in normalization scope")]
    NoValidPixels,

    #[error("labeled depth images required: {0}")]
    UnlabeledInput(String),

    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },

    #[error("image geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("shape error in {path}: {msg}")]
    Shape { path: String, msg: String },

    #[error("no valid (anchor, positive, negative) triplet in batch")]
    NoValidTriplet,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("weight file: {msg} (at byte offset {offset})")]
    WeightFormat { offset: u64, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub fn at_frame(self, index: usize) -> Self {
        Error::AtFrame {
            index,
            source: Box::new(self),
        }
    }

    pub fn shape(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Shape {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
