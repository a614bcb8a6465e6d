use thiserror::Error;

use crate::image::BoundingBox;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions must be positive")]
    EmptyImage,
    #[error("pixel buffer holds {actual} values, expected {expected}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("box ({bbox}) does not fit a {width}x{height} image")]
    OutOfBounds {
        bbox: BoundingBox,
        width: usize,
        height: usize,
    },
    #[error("netpbm parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
}

#[derive(Debug, Error)]
pub enum LocateError {
    #[error("image is {width}x{height}; the Sobel kernel needs at least 3x3")]
    TooSmall { width: usize, height: usize },
    #[error("edge map has no set bits")]
    NoEdges,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("plate has no edge bands")]
    EmptyPlate,
    #[error("glyph has zero width or height")]
    EmptyGlyph,
    #[error(transparent)]
    Locate(#[from] LocateError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set needs at least two classes, found {0}")]
    SingleClass(usize),
    #[error("training sample {0} has no label")]
    Unlabeled(usize),
    #[error("k = {k} is invalid for {samples} training samples")]
    InvalidK { k: usize, samples: usize },
    #[error("features per split must be in 1..=400, got {0}")]
    InvalidFeatureCount(usize),
    #[error("tree count must be positive")]
    NoTrees,
}

#[derive(Debug, Error)]
pub enum ModelFormatError {
    #[error("unsupported model header `{0}`")]
    Version(String),
    #[error("tree {tree}: checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { tree: usize, stored: u32, computed: u32 },
    #[error("model file ends early: {0}")]
    Truncated(String),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown atlas symbol `{0}`")]
    UnknownSymbol(String),
    #[error("text needs {needed} px but the plate leaves {available} px")]
    Layout { needed: usize, available: usize },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("validation set contains no special glyphs")]
    NoSpecials,
    #[error("validation set contains no real glyphs")]
    NoRealGlyphs,
    #[error("malformed truth file {path}: {reason}")]
    Truth { path: String, reason: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Failure of the end-to-end recognizer.
#[derive(Debug, Error)]
pub enum PipelineError {
    /// The frame holds no usable plate (no edges, or no edge bands on the crop).
    #[error("no plate found: {0}")]
    NoPlate(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
}
