use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("raster dimensions must be nonzero (got {width}x{height})")]
    EmptyRaster { width: u32, height: u32 },

    #[error("pixel buffer holds {actual} samples, expected {expected}")]
    PixelCount { expected: usize, actual: usize },

    #[error("anchor ({x}, {y}) lies outside a {width}x{height} sprite")]
    AnchorOutOfBounds { x: u32, y: u32, width: u32, height: u32 },

    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed PNG: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("PNG encoding failed: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("invalid JSON in {what}: {source}")]
    Json {
        what: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("palette has no block entries")]
    EmptyPalette,

    #[error("palette has no positive {0} weight")]
    ZeroWeights(&'static str),

    #[error("invalid palette: {0}")]
    InvalidPalette(String),

    #[error("map must have at least one row and one column (got {rows}x{cols})")]
    EmptyMap { rows: usize, cols: usize },

    #[error("unknown sprite id `{0}`")]
    UnknownSprite(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("viewport {vw}x{vh} with margin {margin} exceeds light texture {tw}x{th}")]
    ViewportExceedsTexture { vw: u32, vh: u32, margin: u32, tw: u32, th: u32 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
