use thiserror::Error;

/// Invariant violations raised when constructing the shared domain types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("grid needs at least 3 nodes per axis, got {nx}x{ny}")]
    GridTooSmall { nx: usize, ny: usize },

    #[error("grid extents must be increasing: x [{x0}, {x1}], y [{y0}, {y1}]")]
    InvertedExtents { x0: f64, x1: f64, y0: f64, y1: f64 },

    #[error("grid spacing differs between axes: hx = {hx}, hy = {hy}")]
    NonSquareCells { hx: f64, hy: f64 },

    #[error("field has {actual} values but grid has {expected} nodes")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("field contains a non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("mask entry at node {index} is {value}, expected 0 or 1")]
    NonBinaryMask { index: usize, value: u8 },

    #[error("|sdf| = {value} at node {index} exceeds the domain diagonal {diagonal}")]
    DistanceOutOfRange { index: usize, value: f64, diagonal: f64 },

    #[error("fields are defined on different grids")]
    GridMismatch,

    #[error("Reynolds number must be positive and finite, got {0}")]
    InvalidReynolds(f64),

    #[error("sample `{0}` has neither a mask nor a signed distance field")]
    MissingGeometry(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
