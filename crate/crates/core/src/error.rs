use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("degenerate vector: operation requires at least one entry")]
    EmptyVector,

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { expected: u32, found: u32 },

    #[error("unexpected end of data while reading {context}")]
    Truncated { context: &'static str },

    #[error("{extra} unexpected trailing bytes after {context}")]
    TrailingData { context: &'static str, extra: usize },

    #[error("vector {vector}: coordinates not strictly increasing at position {position}")]
    UnsortedCoordinates { vector: usize, position: usize },

    #[error("vector {vector}: coordinate {coordinate} out of range for dimensionality {dim}")]
    CoordinateOutOfRange {
        vector: usize,
        coordinate: u32,
        dim: u32,
    },

    #[error("vector {vector}: zero value stored at coordinate {coordinate}")]
    ZeroValue { vector: usize, coordinate: u32 },

    #[error("vector {vector}: non-finite value {value} at coordinate {coordinate}")]
    NonFiniteValue {
        vector: usize,
        coordinate: u32,
        value: f32,
    },

    #[error("vector {vector}: negative value {value} at coordinate {coordinate}")]
    NegativeValue {
        vector: usize,
        coordinate: u32,
        value: f32,
    },

    #[error("coordinate and value arrays differ in length ({coordinates} vs {values})")]
    LengthMismatch { coordinates: usize, values: usize },

    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error("query coordinate {coordinate} out of range for index dimensionality {dim}")]
    DimensionMismatch { coordinate: u32, dim: u32 },

    #[error("document id {doc} out of range (collection holds {len} documents)")]
    DocumentOutOfRange { doc: u32, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("query {query} missing from {side}")]
    MissingQuery { query: u32, side: &'static str },
}

impl Error {
    /// True for failures of the underlying reader or writer, as opposed to
    /// rejected content or arguments.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}
