use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A depth sample that must be finite and positive was not.
    #[error("invalid depth {value} at pixel ({u}, {v})")]
    InvalidDepth { u: usize, v: usize, value: f64 },

    /// A pixel lies outside the grid it indexes.
    #[error("pixel ({u}, {v}) is outside the {width}x{height} grid")]
    OutOfBounds {
        u: i64,
        v: i64,
        width: usize,
        height: usize,
    },

    /// Two inputs that must share a shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Nothing valid to work on.
    #[error("empty input: {0}")]
    Empty(&'static str),

    /// Input is geometrically or numerically degenerate.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An argument is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A derivative was requested exactly on a surface discontinuity.
    #[error("derivative undefined at pixel ({u}, {v}): on a discontinuity")]
    UndefinedDerivative { u: usize, v: usize },

    /// Malformed PFM stream.
    #[error("PFM parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// Image container with an unsupported layout.
    #[error("unsupported format: {0}")]
    Format(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    /// Failure inside a labelled pipeline stage.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
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
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
