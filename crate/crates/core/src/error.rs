use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Error classes surfaced by the library. Each maps onto one CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad caller input: empty lists, mismatched lengths, non-finite values.
    #[error("input error: {0}")]
    Input(String),

    /// A file or document violated its schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A bundled resource failed one of its invariants.
    #[error("integrity error in {dataset}: {invariant}")]
    Integrity { dataset: String, invariant: String },

    /// A channel file references a segment the segment table does not know.
    #[error("join error: unknown segment_id {0:?} in {1}")]
    Join(String, String),

    /// Annotation payload could not be interpreted.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("transport error: {0}")]
    Transport(String),

    /// The statistic is undefined for this input (constant series, n < 3).
    #[error("degenerate statistics: {0}")]
    Degenerate(String),

    #[error("filename parse error in {filename:?}: {field}: {reason}")]
    Filename {
        filename: String,
        field: &'static str,
        reason: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn schema(msg: impl Into<String>) -> Self {
        Error::Schema(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for this error class.
    ///
    /// 2 input/schema, 3 join, 4 transport, 5 degenerate statistics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_)
            | Error::Schema(_)
            | Error::Integrity { .. }
            | Error::Filename { .. }
            | Error::Io { .. } => 2,
            Error::Join(..) => 3,
            Error::Protocol(_) | Error::Transport(_) => 4,
            Error::Degenerate(_) => 5,
        }
    }
}

pub fn read_file(path: impl AsRef<std::path::Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_file(path: impl AsRef<std::path::Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
