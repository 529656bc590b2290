use std::path::{Path, PathBuf};

/// Errors of the file formats and the command line.
///
/// Every variant has a stable short code (printed with the message) and
/// belongs to one exit-code class: validation, I/O or internal.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: blob `{blob}` does not exist", path.display())]
    MissingBlob { path: PathBuf, blob: String },

    #[error("{}: blob `{blob}` has {found} bytes, expected {expected}", path.display())]
    LengthMismatch { path: PathBuf, blob: String, expected: usize, found: usize },

    #[error("{}{}: non-finite value at element {index}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    NonFinite { path: PathBuf, line: Option<usize>, index: usize },

    #[error("{}: unsupported format_version {found}", path.display())]
    UnknownVersion { path: PathBuf, found: u64 },

    #[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
    Parse { path: PathBuf, line: Option<usize>, message: String },

    #[error("bank is already pooled (GeM e = {0})")]
    AlreadyPooled(f64),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] ztm_core::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::MissingBlob { .. } => "missing-blob",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::NonFinite { .. } => "non-finite",
            Error::UnknownVersion { .. } => "unknown-version",
            Error::Parse { .. } => "parse",
            Error::AlreadyPooled(_) => "already-pooled",
            Error::Usage(_) => "usage",
            Error::Core(_) => "invalid-input",
            Error::Internal(_) => "internal",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io { .. } | Error::MissingBlob { .. } => EXIT_IO,
            Error::Internal(_) => EXIT_INTERNAL,
            _ => EXIT_VALIDATION,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn parse(path: &Path, line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Parse { path: path.to_path_buf(), line, message: message.into() }
    }
}
