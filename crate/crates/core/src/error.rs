use thiserror::Error;

/// A configuration problem tied to a specific key path, e.g. `system.ports`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("index {index} out of range for {op} (bound {bound})")]
    Index {
        op: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerical failure at iteration {iteration}: {detail}")]
    Numerical { iteration: usize, detail: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("invalid configuration: {}", format_fields(.0))]
    Validation(Vec<FieldError>),

    #[error("malformed observation file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_fields(fields: &[FieldError]) -> String {
    fields
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation(vec![FieldError {
            path: path.into(),
            message: message.into(),
        }])
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
