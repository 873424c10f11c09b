use std::path::Path;

/// Errors of the command-line layer.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] growthlab_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}, column {col}: {message}")]
    Parse { row: usize, col: usize, message: String },
    #[error("row {row}, column {col}: price {value} is not strictly positive")]
    NonPositivePrice { row: usize, col: usize, value: f64 },
    #[error("need at least 2 assets, found {0}")]
    TooFewAssets(usize),
    #[error("need at least 2 price rows, found {0}")]
    TooFewRows(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn parse(row: usize, col: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            row,
            col,
            message: message.into(),
        }
    }

    /// Stable machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Core(growthlab_core::Error::InvalidArgument(_)) => "invalid_argument",
            Self::Core(_) => "computation",
            Self::Io { .. } => "io",
            Self::Parse { .. } => "parse_error",
            Self::NonPositivePrice { .. } => "non_positive_price",
            Self::TooFewAssets(_) => "too_few_assets",
            Self::TooFewRows(_) => "too_few_rows",
            Self::Config(_) => "config",
            Self::Usage(_) => "usage",
        }
    }

    /// `{"error": {"kind": …, "message": …, …}}`, with the position of
    /// parse errors when known.
    pub fn to_json(&self) -> serde_json::Value {
        let mut body = serde_json::json!({ "kind": self.kind(), "message": self.to_string() });
        match self {
            Self::Parse { row, col, .. } | Self::NonPositivePrice { row, col, .. } => {
                body["row"] = (*row).into();
                body["col"] = (*col).into();
            }
            _ => {}
        }
        serde_json::json!({ "error": body })
    }
}
