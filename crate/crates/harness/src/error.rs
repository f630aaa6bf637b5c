use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// Schema violation; `field` is the JSON path of the offending value.
    #[error("{file}: invalid scenario at `{field}`: {message}")]
    Schema {
        file: String,
        field: String,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] fliqc_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// True for problems with the input documents rather than with planning.
    pub fn is_validation(&self) -> bool {
        matches!(self, Self::Schema { .. } | Self::Invalid(_) | Self::Core(_) | Self::Json(_) | Self::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
