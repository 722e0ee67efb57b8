//! Versioned JSON persistence shared by the trained models.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("expected a {expected} file, found {found:?}")]
    WrongFormat { expected: String, found: Option<String> },
    #[error("{format} format version {found:?} is not supported (expected {expected})")]
    WrongVersion {
        format: String,
        expected: u64,
        found: Option<u64>,
    },
}

/// A serializable artifact carrying a format tag and version.
pub trait Versioned: Serialize + DeserializeOwned {
    const FORMAT: &'static str;
    const VERSION: u64;

    fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    /// Parses JSON, refusing files of another format or version before decoding the body.
    fn from_json(json: &str) -> Result<Self, PersistError> {
        let value: serde_json::Value = serde_json::from_str(json)?;
        let format = value.get("format").and_then(|v| v.as_str());
        if format != Some(Self::FORMAT) {
            return Err(PersistError::WrongFormat {
                expected: Self::FORMAT.to_string(),
                found: format.map(str::to_string),
            });
        }
        let version = value.get("format_version").and_then(|v| v.as_u64());
        if version != Some(Self::VERSION) {
            return Err(PersistError::WrongVersion {
                format: Self::FORMAT.to_string(),
                expected: Self::VERSION,
                found: version,
            });
        }
        Ok(serde_json::from_value(value)?)
    }

    fn save(&self, path: &Path) -> Result<(), PersistError> {
        fs::write(path, self.to_json()).map_err(|source| PersistError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    fn load(path: &Path) -> Result<Self, PersistError> {
        let json = fs::read_to_string(path).map_err(|source| PersistError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&json)
    }
}

pub(crate) fn format_tag<T: Versioned>() -> String {
    T::FORMAT.to_string()
}
