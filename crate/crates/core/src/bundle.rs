//! Model bundle directories shared by the trained pipelines.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::crf::CrfError;
use crate::linear::TrainError;
use crate::persist::PersistError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Classifier(#[from] TrainError),
    #[error(transparent)]
    Tagger(#[from] CrfError),
    #[error(transparent)]
    Persist(#[from] PersistError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("inconsistent model bundle: {0}")]
    Bundle(String),
    #[error("no training documents")]
    NoDocuments,
}

pub(crate) fn create_dir(path: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// File-name-safe rendering of a target key.
pub(crate) fn file_stem(index: usize, key: &str) -> String {
    let cleaned: String = key
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    format!("{index:02}_{}", cleaned.trim_end_matches('_'))
}
