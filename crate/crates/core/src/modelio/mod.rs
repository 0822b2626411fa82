//! Reading and writing models, model sets and cached loss tables.

mod cache;
mod consensus;
pub mod fixtures;
mod manifest;

use thiserror::Error;

pub use cache::{load_loss_table, save_loss_table, CACHE_VERSION};
pub use consensus::{build_consensus_q, grouped_from_reordered, permute_symmetric};
pub use manifest::{
    load_model, load_model_set, save_manifest, Dims, MatrixSpec, ModelManifest, ModelSetManifest, Num, Ordering,
    PhiSpec,
};

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("{path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("validation failed: {detail}")]
    Validation { detail: String },
    #[error("cached table was built for model {found}, expected {expected}")]
    HashMismatch { expected: String, found: String },
    #[error("node {node} has {states} states; the consensus weight needs at least 2 per node")]
    PartitionTooSmall { node: usize, states: usize },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Hex SHA-256 of a file's bytes, for provenance records.
pub fn file_sha256(path: &std::path::Path) -> Result<String, ModelIoError> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).map_err(|e| ModelIoError::parse(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl ModelIoError {
    pub(crate) fn parse(path: &std::path::Path, detail: impl ToString) -> Self {
        Self::Parse { path: path.display().to_string(), detail: detail.to_string() }
    }

    pub(crate) fn validation(detail: impl ToString) -> Self {
        Self::Validation { detail: detail.to_string() }
    }
}
