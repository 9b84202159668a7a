//! Persistence: Matrix Market import/export, CSV tables and the artifact
//! directory (basis, projected components, residual factor blocks, manifest).

mod artifacts;
mod csv;
mod matrix_market;

pub use artifacts::{
    load_artifacts, load_family, save_artifacts, save_family, ArtifactManifest,
    CalibrationConstants, LoadedArtifacts, ARTIFACT_FORMAT_VERSION,
};
pub use csv::{
    fmt_f64, read_dense_csv, read_parameters, write_dense_csv, write_parameters, write_table,
    MACRO_PARAM_HEADER, RAW_PARAM_HEADER,
};
pub use matrix_market::{
    read_dense, read_sparse, read_stacked_blocks, write_dense, write_sparse, write_stacked_blocks,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
    #[error("artifact format version mismatch: found {found}, expected {expected}")]
    ArtifactVersionMismatch { found: u32, expected: u32 },
}
