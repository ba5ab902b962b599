//! On-disk formats (PFM images, RNAD training slices) and image metrics.

mod image;
mod pfm;
mod slice;

use std::io;

use thiserror::Error;

pub use image::{psnr, psnr_from_mse, HdrImage, MetricsError, PSNR_CAP};
pub use pfm::{decode_pfm, encode_pfm, encode_pfm_gray, read_pfm, write_pfm, write_pfm_gray};
pub use slice::{read_slice, slice_schema, write_slice, Plane, TrainingSlice, SLICE_MAGIC, SLICE_VERSION};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error("file truncated: {0}")]
    Truncated(String),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("slice schema error: {0}")]
    Schema(String),
    #[error("invalid data: {0}")]
    Invalid(String),
}

impl FormatError {
    pub(crate) fn io(path: &std::path::Path, source: io::Error) -> Self {
        FormatError::Io { path: path.display().to_string(), source }
    }
}
