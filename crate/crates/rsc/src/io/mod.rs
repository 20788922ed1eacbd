//! File formats: PFM (authoritative floats), Middlebury `.flo` and 8-bit PNG
//! previews.

pub mod flo;
pub mod pfm;
pub mod png;

use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{format}: {message} at byte {offset}")]
    Malformed {
        format: &'static str,
        offset: usize,
        message: String,
    },
    #[error("{format}: {message}")]
    Unsupported {
        format: &'static str,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl FormatError {
    pub(crate) fn malformed(
        format: &'static str,
        offset: usize,
        message: impl Into<String>,
    ) -> Self {
        Self::Malformed {
            format,
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>, FormatError> {
    std::fs::read(path).map_err(|e| FormatError::io(path, e))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

/// Reads four little-endian bytes at `offset`.
pub(crate) fn le4(
    bytes: &[u8],
    offset: usize,
    format: &'static str,
    what: &str,
) -> Result<[u8; 4], FormatError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| [b[0], b[1], b[2], b[3]])
        .ok_or_else(|| {
            FormatError::malformed(
                format,
                bytes.len(),
                format!("truncated {what}, expected 4 bytes from byte {offset}"),
            )
        })
}
