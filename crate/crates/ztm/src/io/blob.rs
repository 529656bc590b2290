//! Raw little-endian `f32` arrays.

use std::path::Path;

use crate::error::{Error, Result};

pub fn encode(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Decodes `bytes`, rejecting a partial trailing value and non-finite data.
/// `path` is only used for error context.
pub fn decode(bytes: &[u8], path: &Path, blob: &str, expected_len: Option<usize>) -> Result<Vec<f32>> {
    if !bytes.len().is_multiple_of(4) || expected_len.is_some_and(|n| n * 4 != bytes.len()) {
        return Err(Error::LengthMismatch {
            path: path.to_path_buf(),
            blob: blob.to_string(),
            expected: expected_len.map_or(bytes.len() / 4 * 4, |n| n * 4),
            found: bytes.len(),
        });
    }
    let values: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { path: path.to_path_buf(), line: None, index });
    }
    Ok(values)
}

pub fn read(path: &Path, blob: &str, expected_len: usize) -> Result<Vec<f32>> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingBlob { path: path.to_path_buf(), blob: blob.to_string() },
        _ => Error::io(path, e),
    })?;
    decode(&bytes, path, blob, Some(expected_len))
}

pub fn write(path: &Path, values: &[f32]) -> Result<()> {
    std::fs::write(path, encode(values)).map_err(|e| Error::io(path, e))
}
