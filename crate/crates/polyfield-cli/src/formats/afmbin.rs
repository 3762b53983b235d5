//! Attraction-field binary format: magic `AFM1`, then height and width as
//! 32-bit little-endian unsigned integers, then H·W (dx, dy) pairs as
//! 32-bit IEEE-754 little-endian floats, row-major.

use crate::error::CliError;
use polyfield_core::AttractionField;
use std::path::Path;

const MAGIC: &[u8; 4] = b"AFM1";

pub fn write_afm(path: impl AsRef<Path>, field: &AttractionField) -> Result<(), CliError> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(12 + field.vectors().len() * 8);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(field.height() as u32).to_le_bytes());
    bytes.extend_from_slice(&(field.width() as u32).to_le_bytes());
    for v in field.vectors() {
        bytes.extend_from_slice(&(v[0] as f32).to_le_bytes());
        bytes.extend_from_slice(&(v[1] as f32).to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_afm(path: impl AsRef<Path>) -> Result<AttractionField, CliError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let parse_err = |offset: usize, detail: String| CliError::Parse {
        path: path.to_path_buf(),
        location: format!("byte {offset}"),
        detail,
    };
    if bytes.len() < 12 {
        return Err(parse_err(bytes.len(), "file shorter than header".to_string()));
    }
    if &bytes[..4] != MAGIC {
        return Err(parse_err(0, "bad magic, expected AFM1".to_string()));
    }
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + h * w * 8;
    if bytes.len() < expected {
        return Err(parse_err(
            bytes.len(),
            format!("truncated: {h}x{w} field needs {expected} bytes"),
        ));
    }
    let vectors: Vec<[f64; 2]> = bytes[12..expected]
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes(c[..4].try_into().unwrap()) as f64,
                f32::from_le_bytes(c[4..].try_into().unwrap()) as f64,
            ]
        })
        .collect();
    AttractionField::from_vectors(h, w, vectors)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}
