//! Binary PGM (P5, maxval 255) for masks and probability maps.
//!
//! Masks use 0 = background, 255 = foreground. Probability maps scale to
//! 0–255 on export; because that quantizes, [`write_prob`] also drops a
//! 32-bit float sidecar next to the PGM (extension `.f32`) and
//! [`read_prob`] prefers the sidecar when present.

use crate::error::CliError;
use polyfield_core::{BinaryMask, ProbGrid};
use std::path::{Path, PathBuf};

const SIDECAR_MAGIC: &[u8; 4] = b"PFG1";

fn sidecar_path(pgm: &Path) -> PathBuf {
    pgm.with_extension("f32")
}

fn write_pgm_bytes(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<(), CliError> {
    let mut bytes = format!("P5\n{width} {height}\n255\n").into_bytes();
    bytes.extend_from_slice(data);
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

struct PgmPayload {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

fn read_pgm_bytes(path: &Path) -> Result<PgmPayload, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let parse_err = |offset: usize, detail: &str| CliError::Parse {
        path: path.to_path_buf(),
        location: format!("byte {offset}"),
        detail: detail.to_string(),
    };
    // Header: magic, width, height, maxval as whitespace-separated tokens,
    // with '#' comments allowed, then exactly one whitespace byte.
    let mut pos = 0usize;
    let mut tokens: Vec<String> = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(parse_err(pos, "truncated header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).to_string());
    }
    pos += 1; // single whitespace after maxval
    if tokens[0] != "P5" {
        return Err(parse_err(0, "not a binary PGM (magic must be P5)"));
    }
    let width: usize = tokens[1]
        .parse()
        .map_err(|_| parse_err(3, "width is not an integer"))?;
    let height: usize = tokens[2]
        .parse()
        .map_err(|_| parse_err(3, "height is not an integer"))?;
    if tokens[3] != "255" {
        return Err(parse_err(3, "maxval must be 255"));
    }
    let expected = width * height;
    if bytes.len() < pos + expected {
        return Err(parse_err(
            bytes.len(),
            &format!("payload truncated: expected {expected} bytes"),
        ));
    }
    Ok(PgmPayload {
        width,
        height,
        data: bytes[pos..pos + expected].to_vec(),
    })
}

pub fn write_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<(), CliError> {
    let data: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_pgm_bytes(path.as_ref(), mask.width(), mask.height(), &data)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask, CliError> {
    let path = path.as_ref();
    let payload = read_pgm_bytes(path)?;
    BinaryMask::from_bits(
        payload.height,
        payload.width,
        payload.data.iter().map(|&v| v >= 128).collect(),
    )
    .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Write the quantized PGM plus the lossless float sidecar.
pub fn write_prob(path: impl AsRef<Path>, grid: &ProbGrid) -> Result<(), CliError> {
    let path = path.as_ref();
    let data: Vec<u8> = grid
        .values()
        .iter()
        .map(|&v| (v * 255.0).round() as u8)
        .collect();
    write_pgm_bytes(path, grid.width(), grid.height(), &data)?;
    let side = sidecar_path(path);
    let mut bytes = Vec::with_capacity(12 + grid.values().len() * 4);
    bytes.extend_from_slice(SIDECAR_MAGIC);
    bytes.extend_from_slice(&(grid.height() as u32).to_le_bytes());
    bytes.extend_from_slice(&(grid.width() as u32).to_le_bytes());
    for &v in grid.values() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::write(&side, bytes).map_err(|e| CliError::io(side, e))
}

/// Read a probability map, preferring the float sidecar when present.
pub fn read_prob(path: impl AsRef<Path>) -> Result<ProbGrid, CliError> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    if side.exists() {
        let bytes = std::fs::read(&side).map_err(|e| CliError::io(&side, e))?;
        let parse_err = |offset: usize, detail: String| CliError::Parse {
            path: side.clone(),
            location: format!("byte {offset}"),
            detail,
        };
        if bytes.len() < 12 || &bytes[..4] != SIDECAR_MAGIC {
            return Err(parse_err(0, "bad magic, expected PFG1".to_string()));
        }
        let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let expected = 12 + h * w * 4;
        if bytes.len() < expected {
            return Err(parse_err(
                bytes.len(),
                format!("truncated: expected {expected} bytes"),
            ));
        }
        let values: Vec<f64> = bytes[12..expected]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        return ProbGrid::from_values(h, w, values)
            .map_err(|e| CliError::Validation(format!("{}: {e}", side.display())));
    }
    let payload = read_pgm_bytes(path)?;
    ProbGrid::from_values(
        payload.height,
        payload.width,
        payload.data.iter().map(|&v| v as f64 / 255.0).collect(),
    )
    .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}
