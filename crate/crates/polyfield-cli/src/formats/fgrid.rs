//! Feature-grid binary format for the GCN refinement path: magic `FGR1`,
//! u32 LE height, width, channels, then H·W·C f32 LE values row-major
//! with channels innermost.

use crate::error::CliError;
use polyfield_core::FeatureGrid;
use std::path::Path;

const MAGIC: &[u8; 4] = b"FGR1";

pub fn write_fgrid(path: impl AsRef<Path>, grid: &FeatureGrid) -> Result<(), CliError> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(16 + grid.values().len() * 4);
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&(grid.height() as u32).to_le_bytes());
    bytes.extend_from_slice(&(grid.width() as u32).to_le_bytes());
    bytes.extend_from_slice(&(grid.channels() as u32).to_le_bytes());
    for &v in grid.values() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_fgrid(path: impl AsRef<Path>) -> Result<FeatureGrid, CliError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let parse_err = |offset: usize, detail: String| CliError::Parse {
        path: path.to_path_buf(),
        location: format!("byte {offset}"),
        detail,
    };
    if bytes.len() < 16 {
        return Err(parse_err(bytes.len(), "file shorter than header".to_string()));
    }
    if &bytes[..4] != MAGIC {
        return Err(parse_err(0, "bad magic, expected FGR1".to_string()));
    }
    let h = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let c = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expected = 16 + h * w * c * 4;
    if bytes.len() < expected {
        return Err(parse_err(
            bytes.len(),
            format!("truncated: {h}x{w}x{c} grid needs {expected} bytes"),
        ));
    }
    let values: Vec<f64> = bytes[16..expected]
        .chunks_exact(4)
        .map(|chunk| f32::from_le_bytes(chunk.try_into().unwrap()) as f64)
        .collect();
    FeatureGrid::from_values(h, w, c, values)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}
