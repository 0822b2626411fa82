use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelIoError;
use crate::lincontrol::MaskMode;
use crate::lossmap::LossTable;

pub const CACHE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CacheFile {
    version: u32,
    model_hash: String,
    mode: MaskMode,
    n: usize,
    #[serde(rename = "J_opt")]
    j_opt: f64,
    entries: Vec<CacheEntry>,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    index: usize,
    #[serde(rename = "J")]
    j: f64,
    delta: f64,
    converged: bool,
}

/// Write-to-temp-then-rename in the destination directory.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ModelIoError> {
    let io_err = |e| ModelIoError::Io { path: path.display().to_string(), source: e };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = std::fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(io_err)?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(io_err)
}

pub fn save_loss_table(table: &LossTable, path: &Path) -> Result<(), ModelIoError> {
    let file = CacheFile {
        version: CACHE_VERSION,
        model_hash: table.model_id.clone(),
        mode: table.mode,
        n: table.n,
        j_opt: table.j_opt,
        entries: (0..table.len())
            .map(|i| CacheEntry {
                index: i,
                j: table.j_by_pattern[i],
                delta: table.delta_by_pattern[i],
                converged: table.convergence_flags[i],
            })
            .collect(),
    };
    let text = serde_json::to_vec(&file).map_err(|e| ModelIoError::parse(path, e))?;
    write_atomic(path, &text)
}

/// Loads a cached table; with `expected_hash`, rejects tables built for a different model.
pub fn load_loss_table(path: &Path, expected_hash: Option<&str>) -> Result<LossTable, ModelIoError> {
    let text = std::fs::read(path).map_err(|e| ModelIoError::parse(path, e))?;
    let file: CacheFile = serde_json::from_slice(&text).map_err(|e| ModelIoError::parse(path, e))?;
    if file.version != CACHE_VERSION {
        return Err(ModelIoError::parse(path, format!("unsupported cache version {}", file.version)));
    }
    if let Some(expected) = expected_hash {
        if expected != file.model_hash {
            return Err(ModelIoError::HashMismatch { expected: expected.into(), found: file.model_hash });
        }
    }
    let len = 1usize.checked_shl(file.n as u32).unwrap_or(0);
    if file.entries.len() != len || file.entries.iter().enumerate().any(|(i, e)| e.index != i) {
        return Err(ModelIoError::parse(path, format!("expected entries 0..{len} in order")));
    }
    Ok(LossTable {
        model_id: file.model_hash,
        mode: file.mode,
        n: file.n,
        j_opt: file.j_opt,
        j_by_pattern: file.entries.iter().map(|e| e.j).collect(),
        delta_by_pattern: file.entries.iter().map(|e| e.delta).collect(),
        convergence_flags: file.entries.iter().map(|e| e.converged).collect(),
    })
}
