//! Little-endian float32 raw data paired with a JSON sidecar.
//!
//! A volume named `case` is stored as `case.raw` and `case.json`, where the
//! sidecar holds `{"dims":[nx,ny,nz],"spacing":[sx,sy,sz],"kind":"SUV"}`.
//! Either file path may be given when loading.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Dims, VolumeKind, VoxelSpacing};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct Sidecar {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub kind: VolumeKind,
}

/// Resolves `(raw, sidecar)` paths from either member of the pair.
pub fn paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("raw"), path.with_extension("json"))
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        format: "RAWJSON",
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub(crate) fn read(path: &Path) -> Result<(Sidecar, Dims, VoxelSpacing, Vec<f64>)> {
    let (raw_path, json_path) = paths(path);
    let text = std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let sidecar: Sidecar =
        serde_json::from_str(&text).map_err(|e| format_err(&json_path, e.to_string()))?;
    let dims = Dims::try_from(sidecar.dims)?;
    let spacing = VoxelSpacing::try_from(sidecar.spacing)?;

    let file = File::open(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let mut bytes = Vec::with_capacity(dims.len() * 4);
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(&raw_path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(format_err(&raw_path, "byte length is not a multiple of 4"));
    }
    let actual = bytes.len() / 4;
    if actual != dims.len() {
        return Err(Error::SizeMismatch {
            dims: dims.as_array(),
            expected: dims.len(),
            actual,
        });
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| f64::from(LittleEndian::read_f32(c)))
        .collect();
    Ok((sidecar, dims, spacing, values))
}

pub(crate) fn write(
    path: &Path,
    dims: Dims,
    spacing: VoxelSpacing,
    kind: VolumeKind,
    values: impl Iterator<Item = f32>,
) -> Result<()> {
    let (raw_path, json_path) = paths(path);
    let sidecar = Sidecar {
        dims: dims.as_array(),
        spacing: spacing.as_array(),
        kind,
    };
    let json = serde_json::to_string(&sidecar).expect("sidecar serializes");
    std::fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))?;

    let file = File::create(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let mut w = BufWriter::new(file);
    let mut word = [0u8; 4];
    for v in values {
        LittleEndian::write_f32(&mut word, v);
        w.write_all(&word).map_err(|e| Error::io(&raw_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&raw_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_volume_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("zeros.json");
        std::fs::write(&path, r#"{"dims":[4,4,4],"spacing":[2,2,2],"kind":"SUV"}"#).unwrap();
        std::fs::write(dir.path().join("zeros.raw"), vec![0u8; 64 * 4]).unwrap();
        let (sidecar, dims, spacing, values) = read(&path).unwrap();
        assert_eq!(sidecar.kind, VolumeKind::Suv);
        assert_eq!(dims.len(), 64);
        assert_eq!(spacing.as_array(), [2.0, 2.0, 2.0]);
        assert!(values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_data_is_a_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.raw");
        std::fs::write(dir.path().join("short.json"), r#"{"dims":[4,4,4],"spacing":[2,2,2],"kind":"HU"}"#).unwrap();
        std::fs::write(&path, vec![0u8; 63 * 4]).unwrap();
        let err = read(&path).unwrap_err();
        assert!(matches!(err, Error::SizeMismatch { expected: 64, actual: 63, .. }));
    }

    #[test]
    fn bad_spacing_in_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        std::fs::write(&path, r#"{"dims":[1,1,1],"spacing":[2,0,2],"kind":"HU"}"#).unwrap();
        std::fs::write(dir.path().join("s.raw"), vec![0u8; 4]).unwrap();
        assert!(matches!(read(&path), Err(Error::InvalidSpacing(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read(&dir.path().join("nope.json")), Err(Error::Io { .. })));
    }
}
