//! Reading and writing volumes and masks.

mod nifti;
pub mod rawjson;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{LabelMask, ScalarVolume, VolumeKind};

/// On-disk volume formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeFormat {
    /// NIfTI-1 single file, optionally gzip-compressed.
    Nifti1,
    /// Float32 raw file plus JSON sidecar.
    RawJson,
}

impl VolumeFormat {
    /// Guesses the format from a file name: `.nii` / `.nii.gz` are NIfTI,
    /// `.raw` / `.json` are RAWJSON.
    pub fn from_path(path: &Path) -> Result<Self> {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_ascii_lowercase();
        if name.ends_with(".nii") || name.ends_with(".nii.gz") {
            Ok(VolumeFormat::Nifti1)
        } else if name.ends_with(".raw") || name.ends_with(".json") {
            Ok(VolumeFormat::RawJson)
        } else {
            Err(Error::InvalidArgument(format!(
                "cannot infer volume format from {}",
                path.display()
            )))
        }
    }
}

/// Loads a scalar volume.
///
/// RAWJSON files carry their own kind; `kind` must then be `None` or agree
/// with the sidecar. NIfTI headers say nothing about the physical quantity,
/// so `kind` defaults to [`VolumeKind::Suv`] there.
pub fn load_volume(path: &Path, format: VolumeFormat, kind: Option<VolumeKind>) -> Result<ScalarVolume> {
    match format {
        VolumeFormat::Nifti1 => {
            let img = nifti::read(path)?;
            ScalarVolume::new(img.dims, img.spacing, kind.unwrap_or(VolumeKind::Suv), img.values)
        }
        VolumeFormat::RawJson => {
            let (sidecar, dims, spacing, values) = rawjson::read(path)?;
            if let Some(k) = kind.filter(|&k| k != sidecar.kind) {
                return Err(Error::WrongKind {
                    expected: k.name(),
                    found: sidecar.kind.name(),
                });
            }
            ScalarVolume::new(dims, spacing, sidecar.kind, values)
        }
    }
}

/// Loads a binary mask; any non-zero voxel value counts as foreground.
pub fn load_mask(path: &Path, format: VolumeFormat) -> Result<LabelMask> {
    match format {
        VolumeFormat::Nifti1 => {
            let img = nifti::read(path)?;
            LabelMask::from_nonzero(img.dims, img.spacing, &img.values)
        }
        VolumeFormat::RawJson => {
            let (_, dims, spacing, values) = rawjson::read(path)?;
            LabelMask::from_nonzero(dims, spacing, &values)
        }
    }
}

/// Writes a volume. NIfTI output is float64, so values survive a round trip
/// exactly; RAWJSON output is float32.
pub fn save_volume(volume: &ScalarVolume, path: &Path, format: VolumeFormat) -> Result<()> {
    match format {
        VolumeFormat::Nifti1 => nifti::write(
            path,
            volume.dims(),
            volume.spacing(),
            nifti::Payload::Float64(volume.data()),
        ),
        VolumeFormat::RawJson => rawjson::write(
            path,
            volume.dims(),
            volume.spacing(),
            volume.kind(),
            volume.data().iter().map(|&v| v as f32),
        ),
    }
}

/// Writes a mask. NIfTI output is uint8; RAWJSON output is float32 0/1 with
/// kind `NORMALIZED`.
pub fn save_mask(mask: &LabelMask, path: &Path, format: VolumeFormat) -> Result<()> {
    match format {
        VolumeFormat::Nifti1 => nifti::write(
            path,
            mask.dims(),
            mask.spacing(),
            nifti::Payload::Uint8(mask.data()),
        ),
        VolumeFormat::RawJson => rawjson::write(
            path,
            mask.dims(),
            mask.spacing(),
            VolumeKind::Normalized,
            mask.data().iter().map(|&v| f32::from(v)),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::{Dims, VoxelSpacing};

    #[test]
    fn format_from_extension() {
        assert_eq!(VolumeFormat::from_path(Path::new("a/b.nii.gz")).unwrap(), VolumeFormat::Nifti1);
        assert_eq!(VolumeFormat::from_path(Path::new("b.NII")).unwrap(), VolumeFormat::Nifti1);
        assert_eq!(VolumeFormat::from_path(Path::new("b.json")).unwrap(), VolumeFormat::RawJson);
        assert!(VolumeFormat::from_path(Path::new("b.png")).is_err());
    }

    #[test]
    fn scanner_sized_nifti_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pet.nii.gz");
        let dims = Dims::new(192, 192, 300).unwrap();
        let spacing = VoxelSpacing::new(3.64, 3.64, 3.27).unwrap();
        let vol = ScalarVolume::filled(dims, spacing, VolumeKind::Suv, 0.0).unwrap();
        save_volume(&vol, &path, VolumeFormat::Nifti1).unwrap();
        let back = load_volume(&path, VolumeFormat::Nifti1, None).unwrap();
        assert_eq!(back.dims(), dims);
        let s = back.spacing().as_array();
        assert!((s[0] - 3.64).abs() < 1e-6 && (s[1] - 3.64).abs() < 1e-6 && (s[2] - 3.27).abs() < 1e-6);
    }

    #[test]
    fn rawjson_kind_must_agree() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ct.json");
        let dims = Dims::new(2, 2, 2).unwrap();
        let vol = ScalarVolume::filled(dims, VoxelSpacing::isotropic(1.0).unwrap(), VolumeKind::Hu, -5.0).unwrap();
        save_volume(&vol, &path, VolumeFormat::RawJson).unwrap();
        assert_eq!(load_volume(&path, VolumeFormat::RawJson, None).unwrap(), vol);
        assert!(load_volume(&path, VolumeFormat::RawJson, Some(VolumeKind::Suv)).is_err());
    }

    #[test]
    fn mask_roundtrip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let dims = Dims::new(3, 3, 2).unwrap();
        let spacing = VoxelSpacing::new(2.0, 2.0, 3.0).unwrap();
        let mask = LabelMask::from_voxels(dims, spacing, &[[0, 0, 0], [2, 1, 1]]).unwrap();
        for name in ["m.nii.gz", "m.nii", "m.raw"] {
            let path = dir.path().join(name);
            let fmt = VolumeFormat::from_path(&path).unwrap();
            save_mask(&mask, &path, fmt).unwrap();
            assert_eq!(load_mask(&path, fmt).unwrap(), mask);
        }
    }
}
