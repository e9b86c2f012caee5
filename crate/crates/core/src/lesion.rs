use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::volume::{Dims, VoxelSpacing};

/// One connected lesion: its voxel coordinates and the grid spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Lesion {
    voxels: Vec<[usize; 3]>,
    spacing: VoxelSpacing,
}

impl Lesion {
    /// Builds a lesion from a non-empty, duplicate-free voxel list.
    pub fn new(voxels: Vec<[usize; 3]>, spacing: VoxelSpacing) -> Result<Self> {
        if voxels.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut seen = HashSet::with_capacity(voxels.len());
        if let Some(dup) = voxels.iter().find(|v| !seen.insert(**v)) {
            return Err(Error::InvalidArgument(format!("duplicate lesion voxel {dup:?}")));
        }
        Ok(Lesion { voxels, spacing })
    }

    // Voxels straight out of a raster scan are already unique and non-empty.
    pub(crate) fn from_scan_ordered(voxels: Vec<[usize; 3]>, spacing: VoxelSpacing) -> Self {
        debug_assert!(!voxels.is_empty());
        Lesion { voxels, spacing }
    }

    pub fn voxels(&self) -> &[[usize; 3]] {
        &self.voxels
    }

    pub fn spacing(&self) -> VoxelSpacing {
        self.spacing
    }

    /// Voxel count.
    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Volume in cm³.
    pub fn volume_cc(&self) -> f64 {
        self.spacing.voxel_volume_cc() * self.voxels.len() as f64
    }

    /// Linear indices of the voxels on `dims`, failing on any voxel outside it.
    pub fn indices(&self, dims: Dims) -> Result<Vec<usize>> {
        self.voxels.iter().map(|&v| dims.checked_index(v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_duplicates() {
        let s = VoxelSpacing::isotropic(1.0).unwrap();
        assert!(Lesion::new(vec![], s).is_err());
        assert!(Lesion::new(vec![[0, 0, 0], [0, 0, 0]], s).is_err());
        let l = Lesion::new(vec![[0, 0, 0], [1, 0, 0]], VoxelSpacing::isotropic(2.0).unwrap()).unwrap();
        assert!((l.volume_cc() - 0.016).abs() < 1e-15);
    }

    #[test]
    fn out_of_grid_voxel() {
        let s = VoxelSpacing::isotropic(1.0).unwrap();
        let l = Lesion::new(vec![[0, 0, 0], [5, 0, 0]], s).unwrap();
        assert!(matches!(l.indices(Dims::new(2, 2, 2).unwrap()), Err(Error::OutOfBounds { .. })));
    }
}
