//! Voxel grids: scalar volumes (SUV, HU or normalized intensities) and
//! binary label masks.
//!
//! All grids are stored flat in x-fastest order, so voxel `(i, j, k)` lives
//! at `i + nx * (j + ny * k)`. This matches the on-disk NIfTI layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid extent `(nx, ny, nz)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidArgument(format!(
                "grid dims must be positive, got ({nx}, {ny}, {nz})"
            )));
        }
        Ok(Dims { nx, ny, nz })
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    /// Total voxel count.
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    /// Linear index of `voxel`, or an error when it lies outside the grid.
    pub fn checked_index(&self, voxel: [usize; 3]) -> Result<usize> {
        if self.contains(voxel) {
            Ok(self.index(voxel[0], voxel[1], voxel[2]))
        } else {
            Err(Error::OutOfBounds {
                voxel,
                dims: self.as_array(),
            })
        }
    }

    #[inline]
    pub fn contains(&self, voxel: [usize; 3]) -> bool {
        voxel[0] < self.nx && voxel[1] < self.ny && voxel[2] < self.nz
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let i = index % self.nx;
        let rest = index / self.nx;
        [i, rest % self.ny, rest / self.ny]
    }
}

impl TryFrom<[usize; 3]> for Dims {
    type Error = Error;

    fn try_from(d: [usize; 3]) -> Result<Self> {
        Dims::new(d[0], d[1], d[2])
    }
}

/// Physical size of one voxel along each axis, in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct VoxelSpacing {
    sx: f64,
    sy: f64,
    sz: f64,
}

impl VoxelSpacing {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        let ok = |s: f64| s.is_finite() && s > 0.0;
        if ok(sx) && ok(sy) && ok(sz) {
            Ok(VoxelSpacing { sx, sy, sz })
        } else {
            Err(Error::InvalidSpacing([sx, sy, sz]))
        }
    }

    pub fn isotropic(s: f64) -> Result<Self> {
        Self::new(s, s, s)
    }

    pub fn sx(&self) -> f64 {
        self.sx
    }

    pub fn sy(&self) -> f64 {
        self.sy
    }

    pub fn sz(&self) -> f64 {
        self.sz
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.sx, self.sy, self.sz]
    }

    /// Voxel volume in mm³.
    pub fn voxel_volume_mm3(&self) -> f64 {
        self.sx * self.sy * self.sz
    }

    /// Voxel volume in cm³ (mL).
    pub fn voxel_volume_cc(&self) -> f64 {
        self.voxel_volume_mm3() / 1000.0
    }
}

impl TryFrom<[f64; 3]> for VoxelSpacing {
    type Error = Error;

    fn try_from(s: [f64; 3]) -> Result<Self> {
        VoxelSpacing::new(s[0], s[1], s[2])
    }
}

impl From<VoxelSpacing> for [f64; 3] {
    fn from(s: VoxelSpacing) -> Self {
        s.as_array()
    }
}

/// Physical meaning of the values in a [`ScalarVolume`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum VolumeKind {
    /// Standardized uptake values, non-negative.
    Suv,
    /// CT Hounsfield units.
    Hu,
    /// Intensities rescaled into `[0, 1]`.
    Normalized,
}

impl VolumeKind {
    pub fn name(&self) -> &'static str {
        match self {
            VolumeKind::Suv => "SUV",
            VolumeKind::Hu => "HU",
            VolumeKind::Normalized => "NORMALIZED",
        }
    }
}

impl std::str::FromStr for VolumeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SUV" => Ok(VolumeKind::Suv),
            "HU" => Ok(VolumeKind::Hu),
            "NORMALIZED" => Ok(VolumeKind::Normalized),
            other => Err(Error::InvalidArgument(format!(
                "unknown volume kind {other:?}"
            ))),
        }
    }
}

/// A 3D grid of finite scalar values.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    dims: Dims,
    spacing: VoxelSpacing,
    kind: VolumeKind,
    data: Vec<f64>,
}

impl ScalarVolume {
    /// Builds a volume, checking the data length and the value range implied
    /// by `kind`.
    pub fn new(dims: Dims, spacing: VoxelSpacing, kind: VolumeKind, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::SizeMismatch {
                dims: dims.as_array(),
                expected: dims.len(),
                actual: data.len(),
            });
        }
        if let Some((idx, v)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidValue(format!(
                "non-finite value {v} at voxel {:?}",
                dims.coords(idx)
            )));
        }
        match kind {
            VolumeKind::Suv => {
                if let Some((idx, v)) = data.iter().enumerate().find(|(_, &v)| v < 0.0) {
                    return Err(Error::InvalidValue(format!(
                        "negative SUV {v} at voxel {:?}",
                        dims.coords(idx)
                    )));
                }
            }
            VolumeKind::Normalized => {
                if let Some((idx, v)) = data
                    .iter()
                    .enumerate()
                    .find(|(_, &v)| !(0.0..=1.0).contains(&v))
                {
                    return Err(Error::InvalidValue(format!(
                        "normalized value {v} outside [0, 1] at voxel {:?}",
                        dims.coords(idx)
                    )));
                }
            }
            VolumeKind::Hu => {}
        }
        Ok(ScalarVolume {
            dims,
            spacing,
            kind,
            data,
        })
    }

    pub fn filled(dims: Dims, spacing: VoxelSpacing, kind: VolumeKind, value: f64) -> Result<Self> {
        Self::new(dims, spacing, kind, vec![value; dims.len()])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> VoxelSpacing {
        self.spacing
    }

    pub fn kind(&self) -> VolumeKind {
        self.kind
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.dims.index(i, j, k)]
    }

    /// Errors unless `mask` lies on exactly this grid.
    pub fn check_same_grid(&self, mask: &LabelMask) -> Result<()> {
        check_grid(self.dims, self.spacing, mask.dims(), mask.spacing())
    }

    pub(crate) fn require_kind(&self, kind: VolumeKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::WrongKind {
                expected: kind.name(),
                found: self.kind.name(),
            })
        }
    }
}

pub(crate) fn check_grid(a: Dims, sa: VoxelSpacing, b: Dims, sb: VoxelSpacing) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!(
            "dims {:?} vs {:?}",
            a.as_array(),
            b.as_array()
        )));
    }
    // Spacings read back from float32 headers may differ in the last bits.
    let close = sa
        .as_array()
        .iter()
        .zip(sb.as_array())
        .all(|(x, y)| (x - y).abs() <= 1e-6 * x.abs().max(y.abs()));
    if !close {
        return Err(Error::GridMismatch(format!(
            "spacing {:?} vs {:?}",
            sa.as_array(),
            sb.as_array()
        )));
    }
    Ok(())
}

/// A binary mask: every voxel is 0 (background) or 1 (lesion).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    dims: Dims,
    spacing: VoxelSpacing,
    data: Vec<u8>,
}

// Spacing components are validated finite, so equality is total.
impl Eq for VoxelSpacing {}

impl LabelMask {
    pub fn new(dims: Dims, spacing: VoxelSpacing, data: Vec<u8>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::SizeMismatch {
                dims: dims.as_array(),
                expected: dims.len(),
                actual: data.len(),
            });
        }
        if let Some((idx, v)) = data.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::InvalidValue(format!(
                "mask value {v} at voxel {:?} is not 0 or 1",
                dims.coords(idx)
            )));
        }
        Ok(LabelMask {
            dims,
            spacing,
            data,
        })
    }

    pub fn empty(dims: Dims, spacing: VoxelSpacing) -> Self {
        LabelMask {
            dims,
            spacing,
            data: vec![0; dims.len()],
        }
    }

    /// Binarizes arbitrary label values: any non-zero value is foreground.
    pub fn from_nonzero(dims: Dims, spacing: VoxelSpacing, values: &[f64]) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::SizeMismatch {
                dims: dims.as_array(),
                expected: dims.len(),
                actual: values.len(),
            });
        }
        let data = values.iter().map(|&v| u8::from(v != 0.0)).collect();
        Ok(LabelMask {
            dims,
            spacing,
            data,
        })
    }

    /// Builds a mask with the given voxels set.
    pub fn from_voxels(dims: Dims, spacing: VoxelSpacing, voxels: &[[usize; 3]]) -> Result<Self> {
        let mut mask = LabelMask::empty(dims, spacing);
        for &v in voxels {
            let idx = dims.checked_index(v)?;
            mask.data[idx] = 1;
        }
        Ok(mask)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> VoxelSpacing {
        self.spacing
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.data[self.dims.index(i, j, k)] != 0
    }

    pub fn set(&mut self, voxel: [usize; 3], value: bool) -> Result<()> {
        let idx = self.dims.checked_index(voxel)?;
        self.data[idx] = u8::from(value);
        Ok(())
    }

    /// Number of foreground voxels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Foreground voxel coordinates in scan order.
    pub fn foreground(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(idx, _)| self.dims.coords(idx))
    }

    pub fn check_same_grid(&self, other: &LabelMask) -> Result<()> {
        check_grid(self.dims, self.spacing, other.dims, other.spacing)
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }
}

/// Neighbourhood used for connected-component analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Connectivity {
    /// Voxels sharing a face.
    Face6,
    /// Voxels sharing a face or an edge.
    Edge18,
    /// Voxels sharing a face, an edge or a corner.
    #[default]
    Corner26,
}

impl Connectivity {
    pub fn neighbours(&self) -> usize {
        match self {
            Connectivity::Face6 => 6,
            Connectivity::Edge18 => 18,
            Connectivity::Corner26 => 26,
        }
    }

    pub fn from_neighbours(n: usize) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Face6),
            18 => Ok(Connectivity::Edge18),
            26 => Ok(Connectivity::Corner26),
            other => Err(Error::InvalidArgument(format!(
                "connectivity must be 6, 18 or 26, got {other}"
            ))),
        }
    }

    /// Whether two distinct voxels at offset `(di, dj, dk)` are neighbours.
    #[inline]
    pub fn adjacent(&self, di: isize, dj: isize, dk: isize) -> bool {
        let nonzero = (di != 0) as u8 + (dj != 0) as u8 + (dk != 0) as u8;
        let within = di.abs() <= 1 && dj.abs() <= 1 && dk.abs() <= 1;
        within
            && nonzero > 0
            && match self {
                Connectivity::Face6 => nonzero == 1,
                Connectivity::Edge18 => nonzero <= 2,
                Connectivity::Corner26 => true,
            }
    }

    /// All neighbour offsets for this connectivity.
    pub fn offsets(&self) -> Vec<[isize; 3]> {
        let mut out = Vec::with_capacity(self.neighbours());
        for dk in -1..=1 {
            for dj in -1..=1 {
                for di in -1..=1 {
                    if self.adjacent(di, dj, dk) {
                        out.push([di, dj, dk]);
                    }
                }
            }
        }
        out
    }
}
