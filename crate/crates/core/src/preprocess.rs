//! CT intensity normalization, SUV conversion and grid resampling.

use serde::{Deserialize, Serialize};

use crate::defaults::{CT_CLIP_MAX_HU, CT_CLIP_MIN_HU};
use crate::error::{Error, Result};
use crate::volume::{Dims, LabelMask, ScalarVolume, VolumeKind, VoxelSpacing};

/// Clips a CT volume to `[-1000, 3000]` HU and rescales it linearly onto
/// `[0, 1]`.
pub fn ct_preprocess(ct: &ScalarVolume) -> Result<ScalarVolume> {
    ct.require_kind(VolumeKind::Hu)?;
    let range = CT_CLIP_MAX_HU - CT_CLIP_MIN_HU;
    let data = ct
        .data()
        .iter()
        .map(|&hu| (hu.clamp(CT_CLIP_MIN_HU, CT_CLIP_MAX_HU) - CT_CLIP_MIN_HU) / range)
        .collect();
    ScalarVolume::new(ct.dims(), ct.spacing(), VolumeKind::Normalized, data)
}

/// Body-weight SUV of an activity concentration.
///
/// `concentration` is in Bq/mL, `weight_kg` the patient weight and
/// `injected_dose_bq` the decay-corrected injected activity. Grams are
/// approximated from kilograms assuming 1 g/mL tissue density.
pub fn body_weight_suv(concentration: f64, weight_kg: f64, injected_dose_bq: f64) -> Result<f64> {
    if !(weight_kg > 0.0 && injected_dose_bq > 0.0) {
        return Err(Error::InvalidArgument(
            "patient weight and injected dose must be positive".into(),
        ));
    }
    Ok(concentration * weight_kg * 1000.0 / injected_dose_bq)
}

/// Converts a whole activity-concentration volume to SUV.
pub fn to_suv(concentration: &ScalarVolume, weight_kg: f64, injected_dose_bq: f64) -> Result<ScalarVolume> {
    let data = concentration
        .data()
        .iter()
        .map(|&c| body_weight_suv(c, weight_kg, injected_dose_bq).map(|v| v.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    ScalarVolume::new(concentration.dims(), concentration.spacing(), VolumeKind::Suv, data)
}

/// Interpolation scheme for [`resample_volume`] and [`resample_mask`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpolation {
    Trilinear,
    Nearest,
}

// The output grid shares the input's outer corner; each output voxel centre is
// mapped back to fractional input index space and clamped to the valid range.
struct AxisMap {
    out_len: usize,
    ratio: f64,
    in_len: usize,
}

impl AxisMap {
    fn new(in_len: usize, spacing: f64, target: f64) -> Self {
        let out_len = ((in_len as f64 * spacing / target) - 1e-9).ceil().max(1.0) as usize;
        AxisMap {
            out_len,
            ratio: target / spacing,
            in_len,
        }
    }

    #[inline]
    fn source(&self, out: usize) -> f64 {
        let x = (out as f64 + 0.5) * self.ratio - 0.5;
        x.clamp(0.0, (self.in_len - 1) as f64)
    }

    /// Lower neighbour and the weight of the upper one.
    fn linear(&self, out: usize) -> (usize, usize, f64) {
        let x = self.source(out);
        let lo = x.floor() as usize;
        let hi = (lo + 1).min(self.in_len - 1);
        (lo, hi, x - lo as f64)
    }

    fn nearest(&self, out: usize) -> usize {
        ((self.source(out) + 0.5).floor() as usize).min(self.in_len - 1)
    }
}

fn axis_maps(dims: Dims, spacing: VoxelSpacing, target: VoxelSpacing) -> [AxisMap; 3] {
    let [nx, ny, nz] = dims.as_array();
    let s = spacing.as_array();
    let t = target.as_array();
    [
        AxisMap::new(nx, s[0], t[0]),
        AxisMap::new(ny, s[1], t[1]),
        AxisMap::new(nz, s[2], t[2]),
    ]
}

/// Resamples a scalar volume onto `target` spacing.
///
/// The output has `ceil(n * spacing / target)` voxels per axis. Resampling to
/// the volume's own spacing reproduces its data.
pub fn resample_volume(v: &ScalarVolume, target: VoxelSpacing, mode: Interpolation) -> Result<ScalarVolume> {
    let [mx, my, mz] = axis_maps(v.dims(), v.spacing(), target);
    let out_dims = Dims::new(mx.out_len, my.out_len, mz.out_len)?;
    let src = v.data();
    let dims = v.dims();
    let mut data = Vec::with_capacity(out_dims.len());
    match mode {
        Interpolation::Nearest => {
            let xs: Vec<usize> = (0..mx.out_len).map(|o| mx.nearest(o)).collect();
            for oz in 0..mz.out_len {
                let k = mz.nearest(oz);
                for oy in 0..my.out_len {
                    let j = my.nearest(oy);
                    data.extend(xs.iter().map(|&i| src[dims.index(i, j, k)]));
                }
            }
        }
        Interpolation::Trilinear => {
            let xs: Vec<_> = (0..mx.out_len).map(|o| mx.linear(o)).collect();
            for oz in 0..mz.out_len {
                let (k0, k1, wz) = mz.linear(oz);
                for oy in 0..my.out_len {
                    let (j0, j1, wy) = my.linear(oy);
                    for &(i0, i1, wx) in &xs {
                        let at = |i, j, k| src[dims.index(i, j, k)];
                        let lerp = |a: f64, b: f64, w: f64| if w == 0.0 { a } else { a + (b - a) * w };
                        let c00 = lerp(at(i0, j0, k0), at(i1, j0, k0), wx);
                        let c10 = lerp(at(i0, j1, k0), at(i1, j1, k0), wx);
                        let c01 = lerp(at(i0, j0, k1), at(i1, j0, k1), wx);
                        let c11 = lerp(at(i0, j1, k1), at(i1, j1, k1), wx);
                        let c0 = lerp(c00, c10, wy);
                        let c1 = lerp(c01, c11, wy);
                        data.push(lerp(c0, c1, wz));
                    }
                }
            }
        }
    }
    ScalarVolume::new(out_dims, target, v.kind(), data)
}

/// Resamples a mask onto `target` spacing. Only nearest-neighbour
/// interpolation keeps labels binary, so trilinear is rejected.
pub fn resample_mask(m: &LabelMask, target: VoxelSpacing, mode: Interpolation) -> Result<LabelMask> {
    if mode != Interpolation::Nearest {
        return Err(Error::InvalidArgument(
            "label masks can only be resampled with nearest-neighbour interpolation".into(),
        ));
    }
    let [mx, my, mz] = axis_maps(m.dims(), m.spacing(), target);
    let out_dims = Dims::new(mx.out_len, my.out_len, mz.out_len)?;
    let dims = m.dims();
    let src = m.data();
    let xs: Vec<usize> = (0..mx.out_len).map(|o| mx.nearest(o)).collect();
    let mut data = Vec::with_capacity(out_dims.len());
    for oz in 0..mz.out_len {
        let k = mz.nearest(oz);
        for oy in 0..my.out_len {
            let j = my.nearest(oy);
            data.extend(xs.iter().map(|&i| src[dims.index(i, j, k)]));
        }
    }
    LabelMask::new(out_dims, target, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hu(values: Vec<f64>) -> ScalarVolume {
        let d = Dims::new(values.len(), 1, 1).unwrap();
        ScalarVolume::new(d, VoxelSpacing::isotropic(1.0).unwrap(), VolumeKind::Hu, values).unwrap()
    }

    #[test]
    fn ct_clip_bounds_and_midpoint() {
        let out = ct_preprocess(&hu(vec![-1000.0, 3000.0, 1000.0, -2000.0, 5000.0])).unwrap();
        assert_eq!(out.kind(), VolumeKind::Normalized);
        assert_eq!(out.data(), &[0.0, 1.0, 0.5, 0.0, 1.0]);
    }

    #[test]
    fn ct_preprocess_requires_hu() {
        let d = Dims::new(1, 1, 1).unwrap();
        let suv = ScalarVolume::filled(d, VoxelSpacing::isotropic(1.0).unwrap(), VolumeKind::Suv, 1.0).unwrap();
        assert!(matches!(ct_preprocess(&suv), Err(Error::WrongKind { .. })));
    }

    #[test]
    fn suv_helper() {
        // 5 kBq/mL, 70 kg, 350 MBq
        let suv = body_weight_suv(5000.0, 70.0, 350e6).unwrap();
        assert_relative_eq!(suv, 1.0, max_relative = 1e-12);
        assert!(body_weight_suv(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn identity_resample() {
        let d = Dims::new(3, 4, 2).unwrap();
        let s = VoxelSpacing::isotropic(2.0).unwrap();
        let data: Vec<f64> = (0..24).map(|v| (v as f64).sqrt()).collect();
        let v = ScalarVolume::new(d, s, VolumeKind::Suv, data.clone()).unwrap();
        let out = resample_volume(&v, s, Interpolation::Trilinear).unwrap();
        assert_eq!(out.dims(), d);
        for (a, b) in out.data().iter().zip(&data) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn mask_upsampling_keeps_labels() {
        let d = Dims::new(4, 4, 4).unwrap();
        let m = LabelMask::from_voxels(d, VoxelSpacing::isotropic(2.0).unwrap(), &[[1, 2, 3], [0, 0, 0]]).unwrap();
        let out = resample_mask(&m, VoxelSpacing::isotropic(1.0).unwrap(), Interpolation::Nearest).unwrap();
        assert_eq!(out.dims().as_array(), [8, 8, 8]);
        assert!(out.data().iter().all(|&v| v <= 1));
        assert_eq!(out.count(), 16);
        assert!(out.get(2, 4, 6) && out.get(3, 5, 7));
    }

    #[test]
    fn trilinear_rejected_for_masks() {
        let d = Dims::new(2, 2, 2).unwrap();
        let m = LabelMask::empty(d, VoxelSpacing::isotropic(2.0).unwrap());
        assert!(resample_mask(&m, VoxelSpacing::isotropic(1.0).unwrap(), Interpolation::Trilinear).is_err());
    }

    #[test]
    fn ramp_trilinear_matches_hand_weights() {
        // Input centres sit at x = 1 mm and 3 mm; outputs at 0.5, 1.5, 2.5, 3.5 mm.
        // Fractional input indices: -0.25 (clamped to 0), 0.25, 0.75, 1.25 (clamped to 1).
        let d = Dims::new(2, 1, 1).unwrap();
        let v = ScalarVolume::new(d, VoxelSpacing::new(2.0, 1.0, 1.0).unwrap(), VolumeKind::Suv, vec![0.0, 10.0]).unwrap();
        let out = resample_volume(&v, VoxelSpacing::isotropic(1.0).unwrap(), Interpolation::Trilinear).unwrap();
        assert_eq!(out.dims().as_array(), [4, 1, 1]);
        let expected = [0.0, 0.25 * 10.0, 0.75 * 10.0, 10.0];
        for (a, b) in out.data().iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn output_dims_use_ceiling() {
        // 3 voxels of 3.64 mm = 10.92 mm -> ceil(5.46) = 6 voxels at 2 mm
        let d = Dims::new(3, 2, 1).unwrap();
        let v = ScalarVolume::filled(d, VoxelSpacing::new(3.64, 3.64, 3.27).unwrap(), VolumeKind::Suv, 1.0).unwrap();
        let out = resample_volume(&v, VoxelSpacing::isotropic(2.0).unwrap(), Interpolation::Trilinear).unwrap();
        assert_eq!(out.dims().as_array(), [6, 4, 2]);
        assert!(out.data().iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }
}
