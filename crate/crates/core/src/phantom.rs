//! Seeded synthetic SUV volumes with spherical lesions whose metrics are
//! known by construction, and seeded perturbations of lesion masks that
//! stand in for imperfect predictions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::components::connected_components;
use crate::error::{Error, Result};
use crate::metrics::PatientMetrics;
use crate::volume::{Connectivity, Dims, LabelMask, ScalarVolume, VolumeKind, VoxelSpacing};

/// A sphere rasterized by voxel-centre inclusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LesionSpec {
    /// Centre in (fractional) voxel coordinates.
    pub center: [f64; 3],
    pub radius_mm: f64,
    pub suv_peak: f64,
    /// Radial decay: uptake at distance `r` is
    /// `bg + (peak − bg)(1 − falloff·(r/R)²)`. Zero gives a constant lesion.
    #[serde(default)]
    pub falloff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub seed: u64,
    pub dims: Dims,
    pub spacing: VoxelSpacing,
    pub lesions: Vec<LesionSpec>,
    pub background_suv: f64,
    /// Standard deviation of Gaussian noise added outside lesions.
    pub noise_sd: f64,
}

/// A generated phantom together with the metrics it was built to have.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub suv: ScalarVolume,
    pub mask: LabelMask,
    pub expected: PatientMetrics,
}

fn lesion_voxels(dims: Dims, spacing: VoxelSpacing, l: &LesionSpec) -> Result<Vec<([usize; 3], f64)>> {
    let s = spacing.as_array();
    let n = dims.as_array();
    let r = l.radius_mm;
    let mut lo = [0i64; 3];
    let mut hi = [0i64; 3];
    for a in 0..3 {
        lo[a] = (l.center[a] - r / s[a]).floor() as i64 - 1;
        hi[a] = (l.center[a] + r / s[a]).ceil() as i64 + 1;
    }
    let mut out = Vec::new();
    for k in lo[2]..=hi[2] {
        for j in lo[1]..=hi[1] {
            for i in lo[0]..=hi[0] {
                let p = [i, j, k];
                let mut d2 = 0.0;
                for a in 0..3 {
                    let d = (p[a] as f64 - l.center[a]) * s[a];
                    d2 += d * d;
                }
                if d2 > r * r {
                    continue;
                }
                if (0..3).any(|a| p[a] < 0 || p[a] >= n[a] as i64) {
                    return Err(Error::InvalidArgument(format!(
                        "lesion at {:?} with radius {r} mm extends outside the {:?} grid",
                        l.center, n
                    )));
                }
                out.push(([i as usize, j as usize, k as usize], d2.sqrt()));
            }
        }
    }
    Ok(out)
}

impl LesionSpec {
    fn uptake(&self, background: f64, distance_mm: f64) -> f64 {
        let rel = distance_mm / self.radius_mm;
        background + (self.suv_peak - background) * (1.0 - self.falloff * rel * rel)
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.background_suv >= 0.0 && self.background_suv.is_finite()) {
            return Err(Error::InvalidArgument(format!("background SUV {} must be nonnegative", self.background_suv)));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise sd {} must be nonnegative", self.noise_sd)));
        }
        let min_radius = self.spacing.as_array().into_iter().fold(0.0, f64::max);
        for l in &self.lesions {
            if !(l.radius_mm >= min_radius && l.radius_mm.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "lesion radius {} mm is below one voxel ({min_radius} mm)",
                    l.radius_mm
                )));
            }
            if !(l.suv_peak > self.background_suv && l.suv_peak.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "lesion peak {} must exceed background {}",
                    l.suv_peak, self.background_suv
                )));
            }
            if !(0.0..1.0).contains(&l.falloff) {
                return Err(Error::InvalidArgument(format!("falloff {} must lie in [0, 1)", l.falloff)));
            }
            if l.center.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidArgument("lesion centre must be finite".into()));
            }
        }
        Ok(())
    }

    /// A random but valid spec: between one and `max_lesions` well-separated
    /// lesions of random size, peak and falloff, placed entirely inside the
    /// grid. Fewer lesions are placed when the grid is too crowded.
    pub fn random(seed: u64, dims: Dims, spacing: VoxelSpacing, max_lesions: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = spacing.as_array();
        let n = dims.as_array();
        let min_r = 1.5 * s.iter().copied().fold(0.0, f64::max);
        let extent = (0..3).map(|a| n[a] as f64 * s[a]).fold(f64::INFINITY, f64::min);
        let max_r = (extent / 5.0).max(min_r);
        let want = rng.random_range(max_lesions.min(1)..=max_lesions);
        let mut lesions: Vec<LesionSpec> = Vec::with_capacity(want);
        let mut attempts = 0;
        while lesions.len() < want && attempts < 200 {
            attempts += 1;
            let radius_mm = if max_r > min_r { rng.random_range(min_r..=max_r) } else { min_r };
            let mut center = [0.0; 3];
            let mut fits = true;
            for a in 0..3 {
                // keep the sphere one voxel clear of the border
                let margin = radius_mm / s[a] + 1.0;
                let (lo, hi) = (margin, n[a] as f64 - 1.0 - margin);
                if lo > hi {
                    fits = false;
                    break;
                }
                center[a] = rng.random_range(lo..=hi);
            }
            if !fits {
                continue;
            }
            let clear = lesions.iter().all(|o| {
                let d2: f64 = (0..3).map(|a| ((center[a] - o.center[a]) * s[a]).powi(2)).sum();
                d2.sqrt() > radius_mm + o.radius_mm + 2.0 * min_r
            });
            if clear {
                lesions.push(LesionSpec {
                    center,
                    radius_mm,
                    suv_peak: rng.random_range(3.0..20.0),
                    falloff: if rng.random_bool(0.5) { 0.0 } else { rng.random_range(0.0..0.8) },
                });
            }
        }
        PhantomSpec {
            seed,
            dims,
            spacing,
            lesions,
            background_suv: rng.random_range(0.5..1.5),
            noise_sd: 0.2,
        }
    }
}

/// Rasterizes `spec` and computes its metrics directly from the rasterized
/// lesions: explicit sums over the lesion voxels and an exhaustive search over
/// surface-voxel pairs for the maximal distance.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let dims = spec.dims;
    let spacing = spec.spacing;
    let n = dims.len();
    // owner[idx] = 1 + lesion index
    let mut owner = vec![0u32; n];
    let mut values = vec![spec.background_suv; n];
    let mut per_lesion = Vec::with_capacity(spec.lesions.len());
    for (li, l) in spec.lesions.iter().enumerate() {
        let voxels = lesion_voxels(dims, spacing, l)?;
        for &(v, dist) in &voxels {
            let idx = dims.index(v[0], v[1], v[2]);
            if owner[idx] != 0 {
                return Err(Error::InvalidArgument(format!("lesions {} and {li} overlap", owner[idx] - 1)));
            }
            owner[idx] = li as u32 + 1;
            values[idx] = l.uptake(spec.background_suv, dist);
        }
        per_lesion.push(voxels);
    }
    // Lesions that touch would merge into a single component.
    for (idx, &o) in owner.iter().enumerate() {
        if o == 0 {
            continue;
        }
        let [i, j, k] = dims.coords(idx);
        for off in Connectivity::Corner26.offsets() {
            let q = [i as isize + off[0], j as isize + off[1], k as isize + off[2]];
            if q.iter().any(|&c| c < 0) {
                continue;
            }
            let q = [q[0] as usize, q[1] as usize, q[2] as usize];
            if dims.contains(q) {
                let other = owner[dims.index(q[0], q[1], q[2])];
                if other != 0 && other != o {
                    return Err(Error::InvalidArgument(format!("lesions {} and {} touch", o - 1, other - 1)));
                }
            }
        }
    }

    if spec.noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for (v, &o) in values.iter_mut().zip(&owner) {
            if o == 0 {
                *v = (*v + noise.sample(&mut rng)).max(0.0);
            }
        }
    }

    let mask_data: Vec<u8> = owner.iter().map(|&o| u8::from(o != 0)).collect();
    let mask = LabelMask::new(dims, spacing, mask_data)?;
    let expected = expected_metrics(dims, spacing, &values, &owner, &per_lesion);
    let suv = ScalarVolume::new(dims, spacing, VolumeKind::Suv, values)?;
    Ok(Phantom { suv, mask, expected })
}

fn expected_metrics(
    dims: Dims,
    spacing: VoxelSpacing,
    values: &[f64],
    owner: &[u32],
    per_lesion: &[Vec<([usize; 3], f64)>],
) -> PatientMetrics {
    let cc = spacing.voxel_volume_cc();
    let mut count = 0usize;
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut tla = 0.0;
    for voxels in per_lesion {
        let mut lsum = 0.0;
        for &(v, _) in voxels {
            let p = values[dims.index(v[0], v[1], v[2])];
            lsum += p;
            max = max.max(p);
        }
        count += voxels.len();
        sum += lsum;
        tla += lsum / voxels.len() as f64 * (voxels.len() as f64 * cc);
    }

    // The farthest pair always lies on the lesion surfaces.
    let s = spacing.as_array();
    let surface: Vec<[f64; 3]> = per_lesion
        .iter()
        .flatten()
        .filter(|(v, _)| {
            Connectivity::Face6.offsets().iter().any(|off| {
                let q = [v[0] as isize + off[0], v[1] as isize + off[1], v[2] as isize + off[2]];
                q.iter().any(|&c| c < 0)
                    || !dims.contains([q[0] as usize, q[1] as usize, q[2] as usize])
                    || owner[dims.index(q[0] as usize, q[1] as usize, q[2] as usize)] == 0
            })
        })
        .map(|(v, _)| [v[0] as f64 * s[0], v[1] as f64 * s[1], v[2] as f64 * s[2]])
        .collect();
    let mut best = 0.0f64;
    for (a, p) in surface.iter().enumerate() {
        for q in &surface[a + 1..] {
            let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
            best = best.max(d2);
        }
    }

    PatientMetrics {
        suv_mean: if count == 0 { 0.0 } else { sum / count as f64 },
        suv_max: max,
        tmtv: count as f64 * cc,
        tla,
        dmax: best.sqrt() / 10.0,
        lesion_count: per_lesion.len(),
    }
}

/// How to corrupt a ground-truth mask into a plausible prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationSpec {
    pub seed: u64,
    /// Probability of deleting each connected lesion.
    pub drop_lesion_prob: f64,
    /// Probability of inserting each of `false_blobs` spurious blobs.
    pub add_false_prob: f64,
    pub false_blobs: usize,
    /// Positive: dilate this many times; negative: erode (6-neighbourhood).
    pub dilate_erode_voxels: i32,
    /// Translation along x, in voxels.
    pub shift_voxels: i32,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        PerturbationSpec {
            seed: 0,
            drop_lesion_prob: 0.0,
            add_false_prob: 0.0,
            false_blobs: 1,
            dilate_erode_voxels: 0,
            shift_voxels: 0,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("drop_lesion_prob", self.drop_lesion_prob), ("add_false_prob", self.add_false_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

fn morph_step(mask: &LabelMask, dilate: bool) -> LabelMask {
    let dims = mask.dims();
    let src = mask.data();
    let mut out = mask.clone();
    let offsets = Connectivity::Face6.offsets();
    for (idx, dst) in out.data_mut().iter_mut().enumerate() {
        let [i, j, k] = dims.coords(idx);
        let neighbour = |off: &[isize; 3]| -> Option<u8> {
            let q = [i as isize + off[0], j as isize + off[1], k as isize + off[2]];
            if q.iter().any(|&c| c < 0) {
                return None;
            }
            let q = [q[0] as usize, q[1] as usize, q[2] as usize];
            dims.contains(q).then(|| src[dims.index(q[0], q[1], q[2])])
        };
        if dilate {
            if src[idx] == 0 && offsets.iter().any(|o| neighbour(o) == Some(1)) {
                *dst = 1;
            }
        } else if src[idx] == 1 && offsets.iter().any(|o| neighbour(o) != Some(1)) {
            // voxels on the grid border erode as if the outside were background
            *dst = 0;
        }
    }
    out
}

fn shift_x(mask: &LabelMask, by: i32) -> LabelMask {
    let dims = mask.dims();
    let mut out = LabelMask::empty(dims, mask.spacing());
    for [i, j, k] in mask.foreground() {
        let ni = i as i64 + by as i64;
        if ni >= 0 && (ni as usize) < dims.nx {
            out.data_mut()[dims.index(ni as usize, j, k)] = 1;
        }
    }
    out
}

/// Whether a 2×2×2 blob at `origin`, grown by one voxel, avoids every
/// foreground voxel of `masks`.
fn blob_is_clear(dims: Dims, origin: [usize; 3], masks: &[&LabelMask]) -> bool {
    for k in origin[2].saturating_sub(1)..(origin[2] + 3).min(dims.nz) {
        for j in origin[1].saturating_sub(1)..(origin[1] + 3).min(dims.ny) {
            for i in origin[0].saturating_sub(1)..(origin[0] + 3).min(dims.nx) {
                if masks.iter().any(|m| m.get(i, j, k)) {
                    return false;
                }
            }
        }
    }
    true
}

/// Applies, in order: lesion drops, morphology, translation and false blobs.
/// Each false blob is a 2×2×2 cube kept at least one voxel away from the
/// original and the perturbed foreground, so every blob that is placed adds
/// exactly one component. Blobs that find no free spot are skipped.
pub fn perturb_mask(m: &LabelMask, p: &PerturbationSpec) -> Result<LabelMask> {
    p.validate()?;
    let dims = m.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);

    let mut out = LabelMask::empty(dims, m.spacing());
    for lesion in connected_components(m, Connectivity::Corner26) {
        if !rng.random_bool(p.drop_lesion_prob) {
            for idx in lesion.indices(dims)? {
                out.data_mut()[idx] = 1;
            }
        }
    }

    for _ in 0..p.dilate_erode_voxels.unsigned_abs() {
        out = morph_step(&out, p.dilate_erode_voxels > 0);
    }

    if p.shift_voxels != 0 {
        out = shift_x(&out, p.shift_voxels);
    }

    if dims.nx >= 2 && dims.ny >= 2 && dims.nz >= 2 {
        for _ in 0..p.false_blobs {
            if !rng.random_bool(p.add_false_prob) {
                continue;
            }
            for _ in 0..100 {
                let origin = [
                    rng.random_range(0..dims.nx - 1),
                    rng.random_range(0..dims.ny - 1),
                    rng.random_range(0..dims.nz - 1),
                ];
                if blob_is_clear(dims, origin, &[m, &out]) {
                    for k in 0..2 {
                        for j in 0..2 {
                            for i in 0..2 {
                                out.data_mut()[dims.index(origin[0] + i, origin[1] + j, origin[2] + k)] = 1;
                            }
                        }
                    }
                    break;
                }
            }
        }
    }
    Ok(out)
}
