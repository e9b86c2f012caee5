//! Patient- and lesion-level clinical metrics from an SUV volume and mask.
//!
//! | metric       | unit    | definition                                          |
//! |--------------|---------|-----------------------------------------------------|
//! | SUVmean      | –       | `Σ P·M / max(Σ M, 1)` over the whole mask           |
//! | SUVmax       | –       | `max(P·M)`                                          |
//! | TMTV         | cm³     | voxel volume (mm³) / 1000 × foreground count        |
//! | TLA          | SUV·cm³ | `Σ_lesions SUVmean_l × V_l`                         |
//! | Dmax         | cm      | largest spacing-scaled distance between two voxels  |
//! | lesion count | –       | number of connected components                      |

use serde::{Deserialize, Serialize};

use crate::components::connected_components;
use crate::error::Result;
use crate::lesion::Lesion;
use crate::volume::{Connectivity, LabelMask, ScalarVolume, VolumeKind};

/// Metrics of a single lesion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LesionMetrics {
    pub suv_mean: f64,
    pub suv_max: f64,
    pub volume_cc: f64,
    pub tla: f64,
}

/// The six patient-level metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PatientMetrics {
    pub suv_mean: f64,
    pub suv_max: f64,
    pub tmtv: f64,
    pub tla: f64,
    pub dmax: f64,
    pub lesion_count: usize,
}

impl PatientMetrics {
    /// Metric names in report order.
    pub const NAMES: [&'static str; 6] = ["suv_mean", "suv_max", "tmtv_cc", "tla", "dmax_cm", "lesion_count"];

    /// Values in the order of [`PatientMetrics::NAMES`].
    pub fn values(&self) -> [f64; 6] {
        [
            self.suv_mean,
            self.suv_max,
            self.tmtv,
            self.tla,
            self.dmax,
            self.lesion_count as f64,
        ]
    }
}

fn suv_volume(v: &ScalarVolume, m: &LabelMask) -> Result<()> {
    v.require_kind(VolumeKind::Suv)?;
    v.check_same_grid(m)
}

/// Mean SUV over all foreground voxels; 0 for an empty mask.
pub fn suv_mean(v: &ScalarVolume, m: &LabelMask) -> Result<f64> {
    suv_volume(v, m)?;
    let (sum, n) = v
        .data()
        .iter()
        .zip(m.data())
        .filter(|(_, &b)| b != 0)
        .fold((0.0, 0usize), |(s, n), (&p, _)| (s + p, n + 1));
    Ok(sum / n.max(1) as f64)
}

/// Maximum SUV over foreground voxels; 0 for an empty mask.
pub fn suv_max(v: &ScalarVolume, m: &LabelMask) -> Result<f64> {
    suv_volume(v, m)?;
    Ok(v
        .data()
        .iter()
        .zip(m.data())
        .filter(|(_, &b)| b != 0)
        .fold(0.0, |acc, (&p, _)| acc.max(p)))
}

/// Total foreground volume in cm³.
pub fn tmtv(m: &LabelMask) -> f64 {
    m.spacing().voxel_volume_cc() * m.count() as f64
}

/// SUVmean, SUVmax, volume and activity of one lesion.
pub fn lesion_metrics(v: &ScalarVolume, lesion: &Lesion) -> Result<LesionMetrics> {
    let data = v.data();
    let indices = lesion.indices(v.dims())?;
    let (sum, max) = indices
        .iter()
        .map(|&i| data[i])
        .fold((0.0, 0.0f64), |(s, m), p| (s + p, m.max(p)));
    let suv_mean = sum / indices.len() as f64;
    let volume_cc = lesion.volume_cc();
    Ok(LesionMetrics {
        suv_mean,
        suv_max: max,
        volume_cc,
        tla: suv_mean * volume_cc,
    })
}

/// Total lesion activity: sum over lesions of SUVmean times volume.
pub fn tla(v: &ScalarVolume, lesions: &[Lesion]) -> Result<f64> {
    lesions
        .iter()
        .map(|l| lesion_metrics(v, l).map(|m| m.tla))
        .sum()
}

/// Largest Euclidean distance (cm) between any two foreground voxels,
/// regardless of which lesion they belong to; 0 for fewer than two voxels.
///
/// The farthest pair of a finite point set is a pair of convex-hull vertices,
/// and a hull vertex is always the first or last foreground voxel on each of
/// its three axis-aligned grid lines. Only those candidates are compared.
pub fn dmax(m: &LabelMask) -> f64 {
    let candidates = extreme_voxels(m);
    let s = m.spacing().as_array();
    let mut best = 0.0f64;
    for (n, a) in candidates.iter().enumerate() {
        for b in &candidates[n + 1..] {
            let d2: f64 = (0..3)
                .map(|ax| {
                    let d = (a[ax] as f64 - b[ax] as f64) * s[ax];
                    d * d
                })
                .sum();
            best = best.max(d2);
        }
    }
    best.sqrt() / 10.0
}

// Foreground voxels that are the minimum or maximum along every axis line through them.
fn extreme_voxels(m: &LabelMask) -> Vec<[usize; 3]> {
    let dims = m.dims();
    let [nx, ny, nz] = dims.as_array();
    let data = m.data();
    const NONE: (u32, u32) = (u32::MAX, 0);
    let mut x_ext = vec![NONE; ny * nz];
    let mut y_ext = vec![NONE; nx * nz];
    let mut z_ext = vec![NONE; nx * ny];
    let widen = |e: &mut (u32, u32), c: usize| {
        e.0 = e.0.min(c as u32);
        e.1 = e.1.max(c as u32);
    };
    for k in 0..nz {
        for j in 0..ny {
            let row = dims.index(0, j, k);
            for i in 0..nx {
                if data[row + i] != 0 {
                    widen(&mut x_ext[j + ny * k], i);
                    widen(&mut y_ext[i + nx * k], j);
                    widen(&mut z_ext[i + nx * j], k);
                }
            }
        }
    }
    let is_end = |e: (u32, u32), c: usize| c as u32 == e.0 || c as u32 == e.1;
    m.foreground()
        .filter(|&[i, j, k]| {
            is_end(x_ext[j + ny * k], i) && is_end(y_ext[i + nx * k], j) && is_end(z_ext[i + nx * j], k)
        })
        .collect()
}

/// Number of connected components of the mask.
pub fn lesion_count(m: &LabelMask, connectivity: Connectivity) -> usize {
    crate::components::label_components(m, connectivity).count()
}

/// All six patient-level metrics. SUVmean and SUVmax range over the union of
/// lesions; TLA sums per-lesion activity.
pub fn patient_metrics(v: &ScalarVolume, m: &LabelMask, connectivity: Connectivity) -> Result<PatientMetrics> {
    suv_volume(v, m)?;
    let lesions = connected_components(m, connectivity);
    Ok(PatientMetrics {
        suv_mean: suv_mean(v, m)?,
        suv_max: suv_max(v, m)?,
        tmtv: tmtv(m),
        tla: tla(v, &lesions)?,
        dmax: dmax(m),
        lesion_count: lesions.len(),
    })
}
