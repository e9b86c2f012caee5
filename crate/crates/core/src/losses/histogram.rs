//! Histogram of per-voxel L1 errors and the density-based voxel weights
//! derived from it.
//!
//! Bins are centred at `k·κ` for `k = 0..=1/κ`. A value falls into the bin
//! whose centre lies within `κ/2`; at an exact midpoint the lower bin wins.
//! The two end bins only cover half a width of `[0, 1]`, so their effective
//! width is `κ/2`. The density of a bin is `count / width`, and voxels in it
//! receive weight `N / density`. Empty bins carry weight 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One histogram bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub center: f64,
    pub count: usize,
    pub width: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormHistogram {
    kappa: f64,
    total: usize,
    bins: Vec<Bin>,
}

/// Number of bin centres `k·κ` on `[0, 1]`, validating that `1/κ` is integral.
pub(crate) fn bin_count(kappa: f64) -> Result<usize> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidArgument(format!("bin width {kappa} must lie in (0, 1]")));
    }
    let steps = (1.0 / kappa).round();
    if ((1.0 / kappa) - steps).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("1 / bin width must be an integer, got {}", 1.0 / kappa)));
    }
    Ok(steps as usize + 1)
}

/// Index of the bin holding `delta`. Midpoints go to the lower bin and
/// `delta = 1` to the top bin.
pub(crate) fn bin_index(delta: f64, kappa: f64, n_bins: usize) -> usize {
    // Bin k covers (kκ - κ/2, kκ + κ/2]; bin 0 additionally holds 0.
    let x = delta / kappa - 0.5;
    let nearest = x.round();
    let x = if (x - nearest).abs() < 1e-9 { nearest } else { x };
    (x.ceil().max(0.0) as usize).min(n_bins - 1)
}

impl NormHistogram {
    /// Bins `deltas` with bin width `kappa`.
    pub fn new(deltas: &[f64], kappa: f64) -> Result<Self> {
        let n_bins = bin_count(kappa)?;
        if let Some(d) = deltas.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return Err(Error::InvalidValue(format!("L1 norm {d} outside [0, 1]")));
        }
        let mut counts = vec![0usize; n_bins];
        for &d in deltas {
            counts[bin_index(d, kappa, n_bins)] += 1;
        }
        let total = deltas.len();
        let bins = counts
            .into_iter()
            .enumerate()
            .map(|(k, count)| {
                let width = if k == 0 || k == n_bins - 1 { kappa / 2.0 } else { kappa };
                let weight = if count == 0 {
                    0.0
                } else {
                    let density = count as f64 / width;
                    total as f64 / density
                };
                Bin {
                    center: k as f64 * kappa,
                    count,
                    width,
                    weight,
                }
            })
            .collect();
        Ok(NormHistogram { kappa, total, bins })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Number of binned values `N`.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn bin_of(&self, delta: f64) -> usize {
        bin_index(delta, self.kappa, self.bins.len())
    }

    /// Weight of the bin holding `delta`.
    pub fn weight_of(&self, delta: f64) -> f64 {
        self.bins[self.bin_of(delta)].weight
    }

    /// Per-voxel weights for the values this histogram was built from.
    pub fn voxel_weights(&self, deltas: &[f64]) -> Vec<f64> {
        deltas.iter().map(|&d| self.weight_of(d)).collect()
    }
}
