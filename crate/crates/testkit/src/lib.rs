//! Deliberately naive reference implementations. Each one recomputes a
//! quantity from first principles, sharing no code with the routine it
//! checks: flood fill instead of union-find, all voxel pairs instead of
//! extreme-point candidates, explicit nearest-centre search instead of the
//! closed-form bin index, and `statrs` instead of the in-crate t distribution.

use std::collections::VecDeque;

use petquant::agreement::TostResult;
use petquant::{Connectivity, LabelMask, PatientMetrics, ScalarVolume};
use statrs::distribution::{ContinuousCDF, StudentsT};

fn touching(a: [usize; 3], b: [usize; 3], conn: Connectivity) -> bool {
    let d: Vec<usize> = (0..3).map(|x| a[x].abs_diff(b[x])).collect();
    if d.iter().any(|&v| v > 1) {
        return false;
    }
    let moved = d.iter().filter(|&&v| v == 1).count();
    let limit = match conn {
        Connectivity::Face6 => 1,
        Connectivity::Edge18 => 2,
        Connectivity::Corner26 => 3,
    };
    moved >= 1 && moved <= limit
}

/// Components found by breadth-first flood fill, each sorted in scan order,
/// listed by their first voxel in scan order.
pub fn flood_fill(mask: &LabelMask, conn: Connectivity) -> Vec<Vec<[usize; 3]>> {
    let d = mask.dims();
    let mut seen = vec![vec![vec![false; d.nx]; d.ny]; d.nz];
    let mut out = Vec::new();
    for k in 0..d.nz {
        for j in 0..d.ny {
            for i in 0..d.nx {
                if !mask.get(i, j, k) || seen[k][j][i] {
                    continue;
                }
                seen[k][j][i] = true;
                let mut comp = vec![];
                let mut queue = VecDeque::from([[i, j, k]]);
                while let Some(v) = queue.pop_front() {
                    comp.push(v);
                    for kk in v[2].saturating_sub(1)..=(v[2] + 1).min(d.nz - 1) {
                        for jj in v[1].saturating_sub(1)..=(v[1] + 1).min(d.ny - 1) {
                            for ii in v[0].saturating_sub(1)..=(v[0] + 1).min(d.nx - 1) {
                                let w = [ii, jj, kk];
                                if mask.get(ii, jj, kk) && !seen[kk][jj][ii] && touching(v, w, conn) {
                                    seen[kk][jj][ii] = true;
                                    queue.push_back(w);
                                }
                            }
                        }
                    }
                }
                comp.sort_by_key(|v| (v[2], v[1], v[0]));
                out.push(comp);
            }
        }
    }
    out
}

/// Largest centre-to-centre distance (mm) over all pairs of foreground voxels.
pub fn all_pairs_max_distance_mm(mask: &LabelMask) -> f64 {
    let s = mask.spacing().as_array();
    let pts: Vec<[f64; 3]> = mask
        .foreground()
        .map(|v| [v[0] as f64 * s[0], v[1] as f64 * s[1], v[2] as f64 * s[2]])
        .collect();
    let mut best = 0.0f64;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            let d2: f64 = (0..3).map(|x| (pts[a][x] - pts[b][x]).powi(2)).sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

/// The six patient metrics by explicit loops over the grid.
pub fn voxel_loop_metrics(suv: &ScalarVolume, mask: &LabelMask, conn: Connectivity) -> PatientMetrics {
    let d = mask.dims();
    let s = mask.spacing().as_array();
    let cc = s[0] * s[1] * s[2] / 1000.0;
    let (mut n, mut sum, mut max) = (0usize, 0.0, 0.0f64);
    for k in 0..d.nz {
        for j in 0..d.ny {
            for i in 0..d.nx {
                if mask.get(i, j, k) {
                    let p = suv.get(i, j, k);
                    n += 1;
                    sum += p;
                    max = max.max(p);
                }
            }
        }
    }
    let comps = flood_fill(mask, conn);
    let tla = comps
        .iter()
        .map(|c| {
            let mean = c.iter().map(|v| suv.get(v[0], v[1], v[2])).sum::<f64>() / c.len() as f64;
            mean * c.len() as f64 * cc
        })
        .sum();
    PatientMetrics {
        suv_mean: if n == 0 { 0.0 } else { sum / n as f64 },
        suv_max: max,
        tmtv: n as f64 * cc,
        tla,
        dmax: all_pairs_max_distance_mm(mask) / 10.0,
        lesion_count: comps.len(),
    }
}

/// `Σ_masked P · voxel volume (cm³)`.
pub fn voxel_sum_tla(suv: &ScalarVolume, mask: &LabelMask) -> f64 {
    let s = mask.spacing().as_array();
    let cc = s[0] * s[1] * s[2] / 1000.0;
    mask.foreground().map(|v| suv.get(v[0], v[1], v[2]) * cc).sum()
}

/// `(tp, fp, fn)` from the rule stated directly: a ground-truth lesion's
/// hottest voxel (first in scan order among equals) must be covered by a
/// prediction, and every prediction can be credited once. Since predictions
/// are disjoint, tp is the number of predictions covering at least one hot voxel.
pub fn brute_force_detection(
    suv: &ScalarVolume,
    gt: &[Vec<[usize; 3]>],
    pred: &[Vec<[usize; 3]>],
) -> (usize, usize, usize) {
    let hot: Vec<[usize; 3]> = gt
        .iter()
        .map(|lesion| {
            let mut scan = lesion.clone();
            scan.sort_by_key(|v| (v[2], v[1], v[0]));
            let mut best = scan[0];
            for &v in &scan {
                if suv.get(v[0], v[1], v[2]) > suv.get(best[0], best[1], best[2]) {
                    best = v;
                }
            }
            best
        })
        .collect();
    let credited = pred.iter().filter(|p| hot.iter().any(|h| p.contains(h))).count();
    (credited, pred.len() - credited, gt.len() - credited)
}

/// Bin of `d` by explicit search for the nearest centre `k·κ`; strictly
/// closer wins, so exact midpoints stay in the lower bin.
pub fn nearest_bin(d: f64, kappa: f64) -> usize {
    let m = (1.0 / kappa).round() as usize;
    let mut best = 0;
    for k in 1..=m {
        if (d - k as f64 * kappa).abs() < (d - best as f64 * kappa).abs() - 1e-12 {
            best = k;
        }
    }
    best
}

/// Histogram recomputed by nearest-centre search.
/// Returns `(counts, weights)` per bin centre `k·κ`.
pub fn reference_histogram(deltas: &[f64], kappa: f64) -> (Vec<usize>, Vec<f64>) {
    let m = (1.0 / kappa).round() as usize;
    let mut counts = vec![0usize; m + 1];
    for &d in deltas {
        counts[nearest_bin(d, kappa)] += 1;
    }
    let weights = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let width = if k == 0 || k == m { kappa / 2.0 } else { kappa };
            if c == 0 {
                0.0
            } else {
                deltas.len() as f64 * width / c as f64
            }
        })
        .collect();
    (counts, weights)
}

/// L1-weighted squared-Dice + focal loss evaluated term by term on a
/// foreground-probability field.
pub fn reference_l1dfl(p1: &[f64], g: &[u8], kappa: f64, eps: f64, gamma: f64) -> f64 {
    let deltas: Vec<f64> = p1.iter().zip(g).map(|(p, &t)| (p - t as f64).abs()).collect();
    let (_, bin_w) = reference_histogram(&deltas, kappa);
    let w: Vec<f64> = deltas.iter().map(|&d| bin_w[nearest_bin(d, kappa)]).collect();
    let mut dice = 0.0;
    for class in [0u8, 1] {
        let (mut num, mut den) = (0.0, eps);
        for i in 0..p1.len() {
            let p = if class == 1 { p1[i] } else { 1.0 - p1[i] };
            let t = if g[i] == class { 1.0 } else { 0.0 };
            num += 2.0 * w[i] * p * t;
            den += w[i] * (p * p + t * t);
        }
        dice += num / den;
    }
    let mut focal = 0.0;
    for i in 0..p1.len() {
        let pt = if g[i] == 1 { p1[i] } else { 1.0 - p1[i] };
        focal -= (1.0 - pt).powf(gamma) * pt.max(1e-12).ln();
    }
    1.0 - dice / 2.0 + focal / 2.0
}

/// Paired equivalence test recomputed with `statrs`' t distribution.
pub fn reference_tost(y: &[f64], y_hat: &[f64], margin: f64, alpha: f64) -> TostResult {
    let n = y.len() as f64;
    let d: Vec<f64> = y_hat.iter().zip(y).map(|(a, b)| a - b).collect();
    let d_bar = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|x| (x - d_bar).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let delta = margin * y.iter().sum::<f64>() / n;
    let se = sd / n.sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 1.0).unwrap();
    let p_lower = 1.0 - t.cdf((d_bar + delta) / se);
    let p_upper = 1.0 - t.cdf((delta - d_bar) / se);
    let q = t.inverse_cdf(1.0 - alpha);
    let ci90 = (d_bar - q * se, d_bar + q * se);
    TostResult {
        delta,
        d_bar,
        sd,
        p_lower,
        p_upper,
        ci90,
        equivalent: p_lower < alpha && p_upper < alpha && ci90.0 >= -delta && ci90.1 <= delta,
    }
}

/// Student-t CDF from `statrs`.
pub fn reference_t_cdf(df: f64, x: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).unwrap().cdf(x)
}

/// Student-t quantile from `statrs`.
pub fn reference_t_quantile(df: f64, p: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df).unwrap().inverse_cdf(p)
}

/// `|a − b| ≤ tol · max(|a|, |b|)`, with exact equality required at zero.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    a == b || (a - b).abs() <= tol * a.abs().max(b.abs())
}
