//! Lesion detection scoring.
//!
//! A ground-truth lesion counts as detected when a predicted lesion contains
//! its hottest voxel (the SUVmax voxel, ties broken by scan order). Merely
//! overlapping a lesion elsewhere does not count: that ground-truth lesion is
//! a false negative and the prediction, having no match, a false positive.
//! Each prediction is matched to at most one ground-truth lesion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lesion::Lesion;
use crate::stats;
use crate::volume::{LabelMask, ScalarVolume};

/// Outcome of matching predicted lesions against ground truth.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `(gt_index, pred_index)` pairs, in ground-truth order.
    pub matches: Vec<(usize, usize)>,
}

/// Index into `lesion` of its SUVmax voxel; ties go to the earliest voxel in
/// scan order.
pub fn suv_max_voxel(v: &ScalarVolume, lesion: &Lesion) -> Result<[usize; 3]> {
    let dims = v.dims();
    let data = v.data();
    let mut best: Option<(f64, usize)> = None;
    for idx in lesion.indices(dims)? {
        let p = data[idx];
        best = match best {
            Some((bp, bi)) if bp > p || (bp == p && bi < idx) => Some((bp, bi)),
            _ => Some((p, idx)),
        };
    }
    let (_, idx) = best.ok_or(Error::EmptyInput)?;
    Ok(dims.coords(idx))
}

/// Scores `pred` lesions against `gt` lesions on the grid of `v`.
pub fn match_lesions(v: &ScalarVolume, gt: &[Lesion], pred: &[Lesion]) -> Result<DetectionOutcome> {
    let dims = v.dims();
    // owner[idx] = 1 + index of the predicted lesion covering voxel idx
    let mut owner = vec![0u32; dims.len()];
    for (p, lesion) in pred.iter().enumerate() {
        for idx in lesion.indices(dims)? {
            owner[idx] = p as u32 + 1;
        }
    }
    let mut taken = vec![false; pred.len()];
    let mut matches = Vec::new();
    for (g, lesion) in gt.iter().enumerate() {
        let hot = suv_max_voxel(v, lesion)?;
        let o = owner[dims.index(hot[0], hot[1], hot[2])];
        if o != 0 && !taken[o as usize - 1] {
            taken[o as usize - 1] = true;
            matches.push((g, o as usize - 1));
        }
    }
    let tp = matches.len();
    Ok(DetectionOutcome {
        tp,
        fp: pred.len() - tp,
        fn_: gt.len() - tp,
        matches,
    })
}

/// `TP / (TP + (FP + FN) / 2)`, or `None` when all three counts are zero.
pub fn f1_score(o: &DetectionOutcome) -> Option<f64> {
    let denom = o.tp as f64 + 0.5 * (o.fp + o.fn_) as f64;
    (denom > 0.0).then(|| o.tp as f64 / denom)
}

/// Dice similarity `2|G∩P| / (|G| + |P|)`; 1 when both masks are empty.
pub fn dice_coefficient(gt: &LabelMask, pred: &LabelMask) -> Result<f64> {
    gt.check_same_grid(pred)?;
    let (mut inter, mut g, mut p) = (0usize, 0usize, 0usize);
    for (&a, &b) in gt.data().iter().zip(pred.data()) {
        g += a as usize;
        p += b as usize;
        inter += (a & b) as usize;
    }
    if g + p == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (g + p) as f64)
}

/// Table-style summary of a per-patient score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub median: f64,
    /// `(q25, q75)` by linear interpolation.
    pub iqr: (f64, f64),
}

pub fn cohort_summary(values: &[f64]) -> Result<CohortSummary> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(CohortSummary {
        mean: stats::mean(values),
        std: stats::variance(values, 0).sqrt(),
        median: stats::quantile_sorted(&sorted, 0.5),
        iqr: (stats::quantile_sorted(&sorted, 0.25), stats::quantile_sorted(&sorted, 0.75)),
    })
}
