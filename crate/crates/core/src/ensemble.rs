//! Voxel-wise majority voting across fold predictions.

use crate::error::{Error, Result};
use crate::volume::LabelMask;

/// Default vote threshold for `n` fold masks: a strict majority, i.e. 3 of 5.
pub fn default_threshold(n: usize) -> usize {
    n / 2 + 1
}

/// Labels a voxel as foreground when at least `threshold` of `masks` do.
pub fn majority_vote(masks: &[LabelMask], threshold: usize) -> Result<LabelMask> {
    let first = masks.first().ok_or(Error::EmptyInput)?;
    if threshold == 0 || threshold > masks.len() {
        return Err(Error::InvalidArgument(format!(
            "vote threshold {threshold} must lie in 1..={}",
            masks.len()
        )));
    }
    for m in &masks[1..] {
        first.check_same_grid(m)?;
    }
    let mut votes = vec![0u16; first.dims().len()];
    for m in masks {
        for (v, &b) in votes.iter_mut().zip(m.data()) {
            *v += u16::from(b);
        }
    }
    let data = votes.into_iter().map(|v| u8::from(v as usize >= threshold)).collect();
    LabelMask::new(first.dims(), first.spacing(), data)
}
