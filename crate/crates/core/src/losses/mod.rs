//! Loss values for two-class (background / lesion) segmentation.
//!
//! These are forward evaluations only; nothing here computes gradients.
//! Every loss is a sum over voxels and classes `c ∈ {0, 1}` of a probability
//! field `p` against a one-hot ground truth `g`:
//!
//! - Dice: `1 − ½ Σ_c 2Σ p g / (Σ p + Σ g + ε)`
//! - squared Dice: as Dice with `Σ p² + Σ g²` in the denominator
//! - cross-entropy: `−½ Σ_c Σ_i g log p`
//! - focal: `−½ Σ_i α (1 − p_t)^γ log p_t`, `p_t` the true-class probability
//! - DCE = Dice + cross-entropy, DFL = Dice + focal
//! - L1DFL: squared Dice with per-voxel weights from the L1 error
//!   histogram ([`NormHistogram`]), plus focal.

mod histogram;

use serde::{Deserialize, Serialize};

pub use histogram::{Bin, NormHistogram};

use crate::defaults;
use crate::error::{Error, Result};
use crate::volume::{Dims, LabelMask, ScalarVolume};

/// Predicted class probabilities paired with a one-hot ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField {
    dims: Dims,
    background: Vec<f64>,
    foreground: Vec<f64>,
    truth: Vec<u8>,
}

impl ProbabilityField {
    /// Builds a field from explicit per-class probabilities. The two channels
    /// must sum to 1 per voxel within 1e-6.
    pub fn from_channels(dims: Dims, background: Vec<f64>, foreground: Vec<f64>, truth: Vec<u8>) -> Result<Self> {
        for len in [background.len(), foreground.len(), truth.len()] {
            if len != dims.len() {
                return Err(Error::SizeMismatch {
                    dims: dims.as_array(),
                    expected: dims.len(),
                    actual: len,
                });
            }
        }
        for (idx, (&p0, &p1)) in background.iter().zip(&foreground).enumerate() {
            let valid = (0.0..=1.0).contains(&p0) && (0.0..=1.0).contains(&p1) && (p0 + p1 - 1.0).abs() <= 1e-6;
            if !valid {
                return Err(Error::InvalidValue(format!(
                    "probabilities ({p0}, {p1}) at voxel {:?} are not a distribution",
                    dims.coords(idx)
                )));
            }
        }
        if let Some(g) = truth.iter().find(|&&g| g > 1) {
            return Err(Error::InvalidValue(format!("ground-truth label {g} is not 0 or 1")));
        }
        Ok(ProbabilityField {
            dims,
            background,
            foreground,
            truth,
        })
    }

    /// Builds a field from the lesion-class probability alone.
    pub fn from_foreground(dims: Dims, foreground: Vec<f64>, truth: Vec<u8>) -> Result<Self> {
        let background = foreground.iter().map(|p| 1.0 - p).collect();
        Self::from_channels(dims, background, foreground, truth)
    }

    /// Builds a field from a probability volume and a ground-truth mask on
    /// the same grid.
    pub fn from_volume(prob: &ScalarVolume, truth: &LabelMask) -> Result<Self> {
        prob.check_same_grid(truth)?;
        Self::from_foreground(prob.dims(), prob.data().to_vec(), truth.data().to_vec())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    /// Probability of class `c` (0 background, 1 lesion) at every voxel.
    pub fn probabilities(&self, class: usize) -> &[f64] {
        match class {
            0 => &self.background,
            _ => &self.foreground,
        }
    }

    /// One-hot ground-truth value of class `c` at voxel `i`.
    #[inline]
    pub fn truth(&self, class: usize, i: usize) -> f64 {
        let g = self.truth[i];
        if (class == 1) == (g == 1) {
            1.0
        } else {
            0.0
        }
    }

    pub fn labels(&self) -> &[u8] {
        &self.truth
    }

    /// Probability assigned to the true class of voxel `i`.
    #[inline]
    fn true_class_probability(&self, i: usize) -> f64 {
        if self.truth[i] == 1 {
            self.foreground[i]
        } else {
            self.background[i]
        }
    }
}

/// How the L1-histogram weights enter the squared Dice term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// Each voxel's weight multiplies its terms inside the Dice sums.
    #[default]
    PerVoxel,
    /// The mean voxel weight scales the unweighted squared Dice loss.
    ScalarMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Added to Dice denominators.
    pub epsilon: f64,
    /// Focal exponent.
    pub gamma: f64,
    /// Focal class balance.
    pub alpha: f64,
    /// Histogram bin width.
    pub kappa: f64,
    /// Probabilities are clamped to at least this before taking logs.
    pub log_clamp: f64,
    pub weight_mode: WeightMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            epsilon: defaults::DICE_EPSILON,
            gamma: defaults::FOCAL_GAMMA,
            alpha: defaults::FOCAL_ALPHA,
            kappa: defaults::BIN_WIDTH,
            log_clamp: defaults::LOG_CLAMP,
            weight_mode: WeightMode::PerVoxel,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidArgument("gamma must be non-negative".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument("alpha must be positive".into()));
        }
        if !(self.log_clamp > 0.0 && self.log_clamp < 1.0) {
            return Err(Error::InvalidArgument("log clamp must lie in (0, 1)".into()));
        }
        histogram::bin_count(self.kappa).map(|_| ())
    }
}

fn dice_ratio_sum(f: &ProbabilityField, eps: f64, squared: bool, weights: Option<&[f64]>) -> f64 {
    let mut total = 0.0;
    for class in 0..2 {
        let p = f.probabilities(class);
        let (mut inter, mut sp, mut sg) = (0.0, 0.0, 0.0);
        for (i, &pi) in p.iter().enumerate() {
            let gi = f.truth(class, i);
            let w = weights.map_or(1.0, |w| w[i]);
            inter += w * pi * gi;
            if squared {
                sp += w * pi * pi;
                sg += w * gi * gi;
            } else {
                sp += w * pi;
                sg += w * gi;
            }
        }
        total += 2.0 * inter / (sp + sg + eps);
    }
    total
}

/// Soft Dice loss, in `[0, 1]`.
pub fn dice_loss(f: &ProbabilityField, cfg: &LossConfig) -> f64 {
    1.0 - 0.5 * dice_ratio_sum(f, cfg.epsilon, false, None)
}

/// Dice loss with squared denominators, in `[0, 1]`.
pub fn squared_dice_loss(f: &ProbabilityField, cfg: &LossConfig) -> f64 {
    1.0 - 0.5 * dice_ratio_sum(f, cfg.epsilon, true, None)
}

/// Cross-entropy summed over voxels, halved over the two classes.
pub fn cross_entropy_loss(f: &ProbabilityField, cfg: &LossConfig) -> f64 {
    let sum: f64 = (0..f.len())
        .map(|i| -f.true_class_probability(i).max(cfg.log_clamp).ln())
        .sum();
    0.5 * sum
}

/// Focal loss over each voxel's true class.
pub fn focal_loss(f: &ProbabilityField, cfg: &LossConfig) -> f64 {
    let sum: f64 = (0..f.len())
        .map(|i| {
            let pt = f.true_class_probability(i);
            -cfg.alpha * (1.0 - pt).powf(cfg.gamma) * pt.max(cfg.log_clamp).ln()
        })
        .sum();
    0.5 * sum
}

/// Dice + cross-entropy.
pub fn dce_loss(f: &ProbabilityField, cfg: &LossConfig) -> f64 {
    dice_loss(f, cfg) + cross_entropy_loss(f, cfg)
}

/// Dice + focal.
pub fn dfl_loss(f: &ProbabilityField, cfg: &LossConfig) -> f64 {
    dice_loss(f, cfg) + focal_loss(f, cfg)
}

/// Per-voxel absolute error of the lesion-channel probability,
/// `|p(1) − g(1)|`. With complementary channels the background error is
/// identical.
pub fn l1_norms(f: &ProbabilityField) -> Vec<f64> {
    f.foreground
        .iter()
        .zip(&f.truth)
        .map(|(&p, &g)| (p - g as f64).abs())
        .collect()
}

/// Histogram of the field's L1 norms with bin width `cfg.kappa`.
pub fn norm_histogram(deltas: &[f64], cfg: &LossConfig) -> Result<NormHistogram> {
    NormHistogram::new(deltas, cfg.kappa)
}

/// L1DFL broken into its parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1dflBreakdown {
    /// Weighted squared Dice term.
    pub weighted_dice: f64,
    pub focal: f64,
    pub total: f64,
    pub histogram: NormHistogram,
}

/// Evaluates L1DFL and returns its components.
pub fn l1dfl_breakdown(f: &ProbabilityField, cfg: &LossConfig) -> Result<L1dflBreakdown> {
    cfg.validate()?;
    let deltas = l1_norms(f);
    let histogram = norm_histogram(&deltas, cfg)?;
    let weights = histogram.voxel_weights(&deltas);
    let weighted_dice = match cfg.weight_mode {
        WeightMode::PerVoxel => 1.0 - 0.5 * dice_ratio_sum(f, cfg.epsilon, true, Some(&weights)),
        WeightMode::ScalarMean => {
            let mean_w = weights.iter().sum::<f64>() / weights.len().max(1) as f64;
            mean_w * squared_dice_loss(f, cfg)
        }
    };
    let focal = focal_loss(f, cfg);
    Ok(L1dflBreakdown {
        weighted_dice,
        focal,
        total: weighted_dice + focal,
        histogram,
    })
}

/// L1-weighted Dice focal loss.
pub fn l1dfl_loss(f: &ProbabilityField, cfg: &LossConfig) -> Result<f64> {
    l1dfl_breakdown(f, cfg).map(|b| b.total)
}

/// All loss values for one field, as reported by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub dice: f64,
    pub sdice: f64,
    pub ce: f64,
    pub focal: f64,
    pub dce: f64,
    pub dfl: f64,
    pub l1dfl: f64,
    pub histogram: Vec<Bin>,
}

pub fn loss_report(f: &ProbabilityField, cfg: &LossConfig) -> Result<LossReport> {
    let l1 = l1dfl_breakdown(f, cfg)?;
    Ok(LossReport {
        dice: dice_loss(f, cfg),
        sdice: squared_dice_loss(f, cfg),
        ce: cross_entropy_loss(f, cfg),
        focal: focal_loss(f, cfg),
        dce: dce_loss(f, cfg),
        dfl: dfl_loss(f, cfg),
        l1dfl: l1.total,
        histogram: l1.histogram.bins().to_vec(),
    })
}
