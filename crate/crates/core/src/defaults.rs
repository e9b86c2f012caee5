//! Default constants used across the pipeline.

/// Relative equivalence / coverage margin (±20 % of the ground truth).
pub const MARGIN: f64 = 0.2;
/// Significance level of each one-sided test.
pub const ALPHA: f64 = 0.05;
/// Percentile of absolute deviations reported as the total deviation index.
pub const TDI_TAU: f64 = 0.95;

/// Focal loss focusing exponent.
pub const FOCAL_GAMMA: f64 = 2.0;
/// Focal loss class balance.
pub const FOCAL_ALPHA: f64 = 1.0;
/// Width of the L1-norm histogram bins.
pub const BIN_WIDTH: f64 = 0.1;
/// Smoothing constant in Dice denominators.
pub const DICE_EPSILON: f64 = 1e-5;
/// Lower clamp on probabilities inside logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

/// Fold models in the ensemble and the votes needed to mark a voxel.
pub const VOTE_FOLDS: usize = 5;
pub const VOTE_THRESHOLD: usize = 3;

/// CT intensity window in Hounsfield units.
pub const CT_CLIP_MIN_HU: f64 = -1000.0;
pub const CT_CLIP_MAX_HU: f64 = 3000.0;

/// Isotropic spacing (mm) volumes are resampled to before inference.
pub const TARGET_SPACING_MM: f64 = 2.0;
