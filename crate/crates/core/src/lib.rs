//! Quantification of lesions segmented in PET/CT scans.
//!
//! * [`volume`] and [`io`]: voxel grids, NIfTI-1 and raw+JSON files.
//! * [`preprocess`] and [`ensemble`]: CT normalization, resampling, SUV
//!   conversion and majority voting over fold predictions.
//! * [`components`], [`metrics`]: connected lesions and the six
//!   patient-level metrics (SUVmean, SUVmax, TMTV, TLA, Dmax, lesion count).
//! * [`detection`]: hottest-voxel lesion matching, F1 and Dice.
//! * [`losses`]: Dice, cross-entropy, focal and L1-norm-weighted losses.
//! * [`agreement`]: CCC, equivalence tests, Bland-Altman, coverage
//!   probability and total deviation index.
//! * [`phantom`]: seeded synthetic cases with metrics known in advance.
//!
//! ```
//! use petquant::{generate_phantom, patient_metrics, Connectivity, Dims, LesionSpec, PhantomSpec, VoxelSpacing};
//!
//! let spec = PhantomSpec {
//!     seed: 0,
//!     dims: Dims::new(10, 10, 10)?,
//!     spacing: VoxelSpacing::isotropic(2.0)?,
//!     lesions: vec![LesionSpec { center: [4.5, 4.0, 4.0], radius_mm: 2.5, suv_peak: 5.0, falloff: 0.0 }],
//!     background_suv: 0.0,
//!     noise_sd: 0.0,
//! };
//! let ph = generate_phantom(&spec)?;
//! let m = patient_metrics(&ph.suv, &ph.mask, Connectivity::default())?;
//! assert_eq!(m.lesion_count, 1);
//! assert!((m.tmtv - 0.08).abs() < 1e-12);
//! # Ok::<(), petquant::Error>(())
//! ```

pub mod agreement;
pub mod components;
pub mod defaults;
pub mod detection;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod lesion;
pub mod losses;
pub mod metrics;
pub mod phantom;
pub mod preprocess;
pub mod stats;
pub mod volume;

pub use agreement::{agreement_report, AgreementConfig, AgreementReport, CccBand, PairedSeries};
pub use components::connected_components;
pub use detection::{cohort_summary, dice_coefficient, f1_score, match_lesions, CohortSummary, DetectionOutcome};
pub use ensemble::majority_vote;
pub use error::{Error, Result};
pub use lesion::Lesion;
pub use losses::{loss_report, LossConfig, LossReport, ProbabilityField};
pub use metrics::{patient_metrics, PatientMetrics};
pub use phantom::{generate_phantom, perturb_mask, LesionSpec, PerturbationSpec, Phantom, PhantomSpec};
pub use volume::{Connectivity, Dims, LabelMask, ScalarVolume, VolumeKind, VoxelSpacing};

// Guide chapters run as doc-tests so their snippets stay in sync with the API.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/volumes.md")]
    mod volumes {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/agreement.md")]
    mod agreement {}
    #[doc = include_str!("../../../book/src/phantoms.md")]
    mod phantoms {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../README.md")]
    mod readme {}
}
