use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

// Flags are optional so that unset ones fall back to the config file; the
// defaults they fall back to are spelled out in the help text.
const CONNECTIVITY_HELP: &str = "Lesion connectivity: 6 (faces), 18 (edges) or 26 (corners) [default: 26]";
const DELTA_HELP: &str = "Equivalence and coverage margin as a fraction of the ground truth [default: 0.2]";
const ALPHA_HELP: &str = "Significance level of each one-sided equivalence test [default: 0.05]";
const TAU_HELP: &str = "Percentile for the total deviation index [default: 0.95]";
const VOTE_HELP: &str = "Fold masks needed to keep a voxel [default: strict majority, 3 of 5]";
const SEED_HELP: &str = "Seed for phantoms and perturbations [default: 0]";
const FORMAT_HELP: &str = "Format of tabular outputs [default: csv]";
const GAMMA_HELP: &str = "Focal exponent [default: 2]";
const KAPPA_HELP: &str = "L1-norm histogram bin width [default: 0.1]";
const EPSILON_HELP: &str = "Dice smoothing constant [default: 0.00001]";
const FOCAL_ALPHA_HELP: &str = "Focal class weight [default: 1]";
const JOBS_HELP: &str = "Patients processed in parallel [default: available cores, at most 8]";
const RESAMPLE_HELP: &str = "Resample volumes and masks to this isotropic spacing (mm) before measuring [default: off]";

/// Lesion metrics, detection scoring, loss kernels and agreement statistics
/// for PET/CT lesion segmentations.
///
/// CT intensities are clipped to [-1000, 3000] HU before normalization.
#[derive(Debug, Parser)]
#[command(name = "petquant", version, propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct GlobalArgs {
    /// JSON config file; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Print the effective configuration as JSON and exit
    #[arg(long, global = true)]
    pub print_config: bool,

    /// Directory for output files [default: current directory]
    #[arg(long, global = true, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    #[arg(long, global = true, help = CONNECTIVITY_HELP, value_parser = ["6", "18", "26"])]
    pub connectivity: Option<String>,

    #[arg(long, global = true, help = DELTA_HELP)]
    pub delta: Option<f64>,

    #[arg(long, global = true, help = ALPHA_HELP)]
    pub alpha: Option<f64>,

    #[arg(long, global = true, help = TAU_HELP)]
    pub tau: Option<f64>,

    #[arg(long, global = true, value_name = "K", help = VOTE_HELP)]
    pub vote: Option<usize>,

    #[arg(long, global = true, value_name = "N", help = SEED_HELP)]
    pub seed: Option<u64>,

    #[arg(long, global = true, help = FORMAT_HELP)]
    pub format: Option<OutputFormat>,

    #[arg(long, global = true, help = GAMMA_HELP)]
    pub gamma: Option<f64>,

    #[arg(long, global = true, help = KAPPA_HELP)]
    pub kappa: Option<f64>,

    #[arg(long, global = true, help = EPSILON_HELP)]
    pub epsilon: Option<f64>,

    #[arg(long, global = true, help = FOCAL_ALPHA_HELP)]
    pub focal_alpha: Option<f64>,

    #[arg(long, global = true, help = JOBS_HELP)]
    pub jobs: Option<usize>,

    #[arg(long, global = true, value_name = "MM", help = RESAMPLE_HELP)]
    pub resample: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VolumeFileFormat {
    /// gzipped NIfTI-1 (.nii.gz)
    Nifti,
    /// raw little-endian float32 with a JSON sidecar
    Rawjson,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the six patient metrics for ground truth and prediction of every manifest row
    Extract {
        #[arg(long, value_name = "CSV")]
        manifest: PathBuf,
    },
    /// Score predicted lesions against ground truth (TP/FP/FN, F1, Dice) per patient
    Detect {
        #[arg(long, value_name = "CSV")]
        manifest: PathBuf,
    },
    /// Agreement statistics for each metric, plus a cohort detection summary
    Evaluate {
        /// Metrics file written by `extract` holding both gt and pred rows
        #[arg(long, value_name = "FILE", conflicts_with_all = ["gt", "pred"])]
        metrics: Option<PathBuf>,
        /// Metrics file whose gt rows are the reference
        #[arg(long, value_name = "FILE", requires = "pred")]
        gt: Option<PathBuf>,
        /// Metrics file whose pred rows are compared
        #[arg(long, value_name = "FILE", requires = "gt")]
        pred: Option<PathBuf>,
        /// Per-patient detection file written by `detect`
        #[arg(long, value_name = "FILE")]
        detection: Option<PathBuf>,
        /// Label for the model/loss configuration in the reports
        #[arg(long, default_value = "pred")]
        label: String,
    },
    /// Majority-vote fold masks into one mask
    Vote {
        #[arg(long, num_args = 1.., required = true, value_name = "MASK")]
        masks: Vec<PathBuf>,
        /// Output mask (.nii, .nii.gz or .raw)
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Evaluate every loss kernel on a probability map against a label mask
    Loss {
        /// Lesion probability volume with values in [0, 1]
        #[arg(long, value_name = "FILE")]
        prob: PathBuf,
        #[arg(long, value_name = "FILE")]
        truth: PathBuf,
        /// Scale the plain squared Dice by the mean weight instead of weighting each voxel
        #[arg(long)]
        scalar_weight: bool,
    },
    /// Write a seeded synthetic cohort with fold predictions and expected metrics
    Phantom {
        #[arg(long, default_value_t = 20)]
        patients: usize,
        /// Grid size nx,ny,nz
        #[arg(long, value_delimiter = ',', default_values_t = [32, 32, 32])]
        dims: Vec<usize>,
        /// Voxel spacing in mm, sx,sy,sz
        #[arg(long, value_delimiter = ',', default_values_t = [2.0, 2.0, 2.0])]
        spacing: Vec<f64>,
        #[arg(long, default_value_t = 4)]
        max_lesions: usize,
        /// Perturbed prediction masks per patient
        #[arg(long, default_value_t = 5)]
        folds: usize,
        /// Background noise standard deviation
        #[arg(long, default_value_t = 0.2)]
        noise_sd: f64,
        #[arg(long, value_enum, default_value_t = VolumeFileFormat::Nifti)]
        volume_format: VolumeFileFormat,
    },
}
