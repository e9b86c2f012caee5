use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use petquant::agreement::AgreementConfig;
use petquant::defaults;
use petquant::losses::{LossConfig, WeightMode};
use petquant::Connectivity;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cli::{GlobalArgs, OutputFormat};

/// Effective settings: built-in defaults, then the config file, then flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub out_dir: PathBuf,
    pub connectivity: u8,
    pub delta: f64,
    pub alpha: f64,
    pub tau: f64,
    /// `None` means a strict majority of however many masks there are.
    pub vote: Option<usize>,
    pub seed: u64,
    pub format: OutputFormat,
    pub gamma: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub focal_alpha: f64,
    pub jobs: usize,
    pub resample: Option<f64>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            out_dir: PathBuf::from("."),
            connectivity: 26,
            delta: defaults::MARGIN,
            alpha: defaults::ALPHA,
            tau: defaults::TDI_TAU,
            vote: None,
            seed: 0,
            format: OutputFormat::Csv,
            gamma: defaults::FOCAL_GAMMA,
            kappa: defaults::BIN_WIDTH,
            epsilon: defaults::DICE_EPSILON,
            focal_alpha: defaults::FOCAL_ALPHA,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get().min(8)),
            resample: None,
        }
    }
}

impl Config {
    pub fn load(args: &GlobalArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => Self::from_file(path)?,
            None => Config::default(),
        };
        cfg.apply(args);
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    fn apply(&mut self, a: &GlobalArgs) {
        if let Some(v) = &a.out_dir {
            self.out_dir = v.clone();
        }
        if let Some(v) = &a.connectivity {
            self.connectivity = v.parse().expect("clap restricts connectivity values");
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = a.$field {
                    self.$field = v;
                }
            )*};
        }
        set!(delta, alpha, tau, seed, format, gamma, kappa, epsilon, focal_alpha, jobs);
        if a.vote.is_some() {
            self.vote = a.vote;
        }
        if a.resample.is_some() {
            self.resample = a.resample;
        }
    }

    fn validate(&self) -> Result<()> {
        self.connectivity()?;
        self.agreement().validate()?;
        self.losses().validate()?;
        if self.vote == Some(0) {
            bail!("--vote must be at least 1");
        }
        if self.jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        if let Some(mm) = self.resample {
            if !(mm > 0.0 && mm.is_finite()) {
                bail!("--resample must be a positive spacing, got {mm}");
            }
        }
        Ok(())
    }

    pub fn connectivity(&self) -> Result<Connectivity> {
        Ok(Connectivity::from_neighbours(self.connectivity as usize)?)
    }

    pub fn agreement(&self) -> AgreementConfig {
        AgreementConfig {
            delta_fraction: self.delta,
            alpha: self.alpha,
            tau: self.tau,
        }
    }

    pub fn losses(&self) -> LossConfig {
        LossConfig {
            epsilon: self.epsilon,
            gamma: self.gamma,
            alpha: self.focal_alpha,
            kappa: self.kappa,
            weight_mode: WeightMode::PerVoxel,
            ..LossConfig::default()
        }
    }

    /// The configuration plus the fixed constants it does not expose.
    pub fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v["vote_default"] = json!({
            "folds": defaults::VOTE_FOLDS,
            "threshold": defaults::VOTE_THRESHOLD,
        });
        v["ct_clip_hu"] = json!([defaults::CT_CLIP_MIN_HU, defaults::CT_CLIP_MAX_HU]);
        v["log_clamp"] = json!(defaults::LOG_CLAMP);
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"delta": 0.1, "tau": 0.9, "connectivity": 6}"#).unwrap();
        let args = GlobalArgs {
            config: Some(path),
            tau: Some(0.8),
            ..GlobalArgs::default()
        };
        let c = Config::load(&args).unwrap();
        assert_eq!((c.delta, c.tau, c.connectivity, c.alpha), (0.1, 0.8, 6, 0.05));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"margin": 0.1}"#).unwrap();
        assert!(Config::load(&GlobalArgs { config: Some(path), ..GlobalArgs::default() }).is_err());
        assert!(Config::load(&GlobalArgs { alpha: Some(0.7), ..GlobalArgs::default() }).is_err());
        assert!(Config::load(&GlobalArgs { kappa: Some(0.3), ..GlobalArgs::default() }).is_err());
    }

    #[test]
    fn echo_has_constants() {
        let e = Config::default().echo();
        assert_eq!(e["delta"], 0.2);
        assert_eq!(e["ct_clip_hu"], json!([-1000.0, 3000.0]));
        assert_eq!(e["vote_default"]["threshold"], 3);
    }
}
