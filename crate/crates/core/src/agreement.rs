//! Agreement between predicted and ground-truth values of one metric across
//! a cohort: concordance, equivalence, Bland-Altman differences, coverage
//! probability and total deviation index.

use serde::{Deserialize, Serialize};

use crate::defaults;
use crate::error::{Error, Result};
use crate::stats::{self, StudentT};

/// Paired per-patient values of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    metric: String,
    truth: Vec<f64>,
    predicted: Vec<f64>,
}

impl PairedSeries {
    pub fn new(metric: impl Into<String>, truth: Vec<f64>, predicted: Vec<f64>) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::InvalidArgument(format!(
                "{} ground-truth values but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        if truth.is_empty() {
            return Err(Error::EmptyInput);
        }
        if truth.iter().chain(&predicted).any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("paired values must be finite".into()));
        }
        Ok(PairedSeries {
            metric: metric.into(),
            truth,
            predicted,
        })
    }

    pub fn from_pairs(metric: impl Into<String>, pairs: &[(f64, f64)]) -> Result<Self> {
        let (truth, predicted) = pairs.iter().copied().unzip();
        Self::new(metric, truth, predicted)
    }

    pub fn metric(&self) -> &str {
        &self.metric
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }

    /// Differences `ŷ − y`.
    pub fn differences(&self) -> Vec<f64> {
        self.predicted.iter().zip(&self.truth).map(|(p, t)| p - t).collect()
    }

    fn require(&self, n: usize) -> Result<()> {
        if self.len() < n {
            Err(Error::InvalidArgument(format!(
                "{} needs at least {n} pairs, got {}",
                self.metric,
                self.len()
            )))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgreementConfig {
    /// Equivalence / coverage margin as a fraction of the ground truth.
    pub delta_fraction: f64,
    /// Significance level of each one-sided test.
    pub alpha: f64,
    /// Percentile for the total deviation index.
    pub tau: f64,
}

impl Default for AgreementConfig {
    fn default() -> Self {
        AgreementConfig {
            delta_fraction: defaults::MARGIN,
            alpha: defaults::ALPHA,
            tau: defaults::TDI_TAU,
        }
    }
}

impl AgreementConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_fraction > 0.0 && self.delta_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!("margin {} must lie in (0, 1)", self.delta_fraction)));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::InvalidArgument(format!("alpha {} must lie in (0, 0.5)", self.alpha)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidArgument(format!("tau {} must lie in (0, 1]", self.tau)));
        }
        Ok(())
    }
}

/// Lin's concordance correlation coefficient with population moments.
///
/// Returns `None` when both series are constant with equal means (0/0).
pub fn ccc(s: &PairedSeries) -> Option<f64> {
    let (y, yh) = (s.truth(), s.predicted());
    let (my, myh) = (stats::mean(y), stats::mean(yh));
    let n = y.len() as f64;
    let cov = y.iter().zip(yh).map(|(a, b)| (a - my) * (b - myh)).sum::<f64>() / n;
    let var_y = stats::variance(y, 0);
    let var_yh = stats::variance(yh, 0);
    let denom = var_y + var_yh + (myh - my) * (myh - my);
    (denom > 0.0).then(|| 2.0 * cov / denom)
}

/// Interpretation bands for concordance values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CccBand {
    AlmostPerfect,
    Substantial,
    Moderate,
    Poor,
}

pub fn ccc_band(c: f64) -> CccBand {
    if c > 0.99 {
        CccBand::AlmostPerfect
    } else if c > 0.95 {
        CccBand::Substantial
    } else if c > 0.90 {
        CccBand::Moderate
    } else {
        CccBand::Poor
    }
}

/// Paired two one-sided t-tests against bounds `±delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TostResult {
    /// Equivalence bound, `delta_fraction × mean(y)`.
    pub delta: f64,
    /// Mean difference `ŷ − y`.
    pub d_bar: f64,
    /// Sample standard deviation of the differences.
    pub sd: f64,
    /// p-value of `H0: d̄ ≤ −delta`.
    pub p_lower: f64,
    /// p-value of `H0: d̄ ≥ delta`.
    pub p_upper: f64,
    /// `1 − 2α` confidence interval of the mean difference.
    pub ci90: (f64, f64),
    pub equivalent: bool,
}

pub fn tost(s: &PairedSeries, cfg: &AgreementConfig) -> Result<TostResult> {
    s.require(2)?;
    let d = s.differences();
    let n = d.len() as f64;
    let d_bar = stats::mean(&d);
    let sd = stats::variance(&d, 1).sqrt();
    let delta = cfg.delta_fraction * stats::mean(s.truth());

    if sd == 0.0 {
        let p_lower = if d_bar > -delta { 0.0 } else { 1.0 };
        let p_upper = if d_bar < delta { 0.0 } else { 1.0 };
        return Ok(TostResult {
            delta,
            d_bar,
            sd,
            p_lower,
            p_upper,
            ci90: (d_bar, d_bar),
            equivalent: d_bar.abs() < delta,
        });
    }

    let se = sd / n.sqrt();
    let t = StudentT::new(n - 1.0)?;
    let p_lower = t.sf((d_bar + delta) / se);
    let p_upper = t.sf((delta - d_bar) / se);
    let half = t.inverse_cdf(1.0 - cfg.alpha) * se;
    let ci90 = (d_bar - half, d_bar + half);
    let equivalent = p_lower < cfg.alpha && p_upper < cfg.alpha && ci90.0 >= -delta && ci90.1 <= delta;
    Ok(TostResult {
        delta,
        d_bar,
        sd,
        p_lower,
        p_upper,
        ci90,
        equivalent,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlandAltmanPoint {
    /// Ground-truth value (x axis).
    pub y: f64,
    /// `ŷ − y` (y axis).
    pub diff: f64,
    /// Whether `|diff|` exceeds the limit.
    pub outside: bool,
}

/// Differences plotted against the ground truth, with limits at
/// `±delta_fraction × mean(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman {
    pub bias: f64,
    pub limit: f64,
    pub points: Vec<BlandAltmanPoint>,
}

pub fn bland_altman(s: &PairedSeries, cfg: &AgreementConfig) -> BlandAltman {
    let d = s.differences();
    let limit = cfg.delta_fraction * stats::mean(s.truth());
    let points = s
        .truth()
        .iter()
        .zip(&d)
        .map(|(&y, &diff)| BlandAltmanPoint {
            y,
            diff,
            outside: diff.abs() > limit,
        })
        .collect();
    BlandAltman {
        bias: stats::mean(&d),
        limit,
        points,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub value: f64,
    /// Wilson score 95 % interval.
    pub ci95: (f64, f64),
}

const Z_975: f64 = 1.959_963_984_540_054;

fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z_975 * Z_975;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z_975 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the interval always contains p; guard against rounding at p = 0 or 1
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

/// Fraction of patients with `|ŷ − y| ≤ δ·y`.
pub fn coverage_probability(s: &PairedSeries, cfg: &AgreementConfig) -> Coverage {
    let covered = s
        .truth()
        .iter()
        .zip(s.predicted())
        .filter(|(&y, &yh)| (yh - y).abs() <= cfg.delta_fraction * y)
        .count();
    Coverage {
        value: covered as f64 / s.len() as f64,
        ci95: wilson_interval(covered, s.len()),
    }
}

/// The `tau`-quantile of `|ŷ − y|` (linear interpolation).
pub fn tdi(s: &PairedSeries, cfg: &AgreementConfig) -> Result<f64> {
    let abs: Vec<f64> = s.differences().iter().map(|d| d.abs()).collect();
    stats::quantile(&abs, cfg.tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TdiResult {
    pub tau: f64,
    pub value: f64,
}

/// Every agreement statistic for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub metric: String,
    pub n: usize,
    pub ccc: Option<f64>,
    pub ccc_band: Option<CccBand>,
    pub tost: TostResult,
    pub ba: BlandAltman,
    pub cp: Coverage,
    pub tdi: TdiResult,
}

pub fn agreement_report(s: &PairedSeries, cfg: &AgreementConfig) -> Result<AgreementReport> {
    cfg.validate()?;
    let c = ccc(s);
    Ok(AgreementReport {
        metric: s.metric().to_string(),
        n: s.len(),
        ccc: c,
        ccc_band: c.map(ccc_band),
        tost: tost(s, cfg)?,
        ba: bland_altman(s, cfg),
        cp: coverage_probability(s, cfg),
        tdi: TdiResult {
            tau: cfg.tau,
            value: tdi(s, cfg)?,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn series(y: &[f64], yh: &[f64]) -> PairedSeries {
        PairedSeries::new("m", y.to_vec(), yh.to_vec()).unwrap()
    }

    #[test]
    fn ccc_examples() {
        assert_eq!(ccc(&series(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0])), Some(1.0));
        assert_relative_eq!(ccc(&series(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0])).unwrap(), -1.0, epsilon = 1e-15);
        assert_relative_eq!(ccc(&series(&[1.0, 2.0, 3.0], &[2.0, 3.0, 4.0])).unwrap(), 4.0 / 7.0, epsilon = 1e-12);
        assert_eq!(ccc(&series(&[2.0, 2.0], &[2.0, 2.0])), None);
        assert_eq!(ccc(&series(&[2.0, 2.0], &[3.0, 3.0])), Some(0.0));
    }

    #[test]
    fn bands() {
        assert_eq!(ccc_band(0.995), CccBand::AlmostPerfect);
        assert_eq!(ccc_band(0.99), CccBand::Substantial);
        assert_eq!(ccc_band(0.96), CccBand::Substantial);
        assert_eq!(ccc_band(0.95), CccBand::Moderate);
        assert_eq!(ccc_band(0.92), CccBand::Moderate);
        assert_eq!(ccc_band(0.90), CccBand::Poor);
        assert_eq!(ccc_band(0.50), CccBand::Poor);
        assert_eq!(ccc_band(-1.0), CccBand::Poor);
    }

    #[test]
    fn tost_zero_variance() {
        let s = series(&[10.0, 12.0, 8.0], &[10.0, 12.0, 8.0]);
        let r = tost(&s, &AgreementConfig::default()).unwrap();
        assert!(r.equivalent);
        assert_eq!((r.p_lower, r.p_upper), (0.0, 0.0));
        assert_relative_eq!(r.delta, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn tost_constant_shift_beyond_bound() {
        let y = vec![10.0; 20];
        let yh: Vec<f64> = y.iter().map(|v| v + 5.0).collect();
        let r = tost(&series(&y, &yh), &AgreementConfig::default()).unwrap();
        assert!(!r.equivalent);
        assert_eq!(r.p_upper, 1.0);
    }

    #[test]
    fn tost_needs_two_pairs() {
        assert!(tost(&series(&[1.0], &[1.0]), &AgreementConfig::default()).is_err());
    }

    #[test]
    fn bland_altman_flags() {
        let ba = bland_altman(&series(&[10.0, 10.0], &[13.0, 10.0]), &AgreementConfig::default());
        assert_relative_eq!(ba.limit, 2.0, max_relative = 1e-15);
        assert_eq!(ba.bias, 1.5);
        assert!(ba.points[0].outside);
        assert!(!ba.points[1].outside);
        assert_eq!((ba.points[0].y, ba.points[0].diff), (10.0, 3.0));
    }

    #[test]
    fn coverage_examples() {
        let cfg = AgreementConfig::default();
        let cp = coverage_probability(&series(&[10.0, 10.0, 25.0], &[10.0, 12.5, 20.0]), &cfg);
        assert_eq!(cp.value, 2.0 / 3.0);
        assert!(cp.ci95.0 <= cp.value && cp.value <= cp.ci95.1);
        assert_eq!(coverage_probability(&series(&[0.0], &[0.0]), &cfg).value, 1.0);
        assert_eq!(coverage_probability(&series(&[0.0], &[0.1]), &cfg).value, 0.0);
    }

    #[test]
    fn wilson_known_value() {
        // 8 of 10: centre 0.7163, half width 0.2103 (standard tables)
        let (lo, hi) = wilson_interval(8, 10);
        assert_relative_eq!(lo, 0.490_162, epsilon = 1e-5);
        assert_relative_eq!(hi, 0.943_318, epsilon = 1e-5);
    }

    #[test]
    fn tdi_examples() {
        let y: Vec<f64> = vec![0.0; 10];
        let yh: Vec<f64> = (1..=10).map(|v| if v % 2 == 0 { v as f64 } else { -(v as f64) }).collect();
        let s = series(&y, &yh);
        let at = |tau| tdi(&s, &AgreementConfig { tau, ..AgreementConfig::default() }).unwrap();
        assert_eq!(at(0.5), 5.5);
        assert_eq!(at(1.0), 10.0);
        assert_eq!(tdi(&series(&[3.0, 4.0], &[3.0, 4.0]), &AgreementConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn series_validation() {
        assert!(PairedSeries::new("m", vec![1.0], vec![]).is_err());
        assert!(PairedSeries::new("m", vec![], vec![]).is_err());
        assert!(PairedSeries::new("m", vec![f64::NAN], vec![1.0]).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AgreementConfig::default().validate().is_ok());
        assert!(AgreementConfig { alpha: 0.6, ..Default::default() }.validate().is_err());
        assert!(AgreementConfig { tau: 0.0, ..Default::default() }.validate().is_err());
        assert!(AgreementConfig { delta_fraction: 1.0, ..Default::default() }.validate().is_err());
    }
}
