//! Report files: per-patient metrics and detection tables (CSV or JSON),
//! the agreement JSON and the cohort detection summary.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use petquant::{cohort_summary, AgreementReport, PatientMetrics};
use serde::{Deserialize, Serialize};

use crate::cli::OutputFormat;

pub const METRICS_HEADER: [&str; 8] =
    ["patient_id", "source", "suv_mean", "suv_max", "tmtv_cc", "tla", "dmax_cm", "lesion_count"];
pub const DETECTION_HEADER: [&str; 6] = ["patient_id", "tp", "fp", "fn", "f1", "dsc"];
pub const SUMMARY_HEADER: [&str; 16] = [
    "label", "n", "dsc_mean", "dsc_std", "dsc_median", "dsc_q25", "dsc_q75", "tp_mean", "tp_std", "fp_mean", "fp_std",
    "fn_mean", "fn_std", "f1_mean", "f1_std", "f1_n",
];

/// Nine significant digits, printed as the shortest decimal that reads back
/// to the same rounded value.
pub fn fmt_float(x: f64) -> String {
    let rounded: f64 = format!("{x:.8e}").parse().expect("formatted float parses");
    if rounded == 0.0 {
        // avoid "-0"
        return "0".into();
    }
    rounded.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Gt,
    Pred,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Gt => "gt",
            Source::Pred => "pred",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub patient_id: String,
    pub source: Source,
    pub suv_mean: f64,
    pub suv_max: f64,
    pub tmtv_cc: f64,
    pub tla: f64,
    pub dmax_cm: f64,
    pub lesion_count: usize,
}

impl MetricsRow {
    pub fn new(patient_id: &str, source: Source, m: &PatientMetrics) -> Self {
        MetricsRow {
            patient_id: patient_id.to_string(),
            source,
            suv_mean: m.suv_mean,
            suv_max: m.suv_max,
            tmtv_cc: m.tmtv,
            tla: m.tla,
            dmax_cm: m.dmax,
            lesion_count: m.lesion_count,
        }
    }

    pub fn values(&self) -> [f64; 6] {
        [self.suv_mean, self.suv_max, self.tmtv_cc, self.tla, self.dmax_cm, self.lesion_count as f64]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientError {
    pub patient_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
    #[serde(default)]
    pub errors: Vec<PatientError>,
}

pub fn metrics_file_name(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Csv => "metrics.csv",
        OutputFormat::Json => "metrics.json",
    }
}

/// Error rows appear in the CSV as `patient_id,error` with empty metrics.
pub fn write_metrics(path: &Path, table: &MetricsTable, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => write_json(path, table),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
            w.write_record(METRICS_HEADER)?;
            for r in &table.rows {
                let mut rec = vec![r.patient_id.clone(), r.source.name().to_string()];
                rec.extend(r.values()[..5].iter().map(|&v| fmt_float(v)));
                rec.push(r.lesion_count.to_string());
                w.write_record(&rec)?;
            }
            for e in &table.errors {
                w.write_record([e.patient_id.as_str(), "error", "", "", "", "", "", ""])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

pub fn read_metrics(path: &Path) -> Result<MetricsTable> {
    if is_json(path) {
        return read_json(path);
    }
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    if r.headers()?.iter().collect::<Vec<_>>() != METRICS_HEADER {
        bail!("{} does not have the metrics header {}", path.display(), METRICS_HEADER.join(","));
    }
    let mut table = MetricsTable::default();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = n + 2;
        let id = rec[0].to_string();
        let source = match &rec[1] {
            "gt" => Source::Gt,
            "pred" => Source::Pred,
            "error" => {
                table.errors.push(PatientError {
                    patient_id: id,
                    message: "extraction failed".into(),
                });
                continue;
            }
            other => bail!("{}:{line}: unknown source {other:?}", path.display()),
        };
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .with_context(|| format!("{}:{line}: bad {} value {:?}", path.display(), METRICS_HEADER[i], &rec[i]))
        };
        table.rows.push(MetricsRow {
            patient_id: id,
            source,
            suv_mean: num(2)?,
            suv_max: num(3)?,
            tmtv_cc: num(4)?,
            tla: num(5)?,
            dmax_cm: num(6)?,
            lesion_count: rec[7]
                .parse()
                .with_context(|| format!("{}:{line}: bad lesion_count {:?}", path.display(), &rec[7]))?,
        });
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub patient_id: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// Missing when the patient has no lesions in either mask.
    pub f1: Option<f64>,
    pub dsc: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionTable {
    pub rows: Vec<DetectionRow>,
    #[serde(default)]
    pub errors: Vec<PatientError>,
}

pub fn detection_file_name(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Csv => "detection.csv",
        OutputFormat::Json => "detection.json",
    }
}

pub fn write_detection(path: &Path, table: &DetectionTable, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Json => write_json(path, table),
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
            w.write_record(DETECTION_HEADER)?;
            for r in &table.rows {
                w.write_record([
                    r.patient_id.clone(),
                    r.tp.to_string(),
                    r.fp.to_string(),
                    r.fn_.to_string(),
                    r.f1.map(fmt_float).unwrap_or_default(),
                    fmt_float(r.dsc),
                ])?;
            }
            for e in &table.errors {
                w.write_record([e.patient_id.as_str(), "", "", "", "", ""])?;
            }
            w.flush()?;
            Ok(())
        }
    }
}

pub fn read_detection(path: &Path) -> Result<DetectionTable> {
    if is_json(path) {
        return read_json(path);
    }
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    if r.headers()?.iter().collect::<Vec<_>>() != DETECTION_HEADER {
        bail!("{} does not have the detection header {}", path.display(), DETECTION_HEADER.join(","));
    }
    let mut table = DetectionTable::default();
    for (n, rec) in r.records().enumerate() {
        let rec = rec?;
        let ctx = || format!("{}:{}", path.display(), n + 2);
        if rec[1].is_empty() {
            table.errors.push(PatientError {
                patient_id: rec[0].to_string(),
                message: "detection failed".into(),
            });
            continue;
        }
        table.rows.push(DetectionRow {
            patient_id: rec[0].to_string(),
            tp: rec[1].parse().with_context(ctx)?,
            fp: rec[2].parse().with_context(ctx)?,
            fn_: rec[3].parse().with_context(ctx)?,
            f1: if rec[4].is_empty() { None } else { Some(rec[4].parse().with_context(ctx)?) },
            dsc: rec[5].parse().with_context(ctx)?,
        });
    }
    Ok(table)
}

/// Cohort detection summary: mean ± population std of DSC, TP, FP, FN and
/// F1, plus median and quartiles of DSC. Patients without any lesion are
/// left out of the F1 average.
pub fn write_detection_summary(path: &Path, label: &str, rows: &[DetectionRow]) -> Result<()> {
    if rows.is_empty() {
        bail!("no detection rows to summarize");
    }
    let col = |f: &dyn Fn(&DetectionRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let dsc = cohort_summary(&col(&|r| r.dsc))?;
    let tp = cohort_summary(&col(&|r| r.tp as f64))?;
    let fp = cohort_summary(&col(&|r| r.fp as f64))?;
    let fn_ = cohort_summary(&col(&|r| r.fn_ as f64))?;
    let f1s: Vec<f64> = rows.iter().filter_map(|r| r.f1).collect();
    let (f1_mean, f1_std) = match cohort_summary(&f1s) {
        Ok(s) => (fmt_float(s.mean), fmt_float(s.std)),
        Err(_) => (String::new(), String::new()),
    };
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(SUMMARY_HEADER)?;
    w.write_record([
        label.to_string(),
        rows.len().to_string(),
        fmt_float(dsc.mean),
        fmt_float(dsc.std),
        fmt_float(dsc.median),
        fmt_float(dsc.iqr.0),
        fmt_float(dsc.iqr.1),
        fmt_float(tp.mean),
        fmt_float(tp.std),
        fmt_float(fp.mean),
        fmt_float(fp.std),
        fmt_float(fn_.mean),
        fmt_float(fn_.std),
        f1_mean,
        f1_std,
        f1s.len().to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

/// Settings the agreement statistics were computed with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgreementSettings {
    pub delta: f64,
    pub alpha: f64,
    pub tau: f64,
}

/// Contents of `agreement.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementFile {
    pub label: String,
    pub n_patients: usize,
    pub settings: AgreementSettings,
    /// One report per metric, in metrics-table column order.
    pub reports: Vec<AgreementReport>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}
