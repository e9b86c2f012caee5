//! Cohort manifests: `patient_id,suv_path,gt_mask_path,pred_mask_paths`,
//! with several prediction masks separated by `;`. Relative paths are
//! resolved against the manifest's directory.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const HEADER: [&str; 4] = ["patient_id", "suv_path", "gt_mask_path", "pred_mask_paths"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatientEntry {
    pub patient_id: String,
    pub suv: PathBuf,
    pub gt_mask: PathBuf,
    pub pred_masks: Vec<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    patient_id: String,
    suv_path: String,
    gt_mask_path: String,
    pred_mask_paths: String,
}

/// Rows sorted by patient id.
pub fn read(path: &Path) -> Result<Vec<PatientEntry>> {
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening manifest {}", path.display()))?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != HEADER {
        bail!("manifest {} must have header {}, found {}", path.display(), HEADER.join(","), header.join(","));
    }
    let resolve = |p: &str| {
        let p = PathBuf::from(p);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (line, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.with_context(|| format!("manifest {} row {}", path.display(), line + 2))?;
        if row.patient_id.is_empty() {
            bail!("manifest {} row {} has an empty patient_id", path.display(), line + 2);
        }
        if !seen.insert(row.patient_id.clone()) {
            bail!("patient_id {} appears more than once in {}", row.patient_id, path.display());
        }
        let pred_masks: Vec<PathBuf> = row
            .pred_mask_paths
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(resolve)
            .collect();
        if pred_masks.is_empty() {
            bail!("patient {} has no prediction masks", row.patient_id);
        }
        out.push(PatientEntry {
            suv: resolve(&row.suv_path),
            gt_mask: resolve(&row.gt_mask_path),
            pred_masks,
            patient_id: row.patient_id,
        });
    }
    out.sort_by(|a, b| a.patient_id.cmp(&b.patient_id));
    Ok(out)
}

/// Fails listing every patient with a file that does not exist.
pub fn check_files(entries: &[PatientEntry]) -> Result<()> {
    let mut missing = Vec::new();
    for e in entries {
        let absent: Vec<String> = std::iter::once(&e.suv)
            .chain(std::iter::once(&e.gt_mask))
            .chain(&e.pred_masks)
            .filter(|p| !p.exists())
            .map(|p| p.display().to_string())
            .collect();
        if !absent.is_empty() {
            missing.push(format!("{}: {}", e.patient_id, absent.join(", ")));
        }
    }
    if !missing.is_empty() {
        bail!("missing input files for patient(s)\n  {}", missing.join("\n  "));
    }
    Ok(())
}

/// Writes a manifest with paths relative to its own directory.
pub fn write(path: &Path, entries: &[(String, String, String, Vec<String>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for (id, suv, gt, preds) in entries {
        w.serialize(Row {
            patient_id: id.clone(),
            suv_path: suv.clone(),
            gt_mask_path: gt.clone(),
            pred_mask_paths: preds.join(";"),
        })?;
    }
    if entries.is_empty() {
        w.write_record(HEADER)?;
    }
    w.flush()?;
    Ok(())
}
