use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, ensure, Context, Result};
use petquant::ensemble::{default_threshold, majority_vote};
use petquant::io::{load_mask, load_volume, save_mask, save_volume, VolumeFormat};
use petquant::losses::WeightMode;
use petquant::preprocess::{resample_mask, resample_volume, Interpolation};
use petquant::{
    agreement_report, connected_components, dice_coefficient, f1_score, generate_phantom, loss_report, match_lesions,
    patient_metrics, perturb_mask, Dims, LabelMask, PairedSeries, PatientMetrics, PerturbationSpec, PhantomSpec,
    ProbabilityField, ScalarVolume, VolumeKind, VoxelSpacing,
};
use serde::Serialize;

use crate::cli::VolumeFileFormat;
use crate::config::Config;
use crate::manifest::{self, PatientEntry};
use crate::report::{
    self, AgreementFile, AgreementSettings, DetectionRow, DetectionTable, MetricsRow, MetricsTable, PatientError,
    Source,
};

/// Applies `f` to every item on up to `jobs` threads; results keep input order.
fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs.min(items.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every slot filled"))
        .collect()
}

fn format_of(path: &Path) -> Result<VolumeFormat> {
    Ok(VolumeFormat::from_path(path)?)
}

struct PatientData {
    suv: ScalarVolume,
    gt: LabelMask,
    pred: LabelMask,
}

fn read_mask(path: &Path) -> Result<LabelMask> {
    load_mask(path, format_of(path)?).with_context(|| format!("reading mask {}", path.display()))
}

fn vote(masks: &[LabelMask], cfg: &Config) -> Result<LabelMask> {
    if masks.len() == 1 && cfg.vote.is_none() {
        return Ok(masks[0].clone());
    }
    let threshold = cfg.vote.unwrap_or_else(|| default_threshold(masks.len()));
    Ok(majority_vote(masks, threshold)?)
}

fn load_patient(e: &PatientEntry, cfg: &Config) -> Result<PatientData> {
    let suv = load_volume(&e.suv, format_of(&e.suv)?, Some(VolumeKind::Suv))
        .with_context(|| format!("reading SUV volume {}", e.suv.display()))?;
    let gt = read_mask(&e.gt_mask)?;
    let preds = e.pred_masks.iter().map(|p| read_mask(p)).collect::<Result<Vec<_>>>()?;
    suv.check_same_grid(&gt).context("ground-truth mask")?;
    for (p, path) in preds.iter().zip(&e.pred_masks) {
        suv.check_same_grid(p).with_context(|| format!("prediction mask {}", path.display()))?;
    }
    let pred = vote(&preds, cfg)?;
    match cfg.resample {
        None => Ok(PatientData { suv, gt, pred }),
        Some(mm) => {
            let target = VoxelSpacing::isotropic(mm)?;
            Ok(PatientData {
                suv: resample_volume(&suv, target, Interpolation::Trilinear)?,
                gt: resample_mask(&gt, target, Interpolation::Nearest)?,
                pred: resample_mask(&pred, target, Interpolation::Nearest)?,
            })
        }
    }
}

fn failure_summary(what: &str, errors: &[PatientError]) -> anyhow::Error {
    let lines: Vec<String> = errors.iter().map(|e| format!("{}: {}", e.patient_id, e.message)).collect();
    anyhow!("{what} failed for {} patient(s)\n  {}", errors.len(), lines.join("\n  "))
}

fn prepare_out_dir(cfg: &Config) -> Result<&Path> {
    fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    Ok(&cfg.out_dir)
}

pub fn extract(manifest_path: &Path, cfg: &Config) -> Result<PathBuf> {
    let entries = manifest::read(manifest_path)?;
    manifest::check_files(&entries)?;
    let conn = cfg.connectivity()?;
    let results = par_map(&entries, cfg.jobs, |e| -> Result<(PatientMetrics, PatientMetrics)> {
        let d = load_patient(e, cfg)?;
        Ok((patient_metrics(&d.suv, &d.gt, conn)?, patient_metrics(&d.suv, &d.pred, conn)?))
    });
    let mut table = MetricsTable::default();
    for (e, r) in entries.iter().zip(results) {
        match r {
            Ok((gt, pred)) => {
                table.rows.push(MetricsRow::new(&e.patient_id, Source::Gt, &gt));
                table.rows.push(MetricsRow::new(&e.patient_id, Source::Pred, &pred));
            }
            Err(err) => table.errors.push(PatientError {
                patient_id: e.patient_id.clone(),
                message: format!("{err:#}"),
            }),
        }
    }
    let out = prepare_out_dir(cfg)?.join(report::metrics_file_name(cfg.format));
    report::write_metrics(&out, &table, cfg.format)?;
    if !table.errors.is_empty() {
        return Err(failure_summary("metric extraction", &table.errors));
    }
    Ok(out)
}

pub fn detect(manifest_path: &Path, cfg: &Config) -> Result<PathBuf> {
    let entries = manifest::read(manifest_path)?;
    manifest::check_files(&entries)?;
    let conn = cfg.connectivity()?;
    let results = par_map(&entries, cfg.jobs, |e| -> Result<DetectionRow> {
        let d = load_patient(e, cfg)?;
        let gt = connected_components(&d.gt, conn);
        let pred = connected_components(&d.pred, conn);
        let o = match_lesions(&d.suv, &gt, &pred)?;
        Ok(DetectionRow {
            patient_id: e.patient_id.clone(),
            tp: o.tp,
            fp: o.fp,
            fn_: o.fn_,
            f1: f1_score(&o),
            dsc: dice_coefficient(&d.gt, &d.pred)?,
        })
    });
    let mut table = DetectionTable::default();
    for (e, r) in entries.iter().zip(results) {
        match r {
            Ok(row) => table.rows.push(row),
            Err(err) => table.errors.push(PatientError {
                patient_id: e.patient_id.clone(),
                message: format!("{err:#}"),
            }),
        }
    }
    let out = prepare_out_dir(cfg)?.join(report::detection_file_name(cfg.format));
    report::write_detection(&out, &table, cfg.format)?;
    if !table.errors.is_empty() {
        return Err(failure_summary("detection", &table.errors));
    }
    Ok(out)
}

/// Pairs gt rows of `gt` with pred rows of `pred` by patient id.
fn pair_rows(gt: &MetricsTable, pred: &MetricsTable) -> Result<Vec<(MetricsRow, MetricsRow)>> {
    let collect = |t: &MetricsTable, source: Source| -> Result<BTreeMap<String, MetricsRow>> {
        let mut map = BTreeMap::new();
        for r in t.rows.iter().filter(|r| r.source == source) {
            if map.insert(r.patient_id.clone(), r.clone()).is_some() {
                bail!("patient_id {} has more than one {} row", r.patient_id, source.name());
            }
        }
        Ok(map)
    };
    let g = collect(gt, Source::Gt)?;
    let mut p = collect(pred, Source::Pred)?;
    for e in gt.errors.iter().chain(&pred.errors) {
        if !g.contains_key(&e.patient_id) && !p.contains_key(&e.patient_id) {
            eprintln!("warning: skipping patient {} (extraction error)", e.patient_id);
        }
    }
    let mut pairs = Vec::with_capacity(g.len());
    for (id, row) in g {
        let other = p
            .remove(&id)
            .ok_or_else(|| anyhow!("patient_id {id} has ground-truth metrics but no prediction"))?;
        pairs.push((row, other));
    }
    if let Some(id) = p.keys().next() {
        bail!("patient_id {id} has prediction metrics but no ground truth");
    }
    Ok(pairs)
}

pub struct EvaluateInputs<'a> {
    pub gt: &'a Path,
    pub pred: &'a Path,
    pub detection: Option<&'a Path>,
    pub label: &'a str,
}

pub fn evaluate(inputs: &EvaluateInputs<'_>, cfg: &Config) -> Result<Vec<PathBuf>> {
    let gt = report::read_metrics(inputs.gt)?;
    let pred = if inputs.pred == inputs.gt { gt.clone() } else { report::read_metrics(inputs.pred)? };
    let pairs = pair_rows(&gt, &pred)?;
    ensure!(pairs.len() >= 2, "agreement statistics need at least two patients, found {}", pairs.len());
    let acfg = cfg.agreement();
    let reports = PatientMetrics::NAMES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let truth = pairs.iter().map(|(g, _)| g.values()[i]).collect();
            let predicted = pairs.iter().map(|(_, p)| p.values()[i]).collect();
            let series = PairedSeries::new(*name, truth, predicted)?;
            agreement_report(&series, &acfg).with_context(|| format!("agreement for {name}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let out_dir = prepare_out_dir(cfg)?;
    let agreement_path = out_dir.join("agreement.json");
    report::write_json(
        &agreement_path,
        &AgreementFile {
            label: inputs.label.to_string(),
            n_patients: pairs.len(),
            settings: AgreementSettings {
                delta: cfg.delta,
                alpha: cfg.alpha,
                tau: cfg.tau,
            },
            reports,
        },
    )?;
    let mut written = vec![agreement_path];
    if let Some(det) = inputs.detection {
        let table = report::read_detection(det)?;
        if let Some(e) = table.errors.first() {
            bail!("detection file {} has a failed row for patient_id {}", det.display(), e.patient_id);
        }
        let path = out_dir.join("detection_summary.csv");
        report::write_detection_summary(&path, inputs.label, &table.rows)?;
        written.push(path);
    }
    Ok(written)
}

pub fn vote_masks(paths: &[PathBuf], output: &Path, cfg: &Config) -> Result<()> {
    let masks = paths.iter().map(|p| read_mask(p)).collect::<Result<Vec<_>>>()?;
    let threshold = cfg.vote.unwrap_or_else(|| default_threshold(masks.len()));
    let voted = majority_vote(&masks, threshold)?;
    save_mask(&voted, output, format_of(output)?).with_context(|| format!("writing {}", output.display()))?;
    Ok(())
}

pub fn losses(prob: &Path, truth: &Path, scalar_weight: bool, cfg: &Config) -> Result<String> {
    let p = load_volume(prob, format_of(prob)?, Some(VolumeKind::Normalized))
        .with_context(|| format!("reading probabilities {}", prob.display()))?;
    let t = read_mask(truth)?;
    let field = ProbabilityField::from_volume(&p, &t)?;
    let mut lcfg = cfg.losses();
    if scalar_weight {
        lcfg.weight_mode = WeightMode::ScalarMean;
    }
    let r = loss_report(&field, &lcfg)?;
    Ok(serde_json::to_string_pretty(&r)? + "\n")
}

pub struct PhantomOptions {
    pub patients: usize,
    pub dims: Dims,
    pub spacing: VoxelSpacing,
    pub max_lesions: usize,
    pub folds: usize,
    pub noise_sd: f64,
    pub volume_format: VolumeFileFormat,
}

#[derive(Serialize)]
struct ExpectedPatient {
    patient_id: String,
    expected: PatientMetrics,
    spec: PhantomSpec,
    folds: Vec<PerturbationSpec>,
}

/// Seed of patient `i` in a cohort seeded with `seed`.
fn patient_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64)
}

pub fn phantom_cohort(opts: &PhantomOptions, cfg: &Config) -> Result<PathBuf> {
    ensure!(opts.folds >= 1, "--folds must be at least 1");
    ensure!(opts.noise_sd >= 0.0, "--noise-sd must be nonnegative");
    let out_dir = prepare_out_dir(cfg)?;
    let ext = match opts.volume_format {
        VolumeFileFormat::Nifti => "nii.gz",
        VolumeFileFormat::Rawjson => "raw",
    };
    let vf = match opts.volume_format {
        VolumeFileFormat::Nifti => VolumeFormat::Nifti1,
        VolumeFileFormat::Rawjson => VolumeFormat::RawJson,
    };
    let ids: Vec<usize> = (0..opts.patients).collect();
    let written = par_map(&ids, cfg.jobs, |&i| -> Result<(String, String, String, Vec<String>, ExpectedPatient)> {
        let id = format!("phantom_{i:03}");
        let seed = patient_seed(cfg.seed, i);
        let mut spec = PhantomSpec::random(seed, opts.dims, opts.spacing, opts.max_lesions);
        spec.noise_sd = opts.noise_sd;
        let ph = generate_phantom(&spec)?;
        let suv_name = format!("{id}_suv.{ext}");
        let gt_name = format!("{id}_gt.{ext}");
        save_volume(&ph.suv, &out_dir.join(&suv_name), vf)?;
        save_mask(&ph.mask, &out_dir.join(&gt_name), vf)?;
        let mut preds = Vec::with_capacity(opts.folds);
        let mut folds = Vec::with_capacity(opts.folds);
        for f in 0..opts.folds {
            let p = PerturbationSpec {
                seed: seed ^ ((f as u64 + 1) << 32),
                drop_lesion_prob: 0.15,
                add_false_prob: 0.25,
                false_blobs: 1,
                dilate_erode_voxels: ((seed as usize + f) % 3) as i32 - 1,
                shift_voxels: 0,
            };
            let mask = perturb_mask(&ph.mask, &p)?;
            let name = format!("{id}_pred{f}.{ext}");
            save_mask(&mask, &out_dir.join(&name), vf)?;
            preds.push(name);
            folds.push(p);
        }
        let expected = ExpectedPatient {
            patient_id: id.clone(),
            expected: ph.expected,
            spec,
            folds,
        };
        Ok((id, suv_name, gt_name, preds, expected))
    });
    let mut rows = Vec::with_capacity(written.len());
    let mut expected = Vec::with_capacity(written.len());
    for w in written {
        let (id, suv, gt, preds, e) = w?;
        rows.push((id, suv, gt, preds));
        expected.push(e);
    }
    let manifest_path = out_dir.join("manifest.csv");
    manifest::write(&manifest_path, &rows)?;
    report::write_json(&out_dir.join("expected.json"), &expected)?;
    Ok(manifest_path)
}
