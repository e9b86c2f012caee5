use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use petquant::agreement::{agreement_report, AgreementConfig, PairedSeries};
use petquant::ensemble::majority_vote;
use petquant::io::{load_mask, load_volume, save_mask, save_volume, VolumeFormat};
use petquant::losses::{loss_report, LossConfig, ProbabilityField};
use petquant::{
    connected_components, dice_coefficient, match_lesions, patient_metrics, Connectivity, Dims, LabelMask,
    PatientMetrics, ScalarVolume, VolumeKind, VoxelSpacing,
};
use serde_json::Value;

fn petquant(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_petquant")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = petquant(args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn cohort(dir: &Path, patients: usize, seed: u64) -> std::path::PathBuf {
    let n = patients.to_string();
    let seed = seed.to_string();
    ok(&["--out-dir", s(dir), "--seed", &seed, "phantom", "--patients", &n, "--dims", "20,20,16"]);
    dir.join("manifest.csv")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn load(dir: &Path, name: &str) -> LabelMask {
    let p = dir.join(name);
    load_mask(&p, VolumeFormat::from_path(&p).unwrap()).unwrap()
}

#[test]
fn empty_manifest_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    fs::write(&m, "patient_id,suv_path,gt_mask_path,pred_mask_paths\n").unwrap();
    ok(&["--out-dir", s(dir.path()), "extract", "--manifest", s(&m)]);
    assert_eq!(
        fs::read_to_string(dir.path().join("metrics.csv")).unwrap(),
        "patient_id,source,suv_mean,suv_max,tmtv_cc,tla,dmax_cm,lesion_count\n"
    );
}

#[test]
fn two_patients_four_rows_with_voting() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = cohort(dir.path(), 2, 11);
    let out = dir.path().join("out");
    ok(&["--out-dir", s(&out), "--vote", "3", "extract", "--manifest", s(&manifest)]);
    let text = fs::read_to_string(out.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("phantom_000,gt,"));
    assert!(lines[2].starts_with("phantom_000,pred,"));
    assert!(lines[4].starts_with("phantom_001,pred,"));

    // the pred row is the metrics of the 3-of-5 vote over the fold masks
    let suv = load_volume(&dir.path().join("phantom_001_suv.nii.gz"), VolumeFormat::Nifti1, None).unwrap();
    let folds: Vec<LabelMask> = (0..5).map(|f| load(dir.path(), &format!("phantom_001_pred{f}.nii.gz"))).collect();
    let voted = majority_vote(&folds, 3).unwrap();
    let m = patient_metrics(&suv, &voted, Connectivity::Corner26).unwrap();
    let fields: Vec<&str> = lines[4].split(',').collect();
    for (i, v) in m.values()[..5].iter().enumerate() {
        let got: f64 = fields[i + 2].parse().unwrap();
        assert!((got - v).abs() <= 1e-8 * v.abs().max(1e-12), "{got} vs {v}");
    }
    assert_eq!(fields[7], m.lesion_count.to_string());
}

#[test]
fn missing_files_name_the_patient() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = cohort(dir.path(), 3, 2);
    fs::remove_file(dir.path().join("phantom_002_gt.nii.gz")).unwrap();
    let out = petquant(&["--out-dir", s(dir.path()), "extract", "--manifest", s(&manifest)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("phantom_002"), "{err}");
    assert!(!err.contains("phantom_001"), "{err}");
}

#[test]
fn grid_mismatch_is_reported_per_patient() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = cohort(dir.path(), 3, 5);
    let odd = LabelMask::empty(Dims::new(4, 4, 4).unwrap(), VoxelSpacing::isotropic(2.0).unwrap());
    save_mask(&odd, &dir.path().join("phantom_001_gt.nii.gz"), VolumeFormat::Nifti1).unwrap();
    let out_dir = dir.path().join("out");
    let out = petquant(&["--out-dir", s(&out_dir), "extract", "--manifest", s(&manifest)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("phantom_001"));
    let text = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains(",gt,")).count(), 2);
    assert!(text.contains("phantom_001,error,,,,,,"));
}

#[test]
fn self_agreement_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = cohort(dir.path(), 8, 21);
    // point every prediction at the ground truth
    let text = fs::read_to_string(&manifest).unwrap();
    let rewired: String = text
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f[0] == "patient_id" {
                l.to_string()
            } else {
                format!("{},{},{},{}", f[0], f[1], f[2], f[2])
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    fs::write(&manifest, rewired + "\n").unwrap();
    let out = dir.path().join("out");
    ok(&["--out-dir", s(&out), "extract", "--manifest", s(&manifest)]);
    ok(&["--out-dir", s(&out), "detect", "--manifest", s(&manifest)]);
    let metrics = out.join("metrics.csv");
    let det = out.join("detection.csv");
    ok(&["--out-dir", s(&out), "evaluate", "--metrics", s(&metrics), "--detection", s(&det)]);
    let a = read_json(&out.join("agreement.json"));
    assert_eq!(a["n_patients"], 8);
    let reports = a["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 6);
    for r in reports {
        assert_eq!(r["ccc"], 1.0, "{}", r["metric"]);
        assert_eq!(r["ccc_band"], "ALMOST_PERFECT");
        assert_eq!(r["tost"]["equivalent"], true);
        assert_eq!(r["cp"]["value"], 1.0);
        assert_eq!(r["tdi"]["value"], 0.0);
        assert_eq!(r["ba"]["bias"], 0.0);
    }
    let summary = fs::read_to_string(out.join("detection_summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..7], ["pred", "8", "1", "0", "1", "1", "1"]);
    assert_eq!(row[9], "0"); // mean FP
    assert_eq!(row[13], "1"); // mean F1
}

#[test]
fn misaligned_ids_are_a_hard_error() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.csv");
    let pred = dir.path().join("pred.csv");
    let header = "patient_id,source,suv_mean,suv_max,tmtv_cc,tla,dmax_cm,lesion_count\n";
    fs::write(&gt, format!("{header}a,gt,1,2,3,4,5,1\nb,gt,1,2,3,4,5,1\nc,gt,2,2,3,4,5,1\n")).unwrap();
    fs::write(&pred, format!("{header}a,pred,1,2,3,4,5,1\nb,pred,1,2,3,4,5,1\nd,pred,2,2,3,4,5,1\n")).unwrap();
    let out = petquant(&["--out-dir", s(dir.path()), "evaluate", "--gt", s(&gt), "--pred", s(&pred)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("patient_id c"), "{err}");
}

#[test]
fn pipeline_equals_library_calls() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = cohort(dir.path(), 6, 77);
    let out = dir.path().join("out");
    ok(&["--out-dir", s(&out), "--format", "json", "extract", "--manifest", s(&manifest)]);
    ok(&["--out-dir", s(&out), "--format", "json", "detect", "--manifest", s(&manifest)]);
    ok(&[
        "--out-dir",
        s(&out),
        "evaluate",
        "--metrics",
        s(&out.join("metrics.json")),
        "--detection",
        s(&out.join("detection.json")),
    ]);

    let mut gt_all = Vec::new();
    let mut pred_all = Vec::new();
    let detection = read_json(&out.join("detection.json"));
    for i in 0..6 {
        let id = format!("phantom_{i:03}");
        let suv: ScalarVolume =
            load_volume(&dir.path().join(format!("{id}_suv.nii.gz")), VolumeFormat::Nifti1, None).unwrap();
        let gt = load(dir.path(), &format!("{id}_gt.nii.gz"));
        let folds: Vec<LabelMask> = (0..5).map(|f| load(dir.path(), &format!("{id}_pred{f}.nii.gz"))).collect();
        let pred = majority_vote(&folds, 3).unwrap();
        gt_all.push(patient_metrics(&suv, &gt, Connectivity::Corner26).unwrap());
        pred_all.push(patient_metrics(&suv, &pred, Connectivity::Corner26).unwrap());

        let o = match_lesions(
            &suv,
            &connected_components(&gt, Connectivity::Corner26),
            &connected_components(&pred, Connectivity::Corner26),
        )
        .unwrap();
        let row = &detection["rows"][i];
        assert_eq!(row["patient_id"], id.as_str());
        assert_eq!((row["tp"].as_u64(), row["fp"].as_u64(), row["fn"].as_u64()), (Some(o.tp as u64), Some(o.fp as u64), Some(o.fn_ as u64)));
        assert_eq!(row["dsc"].as_f64().unwrap(), dice_coefficient(&gt, &pred).unwrap());
    }

    let a = read_json(&out.join("agreement.json"));
    for (i, name) in PatientMetrics::NAMES.iter().enumerate() {
        let series = PairedSeries::new(
            *name,
            gt_all.iter().map(|m| m.values()[i]).collect(),
            pred_all.iter().map(|m| m.values()[i]).collect(),
        )
        .unwrap();
        let want = serde_json::to_value(agreement_report(&series, &AgreementConfig::default()).unwrap()).unwrap();
        assert_eq!(a["reports"][i], want, "{name}");
    }
}

#[test]
fn loss_command_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = Dims::new(4, 3, 2).unwrap();
    let sp = VoxelSpacing::isotropic(2.0).unwrap();
    let probs: Vec<f64> = (0..24).map(|i| (i as f64 * 0.37) % 1.0).collect();
    let truth: Vec<u8> = (0..24).map(|i| u8::from(i % 3 == 0)).collect();
    let pv = ScalarVolume::new(d, sp, VolumeKind::Normalized, probs).unwrap();
    let tm = LabelMask::new(d, sp, truth).unwrap();
    let pp = dir.path().join("p.nii.gz");
    let tp = dir.path().join("t.nii.gz");
    save_volume(&pv, &pp, VolumeFormat::Nifti1).unwrap();
    save_mask(&tm, &tp, VolumeFormat::Nifti1).unwrap();
    let out = ok(&["--gamma", "1.5", "loss", "--prob", s(&pp), "--truth", s(&tp)]);
    let cfg = LossConfig { gamma: 1.5, ..LossConfig::default() };
    let want = loss_report(&ProbabilityField::from_volume(&pv, &tm).unwrap(), &cfg).unwrap();
    // compare text: serde_json's default float parser is not always exact
    assert_eq!(String::from_utf8(out.stdout).unwrap(), serde_json::to_string_pretty(&want).unwrap() + "\n");
}

#[test]
fn vote_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = Dims::new(5, 1, 1).unwrap();
    let sp = VoxelSpacing::isotropic(1.0).unwrap();
    let mut paths = Vec::new();
    for f in 0..5 {
        let bits: Vec<u8> = (0..5).map(|i| u8::from(i >= f)).collect();
        let p = dir.path().join(format!("f{f}.nii"));
        save_mask(&LabelMask::new(d, sp, bits).unwrap(), &p, VolumeFormat::Nifti1).unwrap();
        paths.push(p);
    }
    let out = dir.path().join("v.nii.gz");
    let mut args = vec!["vote", "--output", s(&out), "--masks"];
    args.extend(paths.iter().map(|p| s(p)));
    ok(&args);
    // voxel i is set in i + 1 of the folds
    assert_eq!(load(dir.path(), "v.nii.gz").data(), &[0, 0, 1, 1, 1]);
    let mut strict = vec!["--vote", "5"];
    strict.extend(&args);
    ok(&strict);
    assert_eq!(load(dir.path(), "v.nii.gz").data(), &[0, 0, 0, 0, 1]);
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"delta": 0.1, "tau": 0.9, "vote": 4}"#).unwrap();
    let out = ok(&["--config", s(&cfg), "--tau", "0.8", "--print-config"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((v["delta"].as_f64(), v["tau"].as_f64(), v["vote"].as_u64()), (Some(0.1), Some(0.8), Some(4)));
    assert_eq!(v["alpha"], 0.05);

    fs::write(&cfg, r#"{"unknown": 1}"#).unwrap();
    assert!(!petquant(&["--config", s(&cfg), "--print-config"]).status.success());
    assert!(!petquant(&["--connectivity", "8", "--print-config"]).status.success());
    assert!(!petquant(&[]).status.success());
}

#[test]
fn rawjson_cohort_and_connectivity() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--out-dir", s(dir.path()), "phantom", "--patients", "2", "--dims", "16,16,12", "--volume-format", "rawjson"]);
    assert!(dir.path().join("phantom_000_suv.json").exists());
    let manifest = dir.path().join("manifest.csv");
    for conn in ["6", "18", "26"] {
        let out = dir.path().join(format!("c{conn}"));
        ok(&["--out-dir", s(&out), "--connectivity", conn, "extract", "--manifest", s(&manifest)]);
        assert!(out.join("metrics.csv").exists());
    }
}
