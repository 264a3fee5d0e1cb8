use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use calikd::data::logits_io::logits_to_csv;
use calikd::distill::KdMode;
use calikd::{train, LogitSet, MlpModel, TargetMode};
use calikd_cli::artifacts::{Layout, RUN_RECORD};
use calikd_cli::config::ExperimentConfig;
use ndarray::Array2;
use serde_json::Value;

const TINY: &[&str] = &[
    "--set",
    "dataset.synthetic.samples=400",
    "--set",
    "train.max_epochs=3",
    "--set",
    "train.batch_size=32",
    "--set",
    "teacher_sizes=[8,24]",
    "--set",
    "seeds=[0,1]",
];

fn calikd(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calikd"))
        .args(args.iter().take(1))
        .args(TINY)
        .args(args.iter().skip(1))
        .arg("--out")
        .arg(out)
        .env_remove("CALIKD_OUT")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = calikd(out, args);
    assert!(o.status.success(), "calikd {args:?} failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn tiny_config(extra: &[&str]) -> ExperimentConfig {
    let mut sets: Vec<String> = TINY.iter().skip(1).step_by(2).map(|s| s.to_string()).collect();
    // Same order as on the command line: TINY first.
    sets.extend(extra.iter().map(|s| s.to_string()));
    ExperimentConfig::resolve(None, &sets).unwrap()
}

fn root(out: &Path, extra: &[&str]) -> Layout {
    Layout::new(out, &tiny_config(extra))
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Every file under `dir` except run records, which carry timestamps.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != RUN_RECORD {
                files
                    .insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

#[test]
fn missing_dataset_path_is_a_validation_error_naming_it() {
    let tmp = tempfile::tempdir().unwrap();
    let o = calikd(
        tmp.path(),
        &[
            "train-teacher",
            "--set",
            r#"dataset={"idx":{"images":"/missing/train-images.idx","labels":"/missing/train-labels.idx"}}"#,
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/missing/train-images.idx"), "{}", stderr(&o));
}

#[test]
fn bad_flags_and_unknown_keys_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [
        &["no-such-command"][..],
        &["train-teacher", "--set", "train.epochs=3"],
        &["train-teacher", "--size", "999"],
        &["train-teacher", "--seed", "77"],
        &["distill", "--mode", "lukewarm"],
    ] {
        let o = calikd(tmp.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn stage_order_is_enforced_with_hints() {
    let tmp = tempfile::tempdir().unwrap();
    let o = calikd(tmp.path(), &["calibrate", "--size", "8", "--seed", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("train-teacher --size 8 --seed 0"), "{}", stderr(&o));

    ok(tmp.path(), &["train-teacher", "--size", "8", "--seed", "0"]);
    let o = calikd(tmp.path(), &["distill", "--size", "8", "--seed", "0", "--mode", "calibrated"]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(
        msg.contains("fit.json") && msg.contains("calikd calibrate --size 8 --seed 0"),
        "{msg}"
    );

    // Vanilla mode does not need a fit.
    ok(tmp.path(), &["distill", "--size", "8", "--seed", "0", "--mode", "vanilla"]);

    let o = calikd(tmp.path(), &["report"]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("size=8 seed=1") && msg.contains("size=24 seed=0"), "{msg}");
    assert!(msg.contains("calibration.json"), "{msg}");
}

#[test]
fn train_teacher_writes_artifacts_and_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let first = ok(tmp.path(), &["train-teacher", "--size", "24", "--seed", "1"]);
    assert!(first.starts_with("teacher size=24 seed=1 "), "{first}");
    assert!(first.contains("test_accuracy="));
    let layout = root(tmp.path(), &[]);
    let dir = layout.teacher_dir(24, 1);
    for name in [
        "model.json",
        "trace.csv",
        "val_logits.csv",
        "test_logits.csv",
        "baseline.json",
        RUN_RECORD,
    ] {
        assert!(dir.join(name).is_file(), "{name}");
    }
    let record = json(&dir.join(RUN_RECORD));
    assert_eq!(record["config_digest"], tiny_config(&[]).digest());
    assert_eq!(record["prng"], calikd::rng::PRNG_ID);
    assert!(record["artifacts"]["model.json"].as_str().unwrap().len() == 64);

    let before = snapshot(layout.root());
    let second = ok(tmp.path(), &["train-teacher", "--size", "24", "--seed", "1"]);
    assert_eq!(first, second);
    assert_eq!(before, snapshot(layout.root()));
    // The record's artifact hashes are part of the contract too.
    assert_eq!(record["artifacts"], json(&dir.join(RUN_RECORD))["artifacts"]);
}

#[test]
fn calibrate_emits_the_five_table_columns_and_reliability_data() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["train-teacher", "--size", "8", "--seed", "0"]);
    let text = ok(tmp.path(), &["calibrate", "--size", "8", "--seed", "0"]);
    assert!(text.contains("Optimal Temp") && text.contains("NLL After"), "{text}");

    let dir = root(tmp.path(), &[]).calibrate_dir(8, 0);
    let csv = std::fs::read_to_string(dir.join("calibration.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "split,Optimal Temp,ECE Before,ECE After,NLL Before,NLL After"
    );
    assert!(lines.next().unwrap().starts_with("validation,"));
    assert!(lines.next().unwrap().starts_with("test,"));
    for split in ["validation", "test"] {
        for t in ["t1", "tstar"] {
            let rel =
                std::fs::read_to_string(dir.join(format!("reliability_{split}_{t}.csv"))).unwrap();
            assert_eq!(rel.lines().count(), 1 + 15, "{split} {t}");
        }
    }
    let cal = json(&dir.join("calibration.json"));
    assert_eq!(cal["nll"], "mean-NLL");
    let fit = json(&dir.join("fit.json"));
    assert!(fit["nll_after"].as_f64().unwrap() <= fit["nll_before"].as_f64().unwrap());
}

/// Place hand-made logits where `calibrate` expects a teacher's output.
fn plant_logits(layout: &Layout, size: usize, seed: u64, val: &LogitSet, test: &LogitSet) {
    let dir = layout.teacher_dir(size, seed);
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("val_logits.csv"), logits_to_csv(val)).unwrap();
    std::fs::write(dir.join("test_logits.csv"), logits_to_csv(test)).unwrap();
}

/// Labels drawn from softmax(z / `truth`) so that T = `truth` is calibrated.
fn fixture(n: usize, scale: f64, truth: f64, seed: u64) -> LogitSet {
    use rand::{RngExt, SeedableRng};
    let mut rng = rand_pcg::Pcg64::seed_from_u64(seed);
    let k = 4;
    let logits = Array2::from_shape_fn((n, k), |_| scale * (rng.random::<f64>() * 2.0 - 1.0));
    let labels = logits
        .rows()
        .into_iter()
        .map(|row| {
            let p = calikd::nnet::loss::softmax(row.insert_axis(ndarray::Axis(0)), truth).unwrap();
            let u: f64 = rng.random();
            let mut acc = 0.0;
            (0..k)
                .find(|&j| {
                    acc += p[[0, j]];
                    u < acc
                })
                .unwrap_or(k - 1)
        })
        .collect();
    LogitSet::new(logits, labels).unwrap()
}

#[test]
fn calibrate_on_planted_fixtures() {
    let tmp = tempfile::tempdir().unwrap();
    let layout = root(tmp.path(), &[]);
    // Already calibrated: labels follow softmax(z) itself.
    plant_logits(&layout, 8, 0, &fixture(20_000, 4.0, 1.0, 1), &fixture(20_000, 4.0, 1.0, 2));
    // Overconfident: labels follow softmax(z / 3).
    plant_logits(&layout, 24, 0, &fixture(4000, 12.0, 3.0, 3), &fixture(4000, 12.0, 3.0, 4));
    ok(tmp.path(), &["calibrate", "--seed", "0"]);

    let cal = json(&layout.calibrate_dir(8, 0).join("calibration.json"));
    let t = cal["fit"]["temperature"].as_f64().unwrap();
    assert!((t - 1.0).abs() < 0.05, "T = {t}");
    for split in ["validation", "test"] {
        let m = &cal[split];
        let d_ece = (m["ece_before"].as_f64().unwrap() - m["ece_after"].as_f64().unwrap()).abs();
        let d_nll = (m["nll_before"].as_f64().unwrap() - m["nll_after"].as_f64().unwrap()).abs();
        assert!(d_ece < 0.01 && d_nll < 1e-3, "{split}: {m}");
    }

    let cal = json(&layout.calibrate_dir(24, 0).join("calibration.json"));
    let t = cal["fit"]["temperature"].as_f64().unwrap();
    assert!((t - 3.0).abs() < 0.3, "T = {t}");
    for split in ["validation", "test"] {
        let m = &cal[split];
        assert!(
            m["ece_after"].as_f64().unwrap() < m["ece_before"].as_f64().unwrap(),
            "{split}: {m}"
        );
    }
}

#[test]
fn distill_metadata_records_the_temperature_used() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["train-teacher", "--size", "8", "--seed", "1"]);
    ok(tmp.path(), &["calibrate", "--size", "8", "--seed", "1"]);
    let text = ok(tmp.path(), &["distill", "--size", "8", "--seed", "1"]);
    assert_eq!(text.lines().count(), 2, "{text}");
    let layout = root(tmp.path(), &[]);
    let fitted =
        json(&layout.calibrate_dir(8, 1).join("fit.json"))["temperature"].as_f64().unwrap();

    let vanilla = json(&layout.distill_dir(8, KdMode::Vanilla, 1).join(RUN_RECORD));
    assert_eq!(vanilla["metadata"]["effective_temperature"].as_f64(), Some(4.0));
    assert_eq!(vanilla["mode"], "vanilla");
    let calibrated = json(&layout.distill_dir(8, KdMode::Calibrated, 1).join(RUN_RECORD));
    assert_eq!(calibrated["metadata"]["effective_temperature"].as_f64(), Some(fitted));
    assert_eq!(calibrated["metadata"]["objective"], calikd::distill::KD_OBJECTIVE);
}

#[test]
fn alpha_zero_student_matches_plain_training() {
    let tmp = tempfile::tempdir().unwrap();
    let alpha = ["--set", "distill.alpha=0"];
    let args =
        |stage: &'static str| [&[stage, "--size", "24", "--seed", "0"][..], &alpha[..]].concat();
    ok(tmp.path(), &args("train-teacher"));
    ok(tmp.path(), &args("calibrate"));
    ok(tmp.path(), &args("distill"));

    let config = tiny_config(&["distill.alpha=0"]);
    let layout = Layout::new(tmp.path(), &config);
    let spec = config.sweep_spec();
    let splits = config.load_splits().unwrap();
    let dims = spec.student_dims(splits.train.dim(), splits.train.class_count());
    let init = MlpModel::seeded(&dims, spec.student_init_seed(0)).unwrap();
    let (plain, _) = train(init, &splits.train, &spec.train_config(0), &TargetMode::Hard).unwrap();
    let plain_acc = calikd::nnet::evaluate_accuracy(&plain, &splits.test).unwrap();

    for mode in KdMode::ALL {
        let dir = layout.distill_dir(24, mode, 0);
        let stored: MlpModel =
            serde_json::from_str(&std::fs::read_to_string(dir.join("model.json")).unwrap())
                .unwrap();
        assert_eq!(stored, plain, "{mode}");
        assert_eq!(json(&dir.join("student.json"))["test_accuracy"].as_f64(), Some(plain_acc));
    }
}

#[test]
fn sweep_report_verify_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let five = ["--set", "seeds=[0,1,2,3,4]", "--set", "teacher_sizes=[4,8,16]"];
    let args =
        |cmd: &'static str, jobs: &'static str| [&[cmd, "--jobs", jobs][..], &five[..]].concat();
    let text = ok(tmp.path(), &args("sweep", "2"));
    let layout = root(tmp.path(), &["seeds=[0,1,2,3,4]", "teacher_sizes=[4,8,16]"]);
    let report = json(&layout.root().join("report.json"));
    // 3 sizes x 2 modes, each aggregated over 5 seeds.
    let cells = report["comparison"].as_array().unwrap();
    assert_eq!(cells.len(), 6);
    assert!(cells.iter().all(|c| c["student_accuracy"]["n"] == 5));
    assert_eq!(report["cells"], 15);

    let verdict = std::fs::read_to_string(layout.root().join("verdict.txt")).unwrap();
    let line = verdict.trim_end();
    assert!(text.contains(line));
    let parts: Vec<&str> = line.split(' ').collect();
    assert_eq!(parts.len(), 2);
    assert!(
        parts[0].starts_with("calibrated_dominates=")
            && parts[1].starts_with("monotone_calibrated=")
    );

    let comparison = std::fs::read_to_string(layout.root().join("comparison.txt")).unwrap();
    let labels: Vec<&str> =
        comparison.lines().skip(2).map(|l| l.split("  ").next().unwrap().trim()).collect();
    assert_eq!(labels, ["4", "Calibrated 4", "8", "Calibrated 8", "16", "Calibrated 16"]);
    for name in ["baseline", "calibration", "comparison"] {
        assert!(layout.root().join(format!("{name}.csv")).is_file());
    }

    // A serial re-run and a standalone report reproduce every byte.
    let before = snapshot(layout.root());
    ok(tmp.path(), &args("sweep", "1"));
    assert_eq!(before, snapshot(layout.root()));
    ok(tmp.path(), &[&["report"][..], &five[..]].concat());
    assert_eq!(before, snapshot(layout.root()));

    let v = ok(tmp.path(), &[&["verify"][..], &five[..]].concat());
    assert_eq!(v.trim(), "verified teachers=15 calibrations=15 students=30 report=true");

    // Tamper with one stored number: verify must notice.
    let path = layout.calibrate_dir(8, 3).join("calibration.json");
    let mut cal = json(&path);
    cal["test"]["ece_after"] = Value::from(cal["test"]["ece_after"].as_f64().unwrap() + 1e-9);
    std::fs::write(&path, serde_json::to_string_pretty(&cal).unwrap()).unwrap();
    let o = calikd(tmp.path(), &[&["verify"][..], &five[..]].concat());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ECE After"), "{}", stderr(&o));
}

#[test]
fn output_dir_comes_from_env_when_not_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_calikd"))
        .args(["train-teacher", "--size", "8", "--seed", "0"])
        .args(TINY)
        .env("CALIKD_OUT", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(root(tmp.path(), &[]).teacher_dir(8, 0).join("model.json").is_file());
}

#[test]
fn shipped_configs_parse_and_default_matches_builtin() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let default = ExperimentConfig::resolve(Some(&dir.join("default.json")), &[]).unwrap();
    assert_eq!(default, ExperimentConfig::default());
    let quick = ExperimentConfig::resolve(Some(&dir.join("quick.json")), &[]).unwrap();
    assert_eq!(quick.teacher_sizes, [32, 256]);
}
