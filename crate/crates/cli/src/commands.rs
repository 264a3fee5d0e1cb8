//! Pipeline stages. Each stage reads its inputs from the run directory,
//! writes into its own cell directory and returns what it printed.

use std::path::{Path, PathBuf};

use calikd::calibration::{calibration_report, fit_temperature, LogitSet, TemperatureFit};
use calikd::data::logits_io::logits_to_csv;
use calikd::data::{read_logits, write_atomic, Splits};
use calikd::distill::{distill_student, logit_set, KdMode, Summary, SweepSpec, KD_OBJECTIVE};
use calikd::nnet::evaluate_accuracy;
use calikd::{train, CalibrationReport, MlpModel, TargetMode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifacts::{read_json, require_file, trace_csv, Layout, StageWriter};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::report::{
    fmt_summary, render_csv, render_text, ComparisonMatrix, Verdict, CALIBRATION_LABELS,
};

pub const MODEL: &str = "model.json";
pub const VAL_LOGITS: &str = "val_logits.csv";
pub const TEST_LOGITS: &str = "test_logits.csv";
pub const BASELINE: &str = "baseline.json";
pub const FIT: &str = "fit.json";
pub const CALIBRATION: &str = "calibration.json";
pub const STUDENT: &str = "student.json";
pub const REPORT: &str = "report.json";
pub const VERDICT: &str = "verdict.txt";

/// Resolved configuration plus where its artifacts live.
pub struct Context {
    pub config: ExperimentConfig,
    pub spec: SweepSpec,
    pub layout: Layout,
    pub digest: String,
}

impl Context {
    pub fn new(config: ExperimentConfig, out: &Path) -> Self {
        Self {
            spec: config.sweep_spec(),
            layout: Layout::new(out, &config),
            digest: config.digest(),
            config,
        }
    }

    /// Write the resolved configuration at the run root.
    pub fn write_config(&self) -> Result<()> {
        std::fs::create_dir_all(self.layout.root()).map_err(|e| {
            CliError::Runtime(format!("cannot create {}: {e}", self.layout.root().display()))
        })?;
        let mut text = serde_json::to_string_pretty(&self.config).expect("config serialises");
        text.push('\n');
        write_atomic(&self.layout.root().join("config.json"), text.as_bytes())?;
        Ok(())
    }

    pub fn check_size(&self, size: usize) -> Result<()> {
        if self.config.teacher_sizes.contains(&size) {
            Ok(())
        } else {
            Err(CliError::Validation(format!(
                "teacher size {size} is not in teacher_sizes {:?}",
                self.config.teacher_sizes
            )))
        }
    }

    fn cells(&self) -> Vec<(usize, u64)> {
        self.config
            .teacher_sizes
            .iter()
            .flat_map(|&s| self.config.seeds.iter().map(move |&seed| (s, seed)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherBaseline {
    pub teacher_size: usize,
    pub seed: u64,
    pub layer_dims: Vec<usize>,
    pub parameters: usize,
    pub train_final_loss: f64,
    pub train_final_accuracy: f64,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
}

/// Table-row metrics of one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub samples: usize,
    pub accuracy: f64,
    pub temperature: f64,
    pub ece_before: f64,
    pub ece_after: f64,
    pub nll_before: f64,
    pub nll_after: f64,
}

impl SplitMetrics {
    fn of(report: &CalibrationReport) -> Self {
        Self {
            samples: report.histogram_before.total(),
            accuracy: report.accuracy,
            temperature: report.temperature,
            ece_before: report.ece_before,
            ece_after: report.ece_after,
            nll_before: report.nll_before,
            nll_after: report.nll_after,
        }
    }

    fn row(&self) -> [f64; 5] {
        [self.temperature, self.ece_before, self.ece_after, self.nll_before, self.nll_after]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub teacher_size: usize,
    pub seed: u64,
    /// NLL values are means over samples.
    pub nll: String,
    pub bins: usize,
    pub fit: TemperatureFit,
    pub validation: SplitMetrics,
    pub test: SplitMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentRecord {
    pub teacher_size: usize,
    pub seed: u64,
    pub mode: KdMode,
    pub alpha: f64,
    pub kd_temperature: f64,
    pub effective_temperature: f64,
    pub layer_dims: Vec<usize>,
    pub train_final_loss: f64,
    pub test_accuracy: f64,
}

fn model_json(model: &MlpModel) -> Result<String> {
    serde_json::to_string(model)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Runtime(format!("cannot serialise model: {e}")))
}

fn load_model(path: &Path, hint: &str) -> Result<MlpModel> {
    read_json(path, hint)
}

fn teacher_hint(size: usize, seed: u64) -> String {
    format!("run `calikd train-teacher --size {size} --seed {seed}` first")
}

fn calibrate_hint(size: usize, seed: u64) -> String {
    format!("run `calikd calibrate --size {size} --seed {seed}` first")
}

/// Train one teacher and store its parameters and held-out logits.
pub fn train_teacher(
    ctx: &Context,
    splits: &Splits,
    size: usize,
    seed: u64,
) -> Result<TeacherBaseline> {
    ctx.check_size(size)?;
    let spec = &ctx.spec;
    let train_set = &splits.train;
    let dims = spec.teacher_dims(train_set.dim(), size, train_set.class_count());
    let init = MlpModel::seeded(&dims, spec.teacher_init_seed(size, seed))?;
    let (model, trace) = train(init, train_set, &spec.train_config(seed), &TargetMode::Hard)?;

    let val = logit_set(&model, &splits.validation)?;
    let test = logit_set(&model, &splits.test)?;
    let last = trace.epochs.last().expect("at least one epoch");
    let baseline = TeacherBaseline {
        teacher_size: size,
        seed,
        layer_dims: model.layer_dims(),
        parameters: model.parameter_count(),
        train_final_loss: last.loss,
        train_final_accuracy: last.accuracy,
        validation_accuracy: val.accuracy(),
        test_accuracy: test.accuracy(),
    };

    let mut w = StageWriter::create(
        ctx.layout.teacher_dir(size, seed),
        &ctx.digest,
        "train-teacher",
        size,
        seed,
        None,
    )?;
    w.text(MODEL, &model_json(&model)?)?;
    w.text("trace.csv", &trace_csv(&trace))?;
    w.text(VAL_LOGITS, &logits_to_csv(&val))?;
    w.text(TEST_LOGITS, &logits_to_csv(&test))?;
    w.json(BASELINE, &baseline)?;
    w.finish(json!({
        "train_config": spec.train_config(seed),
        "init_seed": spec.teacher_init_seed(size, seed),
    }))?;
    Ok(baseline)
}

pub fn calibration_table(metrics: &[(&str, SplitMetrics)]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["split".to_string()];
    header.extend(CALIBRATION_LABELS.iter().map(|s| s.to_string()));
    let rows = metrics
        .iter()
        .map(|(name, m)| {
            let mut row = vec![name.to_string()];
            row.extend(m.row().iter().map(|v| format!("{v:.6}")));
            row
        })
        .collect();
    (header, rows)
}

/// Fit T on the stored validation logits and report both held-out splits.
pub fn calibrate(ctx: &Context, size: usize, seed: u64) -> Result<CalibrationRecord> {
    ctx.check_size(size)?;
    let tdir = ctx.layout.teacher_dir(size, seed);
    let hint = teacher_hint(size, seed);
    require_file(&tdir.join(VAL_LOGITS), &hint)?;
    require_file(&tdir.join(TEST_LOGITS), &hint)?;
    let val = read_logits(&tdir.join(VAL_LOGITS))?;
    let test = read_logits(&tdir.join(TEST_LOGITS))?;

    let bins = ctx.config.bins;
    let fit = fit_temperature(&val, &ctx.config.temperature_search)?;
    let val_report = calibration_report(&val, &fit, bins)?;
    let test_report = calibration_report(&test, &fit, bins)?;
    let record = CalibrationRecord {
        teacher_size: size,
        seed,
        nll: "mean-NLL".into(),
        bins,
        fit,
        validation: SplitMetrics::of(&val_report),
        test: SplitMetrics::of(&test_report),
    };

    let (header, rows) =
        calibration_table(&[("validation", record.validation), ("test", record.test)]);
    let mut w = StageWriter::create(
        ctx.layout.calibrate_dir(size, seed),
        &ctx.digest,
        "calibrate",
        size,
        seed,
        None,
    )?;
    w.json(FIT, &fit)?;
    w.json(CALIBRATION, &record)?;
    w.text("calibration.csv", &render_csv(&header, &rows))?;
    w.text("calibration.txt", &render_text(&header, &rows))?;
    for (name, report) in [("validation", &val_report), ("test", &test_report)] {
        w.text(&format!("reliability_{name}_t1.csv"), &report.histogram_before.to_csv())?;
        w.text(&format!("reliability_{name}_tstar.csv"), &report.histogram_after.to_csv())?;
    }
    w.finish(json!({
        "nll": "mean-NLL",
        "fit_split": "validation",
        "search": ctx.config.temperature_search,
        "teacher_logits": tdir,
    }))?;
    Ok(record)
}

/// Distil the fixed student from a stored teacher.
pub fn distill(
    ctx: &Context,
    splits: &Splits,
    size: usize,
    seed: u64,
    mode: KdMode,
) -> Result<StudentRecord> {
    ctx.check_size(size)?;
    let spec = &ctx.spec;
    let tdir = ctx.layout.teacher_dir(size, seed);
    let teacher = load_model(&tdir.join(MODEL), &teacher_hint(size, seed))?;
    let fit: Option<TemperatureFit> = match mode {
        KdMode::Vanilla => None,
        KdMode::Calibrated => Some(read_json(
            &ctx.layout.calibrate_dir(size, seed).join(FIT),
            &format!(
                "calibrated distillation needs a fitted temperature; {}",
                calibrate_hint(size, seed)
            ),
        )?),
    };

    let train_set = &splits.train;
    let dims = spec.student_dims(train_set.dim(), train_set.class_count());
    let student = MlpModel::seeded(&dims, spec.student_init_seed(seed))?;
    let config = spec.distill_config(mode, seed);
    let outcome = distill_student(student, &teacher, train_set, &config, fit.as_ref())?;
    let test = logit_set(&outcome.student, &splits.test)?;
    let record = StudentRecord {
        teacher_size: size,
        seed,
        mode,
        alpha: config.alpha,
        kd_temperature: config.kd_temperature,
        effective_temperature: outcome.effective_temperature,
        layer_dims: outcome.student.layer_dims(),
        train_final_loss: outcome.trace.final_loss().unwrap_or(f64::NAN),
        test_accuracy: test.accuracy(),
    };

    let mut w = StageWriter::create(
        ctx.layout.distill_dir(size, mode, seed),
        &ctx.digest,
        "distill",
        size,
        seed,
        Some(mode),
    )?;
    w.text(MODEL, &model_json(&outcome.student)?)?;
    w.text("trace.csv", &trace_csv(&outcome.trace))?;
    w.text(TEST_LOGITS, &logits_to_csv(&test))?;
    w.json(STUDENT, &record)?;
    w.finish(json!({
        "mode": mode,
        "alpha": config.alpha,
        "kd_temperature": config.kd_temperature,
        "effective_temperature": outcome.effective_temperature,
        "temperature_source": match mode {
            KdMode::Vanilla => "configured kd_temperature".to_string(),
            KdMode::Calibrated => ctx.layout.calibrate_dir(size, seed).join(FIT).display().to_string(),
        },
        "objective": KD_OBJECTIVE,
        "init_seed": spec.student_init_seed(seed),
    }))?;
    Ok(record)
}

/// Every stage of one (size, seed) cell.
pub fn run_cell(ctx: &Context, splits: &Splits, size: usize, seed: u64) -> Result<()> {
    train_teacher(ctx, splits, size, seed)?;
    calibrate(ctx, size, seed)?;
    for mode in KdMode::ALL {
        distill(ctx, splits, size, seed, mode)?;
    }
    Ok(())
}

/// Run all cells on a pool of `jobs` workers, then the report.
pub fn sweep(ctx: &Context, splits: &Splits, jobs: usize) -> Result<ReportOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    let cells = ctx.cells();
    let results: Vec<((usize, u64), Result<()>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(size, seed)| {
                let r = run_cell(ctx, splits, size, seed);
                match &r {
                    Ok(()) => eprintln!("cell size={size} seed={seed} done"),
                    Err(e) => eprintln!("cell size={size} seed={seed} failed: {e}"),
                }
                ((size, seed), r)
            })
            .collect()
    });
    let mut failures = Vec::new();
    let mut first_err = None;
    for ((size, seed), r) in results {
        if let Err(e) = r {
            failures.push(format!("size={size} seed={seed}: {e}"));
            first_err.get_or_insert(e);
        }
    }
    if let Some(e) = first_err {
        let code = e.exit_code();
        let msg = format!(
            "{} of {} sweep cells failed:\n  {}",
            failures.len(),
            cells.len(),
            failures.join("\n  ")
        );
        return Err(if code == 1 { CliError::Validation(msg) } else { CliError::Runtime(msg) });
    }
    report(ctx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub teacher_size: usize,
    pub test_accuracy: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub teacher_size: usize,
    pub split: String,
    /// Optimal Temp, ECE Before, ECE After, NLL Before, NLL After.
    pub metrics: [Summary; 5],
    pub ece_improved: usize,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub teacher_size: usize,
    pub mode: KdMode,
    pub student_size: usize,
    pub student_accuracy: Summary,
    pub effective_temperature: Summary,
}

/// Everything `report` derives from the stored artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOutput {
    pub config_digest: String,
    pub baseline: Vec<BaselineRow>,
    pub calibration: Vec<CalibrationRow>,
    pub comparison: Vec<ComparisonRow>,
    /// (size, seed) cells where calibrated >= vanilla student accuracy.
    pub cells_calibrated_ge_vanilla: usize,
    pub cells: usize,
    pub verdict: Verdict,
}

struct CellArtifacts {
    baseline: TeacherBaseline,
    calibration: CalibrationRecord,
    vanilla: StudentRecord,
    calibrated: StudentRecord,
}

fn load_cell(
    ctx: &Context,
    size: usize,
    seed: u64,
) -> std::result::Result<CellArtifacts, Vec<PathBuf>> {
    let l = &ctx.layout;
    let paths = [
        l.teacher_dir(size, seed).join(BASELINE),
        l.calibrate_dir(size, seed).join(CALIBRATION),
        l.distill_dir(size, KdMode::Vanilla, seed).join(STUDENT),
        l.distill_dir(size, KdMode::Calibrated, seed).join(STUDENT),
    ];
    let missing: Vec<PathBuf> = paths.iter().filter(|p| !p.is_file()).cloned().collect();
    if !missing.is_empty() {
        return Err(missing);
    }
    let load = || -> Result<CellArtifacts> {
        Ok(CellArtifacts {
            baseline: read_json(&paths[0], "")?,
            calibration: read_json(&paths[1], "")?,
            vanilla: read_json(&paths[2], "")?,
            calibrated: read_json(&paths[3], "")?,
        })
    };
    load().map_err(|_| paths.to_vec())
}

fn summarize<T>(items: &[&T], f: impl Fn(&T) -> f64) -> Summary {
    Summary::of(&items.iter().map(|x| f(x)).collect::<Vec<_>>())
}

/// Aggregate the sweep over seeds and write the top-level tables.
pub fn report(ctx: &Context) -> Result<ReportOutput> {
    let mut cells = Vec::new();
    let mut missing = Vec::new();
    for (size, seed) in ctx.cells() {
        match load_cell(ctx, size, seed) {
            Ok(c) => cells.push(c),
            Err(paths) => missing.push(format!(
                "size={size} seed={seed}: {}",
                paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
            )),
        }
    }
    if !missing.is_empty() {
        return Err(CliError::Validation(format!(
            "incomplete sweep, {} cell(s) missing or unreadable:\n  {}",
            missing.len(),
            missing.join("\n  ")
        )));
    }

    let student_size = ctx.config.student_size;
    let mut baseline = Vec::new();
    let mut calibration = Vec::new();
    let mut comparison = Vec::new();
    let mut matrix = ComparisonMatrix {
        teacher_sizes: ctx.config.teacher_sizes.clone(),
        student_sizes: vec![student_size],
        vanilla: Vec::new(),
        calibrated: Vec::new(),
    };
    for &size in &ctx.config.teacher_sizes {
        let group: Vec<&CellArtifacts> =
            cells.iter().filter(|c| c.baseline.teacher_size == size).collect();
        baseline.push(BaselineRow {
            teacher_size: size,
            test_accuracy: summarize(&group, |c| c.baseline.test_accuracy),
        });
        for split in ["validation", "test"] {
            let pick = |c: &CellArtifacts| match split {
                "validation" => c.calibration.validation,
                _ => c.calibration.test,
            };
            let metrics: [Summary; 5] =
                std::array::from_fn(|k| summarize(&group, |c| pick(c).row()[k]));
            calibration.push(CalibrationRow {
                teacher_size: size,
                split: split.into(),
                metrics,
                ece_improved: group
                    .iter()
                    .filter(|c| pick(c).ece_after < pick(c).ece_before)
                    .count(),
                runs: group.len(),
            });
        }
        for mode in KdMode::ALL {
            let student = |c: &CellArtifacts| match mode {
                KdMode::Vanilla => c.vanilla.clone(),
                KdMode::Calibrated => c.calibrated.clone(),
            };
            let row = ComparisonRow {
                teacher_size: size,
                mode,
                student_size,
                student_accuracy: summarize(&group, |c| student(c).test_accuracy),
                effective_temperature: summarize(&group, |c| student(c).effective_temperature),
            };
            let cell = vec![Some(row.student_accuracy.mean)];
            match mode {
                KdMode::Vanilla => matrix.vanilla.push(cell),
                KdMode::Calibrated => matrix.calibrated.push(cell),
            }
            comparison.push(row);
        }
    }
    let output = ReportOutput {
        config_digest: ctx.digest.clone(),
        baseline,
        calibration,
        comparison,
        cells_calibrated_ge_vanilla: cells
            .iter()
            .filter(|c| c.calibrated.test_accuracy >= c.vanilla.test_accuracy)
            .count(),
        cells: cells.len(),
        verdict: matrix.verdict(),
    };
    write_report(ctx, &output)?;
    Ok(output)
}

fn write_report(ctx: &Context, out: &ReportOutput) -> Result<()> {
    let root = ctx.layout.root();
    let put = |name: &str, text: &str| -> Result<()> {
        Ok(write_atomic(&root.join(name), text.as_bytes())?)
    };
    let (csv, text) = out.tables();
    for (name, (c, t)) in
        ["baseline", "calibration", "comparison"].iter().zip(csv.iter().zip(&text))
    {
        put(&format!("{name}.csv"), c)?;
        put(&format!("{name}.txt"), t)?;
    }
    put(VERDICT, &format!("{}\n", out.verdict))?;
    let mut json = serde_json::to_string_pretty(out).expect("report serialises");
    json.push('\n');
    put(REPORT, &json)
}

impl ReportOutput {
    /// CSV and aligned-text renderings of the baseline, calibration and
    /// comparison tables, in that order.
    pub fn tables(&self) -> ([String; 3], [String; 3]) {
        let sizes: Vec<String> = self.baseline.iter().map(|b| b.teacher_size.to_string()).collect();

        // Baseline: one column per teacher size.
        let mut header = vec!["teacher".to_string()];
        header.extend(sizes.iter().cloned());
        let mut row = vec!["test accuracy".to_string()];
        row.extend(self.baseline.iter().map(|b| fmt_summary(&b.test_accuracy)));
        let base_text = render_text(&header, &[row]);
        let base_csv = render_csv(
            &["teacher_size", "accuracy_mean", "accuracy_std", "runs"].map(String::from),
            &self
                .baseline
                .iter()
                .map(|b| {
                    let s = b.test_accuracy;
                    vec![
                        b.teacher_size.to_string(),
                        s.mean.to_string(),
                        s.std.to_string(),
                        s.n.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        );

        // Calibration: metric rows by teacher-size columns, one block per split.
        let mut cal_text = String::new();
        for split in ["validation", "test"] {
            let rows: Vec<&CalibrationRow> =
                self.calibration.iter().filter(|r| r.split == split).collect();
            let mut header = vec![format!("{split} split")];
            header.extend(rows.iter().map(|r| r.teacher_size.to_string()));
            let body: Vec<Vec<String>> = CALIBRATION_LABELS
                .iter()
                .enumerate()
                .map(|(k, label)| {
                    let mut line = vec![label.to_string()];
                    line.extend(rows.iter().map(|r| fmt_summary(&r.metrics[k])));
                    line
                })
                .collect();
            if !cal_text.is_empty() {
                cal_text.push('\n');
            }
            cal_text.push_str(&render_text(&header, &body));
        }
        let mut cal_header = vec!["teacher_size".to_string(), "split".to_string()];
        for label in CALIBRATION_LABELS {
            cal_header.push(label.to_string());
            cal_header.push(format!("{label} std"));
        }
        cal_header.push("ECE improved".into());
        cal_header.push("runs".into());
        let cal_csv = render_csv(
            &cal_header,
            &self
                .calibration
                .iter()
                .map(|r| {
                    let mut line = vec![r.teacher_size.to_string(), r.split.clone()];
                    for m in &r.metrics {
                        line.push(m.mean.to_string());
                        line.push(m.std.to_string());
                    }
                    line.push(r.ece_improved.to_string());
                    line.push(r.runs.to_string());
                    line
                })
                .collect::<Vec<_>>(),
        );

        // Comparison: teacher rows, vanilla and calibrated interleaved.
        let student = self.comparison.first().map(|r| r.student_size).unwrap_or(0);
        let header = vec!["T \\ S".to_string(), student.to_string()];
        let body: Vec<Vec<String>> = self
            .comparison
            .iter()
            .map(|r| {
                let label = match r.mode {
                    KdMode::Vanilla => r.teacher_size.to_string(),
                    KdMode::Calibrated => format!("Calibrated {}", r.teacher_size),
                };
                vec![label, fmt_summary(&r.student_accuracy)]
            })
            .collect();
        let cmp_text = render_text(&header, &body);
        let cmp_csv = render_csv(
            &[
                "teacher_size",
                "mode",
                "student_size",
                "accuracy_mean",
                "accuracy_std",
                "runs",
                "temperature_mean",
            ]
            .map(String::from),
            &self
                .comparison
                .iter()
                .map(|r| {
                    vec![
                        r.teacher_size.to_string(),
                        r.mode.to_string(),
                        r.student_size.to_string(),
                        r.student_accuracy.mean.to_string(),
                        r.student_accuracy.std.to_string(),
                        r.student_accuracy.n.to_string(),
                        r.effective_temperature.mean.to_string(),
                    ]
                })
                .collect::<Vec<_>>(),
        );
        ([base_csv, cal_csv, cmp_csv], [base_text, cal_text, cmp_text])
    }

    pub fn render(&self) -> String {
        let (_, text) = self.tables();
        format!(
            "Teacher baseline (test accuracy)\n{}\nTeacher calibration\n{}\nStudent accuracy\n{}\ncells with calibrated >= vanilla: {}/{}\n{}\n",
            text[0], text[1], text[2], self.cells_calibrated_ge_vanilla, self.cells, self.verdict
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifySummary {
    pub teachers: usize,
    pub calibrations: usize,
    pub students: usize,
    pub report_checked: bool,
}

fn mismatch(what: String) -> CliError {
    CliError::Runtime(format!("verification failed: {what}"))
}

fn check_eq(what: &str, path: &Path, stored: f64, recomputed: f64) -> Result<()> {
    // Stored and recomputed numbers come from the same deterministic code.
    if stored.to_bits() == recomputed.to_bits() {
        Ok(())
    } else {
        Err(mismatch(format!(
            "{what} in {}: stored {stored}, recomputed {recomputed}",
            path.display()
        )))
    }
}

fn check_logits(
    model: &MlpModel,
    stored_path: &Path,
    split_features: &calikd::Dataset,
) -> Result<LogitSet> {
    let stored = std::fs::read_to_string(stored_path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", stored_path.display())))?;
    let fresh = logit_set(model, split_features)?;
    if logits_to_csv(&fresh) != stored {
        return Err(mismatch(format!(
            "{} does not match the stored model's output",
            stored_path.display()
        )));
    }
    Ok(read_logits(stored_path)?)
}

/// Recompute every stored number that has its inputs on disk.
pub fn verify(ctx: &Context, splits: &Splits) -> Result<VerifySummary> {
    let mut summary = VerifySummary::default();
    for (size, seed) in ctx.cells() {
        let tdir = ctx.layout.teacher_dir(size, seed);
        if tdir.join(BASELINE).is_file() {
            let baseline: TeacherBaseline = read_json(&tdir.join(BASELINE), "")?;
            let model = load_model(&tdir.join(MODEL), &teacher_hint(size, seed))?;
            let val = check_logits(&model, &tdir.join(VAL_LOGITS), &splits.validation)?;
            let test = check_logits(&model, &tdir.join(TEST_LOGITS), &splits.test)?;
            let path = tdir.join(BASELINE);
            check_eq("validation_accuracy", &path, baseline.validation_accuracy, val.accuracy())?;
            check_eq("test_accuracy", &path, baseline.test_accuracy, test.accuracy())?;
            summary.teachers += 1;

            let cdir = ctx.layout.calibrate_dir(size, seed);
            if cdir.join(CALIBRATION).is_file() {
                let stored: CalibrationRecord = read_json(&cdir.join(CALIBRATION), "")?;
                let fit = fit_temperature(&val, &ctx.config.temperature_search)?;
                let path = cdir.join(CALIBRATION);
                check_eq("temperature", &path, stored.fit.temperature, fit.temperature)?;
                for (name, set, m) in
                    [("validation", &val, stored.validation), ("test", &test, stored.test)]
                {
                    let fresh =
                        SplitMetrics::of(&calibration_report(set, &stored.fit, stored.bins)?);
                    for (k, label) in CALIBRATION_LABELS.iter().enumerate() {
                        check_eq(&format!("{name} {label}"), &path, m.row()[k], fresh.row()[k])?;
                    }
                    check_eq(&format!("{name} accuracy"), &path, m.accuracy, fresh.accuracy)?;
                }
                summary.calibrations += 1;
            }
        }
        for mode in KdMode::ALL {
            let sdir = ctx.layout.distill_dir(size, mode, seed);
            if sdir.join(STUDENT).is_file() {
                let stored: StudentRecord = read_json(&sdir.join(STUDENT), "")?;
                let model = load_model(&sdir.join(MODEL), "")?;
                let test = check_logits(&model, &sdir.join(TEST_LOGITS), &splits.test)?;
                check_eq(
                    "test_accuracy",
                    &sdir.join(STUDENT),
                    stored.test_accuracy,
                    test.accuracy(),
                )?;
                check_eq(
                    "test_accuracy vs model",
                    &sdir.join(STUDENT),
                    stored.test_accuracy,
                    evaluate_accuracy(&model, &splits.test)?,
                )?;
                summary.students += 1;
            }
        }
    }
    let report_path = ctx.layout.root().join(REPORT);
    if report_path.is_file() {
        let stored: ReportOutput = read_json(&report_path, "")?;
        // Rebuilding rewrites the top-level tables; with intact artifacts the bytes are unchanged.
        let fresh = report(ctx)?;
        if fresh != stored {
            return Err(mismatch(format!(
                "{} differs from the stored artifacts",
                report_path.display()
            )));
        }
        summary.report_checked = true;
    }
    if summary.teachers + summary.students == 0 {
        return Err(CliError::Validation(format!(
            "nothing to verify under {}",
            ctx.layout.root().display()
        )));
    }
    Ok(summary)
}
