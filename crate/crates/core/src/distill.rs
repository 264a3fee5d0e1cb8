//! Knowledge distillation with a hand-picked (vanilla) or NLL-fitted
//! (calibrated) softening temperature, and the teacher-size sweep.
//!
//! The objective per batch is
//!
//! ```text
//! alpha * temp^2 * mean KL(softmax(z_teacher / temp) || softmax(z_student / temp))
//!     + (1 - alpha) * CE(labels, softmax(z_student))
//! ```
//!
//! In calibrated mode `temp` is the teacher's fitted scaling temperature.

use ndarray::{Array2, ArrayView2, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    calibration_report, fit_temperature, FitOptions, LogitSet, TemperatureFit, DEFAULT_BINS,
};
use crate::data::{Dataset, Splits};
use crate::error::{Error, Result};
use crate::nnet::loss::{check_temperature, softmax_and_log};
use crate::nnet::{
    cross_entropy_with_grad, evaluate_accuracy, mlp_dims, run_epochs, train, MlpModel, TargetMode,
    Targets, TrainConfig, TrainTrace,
};
use crate::rng;

/// Human-readable form of the objective, stored in run metadata.
pub const KD_OBJECTIVE: &str =
    "alpha * temp^2 * KL(softmax(teacher/temp) || softmax(student/temp)) + (1 - alpha) * CE(labels, softmax(student))";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KdMode {
    Vanilla,
    Calibrated,
}

impl KdMode {
    pub const ALL: [KdMode; 2] = [KdMode::Vanilla, KdMode::Calibrated];

    pub fn as_str(self) -> &'static str {
        match self {
            KdMode::Vanilla => "vanilla",
            KdMode::Calibrated => "calibrated",
        }
    }
}

impl std::fmt::Display for KdMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for KdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(KdMode::Vanilla),
            "calibrated" => Ok(KdMode::Calibrated),
            other => Err(Error::Config(format!(
                "unknown distillation mode `{other}` (expected vanilla or calibrated)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillConfig {
    pub alpha: f64,
    /// Softening temperature used in vanilla mode only.
    pub kd_temperature: f64,
    pub mode: KdMode,
    pub train: TrainConfig,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            alpha: 0.8,
            kd_temperature: 4.0,
            mode: KdMode::Vanilla,
            train: TrainConfig::default(),
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        check_temperature(self.kd_temperature).map_err(|_| {
            Error::Config(format!("kd_temperature must be > 0, got {}", self.kd_temperature))
        })
    }

    /// `kd_temperature` in vanilla mode, the fitted T in calibrated mode.
    pub fn effective_temperature(&self, fit: Option<&TemperatureFit>) -> Result<f64> {
        match (self.mode, fit) {
            (KdMode::Vanilla, _) => Ok(self.kd_temperature),
            (KdMode::Calibrated, Some(fit)) => Ok(fit.temperature),
            (KdMode::Calibrated, None) => Err(Error::Config(
                "calibrated distillation needs a fitted teacher temperature; calibrate the teacher first".into(),
            )),
        }
    }
}

fn check_pair(
    student: &ArrayView2<f64>,
    teacher: &ArrayView2<f64>,
    labels: &[usize],
) -> Result<()> {
    if student.dim() != teacher.dim() {
        return Err(Error::Shape {
            context: "student vs teacher logits",
            expected: student.len(),
            found: teacher.len(),
        });
    }
    if labels.len() != student.nrows() {
        return Err(Error::Shape {
            context: "hard labels vs logit rows",
            expected: student.nrows(),
            found: labels.len(),
        });
    }
    Ok(())
}

/// Distillation loss and its gradient with respect to the student logits.
pub fn kd_loss_and_grad(
    student: ArrayView2<f64>,
    teacher: ArrayView2<f64>,
    labels: &[usize],
    temp: f64,
    alpha: f64,
) -> Result<(f64, Array2<f64>)> {
    check_temperature(temp)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    check_pair(&student, &teacher, labels)?;
    let (ce, ce_grad) = cross_entropy_with_grad(student, Targets::Hard(labels), 1.0)?;
    if alpha == 0.0 {
        return Ok((ce, ce_grad));
    }

    let n = student.nrows() as f64;
    let (p_teacher, lp_teacher) = softmax_and_log(teacher, temp)?;
    let (p_student, lp_student) = softmax_and_log(student, temp)?;
    let mut kl = 0.0;
    Zip::from(&p_teacher).and(&lp_teacher).and(&lp_student).for_each(|&p, &lp, &lq| {
        if p > 0.0 {
            kl += p * (lp - lq);
        }
    });
    kl /= n;

    // d/dz_s of temp^2 * KL = temp * (q - p)
    let soft_scale = alpha * temp / n;
    let hard_scale = 1.0 - alpha;
    let mut grad = ce_grad;
    Zip::from(&mut grad)
        .and(&p_student)
        .and(&p_teacher)
        .for_each(|g, &q, &p| *g = hard_scale * *g + soft_scale * (q - p));
    Ok((alpha * temp * temp * kl + hard_scale * ce, grad))
}

pub fn kd_loss(
    student: ArrayView2<f64>,
    teacher: ArrayView2<f64>,
    labels: &[usize],
    temp: f64,
    alpha: f64,
) -> Result<f64> {
    Ok(kd_loss_and_grad(student, teacher, labels, temp, alpha)?.0)
}

/// Result of [`distill_student`].
#[derive(Debug, Clone, PartialEq)]
pub struct DistillOutcome {
    pub student: MlpModel,
    pub trace: TrainTrace,
    pub mode: KdMode,
    pub effective_temperature: f64,
}

/// Train `student` against the frozen `teacher`. Teacher logits are
/// recomputed for every batch; gradients reach only the student.
pub fn distill_student(
    student: MlpModel,
    teacher: &MlpModel,
    dataset: &Dataset,
    config: &DistillConfig,
    fit: Option<&TemperatureFit>,
) -> Result<DistillOutcome> {
    config.validate()?;
    config.train.validate(dataset.len())?;
    let temp = config.effective_temperature(fit)?;
    if teacher.input_dim() != dataset.dim() || teacher.class_count() != dataset.class_count() {
        return Err(Error::Shape {
            context: "teacher input width vs dataset",
            expected: teacher.input_dim(),
            found: dataset.dim(),
        });
    }
    let alpha = config.alpha;
    let mut labels = Vec::with_capacity(config.train.batch_size);
    let (student, trace) = run_epochs(student, dataset, &config.train, |rows, inputs, logits| {
        labels.clear();
        labels.extend(rows.iter().map(|&i| dataset.labels()[i]));
        if alpha == 0.0 {
            return cross_entropy_with_grad(logits, Targets::Hard(&labels), 1.0);
        }
        let teacher_logits = teacher.forward_unchecked(inputs).logits;
        kd_loss_and_grad(logits, teacher_logits.view(), &labels, temp, alpha)
    })?;
    Ok(DistillOutcome { student, trace, mode: config.mode, effective_temperature: temp })
}

/// Logits of `model` on `dataset` packaged for calibration.
pub fn logit_set(model: &MlpModel, dataset: &Dataset) -> Result<LogitSet> {
    LogitSet::new(model.forward(dataset.features())?, dataset.labels().to_vec())
}

/// Architecture and schedule for a teacher-size sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Teacher hidden widths, ascending.
    pub teacher_widths: Vec<usize>,
    pub teacher_depth: usize,
    pub student_width: usize,
    pub student_depth: usize,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub alpha: f64,
    pub kd_temperature: f64,
    pub fit: FitOptions,
    pub bins: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            teacher_widths: vec![32, 256, 2048],
            teacher_depth: 1,
            student_width: 16,
            student_depth: 1,
            seeds: vec![0, 1, 2, 3, 4],
            train: TrainConfig::default(),
            alpha: 0.8,
            kd_temperature: 4.0,
            fit: FitOptions::default(),
            bins: DEFAULT_BINS,
        }
    }
}

/// Seed tags separating teacher and student initialisation.
const TEACHER_TAG: u64 = 0x0074_6561_6368_6572;
const STUDENT_TAG: u64 = 0x0073_7475_6465_6e74;

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.teacher_widths.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config(
                "a sweep needs at least one teacher width and one seed".into(),
            ));
        }
        if self.teacher_widths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "teacher widths must be strictly ascending, got {:?}",
                self.teacher_widths
            )));
        }
        if self.teacher_widths.contains(&0) || self.student_width == 0 {
            return Err(Error::Config("widths must be positive".into()));
        }
        if self.teacher_depth == 0 || self.student_depth == 0 {
            return Err(Error::Config("hidden depths must be positive".into()));
        }
        if self.bins == 0 {
            return Err(Error::Config("bin count must be positive".into()));
        }
        self.fit.validate()?;
        self.distill_config(KdMode::Vanilla, 0).validate()
    }

    pub fn teacher_dims(&self, input: usize, width: usize, classes: usize) -> Vec<usize> {
        mlp_dims(input, width, self.teacher_depth, classes)
    }

    pub fn student_dims(&self, input: usize, classes: usize) -> Vec<usize> {
        mlp_dims(input, self.student_width, self.student_depth, classes)
    }

    pub fn teacher_init_seed(&self, width: usize, seed: u64) -> u64 {
        rng::mix(rng::mix(seed, TEACHER_TAG), width as u64)
    }

    /// Vanilla and calibrated students of one seed start from the same weights.
    pub fn student_init_seed(&self, seed: u64) -> u64 {
        rng::mix(seed, STUDENT_TAG)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.train.clone() }
    }

    pub fn distill_config(&self, mode: KdMode, seed: u64) -> DistillConfig {
        DistillConfig {
            alpha: self.alpha,
            kd_temperature: self.kd_temperature,
            mode,
            train: self.train_config(seed),
        }
    }
}

/// One (teacher size, mode, seed) cell of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub teacher_size: usize,
    pub seed: u64,
    pub mode: KdMode,
    pub teacher_acc: f64,
    /// ECE on the test split at T = 1 and at the fitted T.
    pub teacher_ece_before: f64,
    pub teacher_ece_after: f64,
    /// Same on the validation split the temperature was fitted on.
    pub teacher_val_ece_before: f64,
    pub teacher_val_ece_after: f64,
    pub temperature: f64,
    /// Softening temperature the student was trained with.
    pub effective_temperature: f64,
    pub student_acc: f64,
}

/// Mean and sample standard deviation over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub teacher_size: usize,
    pub mode: KdMode,
    pub teacher_acc: Summary,
    pub temperature: Summary,
    pub student_acc: Summary,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<SweepRow>,
}

impl ComparisonTable {
    /// One cell per (teacher size, mode), sizes ascending, vanilla first.
    pub fn aggregate(&self) -> Vec<AggregateCell> {
        let mut keys: Vec<(usize, KdMode)> =
            self.rows.iter().map(|r| (r.teacher_size, r.mode)).collect();
        keys.sort_unstable();
        keys.dedup();
        keys.into_iter()
            .map(|(size, mode)| {
                let rows: Vec<&SweepRow> =
                    self.rows.iter().filter(|r| r.teacher_size == size && r.mode == mode).collect();
                let pick = |f: fn(&SweepRow) -> f64| {
                    Summary::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>())
                };
                AggregateCell {
                    teacher_size: size,
                    mode,
                    teacher_acc: pick(|r| r.teacher_acc),
                    temperature: pick(|r| r.temperature),
                    student_acc: pick(|r| r.student_acc),
                }
            })
            .collect()
    }

    /// Student accuracy of the (size, seed) cell in `mode`.
    pub fn student_acc(&self, size: usize, seed: u64, mode: KdMode) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.teacher_size == size && r.seed == seed && r.mode == mode)
            .map(|r| r.student_acc)
    }
}

/// Teacher trained and calibrated for one (width, seed) cell.
#[derive(Debug, Clone)]
pub struct CalibratedTeacher {
    pub model: MlpModel,
    pub trace: TrainTrace,
    pub fit: TemperatureFit,
    pub test_accuracy: f64,
}

pub fn train_and_calibrate_teacher(
    spec: &SweepSpec,
    splits: &Splits,
    width: usize,
    seed: u64,
) -> Result<CalibratedTeacher> {
    let train_set = &splits.train;
    let dims = spec.teacher_dims(train_set.dim(), width, train_set.class_count());
    let init = MlpModel::seeded(&dims, spec.teacher_init_seed(width, seed))?;
    let (model, trace) = train(init, train_set, &spec.train_config(seed), &TargetMode::Hard)?;
    let fit = fit_temperature(&logit_set(&model, &splits.validation)?, &spec.fit)?;
    let test_accuracy = evaluate_accuracy(&model, &splits.test)?;
    Ok(CalibratedTeacher { model, trace, fit, test_accuracy })
}

/// Train, calibrate and distil one (width, seed) cell: two rows, vanilla then calibrated.
pub fn run_sweep_cell(
    spec: &SweepSpec,
    splits: &Splits,
    width: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let teacher = train_and_calibrate_teacher(spec, splits, width, seed)?;
    let val_report = calibration_report(
        &logit_set(&teacher.model, &splits.validation)?,
        &teacher.fit,
        spec.bins,
    )?;
    let test_report =
        calibration_report(&logit_set(&teacher.model, &splits.test)?, &teacher.fit, spec.bins)?;
    let train_set = &splits.train;
    let student_dims = spec.student_dims(train_set.dim(), train_set.class_count());
    KdMode::ALL
        .iter()
        .map(|&mode| {
            let student = MlpModel::seeded(&student_dims, spec.student_init_seed(seed))?;
            let outcome = distill_student(
                student,
                &teacher.model,
                train_set,
                &spec.distill_config(mode, seed),
                Some(&teacher.fit),
            )?;
            Ok(SweepRow {
                teacher_size: width,
                seed,
                mode,
                teacher_acc: teacher.test_accuracy,
                teacher_ece_before: test_report.ece_before,
                teacher_ece_after: test_report.ece_after,
                teacher_val_ece_before: val_report.ece_before,
                teacher_val_ece_after: val_report.ece_after,
                temperature: teacher.fit.temperature,
                effective_temperature: outcome.effective_temperature,
                student_acc: evaluate_accuracy(&outcome.student, &splits.test)?,
            })
        })
        .collect()
}

/// Every (width, seed) cell of the sweep. Cells run in parallel on the
/// current rayon pool; rows come back ordered by width, seed, mode.
pub fn teacher_size_sweep(spec: &SweepSpec, splits: &Splits) -> Result<ComparisonTable> {
    spec.validate()?;
    let cells: Vec<(usize, u64)> =
        spec.teacher_widths.iter().flat_map(|&w| spec.seeds.iter().map(move |&s| (w, s))).collect();
    let rows: Vec<Vec<SweepRow>> = cells
        .par_iter()
        .map(|&(w, s)| run_sweep_cell(spec, splits, w, s))
        .collect::<Result<_>>()?;
    Ok(ComparisonTable { rows: rows.into_iter().flatten().collect() })
}
