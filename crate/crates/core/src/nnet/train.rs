use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{argmax_rows, cross_entropy_with_grad, Targets};
use super::model::MlpModel;
use super::optim::{sgd_step, MomentumState};
use super::schedule::cosine_lr;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub initial_lr: f64,
    pub max_epochs: usize,
    pub momentum: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            initial_lr: 0.1,
            max_epochs: 60,
            momentum: 0.9,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, train_size: usize) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::Config(format!("initial_lr must be > 0, got {}", self.initial_lr)));
        }
        self.validate_loop(train_size)
    }

    /// Everything but the learning-rate sign, which the loop itself tolerates.
    fn validate_loop(&self, train_size: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > train_size {
            return Err(Error::Config(format!(
                "batch_size must lie in 1..={train_size}, got {}",
                self.batch_size
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    /// Sample-weighted mean of the batch losses.
    pub loss: f64,
    /// Training accuracy of the pre-update logits seen during the epoch.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochStats>,
}

impl TrainTrace {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

/// What the student is fitted to in plain training.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetMode {
    /// The dataset's labels.
    Hard,
    /// One probability row per dataset sample.
    Soft(Array2<f64>),
}

/// Mini-batch SGD with momentum and cosine annealing, shared by plain and
/// distillation training.
///
/// `objective(batch_rows, batch_inputs, batch_logits)` returns the batch loss
/// and dL/dlogits. Batches follow a fresh seeded permutation each epoch; the
/// last batch may be short.
pub(crate) fn run_epochs<F>(
    mut model: MlpModel,
    dataset: &Dataset,
    config: &TrainConfig,
    mut objective: F,
) -> Result<(MlpModel, TrainTrace)>
where
    F: FnMut(&[usize], ArrayView2<f64>, ArrayView2<f64>) -> Result<(f64, Array2<f64>)>,
{
    if dataset.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    config.validate_loop(dataset.len())?;
    if dataset.dim() != model.input_dim() {
        return Err(Error::Shape {
            context: "dataset width vs model input",
            expected: model.input_dim(),
            found: dataset.dim(),
        });
    }
    if dataset.class_count() != model.class_count() {
        return Err(Error::Shape {
            context: "dataset classes vs model outputs",
            expected: model.class_count(),
            found: dataset.class_count(),
        });
    }

    let n = dataset.len();
    let mut shuffle_rng = rng::stream(config.seed, Stream::Shuffle);
    let mut state = MomentumState::new(&model, config.momentum)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = TrainTrace::default();

    for epoch in 0..config.max_epochs {
        let lr = cosine_lr(epoch, config.max_epochs, config.initial_lr)?;
        if config.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            let inputs = dataset.features().select(Axis(0), batch);
            let cache = model.forward_unchecked(inputs.view());
            let (loss, logit_grad) = objective(batch, inputs.view(), cache.logits.view())?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, reason: format!("loss became {loss}") });
            }
            loss_sum += loss * batch.len() as f64;
            correct += argmax_rows(cache.logits.view())
                .iter()
                .zip(batch)
                .filter(|(p, &i)| **p == dataset.labels()[i])
                .count();
            let grads = model.backward(&cache, &logit_grad)?;
            sgd_step(&mut model, &grads, lr, &mut state)?;
            if !model.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    reason: "parameters became non-finite".into(),
                });
            }
        }
        trace.epochs.push(EpochStats {
            epoch,
            lr,
            loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
        });
    }
    Ok((model, trace))
}

/// Train `model` on `dataset` with softmax cross-entropy at temperature 1.
pub fn train(
    model: MlpModel,
    dataset: &Dataset,
    config: &TrainConfig,
    targets: &TargetMode,
) -> Result<(MlpModel, TrainTrace)> {
    config.validate(dataset.len())?;
    train_unvalidated(model, dataset, config, targets)
}

fn train_unvalidated(
    model: MlpModel,
    dataset: &Dataset,
    config: &TrainConfig,
    targets: &TargetMode,
) -> Result<(MlpModel, TrainTrace)> {
    match targets {
        TargetMode::Hard => run_epochs(model, dataset, config, |rows, _, logits| {
            let labels: Vec<usize> = rows.iter().map(|&i| dataset.labels()[i]).collect();
            cross_entropy_with_grad(logits, Targets::Hard(&labels), 1.0)
        }),
        TargetMode::Soft(soft) => {
            if soft.nrows() != dataset.len() {
                return Err(Error::Shape {
                    context: "soft target rows vs dataset",
                    expected: dataset.len(),
                    found: soft.nrows(),
                });
            }
            Targets::Soft(soft.view()).validate(dataset.len(), dataset.class_count())?;
            run_epochs(model, dataset, config, |rows, _, logits| {
                let batch = soft.select(Axis(0), rows);
                cross_entropy_with_grad(logits, Targets::Soft(batch.view()), 1.0)
            })
        }
    }
}

/// Accuracy of `model` on `dataset`.
pub fn evaluate_accuracy(model: &MlpModel, dataset: &Dataset) -> Result<f64> {
    let logits = model.forward(dataset.features())?;
    let correct =
        argmax_rows(logits.view()).iter().zip(dataset.labels()).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / dataset.len() as f64)
}
