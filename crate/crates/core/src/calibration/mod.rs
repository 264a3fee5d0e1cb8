//! Miscalibration metrics (NLL, ECE, reliability histogram) and
//! single-parameter temperature scaling fitted by NLL minimisation.

mod golden;
mod histogram;
mod temperature;

pub use golden::{golden_section_minimize, GoldenResult};
pub use histogram::{ece, reliability_histogram, Bin, ReliabilityHistogram, DEFAULT_BINS};
pub use temperature::{
    calibration_report, fit_temperature, CalibrationReport, FitOptions, TemperatureFit,
};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::nnet::loss::{argmax_rows, check_temperature, softmax_row_into};
use ndarray::Array1;

/// Per-sample logits with their true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitSet {
    logits: Array2<f64>,
    labels: Vec<usize>,
}

impl LogitSet {
    pub fn new(logits: Array2<f64>, labels: Vec<usize>) -> Result<Self> {
        let (n, k) = logits.dim();
        if n == 0 {
            return Err(Error::Validation("a logit set needs at least one sample".into()));
        }
        if k < 2 {
            return Err(Error::Validation(format!("a logit set needs K >= 2 classes, got {k}")));
        }
        if labels.len() != n {
            return Err(Error::Shape {
                context: "logit rows vs labels",
                expected: n,
                found: labels.len(),
            });
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= k) {
            return Err(Error::Validation(format!(
                "label {y} of sample {i} is not below class count {k}"
            )));
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("logits must be finite".into()));
        }
        Ok(Self { logits, labels })
    }

    pub fn logits(&self) -> ArrayView2<'_, f64> {
        self.logits.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.logits.ncols()
    }

    /// Every logit multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.logits.mapv(|v| v * factor), self.labels.clone())
    }

    /// Fraction of samples whose argmax equals the label.
    pub fn accuracy(&self) -> f64 {
        let correct =
            argmax_rows(self.logits()).iter().zip(&self.labels).filter(|(p, y)| p == y).count();
        correct as f64 / self.len() as f64
    }
}

/// Calibrated confidence of one sample: the largest tempered softmax
/// probability and the class that attains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confidence {
    pub confidence: f64,
    pub predicted: usize,
}

/// `max_k softmax(z_i / T)_k` and its argmax for every sample. The argmax is
/// taken on the raw logits, so it is the same for every `T > 0`.
pub fn calibrated_confidences(set: &LogitSet, temperature: f64) -> Result<Vec<Confidence>> {
    check_temperature(temperature)?;
    let predicted = argmax_rows(set.logits());
    let k = set.class_count();
    let mut probs = Array1::zeros(k);
    let mut log_probs = Array1::zeros(k);
    Ok(set
        .logits
        .rows()
        .into_iter()
        .zip(predicted)
        .map(|(z, predicted)| {
            softmax_row_into(z, temperature, probs.view_mut(), log_probs.view_mut());
            Confidence { confidence: probs[predicted], predicted }
        })
        .collect())
}

/// Mean negative log-likelihood of the true labels under softmax(z / T).
pub fn nll(set: &LogitSet, temperature: f64) -> Result<f64> {
    check_temperature(temperature)?;
    Ok(nll_unchecked(set.logits(), set.labels(), temperature))
}

/// Mean NLL via `log_softmax(z/T)_y = (z_y - max z)/T - ln Σ exp((z - max z)/T)`.
pub(crate) fn nll_unchecked(logits: ArrayView2<f64>, labels: &[usize], temperature: f64) -> f64 {
    let inv = temperature.recip();
    let row_nll = |z: &[f64], y: usize| {
        let max = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sum: f64 = z.iter().map(|&v| ((v - max) * inv).exp()).sum();
        sum.ln() - (z[y] - max) * inv
    };
    // The fit evaluates this hundreds of times; stay on contiguous slices when possible.
    let total: f64 = match logits.as_slice() {
        Some(flat) => {
            flat.chunks_exact(logits.ncols()).zip(labels).map(|(z, &y)| row_nll(z, y)).sum()
        }
        None => logits.rows().into_iter().zip(labels).map(|(z, &y)| row_nll(&z.to_vec(), y)).sum(),
    };
    total / labels.len() as f64
}
