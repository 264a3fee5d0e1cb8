//! Tempered softmax, log-softmax and softmax cross-entropy.
//!
//! Every kernel shifts by the row maximum of `z / T` before exponentiating,
//! and log-probabilities come from `shifted - ln Σ exp(shifted)`, never from
//! `ln(softmax)`.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis, Zip};

use super::model::{Gradients, MlpModel};
use crate::error::{Error, Result};

/// Tolerance on `Σ_k target_k = 1` for soft targets.
pub const SOFT_TARGET_TOLERANCE: f64 = 1e-6;

pub(crate) fn check_temperature(temperature: f64) -> Result<()> {
    if temperature > 0.0 && temperature.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("temperature must be a positive finite real, got {temperature}")))
    }
}

/// Fill `probs` and `log_probs` with softmax(z / T) of one row.
pub(crate) fn softmax_row_into(
    z: ArrayView1<f64>,
    temperature: f64,
    mut probs: ArrayViewMut1<f64>,
    mut log_probs: ArrayViewMut1<f64>,
) {
    let max = z.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v / temperature));
    let mut sum = 0.0;
    for ((p, lp), &v) in probs.iter_mut().zip(log_probs.iter_mut()).zip(z.iter()) {
        let shifted = v / temperature - max;
        *lp = shifted;
        *p = shifted.exp();
        sum += *p;
    }
    let log_sum = sum.ln();
    probs.mapv_inplace(|p| p / sum);
    log_probs.mapv_inplace(|lp| lp - log_sum);
}

/// Row-wise `(softmax(z / T), log_softmax(z / T))`.
pub fn softmax_and_log(
    logits: ArrayView2<f64>,
    temperature: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_temperature(temperature)?;
    let mut probs = Array2::zeros(logits.raw_dim());
    let mut log_probs = Array2::zeros(logits.raw_dim());
    Zip::from(logits.rows())
        .and(probs.rows_mut())
        .and(log_probs.rows_mut())
        .for_each(|z, p, lp| softmax_row_into(z, temperature, p, lp));
    Ok((probs, log_probs))
}

/// Row-wise softmax(z / T).
pub fn softmax(logits: ArrayView2<f64>, temperature: f64) -> Result<Array2<f64>> {
    Ok(softmax_and_log(logits, temperature)?.0)
}

/// Row-wise log_softmax(z / T).
pub fn log_softmax(logits: ArrayView2<f64>, temperature: f64) -> Result<Array2<f64>> {
    Ok(softmax_and_log(logits, temperature)?.1)
}

/// Training targets for cross-entropy.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    /// One class index per sample.
    Hard(&'a [usize]),
    /// One probability row per sample.
    Soft(ArrayView2<'a, f64>),
}

impl Targets<'_> {
    pub fn validate(&self, rows: usize, classes: usize) -> Result<()> {
        match self {
            Targets::Hard(labels) => {
                if labels.len() != rows {
                    return Err(Error::Shape {
                        context: "hard label count",
                        expected: rows,
                        found: labels.len(),
                    });
                }
                if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= classes) {
                    return Err(Error::Validation(format!(
                        "label {y} at sample {i} is not below class count {classes}"
                    )));
                }
            }
            Targets::Soft(probs) => {
                if probs.nrows() != rows {
                    return Err(Error::Shape {
                        context: "soft target rows",
                        expected: rows,
                        found: probs.nrows(),
                    });
                }
                if probs.ncols() != classes {
                    return Err(Error::Shape {
                        context: "soft target columns",
                        expected: classes,
                        found: probs.ncols(),
                    });
                }
                for (i, row) in probs.rows().into_iter().enumerate() {
                    if row.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
                        return Err(Error::Validation(format!(
                            "soft target row {i} has a negative or non-finite entry"
                        )));
                    }
                    let sum = row.sum();
                    if (sum - 1.0).abs() > SOFT_TARGET_TOLERANCE {
                        return Err(Error::Validation(format!(
                            "soft target row {i} sums to {sum}, not 1"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Mean softmax cross-entropy of `logits / T` against `targets`, together
/// with its gradient with respect to the (untempered) logits.
///
/// Per sample the gradient row is `(softmax(z / T) - target) / (T · n)`.
pub fn cross_entropy_with_grad(
    logits: ArrayView2<f64>,
    targets: Targets<'_>,
    temperature: f64,
) -> Result<(f64, Array2<f64>)> {
    check_temperature(temperature)?;
    let (n, k) = logits.dim();
    if n == 0 {
        return Err(Error::Validation("cross-entropy over an empty batch".into()));
    }
    targets.validate(n, k)?;
    let (probs, log_probs) = softmax_and_log(logits, temperature)?;
    let scale = 1.0 / (temperature * n as f64);
    let mut grad = probs;
    let mut total = 0.0;
    match targets {
        Targets::Hard(labels) => {
            for (i, &y) in labels.iter().enumerate() {
                total -= log_probs[[i, y]];
                grad[[i, y]] -= 1.0;
            }
        }
        Targets::Soft(soft) => {
            Zip::from(&mut grad).and(&log_probs).and(&soft).for_each(|g, &lp, &t| {
                if t > 0.0 {
                    total -= t * lp;
                }
                *g -= t;
            });
        }
    }
    grad.mapv_inplace(|g| g * scale);
    Ok((total / n as f64, grad))
}

/// Mean cross-entropy of the model's tempered output against `targets`, and
/// exact parameter gradients.
pub fn loss_and_grad(
    model: &MlpModel,
    inputs: ArrayView2<f64>,
    targets: Targets<'_>,
    temperature: f64,
) -> Result<(f64, Gradients)> {
    let cache = model.forward_cached(inputs)?;
    let (loss, logit_grad) = cross_entropy_with_grad(cache.logits.view(), targets, temperature)?;
    let grads = model.backward(&cache, &logit_grad)?;
    Ok((loss, grads))
}

/// Index of the largest entry in each row; ties resolve to the lowest index.
pub fn argmax_rows(logits: ArrayView2<f64>) -> Vec<usize> {
    logits
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn uniform_prediction_loss_is_ln2() {
        let z = array![[0.0, 0.0]];
        let (loss, grad) = cross_entropy_with_grad(z.view(), Targets::Hard(&[1]), 1.0).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(grad, array![[0.5, -0.5]]);
    }

    #[test]
    fn own_tempered_output_as_target_has_zero_gradient() {
        let model = MlpModel::seeded(&[3, 6, 4], 3).unwrap();
        let x = array![[0.2, -1.0, 0.7], [1.5, 0.1, -0.3]];
        let z = model.forward(x.view()).unwrap();
        let t = 2.5;
        let own = softmax(z.view(), t).unwrap();
        let (_, logit_grad) =
            cross_entropy_with_grad(z.view(), Targets::Soft(own.view()), t).unwrap();
        assert!(logit_grad.iter().all(|&g| g == 0.0));
        let (_, grads) = loss_and_grad(&model, x.view(), Targets::Soft(own.view()), t).unwrap();
        assert_eq!(grads.l2_norm(), 0.0);
    }

    #[test]
    fn logit_gradient_rows_sum_to_zero() {
        let z = array![[3.0, -1.0, 0.25, 7.0], [-2.0, -2.0, 10.0, 0.0], [0.0, 0.0, 0.0, 0.0]];
        let soft = array![[0.1, 0.2, 0.3, 0.4], [0.0, 0.0, 1.0, 0.0], [0.25, 0.25, 0.25, 0.25]];
        for targets in [Targets::Hard(&[3, 0, 2]), Targets::Soft(soft.view())] {
            for t in [0.5, 1.0, 4.0] {
                let (_, g) = cross_entropy_with_grad(z.view(), targets, t).unwrap();
                for row in g.rows() {
                    assert!(row.sum().abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rejects_unnormalised_soft_targets_and_bad_temperature() {
        let z = array![[0.0, 1.0]];
        let soft = array![[0.3, 0.3]];
        assert!(matches!(
            cross_entropy_with_grad(z.view(), Targets::Soft(soft.view()), 1.0),
            Err(Error::Validation(_))
        ));
        for t in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                cross_entropy_with_grad(z.view(), Targets::Hard(&[0]), t),
                Err(Error::Domain(_))
            ));
        }
        assert!(cross_entropy_with_grad(z.view(), Targets::Hard(&[2]), 1.0).is_err());
    }

    #[test]
    fn softmax_is_stable_for_huge_logits() {
        let z = array![[1000.0, 0.0, -1000.0]];
        let (p, lp) = softmax_and_log(z.view(), 1.0).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert_eq!(p[[0, 0]], 1.0);
        assert!((lp[[0, 1]] + 1000.0).abs() < 1e-9);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax_rows(array![[1.0, 1.0, 0.0], [0.0, 2.0, 2.0]].view()), vec![0, 1]);
    }
}
