use serde::{Deserialize, Serialize};

use super::{calibrated_confidences, LogitSet};
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 15;

/// One equal-width confidence bin `(lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Zero for an empty bin.
    pub mean_confidence: f64,
    /// Zero for an empty bin.
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityHistogram {
    pub bins: Vec<Bin>,
}

fn lower_edge(m: usize, bins: usize) -> f64 {
    m as f64 / bins as f64
}

/// Index of the bin `(m/M, (m+1)/M]` holding `confidence`. A confidence on
/// an edge belongs to the bin whose upper edge it is.
fn bin_index(confidence: f64, bins: usize) -> usize {
    let mut m = ((confidence * bins as f64).ceil() as usize).clamp(1, bins) - 1;
    while m > 0 && confidence <= lower_edge(m, bins) {
        m -= 1;
    }
    while m + 1 < bins && confidence > lower_edge(m + 1, bins) {
        m += 1;
    }
    m
}

impl ReliabilityHistogram {
    /// Bin `(confidence, correct)` pairs into `bins` equal-width bins over (0, 1].
    pub fn from_predictions<I>(predictions: I, bins: usize) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, bool)>,
    {
        if bins == 0 {
            return Err(Error::Domain("bin count must be >= 1".into()));
        }
        let mut count = vec![0usize; bins];
        let mut conf_sum = vec![0.0; bins];
        let mut correct_sum = vec![0usize; bins];
        for (confidence, correct) in predictions {
            if !(confidence > 0.0 && confidence <= 1.0) {
                return Err(Error::Domain(format!("confidence {confidence} is outside (0, 1]")));
            }
            let m = bin_index(confidence, bins);
            count[m] += 1;
            conf_sum[m] += confidence;
            correct_sum[m] += usize::from(correct);
        }
        let bins = (0..bins)
            .map(|m| {
                let c = count[m];
                let (mean_confidence, mean_accuracy) = if c == 0 {
                    (0.0, 0.0)
                } else {
                    (conf_sum[m] / c as f64, correct_sum[m] as f64 / c as f64)
                };
                Bin {
                    lower: lower_edge(m, bins),
                    upper: lower_edge(m + 1, bins),
                    count: c,
                    mean_confidence,
                    mean_accuracy,
                }
            })
            .collect();
        Ok(Self { bins })
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// CSV with header `bin_lower,bin_upper,count,mean_confidence,mean_accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lower,bin_upper,count,mean_confidence,mean_accuracy\n");
        for b in &self.bins {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                b.lower, b.upper, b.count, b.mean_confidence, b.mean_accuracy
            ));
        }
        out
    }
}

/// Reliability histogram of `set` at temperature `T` with `bins` bins.
pub fn reliability_histogram(
    set: &LogitSet,
    temperature: f64,
    bins: usize,
) -> Result<ReliabilityHistogram> {
    let confidences = calibrated_confidences(set, temperature)?;
    ReliabilityHistogram::from_predictions(
        confidences.iter().zip(set.labels()).map(|(c, &y)| (c.confidence, c.predicted == y)),
        bins,
    )
}

/// Expected calibration error: `Σ_m (|B_m| / n) · |acc(B_m) - conf(B_m)|`.
pub fn ece(histogram: &ReliabilityHistogram) -> Result<f64> {
    let n = histogram.total();
    if n == 0 {
        return Err(Error::Domain("ECE of an empty histogram".into()));
    }
    Ok(histogram
        .bins
        .iter()
        .filter(|b| b.count > 0)
        .map(|b| b.count as f64 / n as f64 * (b.mean_accuracy - b.mean_confidence).abs())
        .sum())
}
