use serde::{Deserialize, Serialize};

use super::golden::golden_section_minimize;
use super::histogram::{ece, reliability_histogram, ReliabilityHistogram};
use super::{nll, nll_unchecked, LogitSet};
use crate::error::{Error, Result};

/// Search settings for [`fit_temperature`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub t_min: f64,
    pub t_max: f64,
    /// Final bracket width on `ln T`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { t_min: 0.05, t_max: 20.0, tol: 1e-4, max_iter: 200 }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_min > 0.0 && self.t_min <= 1.0 && self.t_max >= 1.0 && self.t_max.is_finite()) {
            return Err(Error::Config(format!(
                "temperature bounds must satisfy 0 < t_min <= 1 <= t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// A fitted scaling temperature with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureFit {
    pub temperature: f64,
    /// Mean NLL at T = 1.
    pub nll_before: f64,
    /// Mean NLL at `temperature`.
    pub nll_after: f64,
    pub converged: bool,
    pub clamped_at_bound: bool,
    /// Number of NLL evaluations spent.
    pub evaluations: usize,
    /// Set when every logit row is constant, so NLL does not depend on T and
    /// the fit falls back to T = 1.
    pub degenerate: bool,
}

fn is_degenerate(set: &LogitSet) -> bool {
    set.logits().rows().into_iter().all(|row| {
        let first = row[0];
        row.iter().all(|&v| v == first)
    })
}

/// Fit `T` minimising mean NLL over `[t_min, t_max]` by golden-section
/// search on `ln T`.
///
/// The search result is compared with `T = 1` and both bounds, and the best
/// of the four is returned, so `nll_after <= nll_before` always holds and a
/// monotone objective reports the exact bound.
pub fn fit_temperature(set: &LogitSet, options: &FitOptions) -> Result<TemperatureFit> {
    options.validate()?;
    let objective = |log_t: f64| nll_unchecked(set.logits(), set.labels(), log_t.exp());
    let nll_before = nll(set, 1.0)?;

    if is_degenerate(set) {
        return Ok(TemperatureFit {
            temperature: 1.0,
            nll_before,
            nll_after: nll_before,
            converged: true,
            clamped_at_bound: false,
            evaluations: 1,
            degenerate: true,
        });
    }

    let (lo, hi) = (options.t_min.ln(), options.t_max.ln());
    let search = golden_section_minimize(objective, lo, hi, options.tol, options.max_iter);
    // (ln T, NLL, T)
    let candidates = [
        (search.x, search.fx, search.x.exp()),
        (0.0, nll_before, 1.0),
        (lo, objective(lo), options.t_min),
        (hi, objective(hi), options.t_max),
    ];
    let (best_log_t, best_nll, temperature) = candidates
        .iter()
        .copied()
        .fold(candidates[0], |best, c| if c.1 < best.1 { c } else { best });

    let near_bound = |u: f64| (u - lo).abs() <= options.tol || (u - hi).abs() <= options.tol;
    Ok(TemperatureFit {
        temperature,
        nll_before,
        nll_after: best_nll,
        converged: search.converged,
        clamped_at_bound: near_bound(best_log_t),
        evaluations: search.evaluations + 3,
        degenerate: false,
    })
}

/// Metrics before (T = 1) and after (fitted T) calibration on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub temperature: f64,
    pub ece_before: f64,
    pub ece_after: f64,
    pub nll_before: f64,
    pub nll_after: f64,
    /// Identical at every temperature.
    pub accuracy: f64,
    pub bins: usize,
    pub histogram_before: ReliabilityHistogram,
    pub histogram_after: ReliabilityHistogram,
}

pub fn calibration_report(
    set: &LogitSet,
    fit: &TemperatureFit,
    bins: usize,
) -> Result<CalibrationReport> {
    let histogram_before = reliability_histogram(set, 1.0, bins)?;
    let histogram_after = reliability_histogram(set, fit.temperature, bins)?;
    Ok(CalibrationReport {
        temperature: fit.temperature,
        ece_before: ece(&histogram_before)?,
        ece_after: ece(&histogram_after)?,
        nll_before: nll(set, 1.0)?,
        nll_after: nll(set, fit.temperature)?,
        accuracy: set.accuracy(),
        bins,
        histogram_before,
        histogram_after,
    })
}
