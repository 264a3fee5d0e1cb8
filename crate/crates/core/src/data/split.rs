use ndarray::Axis;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, SplitRecord, SplitTag};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.8, validation: 0.1, test: 0.1 }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train, self.validation, self.test];
        if f.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::Config(format!("split fractions must be positive, got {f:?}")));
        }
        let sum: f64 = f.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
}

/// Seeded permutation followed by a contiguous train / validation / test cut.
pub fn split(dataset: &Dataset, fractions: SplitFractions, seed: u64) -> Result<Splits> {
    fractions.validate()?;
    let n = dataset.len();
    let n_train = (fractions.train * n as f64).round() as usize;
    let n_val = (fractions.validation * n as f64).round() as usize;
    let n_test = n.saturating_sub(n_train + n_val);
    if n_train == 0 || n_val == 0 || n_test == 0 || n_train + n_val > n {
        return Err(Error::Config(format!(
            "split of {n} samples by {:?} leaves an empty part ({n_train}/{n_val}/{n_test})",
            fractions.as_array()
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, Stream::Split));

    let part = |range: std::ops::Range<usize>, tag: SplitTag| -> Result<Dataset> {
        let rows = &order[range];
        let features = dataset.features().select(Axis(0), rows);
        let labels = rows.iter().map(|&i| dataset.labels()[i]).collect();
        let source = rows.iter().map(|&i| dataset.source_indices()[i]).collect();
        let mut provenance = dataset.provenance().clone();
        provenance.split = Some(SplitRecord { tag, seed, fractions: fractions.as_array() });
        Dataset::with_split(features, labels, dataset.class_count(), tag, source, provenance)
    };

    Ok(Splits {
        train: part(0..n_train, SplitTag::Train)?,
        validation: part(n_train..n_train + n_val, SplitTag::Validation)?,
        test: part(n_train + n_val..n, SplitTag::Test)?,
    })
}
