use ndarray::Array2;
use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Provenance, Source};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Gaussian-cluster classification problem.
///
/// Each class owns `clusters_per_class` centers drawn from N(0, I_d); a
/// sample of class `c` is a random center of `c` plus N(0, spread² I_d)
/// noise. Sample `i` belongs to class `i mod K` before label noise, after
/// which a fraction `label_noise` of labels is moved to a uniformly random
/// different class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub class_count: usize,
    pub dims: usize,
    pub clusters_per_class: usize,
    pub cluster_spread: f64,
    pub label_noise: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            class_count: 10,
            dims: 16,
            clusters_per_class: 3,
            cluster_spread: 1.0,
            label_noise: 0.15,
            samples: 8000,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(Error::Config(format!(
                "class_count must be >= 2, got {}",
                self.class_count
            )));
        }
        if self.dims == 0 || self.clusters_per_class == 0 || self.samples == 0 {
            return Err(Error::Config(
                "dims, clusters_per_class and samples must be positive".into(),
            ));
        }
        if !(self.cluster_spread > 0.0 && self.cluster_spread.is_finite()) {
            return Err(Error::Config(format!(
                "cluster_spread must be positive, got {}",
                self.cluster_spread
            )));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::Config(format!(
                "label_noise must lie in [0, 0.5), got {}",
                self.label_noise
            )));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Synthetic> {
        self.validate()?;
        let (k, d) = (self.class_count, self.dims);
        let mut rng = rng::stream(self.seed, Stream::Data);

        let centers: Vec<f64> =
            (0..k * self.clusters_per_class * d).map(|_| StandardNormal.sample(&mut rng)).collect();

        let mut features = Array2::zeros((self.samples, d));
        let mut clean_labels = Vec::with_capacity(self.samples);
        for (i, mut row) in features.rows_mut().into_iter().enumerate() {
            let class = i % k;
            let cluster = rng.random_range(0..self.clusters_per_class);
            let offset = (class * self.clusters_per_class + cluster) * d;
            for (j, x) in row.iter_mut().enumerate() {
                let eps: f64 = StandardNormal.sample(&mut rng);
                *x = centers[offset + j] + self.cluster_spread * eps;
            }
            clean_labels.push(class);
        }

        let mut noise = rng::stream(self.seed, Stream::Noise);
        let labels = clean_labels
            .iter()
            .map(|&y| {
                if noise.random::<f64>() < self.label_noise {
                    let other = noise.random_range(0..k - 1);
                    if other >= y {
                        other + 1
                    } else {
                        other
                    }
                } else {
                    y
                }
            })
            .collect();

        let provenance = Provenance { source: Source::Synthetic(self.clone()), split: None };
        Ok(Synthetic { dataset: Dataset::new(features, labels, k, provenance)?, clean_labels })
    }
}

/// A generated dataset together with its labels before noise was applied.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub clean_labels: Vec<usize>,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    Ok(spec.generate()?.dataset)
}
