use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::synthetic::SyntheticSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    /// Not yet split.
    Full,
    Train,
    Validation,
    Test,
}

impl std::fmt::Display for SplitTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitTag::Full => "full",
            SplitTag::Train => "train",
            SplitTag::Validation => "validation",
            SplitTag::Test => "test",
        })
    }
}

/// Where the samples came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Source {
    Synthetic(SyntheticSpec),
    Idx {
        images_sha256: String,
        labels_sha256: String,
        /// Number of leading samples kept, when a subset was requested.
        subset: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub tag: SplitTag,
    pub seed: u64,
    pub fractions: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Source,
    pub split: Option<SplitRecord>,
}

/// Labelled feature matrix. `source_indices[i]` is the row index of sample
/// `i` in the unsplit dataset, which makes split disjointness checkable.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    class_count: usize,
    split: SplitTag,
    source_indices: Vec<usize>,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        class_count: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = labels.len();
        Self::with_split(
            features,
            labels,
            class_count,
            SplitTag::Full,
            (0..n).collect(),
            provenance,
        )
    }

    pub(crate) fn with_split(
        features: Array2<f64>,
        labels: Vec<usize>,
        class_count: usize,
        split: SplitTag,
        source_indices: Vec<usize>,
        provenance: Provenance,
    ) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::Validation(format!("class count must be >= 2, got {class_count}")));
        }
        if features.nrows() != labels.len() {
            return Err(Error::Shape {
                context: "dataset rows vs labels",
                expected: features.nrows(),
                found: labels.len(),
            });
        }
        if source_indices.len() != labels.len() {
            return Err(Error::Shape {
                context: "dataset source indices",
                expected: labels.len(),
                found: source_indices.len(),
            });
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= class_count) {
            return Err(Error::Validation(format!(
                "label {y} is not below class count {class_count}"
            )));
        }
        if let Some(row) =
            features.axis_iter(Axis(0)).position(|r| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Validation(format!("feature row {row} is not finite")));
        }
        Ok(Self { features, labels, class_count, split, source_indices, provenance })
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn split_tag(&self) -> SplitTag {
        self.split
    }

    pub fn source_indices(&self) -> &[usize] {
        &self.source_indices
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }
}
