//! Deterministic fixtures shared by the benchmarks.

use calikd::calibration::LogitSet;
use calikd::data::{Dataset, SyntheticSpec};
use calikd::distill::logit_set;
use calikd::nnet::mlp_dims;
use calikd::MlpModel;

pub fn dataset(samples: usize) -> Dataset {
    SyntheticSpec { samples, ..Default::default() }
        .generate()
        .expect("valid synthetic spec")
        .dataset
}

/// One-hidden-layer model of `width` sized for `data`.
pub fn model(data: &Dataset, width: usize) -> MlpModel {
    MlpModel::seeded(&mlp_dims(data.dim(), width, 1, data.class_count()), 7).expect("valid dims")
}

/// Logits of an untrained, scaled-up model: spread out like an overconfident teacher.
pub fn logits(samples: usize) -> LogitSet {
    let data = dataset(samples);
    let set = logit_set(&model(&data, 64), &data).expect("shapes agree");
    set.scaled(4.0).expect("positive factor")
}
