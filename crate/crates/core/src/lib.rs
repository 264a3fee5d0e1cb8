//! Temperature-scaling calibration of a teacher network and its effect on
//! knowledge distillation, at desk scale.
//!
//! * [`nnet`]: dense rectifier networks, softmax cross-entropy, SGD with
//!   momentum and a cosine schedule.
//! * [`calibration`]: NLL, ECE, reliability histograms and the fitted
//!   scaling temperature.
//! * [`distill`]: the distillation objective, student training in vanilla
//!   and calibrated mode, and the teacher-size sweep.
//! * [`data`]: synthetic data, IDX ingestion, splits and the logits CSV.

pub mod calibration;
pub mod data;
pub mod distill;
pub mod error;
pub mod nnet;
pub mod rng;

pub use calibration::{
    calibrated_confidences, calibration_report, ece, fit_temperature, nll, reliability_histogram,
    CalibrationReport, FitOptions, LogitSet, ReliabilityHistogram, TemperatureFit,
};
pub use data::{generate_synthetic, split, Dataset, SplitFractions, Splits, SyntheticSpec};
pub use distill::{
    distill_student, kd_loss, teacher_size_sweep, ComparisonTable, DistillConfig, KdMode, SweepRow,
    SweepSpec,
};
pub use error::{Error, Result};
pub use nnet::{train, MlpModel, TargetMode, TrainConfig, TrainTrace};
