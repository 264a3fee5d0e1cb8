//! Experiment configuration: a JSON file, `--set key=value` overrides on
//! top of it, and the digest that names the run directory.

use std::path::{Path, PathBuf};

use calikd::calibration::DEFAULT_BINS;
use calikd::data::{load_idx, split, Dataset, SplitFractions, Splits, SyntheticSpec};
use calikd::distill::SweepSpec;
use calikd::{FitOptions, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetConfig {
    Synthetic(SyntheticSpec),
    Idx {
        images: PathBuf,
        labels: PathBuf,
        /// Keep only the first `subset` samples.
        #[serde(default)]
        subset: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistillSettings {
    pub alpha: f64,
    pub kd_temperature: f64,
}

impl Default for DistillSettings {
    fn default() -> Self {
        Self { alpha: 0.8, kd_temperature: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub split: SplitFractions,
    pub split_seed: u64,
    /// Teacher hidden widths, ascending.
    pub teacher_sizes: Vec<usize>,
    pub teacher_depth: usize,
    pub student_size: usize,
    pub student_depth: usize,
    /// `seed` is replaced by the run seed.
    pub train: TrainConfig,
    pub distill: DistillSettings,
    pub seeds: Vec<u64>,
    pub bins: usize,
    pub temperature_search: FitOptions,
    /// Default output root; `--out` and `CALIKD_OUT` take precedence.
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::Synthetic(SyntheticSpec::default()),
            split: SplitFractions { train: 0.6, validation: 0.2, test: 0.2 },
            split_seed: 0,
            teacher_sizes: vec![32, 256, 2048],
            teacher_depth: 1,
            student_size: 16,
            student_depth: 1,
            train: TrainConfig::default(),
            distill: DistillSettings::default(),
            seeds: vec![0, 1, 2, 3, 4],
            bins: DEFAULT_BINS,
            temperature_search: FitOptions::default(),
            output_dir: None,
        }
    }
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(CliError::Validation(format!("bad --set key `{key}`")));
        }
        let map = match node {
            Value::Object(map) => map,
            _ => {
                return Err(CliError::Validation(format!(
                    "--set {key}: `{}` is not an object",
                    parts[..i].join(".")
                )))
            }
        };
        if i + 1 == parts.len() {
            map.insert(part.to_string(), value);
            return Ok(());
        }
        node = map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split always yields at least one part")
}

/// Parse `key=value`; the value is read as JSON when it parses, else as a string.
pub fn parse_override(raw: &str) -> Result<(String, Value)> {
    let (key, value) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("--set expects key=value, got `{raw}`")))?;
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    Ok((key.trim().to_string(), value))
}

impl ExperimentConfig {
    /// Load `path` (or the built-in defaults) and apply overrides in order.
    pub fn resolve(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Validation(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::Validation(format!("config {} is not valid JSON: {e}", p.display()))
                })?
            }
            None => serde_json::to_value(Self::default()).expect("default config serialises"),
        };
        for raw in overrides {
            let (key, v) = parse_override(raw)?;
            set_path(&mut value, &key, v)?;
        }
        let config: Self = serde_json::from_value(value)
            .map_err(|e| CliError::Validation(format!("invalid configuration: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.teacher_sizes.is_empty() {
            return Err(CliError::Validation("teacher_sizes is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Validation("seeds is empty".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(CliError::Validation("seeds contain duplicates".into()));
        }
        if let DatasetConfig::Idx { images, labels, .. } = &self.dataset {
            for p in [images, labels] {
                if !p.is_file() {
                    return Err(CliError::Validation(format!(
                        "dataset file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        if let DatasetConfig::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        self.split.validate()?;
        self.sweep_spec().validate()?;
        Ok(())
    }

    /// Canonical JSON of everything that affects results (the output location does not).
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        serde_json::to_string(&c).expect("config serialises")
    }

    /// First 16 hex digits of the SHA-256 of [`canonical_json`](Self::canonical_json).
    pub fn digest(&self) -> String {
        let full = hex::encode(Sha256::digest(self.canonical_json().as_bytes()));
        full[..16].to_string()
    }

    pub fn sweep_spec(&self) -> SweepSpec {
        SweepSpec {
            teacher_widths: self.teacher_sizes.clone(),
            teacher_depth: self.teacher_depth,
            student_width: self.student_size,
            student_depth: self.student_depth,
            seeds: self.seeds.clone(),
            train: self.train.clone(),
            alpha: self.distill.alpha,
            kd_temperature: self.distill.kd_temperature,
            fit: self.temperature_search,
            bins: self.bins,
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        Ok(match &self.dataset {
            DatasetConfig::Synthetic(spec) => spec.generate()?.dataset,
            DatasetConfig::Idx { images, labels, subset } => load_idx(images, labels, *subset)?,
        })
    }

    pub fn load_splits(&self) -> Result<Splits> {
        Ok(split(&self.load_dataset()?, self.split, self.split_seed)?)
    }
}
