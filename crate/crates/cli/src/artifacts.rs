//! On-disk layout of a run and the per-stage run record.
//!
//! ```text
//! <out>/<config-digest>/config.json
//! <out>/<config-digest>/teacher/<size>-teacher-<seed>/...
//! <out>/<config-digest>/calibrate/<size>-fit-<seed>/...
//! <out>/<config-digest>/distill/<size>-<mode>-<seed>/...
//! <out>/<config-digest>/{baseline,calibration,comparison}.{csv,txt}, verdict.txt
//! ```
//!
//! Every file except `run_record.json` (which carries wall-clock
//! timestamps) is a pure function of the configuration and seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use calikd::data::write_atomic;
use calikd::distill::KdMode;
use calikd::nnet::TrainTrace;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const RUN_RECORD: &str = "run_record.json";

#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(out: &Path, config: &ExperimentConfig) -> Self {
        Self { root: out.join(config.digest()) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn teacher_dir(&self, size: usize, seed: u64) -> PathBuf {
        self.root.join("teacher").join(format!("{size}-teacher-{seed}"))
    }

    pub fn calibrate_dir(&self, size: usize, seed: u64) -> PathBuf {
        self.root.join("calibrate").join(format!("{size}-fit-{seed}"))
    }

    pub fn distill_dir(&self, size: usize, mode: KdMode, seed: u64) -> PathBuf {
        self.root.join("distill").join(format!("{size}-{mode}-{seed}"))
    }
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

/// Provenance of one stage execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_digest: String,
    pub stage: String,
    pub teacher_size: usize,
    pub seed: u64,
    pub mode: Option<KdMode>,
    /// File name to SHA-256 of its bytes.
    pub artifacts: BTreeMap<String, String>,
    pub metadata: Value,
    pub library_version: String,
    pub prng: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

/// Collects the files of one stage and writes the run record last.
pub struct StageWriter {
    dir: PathBuf,
    record: RunRecord,
}

impl StageWriter {
    pub fn create(
        dir: PathBuf,
        digest: &str,
        stage: &str,
        teacher_size: usize,
        seed: u64,
        mode: Option<KdMode>,
    ) -> Result<Self> {
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            record: RunRecord {
                config_digest: digest.to_string(),
                stage: stage.to_string(),
                teacher_size,
                seed,
                mode,
                artifacts: BTreeMap::new(),
                metadata: Value::Null,
                library_version: env!("CARGO_PKG_VERSION").to_string(),
                prng: calikd::rng::PRNG_ID.to_string(),
                started_unix_ms: now_ms(),
                finished_unix_ms: 0,
            },
        })
    }

    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.record.artifacts.insert(name.to_string(), hex::encode(Sha256::digest(bytes)));
        Ok(())
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        self.bytes(name, text.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Runtime(format!("cannot serialise {name}: {e}")))?;
        text.push('\n');
        self.text(name, &text)
    }

    pub fn finish(mut self, metadata: Value) -> Result<PathBuf> {
        self.record.metadata = metadata;
        self.record.finished_unix_ms = now_ms();
        let mut text = serde_json::to_string_pretty(&self.record).expect("record serialises");
        text.push('\n');
        write_atomic(&self.dir.join(RUN_RECORD), text.as_bytes())?;
        Ok(self.dir)
    }
}

/// Read a JSON artifact; a missing file is a validation error carrying `hint`.
pub fn read_json<T: DeserializeOwned>(path: &Path, hint: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|_| {
        CliError::Validation(format!("missing artifact {}; {hint}", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("corrupt artifact {}: {e}", path.display())))
}

pub fn require_file(path: &Path, hint: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("missing artifact {}; {hint}", path.display())))
    }
}

pub fn trace_csv(trace: &TrainTrace) -> String {
    let mut out = String::from("epoch,lr,loss,accuracy\n");
    for e in &trace.epochs {
        out.push_str(&format!("{},{},{},{}\n", e.epoch, e.lr, e.loss, e.accuracy));
    }
    out
}
