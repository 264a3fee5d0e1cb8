//! Datasets: seeded synthetic generation, IDX ingestion, splitting, and the
//! logits CSV interchange file.

mod dataset;
pub mod idx;
pub mod logits_io;
mod split;
mod synthetic;

pub use dataset::{Dataset, Provenance, Source, SplitRecord, SplitTag};
pub use idx::{load_idx, parse_idx, IdxData};
pub use logits_io::{read_logits, write_logits};
pub use split::{split, SplitFractions, Splits};
pub use synthetic::{generate_synthetic, Synthetic, SyntheticSpec};

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Write `bytes` to `path` by way of a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
