//! IDX container (the Fashion-MNIST / MNIST distribution format).
//!
//! Layout: a big-endian `u32` magic `0x0000_08NN` where `08` marks unsigned
//! byte data and `NN` the number of dimensions, then `NN` big-endian `u32`
//! sizes, then the payload. Only 3-d image tensors (`0x803`) and 1-d label
//! vectors (`0x801`) are accepted.

use std::path::Path;

use ndarray::{s, Array2};
use sha2::{Digest, Sha256};

use super::dataset::{Dataset, Provenance, Source};
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    /// Images flattened row-major to `rows * cols` features scaled to [0, 1].
    Images {
        rows: usize,
        cols: usize,
        features: Array2<f64>,
    },
    Labels(Vec<u8>),
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Parse an IDX byte buffer. Never reads past the declared payload.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    if bytes.len() < 4 {
        return Err(Error::Truncated { declared: 4, available: bytes.len() });
    }
    let magic = read_u32(bytes, 0);
    let ndims = match magic {
        IMAGES_MAGIC => 3,
        LABELS_MAGIC => 1,
        other => {
            return Err(Error::format(
                "magic",
                format!("unsupported IDX magic 0x{other:08x}; expected 0x{IMAGES_MAGIC:08x} or 0x{LABELS_MAGIC:08x}"),
            ))
        }
    };
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(Error::Truncated { declared: header, available: bytes.len() });
    }
    let dims: Vec<usize> = (0..ndims).map(|d| read_u32(bytes, 4 + 4 * d) as usize).collect();
    if dims.contains(&0) {
        return Err(Error::format("dimensions", format!("zero-sized dimension in {dims:?}")));
    }
    let declared = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format("dimensions", format!("size overflow for {dims:?}")))?;
    let payload = &bytes[header..];
    if payload.len() != declared {
        return Err(Error::Truncated { declared, available: payload.len() });
    }

    Ok(match ndims {
        1 => IdxData::Labels(payload.to_vec()),
        _ => {
            let (count, rows, cols) = (dims[0], dims[1], dims[2]);
            let features = Array2::from_shape_vec(
                (count, rows * cols),
                payload.iter().map(|&b| f64::from(b) / 255.0).collect(),
            )
            .expect("payload length checked against dims");
            IdxData::Images { rows, cols, features }
        }
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Load an image/label IDX pair into a dataset, keeping the first `subset`
/// samples when given. The class count is one past the largest label.
pub fn load_idx(images: &Path, labels: &Path, subset: Option<usize>) -> Result<Dataset> {
    let image_bytes = read_file(images)?;
    let label_bytes = read_file(labels)?;
    let features = match parse_idx(&image_bytes)? {
        IdxData::Images { features, .. } => features,
        IdxData::Labels(_) => {
            return Err(Error::format(
                images.display().to_string(),
                "expected an image tensor, found a label vector",
            ))
        }
    };
    let label_vec = match parse_idx(&label_bytes)? {
        IdxData::Labels(l) => l,
        IdxData::Images { .. } => {
            return Err(Error::format(
                labels.display().to_string(),
                "expected a label vector, found an image tensor",
            ))
        }
    };
    if features.nrows() != label_vec.len() {
        return Err(Error::Shape {
            context: "IDX image count vs label count",
            expected: features.nrows(),
            found: label_vec.len(),
        });
    }
    let keep = subset.map_or(label_vec.len(), |s| s.min(label_vec.len()));
    let labels_usize: Vec<usize> = label_vec[..keep].iter().map(|&b| usize::from(b)).collect();
    let class_count = labels_usize.iter().max().map_or(2, |&m| (m + 1).max(2));
    let provenance = Provenance {
        source: Source::Idx {
            images_sha256: hex::encode(Sha256::digest(&image_bytes)),
            labels_sha256: hex::encode(Sha256::digest(&label_bytes)),
            subset,
        },
        split: None,
    };
    Dataset::new(features.slice(s![..keep, ..]).to_owned(), labels_usize, class_count, provenance)
}
