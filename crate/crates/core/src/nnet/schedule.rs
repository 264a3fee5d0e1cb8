use crate::error::{Error, Result};

/// Cosine-annealed learning rate,
/// `initial_lr * 0.5 * (1 + cos(pi * epoch / max_epochs))`.
pub fn cosine_lr(epoch: usize, max_epochs: usize, initial_lr: f64) -> Result<f64> {
    if max_epochs == 0 {
        return Err(Error::Domain("max_epochs must be positive".into()));
    }
    if epoch > max_epochs {
        return Err(Error::Domain(format!("epoch {epoch} is past max_epochs {max_epochs}")));
    }
    let progress = epoch as f64 / max_epochs as f64;
    Ok(initial_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}
