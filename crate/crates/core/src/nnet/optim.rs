use ndarray::Zip;

use super::model::{Dense, Gradients, MlpModel};
use crate::error::{Error, Result};

/// Heavy-ball momentum buffers for SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    momentum: f64,
    velocity: Vec<Dense>,
}

impl MomentumState {
    pub fn new(model: &MlpModel, momentum: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Domain(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        Ok(Self { momentum, velocity: Gradients::zeros_like(model).layers })
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn velocity(&self) -> &[Dense] {
        &self.velocity
    }
}

fn check_shapes(a: &[Dense], b: &[Dense], context: &'static str) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape { context, expected: a.len(), found: b.len() });
    }
    for (x, y) in a.iter().zip(b) {
        if x.weights.dim() != y.weights.dim() {
            return Err(Error::Shape {
                context,
                expected: x.weights.len(),
                found: y.weights.len(),
            });
        }
        if x.bias.len() != y.bias.len() {
            return Err(Error::Shape { context, expected: x.bias.len(), found: y.bias.len() });
        }
    }
    Ok(())
}

/// One SGD step with momentum:
/// `v <- momentum * v + grad`, then `param <- param - lr * v`.
pub fn sgd_step(
    model: &mut MlpModel,
    grads: &Gradients,
    lr: f64,
    state: &mut MomentumState,
) -> Result<()> {
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::Domain(format!("learning rate must be finite and >= 0, got {lr}")));
    }
    check_shapes(model.layers(), &grads.layers, "gradient vs parameter shapes")?;
    check_shapes(model.layers(), &state.velocity, "momentum vs parameter shapes")?;
    let mu = state.momentum;
    for ((layer, grad), vel) in
        model.layers_mut().iter_mut().zip(&grads.layers).zip(state.velocity.iter_mut())
    {
        Zip::from(&mut layer.weights).and(&mut vel.weights).and(&grad.weights).for_each(
            |p, v, &g| {
                *v = mu * *v + g;
                *p -= lr * *v;
            },
        );
        Zip::from(&mut layer.bias).and(&mut vel.bias).and(&grad.bias).for_each(|p, v, &g| {
            *v = mu * *v + g;
            *p -= lr * *v;
        });
    }
    Ok(())
}
