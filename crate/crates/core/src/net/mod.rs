//! Small feed-forward actor and critic with hand-written reverse accumulation.

mod adam;
mod mlp;
mod policy;

pub use adam::{clip_grad_norm, Adam};
pub use mlp::{param_count, ForwardCache, Mlp};
pub use policy::{entropy, entropy_logit_gradient, log_softmax, softmax, CriticParams, PolicyParams};

use crate::error::{Error, Result};

/// A scalar loss with an analytic gradient.
pub trait Objective {
    fn value_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>)>;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn value_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        self(params)
    }
}

/// Evaluates an objective's gradient, checking shape and finiteness.
pub fn gradient(objective: &impl Objective, params: &[f64]) -> Result<Vec<f64>> {
    let (loss, grad) = objective.value_and_gradient(params)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite { location: "loss".into() });
    }
    if grad.len() != params.len() {
        return Err(Error::ShapeMismatch { expected: params.len(), actual: grad.len() });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite { location: format!("gradient entry {i}") });
    }
    Ok(grad)
}
