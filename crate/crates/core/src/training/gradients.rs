//! Exact loss gradients: mean negative log-likelihood over a batch,
//! differentiated by reverse traversal of the cached forward computation
//! (conditional chain first, then the three transform stages).

use crate::error::{RedError, Result};
use crate::model::{ModelGrads, RedModel};
use crate::numerics::Matrix;

/// Mean NLL over the batch and exact gradients for every parameter.
pub fn loss_and_gradients(model: &RedModel, batch: &Matrix) -> Result<(f64, ModelGrads)> {
    if batch.nrows() == 0 {
        return Err(RedError::Contract("loss on an empty batch".into()));
    }
    if batch.ncols() != model.d() {
        return Err(RedError::shape(
            format!("{} columns", model.d()),
            format!("{}", batch.ncols()),
            "loss_and_gradients batch",
        ));
    }
    let n = batch.nrows();
    let weight = -1.0 / n as f64; // d(mean NLL)/d(log p terms)
    let mut grads = model.zero_grads();
    let mut loss = 0.0;

    for (row_idx, row) in batch.rows().into_iter().enumerate() {
        let x = row.to_owned();
        let (z, logdet, stack_cache) = model.stack.forward(&x)?;
        if !logdet.is_finite() || z.iter().any(|v| !v.is_finite()) {
            return Err(RedError::NonFinite {
                location: format!("transform stack output (row {row_idx})"),
            });
        }
        let (cond_total, _, cond_cache) = model.cond.log_likelihood_cached(&z)?;
        if !cond_total.is_finite() {
            return Err(RedError::NonFinite {
                location: format!("conditional log-likelihood (row {row_idx})"),
            });
        }
        loss += -(logdet + cond_total) / n as f64;

        let gz = model.cond.vjp(&cond_cache, weight, &mut grads.cond);
        model.stack.vjp(&stack_cache, &gz, weight, &mut grads.stack);
    }
    if !loss.is_finite() {
        return Err(RedError::NonFinite {
            location: "batch loss".into(),
        });
    }
    Ok((loss, grads))
}

/// Scale gradients so the global norm is at most `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut ModelGrads, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}
