//! Adam with bias correction, keyed to the model's fixed parameter
//! enumeration so moments stay aligned across steps and checkpoints.

use crate::error::{RedError, Result};
use crate::model::{ModelGrads, RedModel};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AdamState {
    /// First/second moments per parameter array, in enumeration order.
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(model: &RedModel) -> Self {
        let mut m = Vec::new();
        model.for_each_param(|p| m.push(vec![0.0; p.data.len()]));
        let v = m.clone();
        AdamState {
            m,
            v,
            step: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }

    /// One bias-corrected update followed by constraint projection
    /// (|Uᵢᵢ| and |y| floors).
    pub fn step(&mut self, model: &mut RedModel, grads: &ModelGrads, lr: f64) -> Result<()> {
        let flat_grads: Vec<&[f64]> = grads.slices().into_iter().map(|(_, d)| d).collect();
        if flat_grads.len() != self.m.len() {
            return Err(RedError::shape(
                format!("{} arrays", self.m.len()),
                format!("{}", flat_grads.len()),
                "adam_step gradients",
            ));
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);

        let mut idx = 0usize;
        let mut err: Option<RedError> = None;
        let (m, v) = (&mut self.m, &mut self.v);
        let (beta1, beta2, eps) = (self.beta1, self.beta2, self.eps);
        model.for_each_param_mut(|name, data| {
            let g = flat_grads[idx];
            if g.len() != data.len() {
                if err.is_none() {
                    err = Some(RedError::shape(
                        format!("{} ({} entries)", name, data.len()),
                        format!("{} entries", g.len()),
                        "adam_step",
                    ));
                }
                idx += 1;
                return;
            }
            let (mi, vi) = (&mut m[idx], &mut v[idx]);
            for j in 0..data.len() {
                mi[j] = beta1 * mi[j] + (1.0 - beta1) * g[j];
                vi[j] = beta2 * vi[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = mi[j] / bc1;
                let v_hat = vi[j] / bc2;
                data[j] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            idx += 1;
        });
        if let Some(e) = err {
            return Err(e);
        }
        model.project_constraints();
        Ok(())
    }
}
