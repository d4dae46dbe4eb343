//! Gradient-check harness: every analytic gradient entry against central
//! finite differences, with the relative error floored so saturated-gate
//! zero gradients compare cleanly.

use crate::error::Result;
use crate::model::{ModelGrads, RedModel};
use crate::numerics::Matrix;
use crate::training::gradients::loss_and_gradients;

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    pub name: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub violations: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn flatten(model: &RedModel) -> Vec<f64> {
    let mut flat = Vec::new();
    model.for_each_param(|p| flat.extend_from_slice(p.data));
    flat
}

fn unflatten(model: &mut RedModel, flat: &[f64]) {
    let mut pos = 0;
    model.for_each_param_mut(|_, data| {
        data.copy_from_slice(&flat[pos..pos + data.len()]);
        pos += data.len();
    });
}

/// Compare the analytic gradients of the mean batch NLL against central
/// finite differences. Relative error per entry is
/// |g_a − g_fd| / max(1e-8, |g_a| + |g_fd|).
pub fn gradient_check(
    model: &RedModel,
    batch: &Matrix,
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    let (_, grads) = loss_and_gradients(model, batch)?;
    gradient_check_against(model, batch, eps, tol, &grads)
}

/// Same comparison against externally supplied analytic gradients
/// (used for fault injection in tests).
pub fn gradient_check_against(
    model: &RedModel,
    batch: &Matrix,
    eps: f64,
    tol: f64,
    grads: &ModelGrads,
) -> Result<GradCheckReport> {
    let mut names: Vec<(String, usize)> = Vec::new();
    grads.for_each(|name, data| {
        for j in 0..data.len() {
            names.push((name.to_string(), j));
        }
    });
    let mut analytic = Vec::new();
    grads.for_each(|_, data| analytic.extend_from_slice(data));

    let mut work = model.clone();
    let base = flatten(model);
    let mut probe = base.clone();
    let mut violations = Vec::new();
    let mut max_rel_err: f64 = 0.0;

    for i in 0..base.len() {
        probe[i] = base[i] + eps;
        unflatten(&mut work, &probe);
        let (loss_p, _) = loss_and_gradients(&work, batch)?;
        probe[i] = base[i] - eps;
        unflatten(&mut work, &probe);
        let (loss_m, _) = loss_and_gradients(&work, batch)?;
        probe[i] = base[i];

        let numeric = (loss_p - loss_m) / (2.0 * eps);
        let rel_err = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-8);
        max_rel_err = max_rel_err.max(rel_err);
        if rel_err > tol {
            violations.push(GradCheckEntry {
                name: names[i].0.clone(),
                index: names[i].1,
                analytic: analytic[i],
                numeric,
                rel_err,
            });
        }
    }
    Ok(GradCheckReport {
        checked: base.len(),
        max_rel_err,
        violations,
    })
}
