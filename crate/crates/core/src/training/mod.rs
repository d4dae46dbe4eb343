//! Training: minibatch Adam with an exponentially decayed learning rate,
//! seeded shuffling, gradient-norm clipping, early stopping on validation
//! NLL, grid search over the hyperparameter lists, and the gradient-check
//! harness.

mod adam;
mod gradcheck;
pub(crate) mod gradients;
mod grid;

pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use gradcheck::{gradient_check, gradient_check_against, GradCheckEntry, GradCheckReport};
pub use gradients::{clip_global_norm, loss_and_gradients};
pub use grid::{grid_search, leaderboard_csv, GridEntry, GridOutcome, GridSpace};

use crate::data::add_noise;
use crate::error::{RedError, Result};
use crate::model::RedModel;
use crate::numerics::{derive_seed, Matrix, Rng};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Stream ids for deterministic sub-generators.
const NOISE_STREAM: u64 = 0x6e6f697365; // "noise"
const SHUFFLE_STREAM: u64 = 0x73687566; // "shuf"

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    #[serde(default = "default_init_lr")]
    pub init_lr: f64,
    /// Per-epoch multiplicative decay in (0, 1].
    #[serde(default = "default_decay_factor")]
    pub decay_factor: f64,
    /// Learning-rate floor.
    #[serde(default = "default_min_lr")]
    pub min_lr: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default)]
    pub seed: u64,
    /// Std of the Gaussian noise injected into the training split.
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    /// Redraw the injected noise every epoch instead of once up front.
    #[serde(default)]
    pub noise_per_epoch: bool,
    #[serde(default = "default_grad_clip_norm")]
    pub grad_clip_norm: f64,
}

fn default_init_lr() -> f64 {
    0.01
}
fn default_decay_factor() -> f64 {
    0.97
}
fn default_min_lr() -> f64 {
    1e-5
}
fn default_batch_size() -> usize {
    128
}
fn default_max_epochs() -> usize {
    200
}
fn default_patience() -> usize {
    10
}
fn default_noise_std() -> f64 {
    0.01
}
fn default_grad_clip_norm() -> f64 {
    5.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            init_lr: default_init_lr(),
            decay_factor: default_decay_factor(),
            min_lr: default_min_lr(),
            batch_size: default_batch_size(),
            max_epochs: default_max_epochs(),
            patience: default_patience(),
            seed: 0,
            noise_std: default_noise_std(),
            noise_per_epoch: false,
            grad_clip_norm: default_grad_clip_norm(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.init_lr <= 0.0 {
            return Err(RedError::Contract("init_lr must be > 0".into()));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(RedError::Contract("decay_factor must be in (0, 1]".into()));
        }
        if self.min_lr > self.init_lr {
            return Err(RedError::Contract("min_lr must be <= init_lr".into()));
        }
        if self.batch_size == 0 {
            return Err(RedError::Contract("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// max(min_lr, init_lr · decay^epoch).
pub fn lr_schedule(cfg: &TrainConfig, epoch: usize) -> f64 {
    (cfg.init_lr * cfg.decay_factor.powi(epoch as i32)).max(cfg.min_lr)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
    pub lr: f64,
    /// Wall-clock seconds since training started. Excluded from
    /// determinism comparisons; every other column is bit-reproducible.
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn best_val_nll(&self) -> Option<f64> {
        self.epochs
            .iter()
            .map(|e| e.val_nll)
            .min_by(f64::total_cmp)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_nll,val_nll,lr,seconds\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{:.3}\n",
                e.epoch, e.train_nll, e.val_nll, e.lr, e.seconds
            ));
        }
        out
    }
}

/// Epochs of shuffled minibatches with clipping and early stopping;
/// returns the best-validation snapshot and the full history.
///
/// Divergence handling: if any batch loss turns non-finite, the epoch is
/// rolled back to its starting snapshot, the learning-rate scale is halved,
/// and the epoch is retried once; a second failure aborts with the
/// diagnostic from the loss evaluation.
pub fn train(
    model: &RedModel,
    train_x: &Matrix,
    val_x: &Matrix,
    cfg: &TrainConfig,
) -> Result<(RedModel, TrainHistory)> {
    cfg.validate()?;
    let d = model.d();
    if train_x.ncols() != d || val_x.ncols() != d {
        return Err(RedError::shape(
            format!("{d} columns"),
            format!("{}/{}", train_x.ncols(), val_x.ncols()),
            "train data",
        ));
    }
    if train_x.nrows() == 0 || val_x.nrows() == 0 {
        return Err(RedError::Contract("empty train or validation split".into()));
    }

    let start = Instant::now();
    let mut model = model.clone();
    let mut adam = AdamState::new(&model);
    let mut history = TrainHistory::default();

    let noise_rng = |epoch: u64| Rng::seed_from_u64(derive_seed(cfg.seed, NOISE_STREAM ^ epoch));
    let fixed_noised = if cfg.noise_std > 0.0 && !cfg.noise_per_epoch {
        Some(add_noise(train_x, cfg.noise_std, &mut noise_rng(0))?)
    } else {
        None
    };

    let epoch_train = |epoch: u64| -> Result<Matrix> {
        if cfg.noise_std <= 0.0 {
            Ok(train_x.clone())
        } else if cfg.noise_per_epoch {
            add_noise(train_x, cfg.noise_std, &mut noise_rng(epoch))
        } else {
            Ok(fixed_noised.clone().unwrap())
        }
    };

    // Epoch 0: evaluation at initialization.
    let train0 = epoch_train(0)?;
    history.epochs.push(EpochRecord {
        epoch: 0,
        train_nll: model.nll(&train0)?,
        val_nll: model.nll(val_x)?,
        lr: lr_schedule(cfg, 0),
        seconds: start.elapsed().as_secs_f64(),
    });
    let mut best_model = model.clone();
    let mut best_val = history.epochs[0].val_nll;
    let mut epochs_since_best = 0usize;
    let mut lr_scale = 1.0f64;

    let n = train_x.nrows();
    for epoch in 1..=cfg.max_epochs {
        let lr = lr_schedule(cfg, epoch - 1) * lr_scale;
        let data = epoch_train(epoch as u64)?;
        let mut order: Vec<usize> = (0..n).collect();
        let mut shuffle_rng =
            Rng::seed_from_u64(derive_seed(cfg.seed, SHUFFLE_STREAM ^ epoch as u64));
        shuffle_rng.shuffle(&mut order);

        let snapshot = (model.clone(), adam.clone());
        let mut retried = false;
        let mut batch_start = 0usize;
        while batch_start < n {
            let idx = &order[batch_start..(batch_start + cfg.batch_size).min(n)];
            let mut batch = Matrix::zeros((idx.len(), d));
            for (bi, &ri) in idx.iter().enumerate() {
                batch.row_mut(bi).assign(&data.row(ri));
            }
            match loss_and_gradients(&model, &batch) {
                Ok((_, mut grads)) => {
                    clip_global_norm(&mut grads, cfg.grad_clip_norm);
                    adam.step(&mut model, &grads, lr)?;
                    batch_start += cfg.batch_size;
                }
                Err(RedError::NonFinite { location }) if !retried => {
                    // Roll the epoch back and retry at half the rate.
                    let (m, a) = snapshot.clone();
                    model = m;
                    adam = a;
                    lr_scale *= 0.5;
                    retried = true;
                    batch_start = 0;
                    let _ = location;
                }
                Err(RedError::NonFinite { location }) => {
                    return Err(RedError::TrainingAborted(format!(
                        "non-finite loss persisted after halving the learning rate ({location})"
                    )));
                }
                Err(e) => return Err(e),
            }
        }

        let train_nll = model.nll(&data)?;
        let val_nll = model.nll(val_x)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_nll,
            val_nll,
            lr,
            seconds: start.elapsed().as_secs_f64(),
        });

        if val_nll < best_val {
            best_val = val_nll;
            best_model = model.clone();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= cfg.patience {
                break;
            }
        }
    }

    Ok((best_model, history))
}
