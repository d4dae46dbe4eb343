//! Grid search over the hyperparameter lists: trains one model per
//! combination (same seed and data for all, so a singleton grid equals a
//! plain training run) and ranks them by validation NLL.

use crate::error::{RedError, Result};
use crate::model::{ModelConfig, RedModel};
use crate::numerics::Matrix;
use crate::training::{train, TrainConfig, TrainHistory};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpace {
    #[serde(default = "default_num_units")]
    pub num_units: Vec<usize>,
    #[serde(default = "default_init_lr")]
    pub init_lr: Vec<f64>,
    #[serde(default = "default_decay_factor")]
    pub decay_factor: Vec<f64>,
    #[serde(default = "default_num_fcs")]
    pub num_fcs: Vec<usize>,
    #[serde(default = "default_num_components")]
    pub num_components: Vec<usize>,
}

fn default_num_units() -> Vec<usize> {
    vec![32, 64, 128]
}
fn default_init_lr() -> Vec<f64> {
    vec![1e-2, 3e-3, 1e-3]
}
fn default_decay_factor() -> Vec<f64> {
    vec![1.0, 0.97]
}
fn default_num_fcs() -> Vec<usize> {
    vec![1, 2]
}
fn default_num_components() -> Vec<usize> {
    vec![5, 10, 20]
}

impl Default for GridSpace {
    fn default() -> Self {
        GridSpace {
            num_units: default_num_units(),
            init_lr: default_init_lr(),
            decay_factor: default_decay_factor(),
            num_fcs: default_num_fcs(),
            num_components: default_num_components(),
        }
    }
}

impl GridSpace {
    pub fn validate(&self) -> Result<()> {
        if self.num_units.is_empty()
            || self.init_lr.is_empty()
            || self.decay_factor.is_empty()
            || self.num_fcs.is_empty()
            || self.num_components.is_empty()
        {
            return Err(RedError::Contract("grid lists must be nonempty".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.num_units.len()
            * self.init_lr.len()
            * self.decay_factor.len()
            * self.num_fcs.len()
            * self.num_components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridEntry {
    /// Lexicographic enumeration index (outermost list first).
    pub combo: usize,
    pub num_units: usize,
    pub init_lr: f64,
    pub decay_factor: f64,
    pub num_fcs: usize,
    pub num_components: usize,
    pub param_count: usize,
    pub val_nll: Option<f64>,
    pub train_nll: Option<f64>,
    pub epochs_run: usize,
    pub status: String,
}

pub struct GridOutcome {
    pub best_model: RedModel,
    pub best_history: TrainHistory,
    pub best_model_config: ModelConfig,
    pub best_train_config: TrainConfig,
    /// All entries sorted ascending by validation NLL (failures last).
    pub leaderboard: Vec<GridEntry>,
}

/// Train every combination and pick the lowest validation NLL; ties break
/// toward fewer parameters, then the earlier combination. Individual run
/// failures are recorded in the leaderboard and only fatal if all fail.
pub fn grid_search(
    base_model: &ModelConfig,
    base_train: &TrainConfig,
    space: &GridSpace,
    train_x: &Matrix,
    val_x: &Matrix,
) -> Result<GridOutcome> {
    space.validate()?;
    let mut leaderboard = Vec::with_capacity(space.len());
    let mut best: Option<(f64, usize, usize, RedModel, TrainHistory, ModelConfig, TrainConfig)> =
        None;

    let mut combo = 0usize;
    for &num_units in &space.num_units {
        for &init_lr in &space.init_lr {
            for &decay_factor in &space.decay_factor {
                for &num_fcs in &space.num_fcs {
                    for &num_components in &space.num_components {
                        let model_cfg = ModelConfig {
                            num_units,
                            num_fcs,
                            num_components,
                            ..base_model.clone()
                        };
                        let train_cfg = TrainConfig {
                            init_lr,
                            decay_factor,
                            ..base_train.clone()
                        };
                        let mut entry = GridEntry {
                            combo,
                            num_units,
                            init_lr,
                            decay_factor,
                            num_fcs,
                            num_components,
                            param_count: 0,
                            val_nll: None,
                            train_nll: None,
                            epochs_run: 0,
                            status: "ok".into(),
                        };
                        let outcome = RedModel::from_config(&model_cfg)
                            .and_then(|m| train(&m, train_x, val_x, &train_cfg));
                        match outcome {
                            Ok((model, history)) => {
                                entry.param_count = model.param_count();
                                let val = history.best_val_nll().unwrap();
                                entry.val_nll = Some(val);
                                entry.train_nll =
                                    history.epochs.last().map(|e| e.train_nll);
                                entry.epochs_run = history.epochs.len().saturating_sub(1);
                                let better = match &best {
                                    None => true,
                                    Some((bv, bp, bc, ..)) => {
                                        val < *bv
                                            || (val == *bv && entry.param_count < *bp)
                                            || (val == *bv && entry.param_count == *bp && combo < *bc)
                                    }
                                };
                                if better {
                                    best = Some((
                                        val,
                                        entry.param_count,
                                        combo,
                                        model,
                                        history,
                                        model_cfg,
                                        train_cfg,
                                    ));
                                }
                            }
                            Err(e) => {
                                entry.status = format!("failed: {e}");
                            }
                        }
                        leaderboard.push(entry);
                        combo += 1;
                    }
                }
            }
        }
    }

    leaderboard.sort_by(|a, b| match (a.val_nll, b.val_nll) {
        (Some(x), Some(y)) => x
            .total_cmp(&y)
            .then(a.param_count.cmp(&b.param_count))
            .then(a.combo.cmp(&b.combo)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.combo.cmp(&b.combo),
    });

    match best {
        Some((_, _, _, model, history, model_cfg, train_cfg)) => Ok(GridOutcome {
            best_model: model,
            best_history: history,
            best_model_config: model_cfg,
            best_train_config: train_cfg,
            leaderboard,
        }),
        None => Err(RedError::TrainingAborted(
            "every grid combination failed".into(),
        )),
    }
}

pub fn leaderboard_csv(entries: &[GridEntry]) -> String {
    let mut out = String::from(
        "rank,combo,num_units,init_lr,decay_factor,num_fcs,num_components,param_count,val_nll,train_nll,epochs,status\n",
    );
    for (rank, e) in entries.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            rank + 1,
            e.combo,
            e.num_units,
            e.init_lr,
            e.decay_factor,
            e.num_fcs,
            e.num_components,
            e.param_count,
            e.val_nll.map_or(String::new(), |v| v.to_string()),
            e.train_nll.map_or(String::new(), |v| v.to_string()),
            e.epochs_run,
            e.status
        ));
    }
    out
}
