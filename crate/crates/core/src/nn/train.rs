//! Mini-batch SGD with classical momentum and validation early stopping.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, NetWeights, Network};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub momentum: f64,
    /// Upper bound; the effective batch is `min(batch_size, N)`.
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            momentum: 0.9,
            batch_size: 100,
            max_epochs: 500,
            patience: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be finite and non-negative, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// Weights with the lowest validation loss seen, including the start.
    pub weights: NetWeights,
    /// Entry 0 evaluates the initial weights.
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val: f64,
}

impl TrainOutcome {
    pub fn epochs_run(&self) -> usize {
        self.history.last().map_or(0, |r| r.epoch)
    }
}

/// `v <- mu v - lr g`, `theta <- theta + v`.
pub fn momentum_step(theta: &mut [f64], v: &mut [f64], g: &[f64], lr: f64, mu: f64) {
    for ((t, vi), gi) in theta.iter_mut().zip(v.iter_mut()).zip(g) {
        *vi = mu * *vi - lr * gi;
        *t += *vi;
    }
}

pub fn train(net: &Network, train_set: &Dataset, val_set: &Dataset, w0: NetWeights, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if val_set.is_empty() {
        return Err(Error::invalid("validation set is empty"));
    }
    let (vx, vt) = (val_set.input_refs(), val_set.target_refs());
    train_with(net, train_set, w0, cfg, |_, w| net.mse(w, &vx, &vt))
}

/// Training with an arbitrary validation callback, called with the epoch
/// number and current weights.
pub fn train_with(
    net: &Network,
    train_set: &Dataset,
    w0: NetWeights,
    cfg: &TrainConfig,
    mut validate: impl FnMut(usize, &NetWeights) -> Result<f64>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    net.check(&w0)?;
    if train_set.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let (xs, ts) = (train_set.input_refs(), train_set.target_refs());
    let n = xs.len();
    let bs = cfg.batch_size.min(n);
    let mut rng = stream(cfg.seed, Stream::Shuffle, 0);
    let mut order: Vec<usize> = (0..n).collect();

    let mut w = w0;
    let mut v = vec![0.0; w.params.len()];
    let first_val = validate(0, &w)?;
    let mut history = vec![EpochRecord { epoch: 0, train_mse: net.mse(&w, &xs, &ts)?, val_mse: first_val }];
    let mut best = (w.clone(), 0usize, first_val);
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut sse = 0.0;
        for batch in order.chunks(bs) {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| xs[i]).collect();
            let bt: Vec<&[f64]> = batch.iter().map(|&i| ts[i]).collect();
            let (loss, g) = net.loss_and_grad(&w, &bx, &bt)?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            sse += loss * batch.len() as f64;
            momentum_step(&mut w.params, &mut v, &g, cfg.lr, cfg.momentum);
        }
        let val = validate(epoch, &w)?;
        if !val.is_finite() {
            return Err(Error::Diverged { epoch, loss: val });
        }
        history.push(EpochRecord { epoch, train_mse: sse / n as f64, val_mse: val });
        log::trace!("epoch {epoch}: train {:.3e} val {val:.3e}", sse / n as f64);
        if val < best.2 {
            best = (w.clone(), epoch, val);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }
    let (weights, best_epoch, best_val) = best;
    Ok(TrainOutcome { weights, history, best_epoch, best_val })
}
