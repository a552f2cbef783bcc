use ndarray::s;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{adam_step, backward, forward_pass, squared_hinge_loss, AdamConfig, Mode, NetworkState};
use super::tensor::Tensor;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Full-length training schedule.
pub const FULL_EPOCHS: usize = 1000;
/// Shorter schedule for desk-scale runs.
pub const DESK_EPOCHS: usize = 10;
/// Step size paired with the desk schedule.
pub const DESK_LR: f64 = 3e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: FULL_EPOCHS,
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn desk() -> Self {
        TrainConfig {
            epochs: DESK_EPOCHS,
            lr: DESK_LR,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid learning rate {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub loss: Vec<f64>,
    /// Training accuracy in percent, measured on the train-mode scores.
    pub accuracy: Vec<f64>,
}

/// Network inputs `[N, C, T_post]` from the post-onset window of the chosen
/// epochs, with subject ids as labels.
pub fn inputs_from_dataset(ds: &Dataset, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
    let onset = ds.onset_index();
    let t = ds.n_post();
    let c = ds.n_channels();
    let mut data = Vec::with_capacity(indices.len() * c * t);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        let e = ds
            .epochs
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("epoch index {i} out of range")))?;
        data.extend(e.data.slice(s![.., onset..onset + t]).iter().copied());
        labels.push(e.subject);
    }
    Ok((Tensor::from_vec(&[indices.len(), c, t], data)?, labels))
}

pub fn train(state: &mut NetworkState, inputs: &Tensor, labels: &[usize], cfg: &TrainConfig) -> Result<TrainHistory> {
    cfg.validate()?;
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyDataset("no training epochs".into()));
    }
    if inputs.shape().first() != Some(&n) {
        return Err(Error::ShapeMismatch {
            expected: vec![n],
            got: inputs.shape().to_vec(),
        });
    }
    let adam = AdamConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = TrainHistory::default();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = inputs.gather_outer(chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (scores, cache) = forward_pass(state, &xb, Mode::Train(Some(&mut rng)))?;
            let (loss, dscores) = squared_hinge_loss(&scores, &yb)?;
            loss_sum += loss * chunk.len() as f64;
            correct += argmax_rows(&scores).iter().zip(&yb).filter(|(p, y)| p == y).count();
            let grads = backward(state, &cache, &dscores);
            adam_step(state, &grads, cfg.lr, &adam)?;
            state.update_running(&cache.batch);
        }
        history.loss.push(loss_sum / n as f64);
        history.accuracy.push(100.0 * correct as f64 / n as f64);
    }
    Ok(history)
}

pub fn argmax_rows(scores: &Tensor) -> Vec<usize> {
    let s = scores.shape()[1];
    scores
        .data()
        .chunks(s)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Eval-mode class predictions, processed in bounded chunks.
pub fn predict(state: &NetworkState, inputs: &Tensor) -> Result<Vec<usize>> {
    const CHUNK: usize = 128;
    let n = inputs.shape()[0];
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let (scores, _) = forward_pass(state, &inputs.slice_outer(start, end), Mode::Eval)?;
        out.extend(argmax_rows(&scores));
        start = end;
    }
    Ok(out)
}
