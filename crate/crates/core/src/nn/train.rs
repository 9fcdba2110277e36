// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dense, Objective, TieredModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            learning_rate: 0.001,
            momentum: 0.9,
            seed: 1,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be finite and non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Parameter-shaped gradient buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    fn zeros_like(model: &TieredModel) -> Self {
        Self {
            layers: model.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect(),
        }
    }

    fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|g| *g *= k);
        }
    }

    /// Flattened in the same order as [`TieredModel::param`].
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }
}

/// Adds d(loss)/d(params) for one example into `acc`; returns the example loss.
fn backprop_into(
    model: &TieredModel,
    x: &[f64],
    example: usize,
    objective: &dyn Objective,
    acc: &mut Gradients,
) -> f64 {
    let acts = model.forward_trace(x);
    let (loss, mut delta) = objective.loss_and_grad(example, acts.last().unwrap());
    for (li, layer) in model.layers.iter().enumerate().rev() {
        let input = &acts[li];
        let g = &mut acc.layers[li];
        for o in 0..layer.outputs {
            let d = delta[o];
            if d == 0.0 {
                continue;
            }
            g.bias[o] += d;
            let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (gw, &a) in row.iter_mut().zip(input) {
                *gw += d * a;
            }
        }
        if li == 0 {
            break;
        }
        let mut prev = vec![0.0; layer.inputs];
        for o in 0..layer.outputs {
            let d = delta[o];
            if d == 0.0 {
                continue;
            }
            let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (p, &w) in prev.iter_mut().zip(row) {
                *p += d * w;
            }
        }
        // ReLU derivative from the stored activation of the layer below
        for (p, &a) in prev.iter_mut().zip(input) {
            if a <= 0.0 {
                *p = 0.0;
            }
        }
        delta = prev;
    }
    loss
}

/// Mean loss and mean gradient over `batch` (indices into `inputs`).
pub fn grad(
    model: &TieredModel,
    inputs: &[Vec<f64>],
    batch: &[usize],
    objective: &dyn Objective,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut acc = Gradients::zeros_like(model);
    let mut total = 0.0;
    for &i in batch {
        let x = &inputs[i];
        model.check_input(x)?;
        total += backprop_into(model, x, i, objective, &mut acc);
    }
    let k = 1.0 / batch.len() as f64;
    acc.scale(k);
    Ok((total * k, acc))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TieredModel,
    /// Mean per-example loss seen during each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Mini-batch SGD with momentum, `v <- m*v - lr*g; p <- p + v`.
pub fn train(
    mut model: TieredModel,
    inputs: &[Vec<f64>],
    objective: &dyn Objective,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if inputs.is_empty() {
        return Err(Error::EmptyData);
    }
    cfg.validate()?;
    for x in inputs {
        model.check_input(x)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut velocity = Gradients::zeros_like(&model);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, g) = grad(&model, inputs, batch, objective)?;
            epoch_total += loss * batch.len() as f64;
            for ((layer, v), gl) in model.layers.iter_mut().zip(&mut velocity.layers).zip(&g.layers) {
                for ((p, vel), gr) in layer
                    .weights
                    .iter_mut()
                    .chain(layer.bias.iter_mut())
                    .zip(v.weights.iter_mut().chain(v.bias.iter_mut()))
                    .zip(gl.weights.iter().chain(&gl.bias))
                {
                    *vel = cfg.momentum * *vel - cfg.learning_rate * gr;
                    *p += *vel;
                }
            }
        }
        epoch_losses.push(epoch_total / inputs.len() as f64);
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
    })
}
