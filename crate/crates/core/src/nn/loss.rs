// SPDX-License-Identifier: Apache-2.0

use crate::dataset::Label;
use crate::error::{Error, Result};

const LOG_FLOOR: f64 = 1e-12;

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveTemperature(t))
    }
}

/// `log softmax(logits / t)`, computed with the max subtracted for stability.
pub fn log_softmax_t(logits: &[f64], t: f64) -> Result<Vec<f64>> {
    check_temperature(t)?;
    Ok(log_softmax_unchecked(logits, t))
}

pub(crate) fn log_softmax_unchecked(logits: &[f64], t: f64) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logits.iter().map(|&z| (z - max) / t).collect();
    let lse = scaled.iter().map(|s| s.exp()).sum::<f64>().ln();
    scaled.into_iter().map(|s| s - lse).collect()
}

/// Temperature-softened softmax.
pub fn softmax_t(logits: &[f64], t: f64) -> Result<Vec<f64>> {
    Ok(log_softmax_t(logits, t)?.into_iter().map(f64::exp).collect())
}

/// `-ln p[label]`, with the argument clamped at 1e-12.
pub fn cross_entropy(probs: &[f64], label: Label) -> f64 {
    -probs[label.index()].max(LOG_FLOOR).ln()
}

/// Per-example loss as a function of the model's output logits.
///
/// Implementations own whatever per-example targets they need (labels, frozen
/// upstream logits) and are indexed by the example's position in the training set.
pub trait Objective: Sync {
    /// Loss and its gradient with respect to `logits`.
    fn loss_and_grad(&self, example: usize, logits: &[f64]) -> (f64, Vec<f64>);
}

/// Hard-label cross-entropy at temperature 1.
#[derive(Debug, Clone)]
pub struct CrossEntropyObjective {
    pub labels: Vec<Label>,
}

impl CrossEntropyObjective {
    pub fn new(labels: Vec<Label>) -> Self {
        Self { labels }
    }
}

/// CE value and logit gradient `p - onehot`.
pub(crate) fn ce_with_grad(logits: &[f64], label: Label) -> (f64, Vec<f64>) {
    let logp = log_softmax_unchecked(logits, 1.0);
    let loss = -logp[label.index()];
    let grad = logp
        .iter()
        .enumerate()
        .map(|(k, lp)| lp.exp() - if k == label.index() { 1.0 } else { 0.0 })
        .collect();
    (loss, grad)
}

impl Objective for CrossEntropyObjective {
    fn loss_and_grad(&self, example: usize, logits: &[f64]) -> (f64, Vec<f64>) {
        ce_with_grad(logits, self.labels[example])
    }
}

/// Multiplies another objective by a constant.
pub struct Scaled<'a, O: Objective + ?Sized> {
    pub inner: &'a O,
    pub factor: f64,
}

impl<O: Objective + ?Sized> Objective for Scaled<'_, O> {
    fn loss_and_grad(&self, example: usize, logits: &[f64]) -> (f64, Vec<f64>) {
        let (l, g) = self.inner.loss_and_grad(example, logits);
        (l * self.factor, g.into_iter().map(|x| x * self.factor).collect())
    }
}
