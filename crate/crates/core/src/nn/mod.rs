// SPDX-License-Identifier: Apache-2.0

//! Dense ReLU classifiers in three capacity tiers, with hand-written backprop.

mod checkpoint;
mod loss;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::N_FEATURES;

pub use checkpoint::CHECKPOINT_MAGIC;
pub use loss::{
    cross_entropy, log_softmax_t, softmax_t, CrossEntropyObjective, Objective, Scaled,
};
pub(crate) use loss::{ce_with_grad, log_softmax_unchecked};
pub use train::{grad, train, Gradients, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Student,
    Ta,
    Teacher,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Student => "student",
            Tier::Ta => "ta",
            Tier::Teacher => "teacher",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "student" => Some(Tier::Student),
            "ta" => Some(Tier::Ta),
            "teacher" => Some(Tier::Teacher),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierSpec {
    pub tier: Tier,
    /// Layer widths from input to output; the output is (Fall, ADL).
    pub widths: Vec<usize>,
}

impl TierSpec {
    pub fn new(tier: Tier, widths: Vec<usize>) -> Result<Self> {
        let spec = Self { tier, widths };
        spec.validate()?;
        Ok(spec)
    }

    pub fn student() -> Self {
        Self {
            tier: Tier::Student,
            widths: vec![N_FEATURES, 16, 2],
        }
    }

    pub fn ta() -> Self {
        Self {
            tier: Tier::Ta,
            widths: vec![N_FEATURES, 64, 32, 2],
        }
    }

    pub fn teacher() -> Self {
        Self {
            tier: Tier::Teacher,
            widths: vec![N_FEATURES, 128, 64, 32, 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::InvalidTier("need at least input and output widths".into()));
        }
        if self.widths.contains(&0) {
            return Err(Error::InvalidTier(format!("zero width in {:?}", self.widths)));
        }
        if *self.widths.last().unwrap() != 2 {
            return Err(Error::InvalidTier(format!(
                "output width must be 2, got {:?}",
                self.widths
            )));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    /// Σ (in·out + out) over the dense layers.
    pub fn param_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }
}

/// One fully connected layer; `weights` is row-major `[outputs][inputs]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let dot: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(dot + self.bias[o]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TieredModel {
    pub spec: TierSpec,
    pub layers: Vec<Dense>,
    pub seed: u64,
}

impl TieredModel {
    /// He-style uniform initialisation, `U(-sqrt(6/fan_in), sqrt(6/fan_in))`, zero biases.
    pub fn init(spec: TierSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = spec
            .widths
            .windows(2)
            .map(|w| {
                let mut layer = Dense::zeros(w[0], w[1]);
                let limit = (6.0 / w[0] as f64).sqrt();
                for v in &mut layer.weights {
                    *v = rng.random_range(-limit..limit);
                }
                layer
            })
            .collect();
        Ok(Self { spec, layers, seed })
    }

    pub fn zeros(spec: TierSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec.widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self {
            spec,
            layers,
            seed: 0,
        })
    }

    pub fn tier(&self) -> Tier {
        self.spec.tier
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.input_width() {
            return Err(Error::ShapeMismatch {
                expected: self.spec.input_width(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Output logits (Fall, ADL).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if i != last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Forward pass keeping every layer's post-activation output; `acts[0]` is the input.
    pub(crate) fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.apply(&acts[i], &mut out);
            if i != last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            acts.push(out);
        }
        acts
    }

    pub fn count_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flat parameter view in layer order, weights before biases.
    pub fn param(&self, mut index: usize) -> f64 {
        for l in &self.layers {
            if index < l.weights.len() {
                return l.weights[index];
            }
            index -= l.weights.len();
            if index < l.bias.len() {
                return l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set_param(&mut self, mut index: usize, value: f64) {
        for l in &mut self.layers {
            if index < l.weights.len() {
                l.weights[index] = value;
                return;
            }
            index -= l.weights.len();
            if index < l.bias.len() {
                l.bias[index] = value;
                return;
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range")
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_gives_zero_logits() {
        let m = TieredModel::zeros(TierSpec::teacher()).unwrap();
        assert_eq!(m.forward(&[0.3; N_FEATURES]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn pass_through_layer() {
        let mut m = TieredModel::zeros(TierSpec::new(Tier::Student, vec![4, 2]).unwrap()).unwrap();
        m.layers[0].weights[0] = 1.0; // out0 <- x0
        m.layers[0].weights[4 + 1] = 1.0; // out1 <- x1
        assert_eq!(m.forward(&[0.25, -3.0, 9.0, 1.0]).unwrap(), [0.25, -3.0]);
    }

    #[test]
    fn shape_mismatch() {
        let m = TieredModel::init(TierSpec::student(), 1).unwrap();
        assert!(matches!(
            m.forward(&[0.0; 3]),
            Err(Error::ShapeMismatch { expected: 54, got: 3 })
        ));
    }

    #[test]
    fn param_counts() {
        assert_eq!(TierSpec::student().param_count(), 914);
        assert_eq!(TierSpec::new(Tier::Student, vec![2, 2]).unwrap().param_count(), 6);
        let counts: Vec<usize> = [TierSpec::student(), TierSpec::ta(), TierSpec::teacher()]
            .into_iter()
            .map(|s| TieredModel::init(s, 3).unwrap().count_params())
            .collect();
        assert!(counts[2] > counts[1] && counts[1] > counts[0], "{counts:?}");
    }

    #[test]
    fn invalid_tiers() {
        assert!(TierSpec::new(Tier::Ta, vec![54]).is_err());
        assert!(TierSpec::new(Tier::Ta, vec![54, 0, 2]).is_err());
        assert!(TierSpec::new(Tier::Ta, vec![54, 8, 3]).is_err());
    }

    #[test]
    fn init_is_seeded() {
        let a = TieredModel::init(TierSpec::ta(), 5).unwrap();
        let b = TieredModel::init(TierSpec::ta(), 5).unwrap();
        let c = TieredModel::init(TierSpec::ta(), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let limit = (6.0f64 / 54.0).sqrt();
        assert!(a.layers[0].weights.iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn flat_param_access() {
        let mut m = TieredModel::init(TierSpec::new(Tier::Student, vec![3, 2, 2]).unwrap(), 9).unwrap();
        assert_eq!(m.count_params(), 3 * 2 + 2 + 2 * 2 + 2);
        m.set_param(7, 4.5); // second bias of layer 0
        assert_eq!(m.layers[0].bias[1], 4.5);
        assert_eq!(m.param(8), m.layers[1].weights[0]);
    }
}
