// SPDX-License-Identifier: Apache-2.0

//! Distillation losses and the staged teacher → assistant → student pipeline.
//!
//! All divergences operate on temperature-softened distributions
//! `p = softmax(logits / T)`. Gradients are taken with respect to the student
//! logits only; upstream logits are frozen constants.

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::nn::{
    ce_with_grad, cross_entropy, log_softmax_t, log_softmax_unchecked, softmax_t, train, Objective,
    TierSpec, TieredModel, TrainConfig, TrainOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlDirection {
    /// `Σ p_S (log p_S - log p_T)`, student-weighted.
    #[default]
    StudentLed,
    /// `Σ p_T (log p_T - log p_S)`, the usual teacher-weighted form.
    TeacherLed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TripleMode {
    /// Teacher → TA with the dual loss, then TA → student with the dual loss.
    #[default]
    Sequential,
    /// Student trained once against frozen teacher and TA with the nested divergence.
    Composite,
}

/// How the two log-ratio terms of the nested divergence are joined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompositeJoin {
    /// `Σ p_S [(log p_S - log p_TA) + (log p_TA - log p_T)]`
    #[default]
    Additive,
    /// `Σ p_S (log p_S - log p_TA)(log p_TA - log p_T)`
    Multiplicative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KdConfig {
    pub lambda: f64,
    #[serde(rename = "kd_temperature")]
    pub temperature: f64,
    #[serde(rename = "kd_direction")]
    pub direction: KlDirection,
    pub triple_mode: TripleMode,
    pub composite_join: CompositeJoin,
}

impl Default for KdConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            temperature: 20.0,
            direction: KlDirection::StudentLed,
            triple_mode: TripleMode::Sequential,
            composite_join: CompositeJoin::Additive,
        }
    }
}

impl KdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must be in [0, 1], got {}", self.lambda)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::NonPositiveTemperature(self.temperature));
        }
        Ok(())
    }

    fn kd_weight(&self) -> f64 {
        self.lambda * self.temperature * self.temperature
    }
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// Divergence between softened teacher and student outputs.
pub fn kl_soft(t_logits: &[f64], s_logits: &[f64], t: f64, direction: KlDirection) -> Result<f64> {
    check_lengths(t_logits, s_logits)?;
    let lt = log_softmax_t(t_logits, t)?;
    let ls = log_softmax_t(s_logits, t)?;
    let (lead, other) = match direction {
        KlDirection::StudentLed => (&ls, &lt),
        KlDirection::TeacherLed => (&lt, &ls),
    };
    Ok(lead.iter().zip(other).map(|(a, b)| a.exp() * (a - b)).sum())
}

/// Nested teacher/assistant/student divergence.
pub fn kl_composite(
    t_logits: &[f64],
    ta_logits: &[f64],
    s_logits: &[f64],
    t: f64,
    join: CompositeJoin,
) -> Result<f64> {
    check_lengths(t_logits, s_logits)?;
    check_lengths(ta_logits, s_logits)?;
    let lt = log_softmax_t(t_logits, t)?;
    let la = log_softmax_t(ta_logits, t)?;
    let ls = log_softmax_t(s_logits, t)?;
    Ok((0..ls.len())
        .map(|k| {
            let first = ls[k] - la[k];
            let second = la[k] - lt[k];
            let h = match join {
                CompositeJoin::Additive => first + second,
                CompositeJoin::Multiplicative => first * second,
            };
            ls[k].exp() * h
        })
        .sum())
}

/// `λ T² · KL + (1 − λ) · CE`, the CE taken on the unsoftened student output.
pub fn loss_dual(t_logits: &[f64], s_logits: &[f64], label: Label, cfg: &KdConfig) -> Result<f64> {
    let kl = kl_soft(t_logits, s_logits, cfg.temperature, cfg.direction)?;
    let ce = cross_entropy(&softmax_t(s_logits, 1.0)?, label);
    Ok(cfg.kd_weight() * kl + (1.0 - cfg.lambda) * ce)
}

/// Dual-loss blend with the nested divergence in place of the KL term.
pub fn loss_tri(
    t_logits: &[f64],
    ta_logits: &[f64],
    s_logits: &[f64],
    label: Label,
    cfg: &KdConfig,
) -> Result<f64> {
    let kl = kl_composite(t_logits, ta_logits, s_logits, cfg.temperature, cfg.composite_join)?;
    let ce = cross_entropy(&softmax_t(s_logits, 1.0)?, label);
    Ok(cfg.kd_weight() * kl + (1.0 - cfg.lambda) * ce)
}

/// For `K = Σ_k p_k h_k(log p_k)` with `p = softmax(z/T)`:
/// `dK/dz_j = p_j [(h_j − K) + (h'_j − Σ_k p_k h'_k)] / T`.
fn student_weighted_grad(log_p: &[f64], h: &[f64], h_prime: &[f64], t: f64) -> (f64, Vec<f64>) {
    let p: Vec<f64> = log_p.iter().map(|l| l.exp()).collect();
    let k: f64 = p.iter().zip(h).map(|(p, h)| p * h).sum();
    let mean_hp: f64 = p.iter().zip(h_prime).map(|(p, d)| p * d).sum();
    let grad = (0..p.len())
        .map(|j| p[j] * ((h[j] - k) + (h_prime[j] - mean_hp)) / t)
        .collect();
    (k, grad)
}

fn kl_with_grad(t_logits: &[f64], s_logits: &[f64], t: f64, direction: KlDirection) -> (f64, Vec<f64>) {
    let lt = log_softmax_unchecked(t_logits, t);
    let ls = log_softmax_unchecked(s_logits, t);
    match direction {
        KlDirection::StudentLed => {
            let h: Vec<f64> = ls.iter().zip(&lt).map(|(s, t)| s - t).collect();
            student_weighted_grad(&ls, &h, &vec![1.0; ls.len()], t)
        }
        KlDirection::TeacherLed => {
            let value = lt.iter().zip(&ls).map(|(a, b)| a.exp() * (a - b)).sum();
            let grad = lt.iter().zip(&ls).map(|(q, p)| (p.exp() - q.exp()) / t).collect();
            (value, grad)
        }
    }
}

fn composite_with_grad(
    t_logits: &[f64],
    ta_logits: &[f64],
    s_logits: &[f64],
    t: f64,
    join: CompositeJoin,
) -> (f64, Vec<f64>) {
    let lt = log_softmax_unchecked(t_logits, t);
    let la = log_softmax_unchecked(ta_logits, t);
    let ls = log_softmax_unchecked(s_logits, t);
    let n = ls.len();
    let mut h = Vec::with_capacity(n);
    let mut hp = Vec::with_capacity(n);
    for k in 0..n {
        let second = la[k] - lt[k];
        match join {
            CompositeJoin::Additive => {
                h.push(ls[k] - la[k] + second);
                hp.push(1.0);
            }
            CompositeJoin::Multiplicative => {
                h.push((ls[k] - la[k]) * second);
                hp.push(second);
            }
        }
    }
    student_weighted_grad(&ls, &h, &hp, t)
}

fn blend(kd: (f64, Vec<f64>), ce: (f64, Vec<f64>), cfg: &KdConfig) -> (f64, Vec<f64>) {
    let w = cfg.kd_weight();
    let c = 1.0 - cfg.lambda;
    let grad = kd.1.iter().zip(&ce.1).map(|(k, e)| w * k + c * e).collect();
    (w * kd.0 + c * ce.0, grad)
}

/// Dual KD loss against frozen upstream logits, one row per training example.
pub struct DualKdObjective {
    pub labels: Vec<Label>,
    pub teacher_logits: Vec<Vec<f64>>,
    pub cfg: KdConfig,
}

impl Objective for DualKdObjective {
    fn loss_and_grad(&self, example: usize, logits: &[f64]) -> (f64, Vec<f64>) {
        let kd = kl_with_grad(&self.teacher_logits[example], logits, self.cfg.temperature, self.cfg.direction);
        blend(kd, ce_with_grad(logits, self.labels[example]), &self.cfg)
    }
}

/// Triple KD loss against frozen teacher and assistant logits.
pub struct TriKdObjective {
    pub labels: Vec<Label>,
    pub teacher_logits: Vec<Vec<f64>>,
    pub ta_logits: Vec<Vec<f64>>,
    pub cfg: KdConfig,
}

impl Objective for TriKdObjective {
    fn loss_and_grad(&self, example: usize, logits: &[f64]) -> (f64, Vec<f64>) {
        let kd = composite_with_grad(
            &self.teacher_logits[example],
            &self.ta_logits[example],
            logits,
            self.cfg.temperature,
            self.cfg.composite_join,
        );
        blend(kd, ce_with_grad(logits, self.labels[example]), &self.cfg)
    }
}

/// Logits of a frozen model on every input row.
pub fn frozen_logits(model: &TieredModel, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    inputs.iter().map(|x| model.forward(x)).collect()
}

/// Trains `student` against `teacher`'s frozen soft outputs blended with the labels.
pub fn distill_train(
    teacher: &TieredModel,
    student: TieredModel,
    inputs: &[Vec<f64>],
    labels: &[Label],
    cfg: &KdConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_label_count(inputs, labels)?;
    let objective = DualKdObjective {
        labels: labels.to_vec(),
        teacher_logits: frozen_logits(teacher, inputs)?,
        cfg: cfg.clone(),
    };
    train(student, inputs, &objective, train_cfg)
}

/// Trains `student` with the nested divergence against frozen `teacher` and `ta`.
pub fn distill_train_composite(
    teacher: &TieredModel,
    ta: &TieredModel,
    student: TieredModel,
    inputs: &[Vec<f64>],
    labels: &[Label],
    cfg: &KdConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_label_count(inputs, labels)?;
    let objective = TriKdObjective {
        labels: labels.to_vec(),
        teacher_logits: frozen_logits(teacher, inputs)?,
        ta_logits: frozen_logits(ta, inputs)?,
        cfg: cfg.clone(),
    };
    train(student, inputs, &objective, train_cfg)
}

fn check_label_count(inputs: &[Vec<f64>], labels: &[Label]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::EmptyData);
    }
    if inputs.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: inputs.len(),
            got: labels.len(),
        });
    }
    Ok(())
}

/// Initial weights and per-stage training settings for [`takd_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineSetup {
    pub teacher: TieredModel,
    pub ta: TieredModel,
    pub student: TieredModel,
    pub teacher_train: TrainConfig,
    pub ta_train: TrainConfig,
    pub student_train: TrainConfig,
    /// Permit equal capacities between adjacent tiers (self-distillation).
    pub allow_equal_capacity: bool,
}

impl PipelineSetup {
    /// Seeds each stage's initial weights and shuffling from `seed`.
    pub fn seeded(teacher: TierSpec, ta: TierSpec, student: TierSpec, train_cfg: &TrainConfig, seed: u64) -> Result<Self> {
        let stage = |spec, tag| -> Result<(TieredModel, TrainConfig)> {
            let model = TieredModel::init(spec, crate::derive_seed(seed, tag))?;
            let cfg = TrainConfig {
                seed: crate::derive_seed(seed, tag + 100),
                ..train_cfg.clone()
            };
            Ok((model, cfg))
        };
        let (teacher, teacher_train) = stage(teacher, 3)?;
        let (ta, ta_train) = stage(ta, 2)?;
        let (student, student_train) = stage(student, 1)?;
        Ok(Self {
            teacher,
            ta,
            student,
            teacher_train,
            ta_train,
            student_train,
            allow_equal_capacity: false,
        })
    }
}

/// Teacher (plain CE) → assistant → student.
///
/// `Sequential` distils the assistant from the teacher and the student from the
/// assistant; `Composite` distils the assistant the same way and then trains the
/// student once with [`loss_tri`] against both frozen models.
pub fn takd_pipeline(
    setup: PipelineSetup,
    inputs: &[Vec<f64>],
    labels: &[Label],
    cfg: &KdConfig,
) -> Result<(TrainOutcome, TrainOutcome, TrainOutcome)> {
    let (t, a, s) = (
        setup.teacher.count_params(),
        setup.ta.count_params(),
        setup.student.count_params(),
    );
    let ordered = if setup.allow_equal_capacity {
        t >= a && a >= s
    } else {
        t > a && a > s
    };
    if !ordered {
        return Err(Error::InvalidTier(format!(
            "tiers must shrink teacher → TA → student, got {t} / {a} / {s} parameters"
        )));
    }
    check_label_count(inputs, labels)?;
    let ce = crate::nn::CrossEntropyObjective::new(labels.to_vec());
    let teacher = train(setup.teacher, inputs, &ce, &setup.teacher_train)?;
    let ta = distill_train(&teacher.model, setup.ta, inputs, labels, cfg, &setup.ta_train)?;
    let student = match cfg.triple_mode {
        TripleMode::Sequential => distill_train(&ta.model, setup.student, inputs, labels, cfg, &setup.student_train)?,
        TripleMode::Composite => distill_train_composite(
            &teacher.model,
            &ta.model,
            setup.student,
            inputs,
            labels,
            cfg,
            &setup.student_train,
        )?,
    };
    Ok((teacher, ta, student))
}
