// SPDX-License-Identifier: Apache-2.0

//! Training strategies, looked up by name.
//!
//! Each strategy says how the student and TA tiers are obtained; the teacher is
//! always trained with plain cross-entropy. Models are built lazily through a
//! per-fold [`ModelBank`], so strategies that share a recipe share the weights.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::distill::{distill_train, distill_train_composite, KdConfig, TripleMode};
use crate::error::{Error, Result};
use crate::nn::{train, CrossEntropyObjective, Tier, TierSpec, TieredModel, TrainConfig, TrainOutcome};
use crate::registry::{Named, Registry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TierSpecs {
    pub student: TierSpec,
    pub ta: TierSpec,
    pub teacher: TierSpec,
}

impl Default for TierSpecs {
    fn default() -> Self {
        Self {
            student: TierSpec::student(),
            ta: TierSpec::ta(),
            teacher: TierSpec::teacher(),
        }
    }
}

impl TierSpecs {
    /// Checks each spec and the strict capacity order student < TA < teacher.
    pub fn validate(&self, input_width: usize) -> Result<()> {
        for (tier, spec) in [(Tier::Student, &self.student), (Tier::Ta, &self.ta), (Tier::Teacher, &self.teacher)] {
            spec.validate()?;
            if spec.tier != tier {
                return Err(Error::InvalidTier(format!("{} spec is tagged {}", tier.as_str(), spec.tier.as_str())));
            }
            if spec.input_width() != input_width {
                return Err(Error::ShapeMismatch { expected: input_width, got: spec.input_width() });
            }
        }
        let (s, a, t) = (self.student.param_count(), self.ta.param_count(), self.teacher.param_count());
        if !(s < a && a < t) {
            return Err(Error::InvalidTier(format!(
                "capacities must increase student < ta < teacher, got {s} / {a} / {t} parameters"
            )));
        }
        Ok(())
    }

    pub fn get(&self, tier: Tier) -> &TierSpec {
        match tier {
            Tier::Student => &self.student,
            Tier::Ta => &self.ta,
            Tier::Teacher => &self.teacher,
        }
    }
}

type Slot = OnceLock<Arc<TrainOutcome>>;

/// Memoised model recipes for one training split.
///
/// Every recipe for a tier starts from the same initial weights and the same
/// shuffling seed, so recipes differ only in their objective.
pub struct ModelBank {
    inputs: Vec<Vec<f64>>,
    labels: Vec<Label>,
    tiers: TierSpecs,
    train_cfg: TrainConfig,
    kd: KdConfig,
    seed: u64,
    slots: Mutex<BTreeMap<&'static str, Arc<Slot>>>,
}

impl ModelBank {
    pub fn new(
        inputs: Vec<Vec<f64>>,
        labels: Vec<Label>,
        tiers: TierSpecs,
        train_cfg: TrainConfig,
        kd: KdConfig,
        seed: u64,
    ) -> Self {
        Self {
            inputs,
            labels,
            tiers,
            train_cfg,
            kd,
            seed,
            slots: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn kd(&self) -> &KdConfig {
        &self.kd
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    fn tier_tag(tier: Tier) -> u64 {
        match tier {
            Tier::Student => 1,
            Tier::Ta => 2,
            Tier::Teacher => 3,
        }
    }

    pub fn initial(&self, tier: Tier) -> Result<TieredModel> {
        TieredModel::init(
            self.tiers.get(tier).clone(),
            crate::derive_seed(self.seed, Self::tier_tag(tier)),
        )
    }

    pub fn train_config(&self, tier: Tier) -> TrainConfig {
        TrainConfig {
            seed: crate::derive_seed(self.seed, Self::tier_tag(tier) + 100),
            ..self.train_cfg.clone()
        }
    }

    fn memo(&self, key: &'static str, build: impl FnOnce() -> Result<TrainOutcome>) -> Result<Arc<TrainOutcome>> {
        let slot = self.slots.lock().unwrap().entry(key).or_default().clone();
        if let Some(done) = slot.get() {
            return Ok(done.clone());
        }
        let built = Arc::new(build()?);
        Ok(slot.get_or_init(|| built).clone())
    }

    pub fn plain(&self, tier: Tier) -> Result<Arc<TrainOutcome>> {
        let key = match tier {
            Tier::Student => "student:ce",
            Tier::Ta => "ta:ce",
            Tier::Teacher => "teacher:ce",
        };
        self.memo(key, || {
            let obj = CrossEntropyObjective::new(self.labels.clone());
            train(self.initial(tier)?, &self.inputs, &obj, &self.train_config(tier))
        })
    }

    pub fn teacher(&self) -> Result<Arc<TrainOutcome>> {
        self.plain(Tier::Teacher)
    }

    /// `tier` distilled from the teacher.
    pub fn from_teacher(&self, tier: Tier) -> Result<Arc<TrainOutcome>> {
        let key = match tier {
            Tier::Student => "student:kd-teacher",
            Tier::Ta => "ta:kd-teacher",
            Tier::Teacher => "teacher:kd-teacher",
        };
        let teacher = self.teacher()?;
        self.memo(key, || {
            distill_train(
                &teacher.model,
                self.initial(tier)?,
                &self.inputs,
                &self.labels,
                &self.kd,
                &self.train_config(tier),
            )
        })
    }

    /// Student distilled from the teacher-distilled TA.
    pub fn student_from_ta(&self) -> Result<Arc<TrainOutcome>> {
        let ta = self.from_teacher(Tier::Ta)?;
        self.memo("student:kd-ta", || {
            distill_train(
                &ta.model,
                self.initial(Tier::Student)?,
                &self.inputs,
                &self.labels,
                &self.kd,
                &self.train_config(Tier::Student),
            )
        })
    }

    /// Student trained once against the frozen teacher and teacher-distilled TA.
    pub fn student_composite(&self) -> Result<Arc<TrainOutcome>> {
        let teacher = self.teacher()?;
        let ta = self.from_teacher(Tier::Ta)?;
        self.memo("student:kd-composite", || {
            distill_train_composite(
                &teacher.model,
                &ta.model,
                self.initial(Tier::Student)?,
                &self.inputs,
                &self.labels,
                &self.kd,
                &self.train_config(Tier::Student),
            )
        })
    }

    /// Every recipe trained so far with its per-epoch losses, in key order.
    pub fn trained(&self) -> Vec<(&'static str, Arc<TrainOutcome>)> {
        self.slots
            .lock()
            .unwrap()
            .iter()
            .filter_map(|(k, s)| s.get().map(|o| (*k, o.clone())))
            .collect()
    }
}

/// How the lower-tier models of a cascade are trained.
pub trait TrainingStrategy: Named + Send + Sync {
    fn description(&self) -> &'static str;

    fn student(&self, bank: &ModelBank) -> Result<Arc<TrainOutcome>>;

    fn ta(&self, bank: &ModelBank) -> Result<Arc<TrainOutcome>>;

    fn teacher(&self, bank: &ModelBank) -> Result<Arc<TrainOutcome>> {
        bank.teacher()
    }

    /// Whether the student is trained with a distillation term.
    fn distils(&self) -> bool {
        true
    }
}

/// Every tier trained on hard labels only.
pub struct PlainCe;

impl Named for PlainCe {
    fn name(&self) -> &'static str {
        "no-kd"
    }
}

impl TrainingStrategy for PlainCe {
    fn description(&self) -> &'static str {
        "cross-entropy only"
    }

    fn student(&self, bank: &ModelBank) -> Result<Arc<TrainOutcome>> {
        bank.plain(Tier::Student)
    }

    fn ta(&self, bank: &ModelBank) -> Result<Arc<TrainOutcome>> {
        bank.plain(Tier::Ta)
    }

    fn distils(&self) -> bool {
        false
    }
}

/// Student and TA each distilled directly from the teacher.
pub struct DualKd;

impl Named for DualKd {
    fn name(&self) -> &'static str {
        "dual-kd"
    }
}

impl TrainingStrategy for DualKd {
    fn description(&self) -> &'static str {
        "teacher → student distillation"
    }

    fn student(&self, bank: &ModelBank) -> Result<Arc<TrainOutcome>> {
        bank.from_teacher(Tier::Student)
    }

    fn ta(&self, bank: &ModelBank) -> Result<Arc<TrainOutcome>> {
        bank.from_teacher(Tier::Ta)
    }
}

/// Teacher → TA → student; the student stage follows the configured triple mode.
pub struct Takd;

impl Named for Takd {
    fn name(&self) -> &'static str {
        "takd"
    }
}

impl TrainingStrategy for Takd {
    fn description(&self) -> &'static str {
        "teacher → assistant → student distillation"
    }

    fn student(&self, bank: &ModelBank) -> Result<Arc<TrainOutcome>> {
        match bank.kd().triple_mode {
            TripleMode::Sequential => bank.student_from_ta(),
            TripleMode::Composite => bank.student_composite(),
        }
    }

    fn ta(&self, bank: &ModelBank) -> Result<Arc<TrainOutcome>> {
        bank.from_teacher(Tier::Ta)
    }
}

pub fn strategies() -> Registry<dyn TrainingStrategy> {
    let mut r: Registry<dyn TrainingStrategy> = Registry::new("training strategy");
    r.register(Box::new(PlainCe))
        .register(Box::new(DualKd))
        .register(Box::new(Takd));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank() -> ModelBank {
        let inputs: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![i as f64 / 12.0, if i % 2 == 0 { 1.0 } else { -1.0 }])
            .collect();
        let labels = (0..12).map(|i| Label::from_index(i % 2)).collect();
        let tiers = TierSpecs {
            student: TierSpec::new(Tier::Student, vec![2, 3, 2]).unwrap(),
            ta: TierSpec::new(Tier::Ta, vec![2, 6, 2]).unwrap(),
            teacher: TierSpec::new(Tier::Teacher, vec![2, 12, 2]).unwrap(),
        };
        let cfg = TrainConfig { epochs: 3, batch_size: 4, ..Default::default() };
        ModelBank::new(inputs, labels, tiers, cfg, KdConfig::default(), 42)
    }

    #[test]
    fn registry_has_all_strategies() {
        assert_eq!(strategies().names(), ["no-kd", "dual-kd", "takd"]);
    }

    #[test]
    fn recipes_are_memoised_and_shared() {
        let b = bank();
        let r = strategies();
        let a = r.get("dual-kd").unwrap().ta(&b).unwrap();
        let t = r.get("takd").unwrap().ta(&b).unwrap();
        assert!(Arc::ptr_eq(&a, &t));
        r.get("takd").unwrap().student(&b).unwrap();
        let keys: Vec<_> = b.trained().into_iter().map(|(k, _)| k).collect();
        assert_eq!(keys, ["student:kd-ta", "ta:kd-teacher", "teacher:ce"]);
    }

    #[test]
    fn recipes_share_initial_weights() {
        let b = bank();
        assert_eq!(b.initial(Tier::Student).unwrap(), b.initial(Tier::Student).unwrap());
        assert_ne!(b.train_config(Tier::Student).seed, b.train_config(Tier::Ta).seed);
    }
}
