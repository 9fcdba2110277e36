// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

/// Binary confusion counts with Fall as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Fall, Label::Fall) => self.tp += 1,
            (Label::Adl, Label::Adl) => self.tn += 1,
            (Label::Adl, Label::Fall) => self.fp += 1,
            (Label::Fall, Label::Adl) => self.fn_ += 1,
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Label, Label)>) -> Self {
        let mut cm = Self::default();
        for (t, p) in pairs {
            cm.record(t, p);
        }
        cm
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum F1Mode {
    /// Harmonic mean `2·PRE·REC / (PRE + REC)`.
    #[default]
    Standard,
    /// `PRE·REC / (PRE + REC)`, without the factor 2.
    Halved,
}

/// Detection metrics; a ratio with a zero denominator is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: Option<f64>,
    pub pre: Option<f64>,
    pub rec: Option<f64>,
    pub f1: Option<f64>,
    pub f1_mode: F1Mode,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Metrics {
    pub fn acc(&self) -> Result<f64> {
        self.acc.ok_or(Error::UndefinedMetric("accuracy"))
    }

    pub fn pre(&self) -> Result<f64> {
        self.pre.ok_or(Error::UndefinedMetric("precision"))
    }

    pub fn rec(&self) -> Result<f64> {
        self.rec.ok_or(Error::UndefinedMetric("recall"))
    }

    pub fn f1(&self) -> Result<f64> {
        self.f1.ok_or(Error::UndefinedMetric("F1"))
    }
}

pub fn metrics(cm: &ConfusionMatrix, f1_mode: F1Mode) -> Metrics {
    let acc = ratio(cm.tp + cm.tn, cm.total());
    let pre = ratio(cm.tp, cm.tp + cm.fp);
    let rec = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = match (pre, rec) {
        (Some(p), Some(r)) if p + r > 0.0 => {
            let k = match f1_mode {
                F1Mode::Standard => 2.0,
                F1Mode::Halved => 1.0,
            };
            Some(k * p * r / (p + r))
        }
        _ => None,
    };
    Metrics {
        acc,
        pre,
        rec,
        f1,
        f1_mode,
    }
}

/// Signed percentage changes `(distilled − original) / original × 100`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementReport {
    pub acc_imp: f64,
    pub rec_imp: f64,
    pub pre_imp: f64,
    pub f1_imp: f64,
}

fn pct(distilled: Option<f64>, original: Option<f64>, name: &'static str) -> Result<f64> {
    match (distilled, original) {
        (Some(d), Some(o)) if o != 0.0 => Ok((d - o) / o * 100.0),
        (None, Some(o)) if o != 0.0 => Err(Error::UndefinedMetric(name)),
        _ => Err(Error::ZeroBaseline(name)),
    }
}

pub fn improvement(distilled: &Metrics, original: &Metrics) -> Result<ImprovementReport> {
    Ok(ImprovementReport {
        acc_imp: pct(distilled.acc, original.acc, "accuracy")?,
        rec_imp: pct(distilled.rec, original.rec, "recall")?,
        pre_imp: pct(distilled.pre, original.pre, "precision")?,
        f1_imp: pct(distilled.f1, original.f1, "F1")?,
    })
}

/// Per-component improvements where each one is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialImprovement {
    pub acc_imp: Option<f64>,
    pub rec_imp: Option<f64>,
    pub pre_imp: Option<f64>,
    pub f1_imp: Option<f64>,
}

pub fn partial_improvement(distilled: &Metrics, original: &Metrics) -> PartialImprovement {
    PartialImprovement {
        acc_imp: pct(distilled.acc, original.acc, "accuracy").ok(),
        rec_imp: pct(distilled.rec, original.rec, "recall").ok(),
        pre_imp: pct(distilled.pre, original.pre, "precision").ok(),
        f1_imp: pct(distilled.f1, original.f1, "F1").ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_confusion_matrix() {
        let cm = ConfusionMatrix::new(50, 40, 5, 5);
        let m = metrics(&cm, F1Mode::Standard);
        assert!((m.acc.unwrap() - 0.9).abs() < 1e-12);
        assert!((m.pre.unwrap() - 0.909091).abs() < 1e-6);
        assert!((m.rec.unwrap() - 0.909091).abs() < 1e-6);
        assert!((m.f1.unwrap() - 0.909091).abs() < 1e-6);
        let p = metrics(&cm, F1Mode::Halved);
        assert!((p.f1.unwrap() - 0.454545).abs() < 1e-6);
    }

    #[test]
    fn undefined_precision() {
        let m = metrics(&ConfusionMatrix::new(0, 10, 0, 0), F1Mode::Standard);
        assert_eq!(m.pre, None);
        assert!(matches!(m.pre(), Err(Error::UndefinedMetric("precision"))));
        assert_eq!(m.acc, Some(1.0));
        assert!(metrics(&ConfusionMatrix::default(), F1Mode::Standard).acc.is_none());
    }

    #[test]
    fn improvement_examples() {
        let m = |acc| Metrics { acc: Some(acc), pre: Some(0.5), rec: Some(0.6), f1: Some(0.7), f1_mode: F1Mode::Standard };
        let same = improvement(&m(0.8), &m(0.8)).unwrap();
        assert_eq!(same, ImprovementReport { acc_imp: 0.0, rec_imp: 0.0, pre_imp: 0.0, f1_imp: 0.0 });
        assert!((improvement(&m(0.88), &m(0.8)).unwrap().acc_imp - 10.0).abs() < 1e-9);
        let zero = Metrics { pre: Some(0.0), ..m(0.8) };
        assert!(matches!(improvement(&m(0.8), &zero), Err(Error::ZeroBaseline("precision"))));
    }

    #[test]
    fn published_improvement_convention() {
        // a distilled model whose metrics exceed the original by the tabulated ratios
        let original = Metrics { acc: Some(0.80), rec: Some(0.70), pre: Some(0.40), f1: Some(0.50), f1_mode: F1Mode::Standard };
        let distilled = Metrics {
            acc: Some(0.80 * 1.0456),
            rec: Some(0.70 * 1.0436),
            pre: Some(0.40 * 1.9217),
            f1: Some(0.50 * 1.5354),
            f1_mode: F1Mode::Standard,
        };
        let imp = improvement(&distilled, &original).unwrap();
        for (got, want) in [(imp.acc_imp, 4.56), (imp.rec_imp, 4.36), (imp.pre_imp, 92.17), (imp.f1_imp, 53.54)] {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    proptest! {
        #[test]
        fn matches_recomputation_and_f1_order(tp in 0u64..500, tn in 0u64..500, fp in 0u64..500, fn_ in 0u64..500) {
            let cm = ConfusionMatrix::new(tp, tn, fp, fn_);
            let s = metrics(&cm, F1Mode::Standard);
            let p = metrics(&cm, F1Mode::Halved);
            let total = (tp + tn + fp + fn_) as f64;
            if total > 0.0 {
                prop_assert!((s.acc.unwrap() - (tp + tn) as f64 / total).abs() < 1e-12);
            }
            if tp + fp > 0 && tp + fn_ > 0 && tp > 0 {
                let pre = tp as f64 / (tp + fp) as f64;
                let rec = tp as f64 / (tp + fn_) as f64;
                prop_assert!((s.f1.unwrap() - 2.0 * pre * rec / (pre + rec)).abs() < 1e-12);
                prop_assert!(s.f1.unwrap() > p.f1.unwrap());
            }
            for v in [s.acc, s.pre, s.rec, s.f1].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn order_independent(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 0..100), rot in 0usize..100) {
            let labelled: Vec<_> = pairs.iter().map(|&(a, b)| (Label::from_index(a as usize), Label::from_index(b as usize))).collect();
            let mut rotated = labelled.clone();
            if !rotated.is_empty() { let k = rot % rotated.len(); rotated.rotate_left(k); rotated.reverse(); }
            prop_assert_eq!(ConfusionMatrix::from_pairs(labelled), ConfusionMatrix::from_pairs(rotated));
        }
    }
}
