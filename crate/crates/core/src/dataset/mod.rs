// SPDX-License-Identifier: Apache-2.0

//! Accelerometer trials, the on-disk trace format, and leave-one-subject-out splits.

mod format;
mod synth;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{load_manifest, load_trace, parse_trace, write_dataset, write_trace, TRACE_EXTENSION};
pub use synth::{synth_generate, SynthSpec};

pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 200;

/// One triaxial accelerometer reading in g.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sample {
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl Sample {
    pub const ZERO: Sample = Sample {
        ax: 0.0,
        ay: 0.0,
        az: 0.0,
    };

    pub fn new(ax: f64, ay: f64, az: f64) -> Self {
        Self { ax, ay, az }
    }

    pub fn is_finite(&self) -> bool {
        self.ax.is_finite() && self.ay.is_finite() && self.az.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Fall,
    Adl,
}

impl Label {
    /// Output-unit index of this class; logits are ordered (Fall, ADL).
    pub fn index(self) -> usize {
        match self {
            Label::Fall => 0,
            Label::Adl => 1,
        }
    }

    pub fn from_index(index: usize) -> Self {
        if index == 0 {
            Label::Fall
        } else {
            Label::Adl
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Fall => "FALL",
            Label::Adl => "ADL",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "FALL" => Some(Label::Fall),
            "ADL" => Some(Label::Adl),
            _ => None,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single recorded trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub subject_id: String,
    pub trial_id: String,
    pub label: Label,
    pub sample_rate_hz: u32,
    pub samples: Vec<Sample>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub traces: Vec<Trace>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, traces: Vec<Trace>) -> Self {
        Self {
            name: name.into(),
            traces,
        }
    }

    /// Distinct subject ids in lexicographic order.
    pub fn subjects(&self) -> Vec<String> {
        self.traces
            .iter()
            .map(|t| t.subject_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.traces.iter().filter(|t| t.label == label).count()
    }
}

/// Splits `dataset` into (train, test) with every trace of `held_out_subject` in test.
pub fn split_loso(dataset: &Dataset, held_out_subject: &str) -> Result<(Dataset, Dataset)> {
    if !dataset.traces.iter().any(|t| t.subject_id == held_out_subject) {
        return Err(Error::UnknownSubject(held_out_subject.to_string()));
    }
    let (test, train): (Vec<_>, Vec<_>) = dataset
        .traces
        .iter()
        .cloned()
        .partition(|t| t.subject_id == held_out_subject);
    Ok((
        Dataset::new(format!("{}-train-{held_out_subject}", dataset.name), train),
        Dataset::new(format!("{}-test-{held_out_subject}", dataset.name), test),
    ))
}

/// All k folds of a k-subject dataset, in subject order.
pub fn loso_folds(dataset: &Dataset) -> Result<Vec<(String, Dataset, Dataset)>> {
    let subjects = dataset.subjects();
    if subjects.len() < 2 {
        return Err(Error::TooFewSubjects {
            needed: 2,
            found: subjects.len(),
        });
    }
    subjects
        .into_iter()
        .map(|s| split_loso(dataset, &s).map(|(train, test)| (s, train, test)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        let mk = |s: &str, t: &str, label| Trace {
            subject_id: s.into(),
            trial_id: t.into(),
            label,
            sample_rate_hz: 200,
            samples: vec![Sample::new(1.0, 0.0, 0.0)],
        };
        Dataset::new(
            "toy",
            vec![
                mk("S1", "a", Label::Fall),
                mk("S2", "b", Label::Adl),
                mk("S2", "c", Label::Fall),
                mk("S3", "d", Label::Adl),
            ],
        )
    }

    #[test]
    fn holds_out_only_that_subject() {
        let (train, test) = split_loso(&toy(), "S2").unwrap();
        assert_eq!(test.len(), 2);
        assert!(test.traces.iter().all(|t| t.subject_id == "S2"));
        assert!(train.traces.iter().all(|t| t.subject_id != "S2"));
        assert_eq!(train.len() + test.len(), 4);
    }

    #[test]
    fn one_fold_per_subject() {
        let folds = loso_folds(&toy()).unwrap();
        let held: Vec<_> = folds.iter().map(|(s, _, _)| s.as_str()).collect();
        assert_eq!(held, ["S1", "S2", "S3"]);
    }

    #[test]
    fn unknown_subject_is_rejected() {
        assert!(matches!(
            split_loso(&toy(), "S9"),
            Err(Error::UnknownSubject(s)) if s == "S9"
        ));
    }

    #[test]
    fn single_subject_cannot_fold() {
        let mut d = toy();
        d.traces.retain(|t| t.subject_id == "S2");
        assert!(matches!(loso_folds(&d), Err(Error::TooFewSubjects { .. })));
    }
}
