// SPDX-License-Identifier: Apache-2.0

//! Escalation cascade: a threshold gate followed by classifiers of growing
//! capacity. A window moves up while a station is unsure; the top station always
//! decides.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::edge_threshold::{classify_tc, EdgeThresholds, GateRule, TriDecision, WindowPeaks};
use crate::error::{Error, Result};
use crate::eval::ConfusionMatrix;
use crate::nn::{softmax_t, TieredModel};

pub const DEFAULT_TQ_MAX: f64 = 0.8;
pub const DEFAULT_TQ_MIN: f64 = 0.2;

/// Confidence banding of a fall probability.
pub fn judge_tq(p_fall: f64, tq_max: f64, tq_min: f64) -> Result<TriDecision> {
    validate_tq(tq_max, tq_min)?;
    Ok(if p_fall > tq_max {
        TriDecision::Fall
    } else if p_fall < tq_min {
        TriDecision::Adl
    } else {
        TriDecision::Uncertain
    })
}

fn validate_tq(tq_max: f64, tq_min: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tq_min) || !(0.0..=1.0).contains(&tq_max) || tq_min >= tq_max {
        return Err(Error::InvalidThresholds { tq_min, tq_max });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub enum StationKind {
    ThresholdGate {
        thresholds: EdgeThresholds,
        rule: GateRule,
    },
    Classifier {
        model: Arc<TieredModel>,
        tq_max: f64,
        tq_min: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Station {
    pub name: String,
    pub kind: StationKind,
}

impl Station {
    pub fn gate(name: impl Into<String>, thresholds: EdgeThresholds, rule: GateRule) -> Self {
        Self {
            name: name.into(),
            kind: StationKind::ThresholdGate { thresholds, rule },
        }
    }

    pub fn classifier(name: impl Into<String>, model: Arc<TieredModel>, tq_max: f64, tq_min: f64) -> Self {
        Self {
            name: name.into(),
            kind: StationKind::Classifier { model, tq_max, tq_min },
        }
    }
}

/// What a station sees of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeInput {
    pub label: Label,
    pub peaks: WindowPeaks,
    /// Model-ready (scaled) feature vector.
    pub features: Vec<f64>,
    /// Raw sample count of the window, for volume accounting.
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct Cascade {
    stations: Vec<Station>,
    inference_temperature: f64,
}

impl Cascade {
    /// The last station is the top and must be a classifier.
    pub fn new(stations: Vec<Station>, inference_temperature: f64) -> Result<Self> {
        if stations.len() < 2 {
            return Err(Error::InvalidCascade(format!(
                "need at least 2 stations, got {}",
                stations.len()
            )));
        }
        if !(inference_temperature > 0.0 && inference_temperature.is_finite()) {
            return Err(Error::NonPositiveTemperature(inference_temperature));
        }
        let mut last_params = 0;
        for (i, st) in stations.iter().enumerate() {
            match &st.kind {
                StationKind::Classifier { model, tq_max, tq_min } => {
                    validate_tq(*tq_max, *tq_min)?;
                    let n = model.count_params();
                    if n < last_params {
                        log::warn!(
                            "station {} ({n} params) is smaller than the station below ({last_params} params)",
                            st.name
                        );
                    }
                    last_params = n;
                }
                StationKind::ThresholdGate { .. } if i + 1 == stations.len() => {
                    return Err(Error::InvalidCascade(
                        "the top station must be a classifier".into(),
                    ));
                }
                StationKind::ThresholdGate { .. } => {}
            }
        }
        Ok(Self {
            stations,
            inference_temperature,
        })
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn inference_temperature(&self) -> f64 {
        self.inference_temperature
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedDecision {
    #[serde(rename = "final")]
    pub final_: Label,
    pub decided_at: usize,
    /// Fall probability at each classifier station the window reached.
    pub per_station_prob: Vec<f64>,
}

pub fn run_sample(cascade: &Cascade, input: &CascadeInput) -> Result<RoutedDecision> {
    let mut probs = Vec::new();
    let top = cascade.stations.len() - 1;
    for (i, st) in cascade.stations.iter().enumerate() {
        let decision = match &st.kind {
            StationKind::ThresholdGate { thresholds, rule } => {
                classify_tc(input.peaks.xyz, input.peaks.hori, thresholds, *rule)
            }
            StationKind::Classifier { model, tq_max, tq_min } => {
                let logits = model.forward(&input.features)?;
                let p = softmax_t(&logits, cascade.inference_temperature)?[Label::Fall.index()];
                probs.push(p);
                if i == top {
                    let fall = logits[Label::Fall.index()] >= logits[Label::Adl.index()];
                    if fall { TriDecision::Fall } else { TriDecision::Adl }
                } else {
                    judge_tq(p, *tq_max, *tq_min)?
                }
            }
        };
        if let Some(label) = decision.label() {
            return Ok(RoutedDecision {
                final_: label,
                decided_at: i,
                per_station_prob: probs,
            });
        }
    }
    unreachable!("the top station always decides")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerStats {
    pub name: String,
    pub processed: u64,
    pub decided_fall: u64,
    pub decided_adl: u64,
    pub escalated: u64,
    /// Raw samples of the windows this layer processed.
    pub processed_samples: u64,
}

impl LayerStats {
    pub fn decided(&self) -> u64 {
        self.decided_fall + self.decided_adl
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub layers: Vec<LayerStats>,
    pub confusion: ConfusionMatrix,
    pub total: u64,
}

impl CascadeReport {
    pub fn empty(names: impl IntoIterator<Item = String>) -> Self {
        Self {
            layers: names
                .into_iter()
                .map(|name| LayerStats {
                    name,
                    processed: 0,
                    decided_fall: 0,
                    decided_adl: 0,
                    escalated: 0,
                    processed_samples: 0,
                })
                .collect(),
            confusion: ConfusionMatrix::default(),
            total: 0,
        }
    }

    pub fn record(&mut self, input: &CascadeInput, d: &RoutedDecision) {
        for layer in &mut self.layers[..=d.decided_at] {
            layer.processed += 1;
            layer.processed_samples += input.samples as u64;
        }
        for layer in &mut self.layers[..d.decided_at] {
            layer.escalated += 1;
        }
        match d.final_ {
            Label::Fall => self.layers[d.decided_at].decided_fall += 1,
            Label::Adl => self.layers[d.decided_at].decided_adl += 1,
        }
        self.confusion.record(input.label, d.final_);
        self.total += 1;
    }

    /// Adds another report over the same station layout.
    pub fn merge(&mut self, other: &CascadeReport) -> Result<()> {
        let names = |r: &CascadeReport| r.layers.iter().map(|l| l.name.clone()).collect::<Vec<_>>();
        if names(self) != names(other) {
            return Err(Error::InvalidCascade(format!(
                "cannot merge layouts {:?} and {:?}",
                names(self),
                names(other)
            )));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.processed += b.processed;
            a.decided_fall += b.decided_fall;
            a.decided_adl += b.decided_adl;
            a.escalated += b.escalated;
            a.processed_samples += b.processed_samples;
        }
        self.confusion.merge(&other.confusion);
        self.total += other.total;
        Ok(())
    }

    /// Windows that reached the top station.
    pub fn top_volume(&self) -> u64 {
        self.layers.last().map_or(0, |l| l.processed)
    }
}

/// Routes every window; returns the aggregate and the per-window log.
pub fn run_dataset(cascade: &Cascade, inputs: &[CascadeInput]) -> Result<(CascadeReport, Vec<RoutedDecision>)> {
    let mut report = CascadeReport::empty(cascade.stations.iter().map(|s| s.name.clone()));
    let mut log = Vec::with_capacity(inputs.len());
    for input in inputs {
        let d = run_sample(cascade, input)?;
        report.record(input, &d);
        log.push(d);
    }
    Ok((report, log))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// gate → student → teacher
    #[default]
    Dual,
    /// gate → student → TA → teacher
    Triple,
}

impl Layout {
    pub fn as_str(self) -> &'static str {
        match self {
            Layout::Dual => "dual",
            Layout::Triple => "triple",
        }
    }

    pub fn station_names(self) -> &'static [&'static str] {
        match self {
            Layout::Dual => &["ED", "MEC1", "CC"],
            Layout::Triple => &["ED", "MEC1", "MEC2", "CC"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    pub tq_max: f64,
    pub tq_min: f64,
    pub inference_temperature: f64,
    pub gate_rule: GateRule,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            tq_max: DEFAULT_TQ_MAX,
            tq_min: DEFAULT_TQ_MIN,
            inference_temperature: 1.0,
            gate_rule: GateRule::default(),
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        validate_tq(self.tq_max, self.tq_min)?;
        if !(self.inference_temperature > 0.0 && self.inference_temperature.is_finite()) {
            return Err(Error::NonPositiveTemperature(self.inference_temperature));
        }
        Ok(())
    }
}

/// Builds the standard layout; `ta` is only used by [`Layout::Triple`].
pub fn build_cascade(
    layout: Layout,
    thresholds: EdgeThresholds,
    student: Arc<TieredModel>,
    ta: Option<Arc<TieredModel>>,
    teacher: Arc<TieredModel>,
    cfg: &CascadeConfig,
) -> Result<Cascade> {
    let names = layout.station_names();
    let mut stations = vec![
        Station::gate(names[0], thresholds, cfg.gate_rule),
        Station::classifier(names[1], student, cfg.tq_max, cfg.tq_min),
    ];
    if layout == Layout::Triple {
        let ta = ta.ok_or_else(|| Error::InvalidCascade("triple layout needs a TA model".into()))?;
        stations.push(Station::classifier(names[2], ta, cfg.tq_max, cfg.tq_min));
    }
    stations.push(Station::classifier(*names.last().unwrap(), teacher, cfg.tq_max, cfg.tq_min));
    Cascade::new(stations, cfg.inference_temperature)
}
