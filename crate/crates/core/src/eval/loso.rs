// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics, partial_improvement, ConfusionMatrix, F1Mode, Metrics, PartialImprovement};
use crate::cascade::{build_cascade, run_dataset, CascadeConfig, CascadeInput, CascadeReport, Layout};
use crate::dataset::{Dataset, Label};
use crate::distill::KdConfig;
use crate::edge_threshold::{fit_from_peaks, EdgeThresholds, WindowPeaks};
use crate::error::{Error, Result};
use crate::nn::{Tier, TieredModel, TrainConfig};
use crate::perfmodel::{cascade_latency, compare_latency, model_flops, LatencyComparison, LatencyReport, Topology};
use crate::preprocess::{
    extract_features, extract_window, normalizers, ColumnScaler, Normalizer, PlaneConvention, WindowSpec, N_FEATURES,
};
use crate::strategy::{strategies, ModelBank, TierSpecs, TrainingStrategy};

pub const SCHEMA_VERSION: &str = "fallcascade-report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub window: WindowSpec,
    pub planes: PlaneConvention,
    /// Name of the feature normalizer (`minmax` or `zscore`).
    pub normalization: String,
    pub tiers: TierSpecs,
    pub train: TrainConfig,
    pub kd: KdConfig,
    pub cascade: CascadeConfig,
    /// Training strategies to evaluate, by registry name.
    pub strategies: Vec<String>,
    pub layouts: Vec<Layout>,
    pub f1_mode: F1Mode,
    /// Seconds of traffic the routed volumes are spread over for latency.
    pub horizon_s: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            window: WindowSpec::default(),
            planes: PlaneConvention::default(),
            normalization: "minmax".into(),
            tiers: TierSpecs::default(),
            train: TrainConfig::default(),
            kd: KdConfig::default(),
            cascade: CascadeConfig::default(),
            strategies: vec!["no-kd".into(), "dual-kd".into(), "takd".into()],
            layouts: vec![Layout::Dual, Layout::Triple],
            f1_mode: F1Mode::default(),
            horizon_s: 1.0,
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        normalizers().get(&self.normalization)?;
        self.tiers.validate(N_FEATURES)?;
        self.train.validate()?;
        self.kd.validate()?;
        self.cascade.validate()?;
        let registry = strategies();
        if self.strategies.is_empty() || self.layouts.is_empty() {
            return Err(Error::Config("at least one strategy and one layout are required".into()));
        }
        for name in &self.strategies {
            registry.get(name)?;
        }
        if self.strategies.iter().collect::<BTreeSet<_>>().len() != self.strategies.len() {
            return Err(Error::Config("strategies are listed more than once".into()));
        }
        if self.layouts.iter().collect::<BTreeSet<_>>().len() != self.layouts.len() {
            return Err(Error::Config("layouts are listed more than once".into()));
        }
        if !(self.horizon_s > 0.0 && self.horizon_s.is_finite()) {
            return Err(Error::Config(format!("horizon_s must be positive, got {}", self.horizon_s)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub traces: usize,
    pub subjects: usize,
    pub falls: usize,
    pub adls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub subject: String,
    pub n_train: usize,
    pub n_test: usize,
    pub thresholds: EdgeThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub subject: String,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub student_confusion: ConfusionMatrix,
    pub top_volume: u64,
}

/// Per-fold averages over the folds where each metric is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub acc: Option<f64>,
    pub pre: Option<f64>,
    pub rec: Option<f64>,
    pub f1: Option<f64>,
}

impl MeanMetrics {
    fn of<'a>(all: impl Iterator<Item = &'a Metrics> + Clone) -> Self {
        let mean = |f: fn(&Metrics) -> Option<f64>| {
            let v: Vec<f64> = all.clone().filter_map(f).collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        Self {
            acc: mean(|m| m.acc),
            pre: mean(|m| m.pre),
            rec: mean(|m| m.rec),
            f1: mean(|m| m.f1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationInfo {
    pub name: String,
    pub tier: Option<Tier>,
    pub widths: Vec<usize>,
    pub params: usize,
    pub flops: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub name: String,
    pub strategy: String,
    pub layout: Layout,
    pub per_fold: Vec<FoldMetrics>,
    pub pooled_confusion: ConfusionMatrix,
    pub pooled: Metrics,
    pub fold_mean: MeanMetrics,
    /// The first classifier station evaluated on every test window.
    pub student_confusion: ConfusionMatrix,
    pub student: Metrics,
    pub routing: CascadeReport,
    pub latency: LatencyReport,
    pub stations: Vec<StationInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantImprovement {
    pub variant: String,
    pub baseline: String,
    pub cascade: PartialImprovement,
    pub student: PartialImprovement,
    pub top_volume: u64,
    pub baseline_top_volume: u64,
    pub latency: LatencyComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub schema_version: String,
    pub dataset: DatasetSummary,
    pub config: ExperimentConfig,
    pub folds: Vec<FoldSummary>,
    pub variants: Vec<VariantReport>,
    /// Each distilled variant against the plain variant with the same layout.
    pub improvements: Vec<VariantImprovement>,
}

impl AggregateReport {
    pub fn variant(&self, name: &str) -> Option<&VariantReport> {
        self.variants.iter().find(|v| v.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub fold: String,
    pub variant: String,
    pub subject_id: String,
    pub trial_id: String,
    pub label: Label,
    #[serde(rename = "final")]
    pub final_: Label,
    pub decided_at: usize,
    pub per_station_prob: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossCurve {
    pub fold: String,
    pub model: String,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub report: AggregateReport,
    pub decisions: Vec<DecisionRecord>,
    pub loss_curves: Vec<LossCurve>,
}

struct VariantFold {
    report: CascadeReport,
    student_confusion: ConfusionMatrix,
}

struct FoldOutput {
    summary: FoldSummary,
    variants: Vec<VariantFold>,
    decisions: Vec<DecisionRecord>,
    curves: Vec<LossCurve>,
}

struct Prepared {
    labels: Vec<Label>,
    peaks: Vec<WindowPeaks>,
    features: Vec<Vec<f64>>,
    lengths: Vec<usize>,
}

fn variant_name(strategy: &str, layout: Layout) -> String {
    format!("{strategy}/{}", layout.as_str())
}

fn argmax_label(logits: &[f64]) -> Label {
    if logits[Label::Fall.index()] >= logits[Label::Adl.index()] {
        Label::Fall
    } else {
        Label::Adl
    }
}

#[allow(clippy::too_many_arguments)]
fn run_fold(
    fold: usize,
    subject: &str,
    dataset: &Dataset,
    prep: &Prepared,
    cfg: &ExperimentConfig,
    normalizer: &dyn Normalizer,
    plan: &[(&dyn TrainingStrategy, Layout)],
) -> Result<FoldOutput> {
    let (test, train): (Vec<usize>, Vec<usize>) =
        (0..dataset.traces.len()).partition(|&i| dataset.traces[i].subject_id == subject);
    let thresholds = fit_from_peaks(&train.iter().map(|&i| prep.peaks[i]).collect::<Vec<_>>())?;
    let raw: Vec<Vec<f64>> = train.iter().map(|&i| prep.features[i].clone()).collect();
    let scaler = ColumnScaler::fit(normalizer, &raw)?;
    let bank = ModelBank::new(
        raw.iter().map(|r| scaler.transform(r)).collect(),
        train.iter().map(|&i| prep.labels[i]).collect(),
        cfg.tiers.clone(),
        cfg.train.clone(),
        cfg.kd.clone(),
        crate::derive_seed(cfg.seed, fold as u64),
    );
    let inputs: Vec<CascadeInput> = test
        .iter()
        .map(|&i| CascadeInput {
            label: prep.labels[i],
            peaks: prep.peaks[i],
            features: scaler.transform(&prep.features[i]),
            samples: prep.lengths[i],
        })
        .collect();

    let needs_ta = cfg.layouts.contains(&Layout::Triple);
    let mut variants = Vec::with_capacity(plan.len());
    let mut decisions = Vec::new();
    for &(strategy, layout) in plan {
        let student = Arc::new(strategy.student(&bank)?.model.clone());
        let teacher = Arc::new(strategy.teacher(&bank)?.model.clone());
        let ta = if needs_ta && layout == Layout::Triple {
            Some(Arc::new(strategy.ta(&bank)?.model.clone()))
        } else {
            None
        };
        let mut student_confusion = ConfusionMatrix::default();
        for input in &inputs {
            student_confusion.record(input.label, argmax_label(&student.forward(&input.features)?));
        }
        let cascade = build_cascade(layout, thresholds, student, ta, teacher, &cfg.cascade)?;
        let (report, log) = run_dataset(&cascade, &inputs)?;
        let name = variant_name(strategy.name(), layout);
        for (&i, d) in test.iter().zip(log) {
            let trace = &dataset.traces[i];
            decisions.push(DecisionRecord {
                fold: subject.to_string(),
                variant: name.clone(),
                subject_id: trace.subject_id.clone(),
                trial_id: trace.trial_id.clone(),
                label: trace.label,
                final_: d.final_,
                decided_at: d.decided_at,
                per_station_prob: d.per_station_prob,
            });
        }
        variants.push(VariantFold {
            report,
            student_confusion,
        });
    }

    let curves = bank
        .trained()
        .into_iter()
        .map(|(key, outcome)| LossCurve {
            fold: subject.to_string(),
            model: key.to_string(),
            losses: outcome.epoch_losses.clone(),
        })
        .collect();
    Ok(FoldOutput {
        summary: FoldSummary {
            subject: subject.to_string(),
            n_train: train.len(),
            n_test: test.len(),
            thresholds,
        },
        variants,
        decisions,
        curves,
    })
}

fn station_info(cfg: &ExperimentConfig, layout: Layout) -> Result<Vec<StationInfo>> {
    let names = layout.station_names();
    let mut tiers = vec![None, Some(Tier::Student)];
    if layout == Layout::Triple {
        tiers.push(Some(Tier::Ta));
    }
    tiers.push(Some(Tier::Teacher));
    names
        .iter()
        .zip(tiers)
        .map(|(name, tier)| {
            let (widths, params, flops) = match tier {
                None => (Vec::new(), 0, 0),
                Some(t) => {
                    let spec = cfg.tiers.get(t).clone();
                    let model = TieredModel::zeros(spec.clone())?;
                    (spec.widths.clone(), spec.param_count(), model_flops(&model))
                }
            };
            Ok(StationInfo {
                name: name.to_string(),
                tier,
                widths,
                params,
                flops,
            })
        })
        .collect()
}

/// Leave-one-subject-out evaluation of every configured strategy × layout.
///
/// Folds run in parallel; results are assembled in subject order, so the output
/// does not depend on the thread count.
pub fn loso_evaluate(dataset: &Dataset, cfg: &ExperimentConfig, topology: &Topology) -> Result<EvalOutput> {
    cfg.validate()?;
    topology.validate()?;
    let subjects = dataset.subjects();
    if subjects.len() < 2 {
        return Err(Error::TooFewSubjects {
            needed: 2,
            found: subjects.len(),
        });
    }
    for layout in &cfg.layouts {
        for name in layout.station_names() {
            if topology.layer(name).is_none() {
                return Err(Error::TopologyMismatch(format!("no topology layer named {name}")));
            }
        }
    }

    let windows: Vec<_> = dataset
        .traces
        .par_iter()
        .map(|t| extract_window(t, &cfg.window))
        .collect();
    let prep = Prepared {
        labels: windows.iter().map(|w| w.label).collect(),
        peaks: windows.iter().map(WindowPeaks::of).collect(),
        features: windows
            .par_iter()
            .map(|w| extract_features(w, &cfg.planes).to_vec())
            .collect(),
        lengths: windows.iter().map(|w| w.len()).collect(),
    };
    drop(windows);

    let norms = normalizers();
    let normalizer = norms.get(&cfg.normalization)?;
    let registry = strategies();
    let mut plan = Vec::new();
    for name in &cfg.strategies {
        let s = registry.get(name)?;
        for &layout in &cfg.layouts {
            plan.push((s, layout));
        }
    }

    let folds: Vec<FoldOutput> = subjects
        .par_iter()
        .enumerate()
        .map(|(k, subject)| run_fold(k, subject, dataset, &prep, cfg, normalizer, &plan))
        .collect::<Result<_>>()?;

    let mut variants = Vec::with_capacity(plan.len());
    for (v, &(strategy, layout)) in plan.iter().enumerate() {
        let names = layout.station_names().iter().map(|s| s.to_string());
        let mut routing = CascadeReport::empty(names);
        let mut pooled_confusion = ConfusionMatrix::default();
        let mut student_confusion = ConfusionMatrix::default();
        let mut per_fold = Vec::with_capacity(folds.len());
        for fold in &folds {
            let vf = &fold.variants[v];
            routing.merge(&vf.report)?;
            pooled_confusion.merge(&vf.report.confusion);
            student_confusion.merge(&vf.student_confusion);
            per_fold.push(FoldMetrics {
                subject: fold.summary.subject.clone(),
                confusion: vf.report.confusion,
                metrics: metrics(&vf.report.confusion, cfg.f1_mode),
                student_confusion: vf.student_confusion,
                top_volume: vf.report.top_volume(),
            });
        }
        variants.push(VariantReport {
            name: variant_name(strategy.name(), layout),
            strategy: strategy.name().to_string(),
            layout,
            fold_mean: MeanMetrics::of(per_fold.iter().map(|f| &f.metrics)),
            per_fold,
            pooled: metrics(&pooled_confusion, cfg.f1_mode),
            pooled_confusion,
            student: metrics(&student_confusion, cfg.f1_mode),
            student_confusion,
            latency: cascade_latency(&routing, topology, cfg.horizon_s)?,
            routing,
            stations: station_info(cfg, layout)?,
        });
    }

    let mut improvements = Vec::new();
    if let Some(&(base, _)) = plan.iter().find(|(s, _)| !s.distils()) {
        for v in variants.iter().filter(|v| v.strategy != base.name()) {
            let b = variants
                .iter()
                .find(|b| b.strategy == base.name() && b.layout == v.layout)
                .expect("every strategy runs every layout");
            improvements.push(VariantImprovement {
                variant: v.name.clone(),
                baseline: b.name.clone(),
                cascade: partial_improvement(&v.pooled, &b.pooled),
                student: partial_improvement(&v.student, &b.student),
                top_volume: v.routing.top_volume(),
                baseline_top_volume: b.routing.top_volume(),
                latency: compare_latency(&b.latency, &v.latency)?,
            });
        }
    }

    let mut decisions = Vec::new();
    let mut loss_curves = Vec::new();
    let mut summaries = Vec::with_capacity(folds.len());
    for fold in folds {
        decisions.extend(fold.decisions);
        loss_curves.extend(fold.curves);
        summaries.push(fold.summary);
    }
    Ok(EvalOutput {
        report: AggregateReport {
            schema_version: SCHEMA_VERSION.to_string(),
            dataset: DatasetSummary {
                name: dataset.name.clone(),
                traces: dataset.len(),
                subjects: subjects.len(),
                falls: dataset.count_label(Label::Fall),
                adls: dataset.count_label(Label::Adl),
            },
            config: cfg.clone(),
            folds: summaries,
            variants,
            improvements,
        },
        decisions,
        loss_curves,
    })
}

/// One line of the normalization comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRow {
    pub normalization: String,
    pub variant: String,
    pub acc: Option<f64>,
    pub pre: Option<f64>,
    pub rec: Option<f64>,
    pub f1: Option<f64>,
}

impl NormalizationRow {
    pub fn from_report(report: &AggregateReport) -> Vec<Self> {
        report
            .variants
            .iter()
            .map(|v| Self {
                normalization: report.config.normalization.clone(),
                variant: v.name.clone(),
                acc: v.pooled.acc,
                pre: v.pooled.pre,
                rec: v.pooled.rec,
                f1: v.pooled.f1,
            })
            .collect()
    }
}

/// Reruns the evaluation under each normalizer in `modes`.
pub fn compare_normalizations(
    dataset: &Dataset,
    cfg: &ExperimentConfig,
    topology: &Topology,
    modes: &[String],
) -> Result<Vec<NormalizationRow>> {
    let mut rows = Vec::new();
    for mode in modes {
        let cfg = ExperimentConfig {
            normalization: mode.clone(),
            ..cfg.clone()
        };
        rows.extend(NormalizationRow::from_report(&loso_evaluate(dataset, &cfg, topology)?.report));
    }
    Ok(rows)
}
