// SPDX-License-Identifier: Apache-2.0

//! Detection metrics and the leave-one-subject-out experiment driver.

mod loso;
mod metrics;

pub use loso::{
    compare_normalizations, loso_evaluate, AggregateReport, DatasetSummary, DecisionRecord, EvalOutput,
    ExperimentConfig, FoldMetrics, FoldSummary, LossCurve, MeanMetrics, NormalizationRow, StationInfo,
    VariantImprovement, VariantReport, SCHEMA_VERSION,
};
pub use metrics::{
    improvement, metrics, partial_improvement, ConfusionMatrix, F1Mode, ImprovementReport, Metrics,
    PartialImprovement,
};
