// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use fallcascade::dataset::{synth_generate, write_dataset, Label, SynthSpec};
use fallcascade::eval::{
    compare_normalizations, loso_evaluate, partial_improvement, AggregateReport, NormalizationRow, PartialImprovement,
    VariantReport,
};
use fallcascade::perfmodel::{compare_latency, LatencyComparison};

use crate::config::RunConfig;
use crate::report::{self, ReportFile, REPORT_FILE};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSummary {
    pub manifest: PathBuf,
    pub traces: usize,
    pub subjects: usize,
    pub falls: usize,
    pub adls: usize,
}

/// Writes the configured synthetic dataset to `out`.
pub fn synth(cfg: &RunConfig, seed: Option<u64>, out: &Path) -> Result<SynthSummary> {
    let spec = SynthSpec {
        seed: seed.unwrap_or(cfg.dataset.synth.seed),
        ..cfg.dataset.synth.clone()
    };
    let ds = synth_generate(&spec).map_err(|e| anyhow!("dataset.synth: {e}"))?;
    let manifest = write_dataset(&ds, out).with_context(|| format!("writing dataset to {}", out.display()))?;
    Ok(SynthSummary {
        manifest,
        traces: ds.len(),
        subjects: ds.subjects().len(),
        falls: ds.count_label(Label::Fall),
        adls: ds.count_label(Label::Adl),
    })
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub report_path: PathBuf,
    pub digest: String,
    pub report: AggregateReport,
}

fn write(out: &Path, name: &str, contents: &str) -> Result<()> {
    let path = out.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Full evaluation; writes the report and plot data into `out`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let dataset = cfg.dataset()?;
    let topology = cfg.topology()?;
    let experiment = cfg.experiment();
    log::info!(
        "evaluating {} traces from {} subjects",
        dataset.len(),
        dataset.subjects().len()
    );
    let main = loso_evaluate(&dataset, &experiment, &topology)?;

    let mut normalization = Vec::new();
    for mode in &cfg.eval.normalization_compare {
        if *mode == experiment.normalization {
            normalization.extend(NormalizationRow::from_report(&main.report));
        } else {
            normalization.extend(compare_normalizations(&dataset, &experiment, &topology, std::slice::from_ref(mode))?);
        }
    }

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let file = ReportFile::new(main.report, normalization);
    let json = file.to_json()?;
    write(out, REPORT_FILE, &json)?;
    write(out, "metrics.csv", &report::metrics_csv(&file.report))?;
    write(out, "layer_volumes.csv", &report::layer_volumes_csv(&file.report))?;
    write(out, "improvements.csv", &report::improvements_csv(&file.report))?;
    write(out, "normalization.csv", &report::normalization_csv(&file.normalization))?;
    write(out, "loss_curves.csv", &report::loss_curves_csv(&main.loss_curves))?;
    if cfg.output.decisions {
        write(out, "decisions.csv", &report::decisions_csv(&main.decisions))?;
    }
    Ok(RunSummary {
        report_path: out.join(REPORT_FILE),
        digest: report::digest(&json),
        report: file.report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub variant_a: String,
    pub variant_b: String,
    /// Improvement of b over a.
    pub cascade: PartialImprovement,
    pub student: PartialImprovement,
    pub top_volume_a: u64,
    pub top_volume_b: u64,
    /// Latency reduction going from a to b.
    pub latency: LatencyComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub schema_version: String,
    pub pairs: Vec<PairComparison>,
}

fn pair(a: &VariantReport, b: &VariantReport) -> Result<PairComparison> {
    Ok(PairComparison {
        variant_a: a.name.clone(),
        variant_b: b.name.clone(),
        cascade: partial_improvement(&b.pooled, &a.pooled),
        student: partial_improvement(&b.student, &a.student),
        top_volume_a: a.routing.top_volume(),
        top_volume_b: b.routing.top_volume(),
        latency: compare_latency(&a.latency, &b.latency)?,
    })
}

/// Compares report `b` against baseline `a`.
///
/// With no variant names, every variant of `a` is matched with the same-named
/// variant of `b`; with one name, it selects that variant in both.
pub fn compare(a: &Path, b: &Path, variant_a: Option<&str>, variant_b: Option<&str>) -> Result<Comparison> {
    let ra = ReportFile::load(a)?;
    let rb = ReportFile::load(b)?;
    if ra.schema_version != rb.schema_version {
        bail!(fallcascade::Error::SchemaMismatch {
            a: ra.schema_version,
            b: rb.schema_version,
        });
    }
    let find = |r: &ReportFile, name: &str, path: &Path| -> Result<VariantReport> {
        r.report
            .variant(name)
            .cloned()
            .ok_or_else(|| anyhow!("{}: no variant named {name}", path.display()))
    };
    let pairs = match (variant_a, variant_b) {
        (None, None) => ra
            .report
            .variants
            .iter()
            .filter_map(|va| rb.report.variant(&va.name).map(|vb| pair(va, vb)))
            .collect::<Result<Vec<_>>>()?,
        (x, y) => {
            let na = x.or(y).unwrap();
            let nb = y.or(x).unwrap();
            vec![pair(&find(&ra, na, a)?, &find(&rb, nb, b)?)?]
        }
    };
    if pairs.is_empty() {
        bail!("the two reports share no variant names");
    }
    Ok(Comparison {
        schema_version: ra.schema_version,
        pairs,
    })
}
