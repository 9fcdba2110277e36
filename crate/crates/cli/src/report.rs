// SPDX-License-Identifier: Apache-2.0

//! Report files and the delimited plot data written next to them.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fallcascade::eval::{AggregateReport, DecisionRecord, LossCurve, Metrics, NormalizationRow, SCHEMA_VERSION};
use fallcascade::Error;

pub const REPORT_FILE: &str = "report.json";
const TIMESTAMP_KEY: &str = "\"generated_at_unix\"";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub generated_at_unix: u64,
    pub schema_version: String,
    pub report: AggregateReport,
    pub normalization: Vec<NormalizationRow>,
}

impl ReportFile {
    pub fn new(report: AggregateReport, normalization: Vec<NormalizationRow>) -> Self {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            generated_at_unix: now,
            schema_version: SCHEMA_VERSION.to_string(),
            report,
            normalization,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let head: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        match head.get("schema_version").and_then(|v| v.as_str()) {
            Some(SCHEMA_VERSION) => {}
            other => bail!(Error::SchemaMismatch {
                a: SCHEMA_VERSION.to_string(),
                b: other.unwrap_or("<missing>").to_string(),
            }),
        }
        serde_json::from_value(head).with_context(|| format!("decoding {}", path.display()))
    }
}

/// SHA-256 of a report's text with the timestamp line left out.
pub fn digest(json: &str) -> String {
    let mut h = Sha256::new();
    for line in json.split_inclusive('\n') {
        if !line.trim_start().starts_with(TIMESTAMP_KEY) {
            h.update(line.as_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn metric_row(out: &mut String, variant: &str, scope: &str, m: (Option<f64>, Option<f64>, Option<f64>, Option<f64>)) {
    let _ = writeln!(out, "{variant},{scope},{},{},{},{}", opt(m.0), opt(m.1), opt(m.2), opt(m.3));
}

fn quad(m: &Metrics) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    (m.acc, m.pre, m.rec, m.f1)
}

pub fn metrics_csv(r: &AggregateReport) -> String {
    let mut out = String::from("variant,scope,acc,pre,rec,f1\n");
    for v in &r.variants {
        metric_row(&mut out, &v.name, "pooled", quad(&v.pooled));
        let f = &v.fold_mean;
        metric_row(&mut out, &v.name, "fold_mean", (f.acc, f.pre, f.rec, f.f1));
        metric_row(&mut out, &v.name, "student", quad(&v.student));
        for fold in &v.per_fold {
            metric_row(&mut out, &v.name, &format!("fold:{}", fold.subject), quad(&fold.metrics));
        }
    }
    out
}

pub fn layer_volumes_csv(r: &AggregateReport) -> String {
    let mut out = String::from("variant,layer,processed,decided_fall,decided_adl,escalated,processed_samples,latency_ms\n");
    for v in &r.variants {
        for (l, lat) in v.routing.layers.iter().zip(&v.latency.layers) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                v.name, l.name, l.processed, l.decided_fall, l.decided_adl, l.escalated, l.processed_samples, lat.latency_ms
            );
        }
    }
    out
}

pub fn improvements_csv(r: &AggregateReport) -> String {
    let mut out = String::from(
        "variant,baseline,scope,acc_imp,rec_imp,pre_imp,f1_imp,top_volume,baseline_top_volume,latency_reduction_pct\n",
    );
    for i in &r.improvements {
        for (scope, p) in [("cascade", &i.cascade), ("student", &i.student)] {
            let _ = writeln!(
                out,
                "{},{},{scope},{},{},{},{},{},{},{}",
                i.variant,
                i.baseline,
                opt(p.acc_imp),
                opt(p.rec_imp),
                opt(p.pre_imp),
                opt(p.f1_imp),
                i.top_volume,
                i.baseline_top_volume,
                opt(i.latency.total.reduction_pct)
            );
        }
    }
    out
}

pub fn normalization_csv(rows: &[NormalizationRow]) -> String {
    let mut out = String::from("normalization,variant,acc,pre,rec,f1\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.normalization,
            r.variant,
            opt(r.acc),
            opt(r.pre),
            opt(r.rec),
            opt(r.f1)
        );
    }
    out
}

pub fn loss_curves_csv(curves: &[LossCurve]) -> String {
    let mut out = String::from("fold,model,epoch,loss\n");
    for c in curves {
        for (e, l) in c.losses.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{}", c.fold, c.model, e + 1, l);
        }
    }
    out
}

pub fn decisions_csv(log: &[DecisionRecord]) -> String {
    let mut out = String::from("fold,variant,subject,trial,label,final,decided_at,station_probs\n");
    for d in log {
        let probs: Vec<String> = d.per_station_prob.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            d.fold,
            d.variant,
            d.subject_id,
            d.trial_id,
            d.label,
            d.final_,
            d.decided_at,
            probs.join(";")
        );
    }
    out
}
