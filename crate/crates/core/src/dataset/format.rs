// SPDX-License-Identifier: Apache-2.0

//! Per-trial text format:
//!
//! ```text
//! subject=S01
//! trial=F003
//! label=FALL
//! rate_hz=200
//! ---
//! 0.98,0.01,-0.03
//! ...
//! ```
//!
//! A manifest lists one trace path per line, relative to the manifest's directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Dataset, Label, Sample, Trace};
use crate::error::{Error, Result};

pub const TRACE_EXTENSION: &str = "trace";
const SEPARATOR: &str = "---";

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_trace(&text, path)
}

/// Parses trace text; `origin` is only used in error messages.
pub fn parse_trace(text: &str, origin: &Path) -> Result<Trace> {
    let malformed = |reason: String| Error::MalformedHeader {
        path: origin.to_path_buf(),
        reason,
    };

    let mut lines = text.lines().enumerate();
    let mut subject = None;
    let mut trial = None;
    let mut label = None;
    let mut rate = None;
    let mut saw_separator = false;

    for (_, line) in lines.by_ref() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == SEPARATOR {
            saw_separator = true;
            break;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| malformed(format!("expected key=value, got `{line}`")))?;
        let value = value.trim();
        match key.trim() {
            "subject" => subject = Some(value.to_string()),
            "trial" => trial = Some(value.to_string()),
            "label" => {
                label = Some(
                    Label::parse(value)
                        .ok_or_else(|| malformed(format!("label must be FALL or ADL, got `{value}`")))?,
                )
            }
            "rate_hz" => {
                let r: u32 = value
                    .parse()
                    .map_err(|_| malformed(format!("rate_hz must be a positive integer, got `{value}`")))?;
                if r == 0 {
                    return Err(malformed("rate_hz must be positive".into()));
                }
                rate = Some(r)
            }
            // unknown keys are tolerated so converters can annotate traces
            _ => {}
        }
    }
    if !saw_separator {
        return Err(malformed("missing `---` separator".into()));
    }
    let subject_id = subject.ok_or_else(|| malformed("missing `subject`".into()))?;
    let trial_id = trial.ok_or_else(|| malformed("missing `trial`".into()))?;
    let label = label.ok_or_else(|| malformed("missing `label`".into()))?;
    let sample_rate_hz = rate.ok_or_else(|| malformed("missing `rate_hz`".into()))?;

    let mut samples = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = || Error::NonNumericSample {
            path: origin.to_path_buf(),
            line: idx + 1,
            text: line.to_string(),
        };
        let mut fields = line.split(',').map(|f| f.trim().parse::<f64>());
        let (Some(Ok(ax)), Some(Ok(ay)), Some(Ok(az)), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(bad());
        };
        let s = Sample::new(ax, ay, az);
        if !s.is_finite() {
            return Err(bad());
        }
        samples.push(s);
    }
    if samples.is_empty() {
        return Err(Error::EmptyTrace(origin.to_path_buf()));
    }

    Ok(Trace {
        subject_id,
        trial_id,
        label,
        sample_rate_hz,
        samples,
    })
}

pub fn format_trace(trace: &Trace) -> String {
    let mut out = String::with_capacity(64 + trace.samples.len() * 24);
    let _ = writeln!(out, "subject={}", trace.subject_id);
    let _ = writeln!(out, "trial={}", trace.trial_id);
    let _ = writeln!(out, "label={}", trace.label);
    let _ = writeln!(out, "rate_hz={}", trace.sample_rate_hz);
    out.push_str(SEPARATOR);
    out.push('\n');
    for s in &trace.samples {
        // `{}` on f64 prints the shortest representation that parses back exactly
        let _ = writeln!(out, "{},{},{}", s.ax, s.ay, s.az);
    }
    out
}

pub fn write_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_trace(trace))?;
    Ok(())
}

/// Writes every trace into `dir` plus a `manifest.txt`; returns the manifest path.
pub fn write_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest = String::new();
    for trace in &dataset.traces {
        let file = format!("{}_{}.{TRACE_EXTENSION}", trace.subject_id, trace.trial_id);
        write_trace(trace, dir.join(&file))?;
        manifest.push_str(&file);
        manifest.push('\n');
    }
    let manifest_path = dir.join("manifest.txt");
    fs::write(&manifest_path, manifest)?;
    Ok(manifest_path)
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let text = fs::read_to_string(path)?;
    let traces = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let p = Path::new(l);
            if p.is_absolute() {
                load_trace(p)
            } else {
                load_trace(base.join(p))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let name = path
        .parent()
        .and_then(|p| p.file_name())
        .and_then(|n| n.to_str())
        .unwrap_or("dataset")
        .to_string();
    Ok(Dataset::new(name, traces))
}
