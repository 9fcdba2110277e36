// SPDX-License-Identifier: Apache-2.0

//! Impact-centred windowing, input normalization, and the 54 time-domain features.

mod features;
mod normalize;

use serde::{Deserialize, Serialize};

use crate::dataset::{Label, Sample, Trace};
use crate::error::{Error, Result};

pub use features::{extract_features, Axis, FeatureVector, PlaneConvention, N_FEATURES};
pub use normalize::{
    minmax_normalize, normalizers, zscore_standardize, ColumnScaler, MinMax, Normalizer, ZScore,
};

/// Euclidean norm of all three axes.
pub fn norm_xyz(s: &Sample) -> f64 {
    (s.ax * s.ax + s.ay * s.ay + s.az * s.az).sqrt()
}

/// Norm in the horizontal (y, z) plane.
pub fn norm_hori(s: &Sample) -> f64 {
    (s.ay * s.ay + s.az * s.az).sqrt()
}

/// Index of the largest `norm_xyz`; the earliest one on ties. Empty input yields 0.
pub fn find_impact(samples: &[Sample]) -> usize {
    let mut best = 0;
    let mut best_norm = f64::NEG_INFINITY;
    for (i, s) in samples.iter().enumerate() {
        let n = norm_xyz(s);
        if n > best_norm {
            best = i;
            best_norm = n;
        }
    }
    best
}

/// Sub-window durations around the impact sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    /// Seconds kept before the impact sample.
    pub before_s: f64,
    /// Seconds kept after the impact sample.
    pub after_s: f64,
}

impl WindowSpec {
    pub const FALLALLD: WindowSpec = WindowSpec {
        before_s: 1.23,
        after_s: 2.0,
    };
    pub const SISFALL: WindowSpec = WindowSpec {
        before_s: 1.44,
        after_s: 2.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.before_s.is_finite() && self.after_s.is_finite() && self.before_s > 0.0 && self.after_s > 0.0) {
            return Err(Error::Config(format!(
                "window durations must be positive, got before={} after={}",
                self.before_s, self.after_s
            )));
        }
        Ok(())
    }

    pub fn before_samples(&self, rate_hz: u32) -> usize {
        (self.before_s * f64::from(rate_hz)).round() as usize
    }

    pub fn after_samples(&self, rate_hz: u32) -> usize {
        (self.after_s * f64::from(rate_hz)).round() as usize
    }

    pub fn len(&self, rate_hz: u32) -> usize {
        self.before_samples(rate_hz) + 1 + self.after_samples(rate_hz)
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self::FALLALLD
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub samples: Vec<Sample>,
    pub impact_index: usize,
    pub label: Label,
    pub subject_id: String,
    pub trial_id: String,
}

impl Window {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Largest `norm_xyz` in the window.
    pub fn peak_xyz(&self) -> f64 {
        self.samples.iter().map(norm_xyz).fold(0.0, f64::max)
    }

    /// Largest `norm_hori` in the window.
    pub fn peak_hori(&self) -> f64 {
        self.samples.iter().map(norm_hori).fold(0.0, f64::max)
    }
}

/// Cuts the fixed-size window around the trace's impact point.
///
/// Positions that fall outside the trace are zero-filled, so the impact always
/// sits at `spec.before_samples(rate)`.
pub fn extract_window(trace: &Trace, spec: &WindowSpec) -> Window {
    let before = spec.before_samples(trace.sample_rate_hz);
    let len = spec.len(trace.sample_rate_hz);
    let impact = find_impact(&trace.samples) as isize;
    let samples = (0..len)
        .map(|p| {
            let idx = impact - before as isize + p as isize;
            if idx < 0 {
                Sample::ZERO
            } else {
                trace.samples.get(idx as usize).copied().unwrap_or(Sample::ZERO)
            }
        })
        .collect();
    Window {
        samples,
        impact_index: before,
        label: trace.label,
        subject_id: trace.subject_id.clone(),
        trial_id: trace.trial_id.clone(),
    }
}
