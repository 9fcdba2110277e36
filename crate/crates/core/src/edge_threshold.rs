// SPDX-License-Identifier: Apache-2.0

//! Edge-device gate: absolute-fall / absolute-ADL thresholds on window peak norms.

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};
use crate::preprocess::Window;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TriDecision {
    Fall,
    Adl,
    Uncertain,
}

impl TriDecision {
    pub fn label(self) -> Option<Label> {
        match self {
            TriDecision::Fall => Some(Label::Fall),
            TriDecision::Adl => Some(Label::Adl),
            TriDecision::Uncertain => None,
        }
    }
}

/// Which thresholds the ADL branch compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateRule {
    /// ADL iff both peaks are below the smallest training fall peaks.
    #[default]
    AdlBelowFallMinima,
    /// ADL iff both peaks are below the fall thresholds (largest training ADL peaks).
    PrintedEquation,
}

/// Peak norms of one window, the gate's only inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowPeaks {
    pub label: Label,
    pub xyz: f64,
    pub hori: f64,
}

impl WindowPeaks {
    pub fn of(window: &Window) -> Self {
        Self {
            label: window.label,
            xyz: window.peak_xyz(),
            hori: window.peak_hori(),
        }
    }
}

/// Thresholds in g.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeThresholds {
    /// Largest peak `norm_xyz` among training ADLs.
    pub t_fall_xyz: f64,
    /// Largest peak `norm_hori` among training ADLs.
    pub t_fall_hori: f64,
    /// Smallest peak `norm_xyz` among training falls.
    pub t_adl_xyz: f64,
    /// Smallest peak `norm_hori` among training falls.
    pub t_adl_hori: f64,
}

pub fn fit_thresholds(windows: &[Window]) -> Result<EdgeThresholds> {
    let peaks: Vec<_> = windows.iter().map(WindowPeaks::of).collect();
    fit_from_peaks(&peaks)
}

pub fn fit_from_peaks(peaks: &[WindowPeaks]) -> Result<EdgeThresholds> {
    let adl = peaks.iter().filter(|p| p.label == Label::Adl);
    let fall = peaks.iter().filter(|p| p.label == Label::Fall);
    let (t_fall_xyz, t_fall_hori) = adl.fold((None, None), |(x, h): (Option<f64>, Option<f64>), p| {
        (Some(x.map_or(p.xyz, |x| x.max(p.xyz))), Some(h.map_or(p.hori, |h| h.max(p.hori))))
    });
    let (t_adl_xyz, t_adl_hori) = fall.fold((None, None), |(x, h): (Option<f64>, Option<f64>), p| {
        (Some(x.map_or(p.xyz, |x| x.min(p.xyz))), Some(h.map_or(p.hori, |h| h.min(p.hori))))
    });
    Ok(EdgeThresholds {
        t_fall_xyz: t_fall_xyz.ok_or(Error::MissingClass("ADL"))?,
        t_fall_hori: t_fall_hori.ok_or(Error::MissingClass("ADL"))?,
        t_adl_xyz: t_adl_xyz.ok_or(Error::MissingClass("fall"))?,
        t_adl_hori: t_adl_hori.ok_or(Error::MissingClass("fall"))?,
    })
}

/// Three-way decision from the window's peak norms.
///
/// Equality with a threshold is never absolute. When the training peaks are
/// separable a window can satisfy both the Fall and the ADL condition; such a
/// window is Uncertain.
pub fn classify_tc(xyz: f64, hori: f64, th: &EdgeThresholds, rule: GateRule) -> TriDecision {
    let fall = xyz > th.t_fall_xyz && hori > th.t_fall_hori;
    let (ax, ah) = match rule {
        GateRule::AdlBelowFallMinima => (th.t_adl_xyz, th.t_adl_hori),
        GateRule::PrintedEquation => (th.t_fall_xyz, th.t_fall_hori),
    };
    let adl = xyz < ax && hori < ah;
    match (fall, adl) {
        (true, false) => TriDecision::Fall,
        (false, true) => TriDecision::Adl,
        _ => TriDecision::Uncertain,
    }
}
