// SPDX-License-Identifier: Apache-2.0

//! Desk-scale synthetic trials.
//!
//! Falls: walking, a free-fall dip, a half-sine impact whose peak norm is drawn
//! from `fall_peak_range`, then damped rebounds and a posture change toward lying.
//! ADLs: low-frequency sinusoids around 1 g, optionally a transient bump or a
//! slow posture change, scaled so the dynamic part never exceeds the drawn peak.
//! Overlapping peak ranges produce windows the edge gate cannot settle.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, Label, Sample, Trace, DEFAULT_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_subjects: usize,
    pub falls_per_subject: usize,
    pub adls_per_subject: usize,
    /// Peak acceleration norm of the fall impact, g.
    pub fall_peak_range: (f64, f64),
    /// Peak dynamic acceleration of an ADL on top of gravity, g.
    pub adl_peak_range: (f64, f64),
    pub trace_duration_s: f64,
    pub noise_sd: f64,
    pub sample_rate_hz: u32,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// Overlap-band dataset: part of the falls and ADLs share peak magnitudes.
    fn default() -> Self {
        Self {
            n_subjects: 6,
            falls_per_subject: 20,
            adls_per_subject: 20,
            fall_peak_range: (1.8, 4.5),
            adl_peak_range: (0.4, 2.2),
            trace_duration_s: 6.0,
            noise_sd: 0.03,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            seed: 7,
        }
    }
}

impl SynthSpec {
    /// Fall and ADL peaks far enough apart that the max norm alone separates them.
    pub fn separable() -> Self {
        Self {
            fall_peak_range: (3.0, 6.0),
            adl_peak_range: (0.5, 1.5),
            noise_sd: 0.02,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.n_subjects == 0 || self.falls_per_subject == 0 || self.adls_per_subject == 0 {
            return bad("subject and trial counts must be at least 1");
        }
        for (name, (lo, hi)) in [
            ("fall_peak_range", self.fall_peak_range),
            ("adl_peak_range", self.adl_peak_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi && lo > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "{name} must satisfy 0 < min < max, got ({lo}, {hi})"
                )));
            }
        }
        if !(self.trace_duration_s.is_finite() && self.trace_duration_s >= 2.0) {
            return bad("trace_duration_s must be at least 2 s");
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return bad("noise_sd must be non-negative");
        }
        if self.sample_rate_hz == 0 {
            return bad("sample_rate_hz must be positive");
        }
        Ok(())
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut traces = Vec::with_capacity(spec.n_subjects * (spec.falls_per_subject + spec.adls_per_subject));
    for s in 0..spec.n_subjects {
        let subject_id = format!("S{:02}", s + 1);
        let body = SubjectTraits::draw(&mut stream_rng(spec.seed, s as u64, u64::MAX));
        for f in 0..spec.falls_per_subject {
            let mut rng = stream_rng(spec.seed, s as u64, f as u64);
            traces.push(Trace {
                subject_id: subject_id.clone(),
                trial_id: format!("F{:03}", f + 1),
                label: Label::Fall,
                sample_rate_hz: spec.sample_rate_hz,
                samples: fall_trace(spec, &body, &mut rng),
            });
        }
        for a in 0..spec.adls_per_subject {
            let mut rng = stream_rng(spec.seed, s as u64, (1 << 32) + a as u64);
            traces.push(Trace {
                subject_id: subject_id.clone(),
                trial_id: format!("A{:03}", a + 1),
                label: Label::Adl,
                sample_rate_hz: spec.sample_rate_hz,
                samples: adl_trace(spec, &body, &mut rng),
            });
        }
    }
    Ok(Dataset::new(format!("synth-{}", spec.seed), traces))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_rng(seed: u64, subject: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(seed ^ splitmix(subject)) ^ trial))
}

/// Per-subject body and sensor-mount variation.
#[derive(Debug, Clone, Copy)]
struct SubjectTraits {
    gain: f64,
    mount_tilt: f64,
    gait_hz: f64,
}

impl SubjectTraits {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self {
            gain: rng.random_range(0.9..1.1),
            mount_tilt: rng.random_range(-0.15..0.15),
            gait_hz: rng.random_range(1.6..2.2),
        }
    }
}

type Vec3 = [f64; 3];

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: Vec3, k: f64) -> Vec3 {
    [a[0] * k, a[1] * k, a[2] * k]
}

fn norm(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn lerp(a: Vec3, b: Vec3, t: f64) -> Vec3 {
    add(scale(a, 1.0 - t), scale(b, t))
}

fn unit(v: Vec3) -> Vec3 {
    let n = norm(v);
    if n == 0.0 {
        [1.0, 0.0, 0.0]
    } else {
        scale(v, 1.0 / n)
    }
}

/// Direction with polar angle `polar` from the vertical (x) axis.
fn direction(polar: f64, azimuth: f64) -> Vec3 {
    [polar.cos(), polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin()]
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    0.5 - 0.5 * (PI * t).cos()
}

/// AR(1) noise per axis with stationary standard deviation `sd`.
fn colored_noise(n: usize, sd: f64, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    const PHI: f64 = 0.7;
    if sd == 0.0 {
        return vec![[0.0; 3]; n];
    }
    let innov = Normal::new(0.0, sd * (1.0 - PHI * PHI).sqrt()).expect("finite sd");
    let start = Normal::new(0.0, sd).expect("finite sd");
    let mut state = [start.sample(rng), start.sample(rng), start.sample(rng)];
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(state);
        for s in &mut state {
            *s = PHI * *s + innov.sample(rng);
        }
    }
    out
}

/// Sum of a few low-frequency sinusoids per axis.
struct Sway {
    terms: Vec<(usize, f64, f64, f64)>,
}

impl Sway {
    fn draw(rng: &mut ChaCha8Rng, base_hz: f64, count: usize) -> Self {
        let terms = (0..count)
            .map(|k| {
                let axis = k % 3;
                let hz = base_hz * rng.random_range(0.5..1.6);
                let amp = rng.random_range(0.3..1.0);
                let phase = rng.random_range(0.0..TAU);
                (axis, hz, amp, phase)
            })
            .collect();
        Self { terms }
    }

    fn at(&self, t: f64) -> Vec3 {
        let mut v = [0.0; 3];
        for &(axis, hz, amp, phase) in &self.terms {
            v[axis] += amp * (TAU * hz * t + phase).sin();
        }
        v
    }
}

fn finish(signal: Vec<Vec3>, body: &SubjectTraits, noise: &[Vec3]) -> Vec<Sample> {
    let (c, s) = (body.mount_tilt.cos(), body.mount_tilt.sin());
    signal
        .into_iter()
        .zip(noise)
        .map(|(v, e)| {
            // sensor mount rotation about z mixes the x and y axes
            let r = [c * v[0] - s * v[1], s * v[0] + c * v[1], v[2]];
            Sample::new(r[0] + e[0], r[1] + e[1], r[2] + e[2])
        })
        .collect()
}

fn sample_count(spec: &SynthSpec) -> usize {
    (spec.trace_duration_s * f64::from(spec.sample_rate_hz)).round() as usize
}

fn fall_trace(spec: &SynthSpec, body: &SubjectTraits, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let rate = f64::from(spec.sample_rate_hz);
    let n = sample_count(spec);
    let peak = rng.random_range(spec.fall_peak_range.0..spec.fall_peak_range.1);

    let earliest = 1.6 * rate;
    let latest = (n as f64 - 2.2 * rate).max(earliest + 1.0);
    let impact = if latest as usize >= n {
        n / 2
    } else {
        rng.random_range(earliest..latest) as usize
    };
    let half_width = (rng.random_range(0.03..0.08) * rate).max(1.0);
    let freefall = rng.random_range(0.2..0.5) * rate;
    let freefall_depth = rng.random_range(0.1..0.6);
    let spike_dir = direction(rng.random_range(0.5..1.2), rng.random_range(0.0..TAU));
    let settle = rng.random_range(0.3..0.8) * rate;
    let lying = unit(direction(
        rng.random_range(1.2..PI / 2.0),
        rng.random_range(0.0..TAU),
    ));
    // a minority of falls end semi-upright (sitting, kneeling)
    let rest = if rng.random_bool(0.2) {
        unit(direction(rng.random_range(0.4..0.9), rng.random_range(0.0..TAU)))
    } else {
        lying
    };
    let walk_amp = rng.random_range(0.1..0.3) * body.gain;
    let sway = Sway::draw(rng, body.gait_hz, 4);
    let rebound_amp = rng.random_range(0.1..0.25) * peak;
    let rebound_hz = rng.random_range(3.0..6.0);

    let upright = [1.0, 0.0, 0.0];
    let impact_f = impact as f64;
    let signal = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let fi = i as f64;
            let base = if fi < impact_f - half_width - freefall {
                add(upright, scale(sway.at(t), walk_amp))
            } else if fi < impact_f - half_width {
                let x = (fi - (impact_f - half_width - freefall)) / freefall;
                scale(upright, 1.0 - (1.0 - freefall_depth) * smoothstep(x))
            } else if fi <= impact_f + half_width {
                scale(upright, freefall_depth)
            } else {
                let since = (fi - impact_f - half_width) / rate;
                let posture = lerp(upright, rest, smoothstep((fi - impact_f) / settle));
                let rebound = rebound_amp * (-since / 0.12).exp() * (TAU * rebound_hz * since).sin();
                add(unit(posture), scale(spike_dir, rebound))
            };
            let dist = (fi - impact_f).abs();
            if dist <= half_width {
                let h = (PI / 2.0 * (1.0 - dist / half_width)).sin();
                lerp(base, scale(spike_dir, peak), h)
            } else {
                base
            }
        })
        .collect();
    let noise = colored_noise(n, spec.noise_sd, rng);
    finish(signal, body, &noise)
}

fn adl_trace(spec: &SynthSpec, body: &SubjectTraits, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let rate = f64::from(spec.sample_rate_hz);
    let n = sample_count(spec);
    let peak = rng.random_range(spec.adl_peak_range.0..spec.adl_peak_range.1) * body.gain;
    let sway_hz = body.gait_hz * rng.random_range(0.3..1.2);
    let sway = Sway::draw(rng, sway_hz, 5);

    let bump = rng.random_bool(0.6).then(|| {
        let centre = rng.random_range(0.2..0.8) * n as f64;
        let width = rng.random_range(0.08..0.3) * rate;
        let dir = direction(rng.random_range(0.0..1.0), rng.random_range(0.0..TAU));
        (centre, width, dir)
    });
    let posture = rng.random_bool(0.3).then(|| {
        let start = rng.random_range(0.2..0.6) * n as f64;
        let span = rng.random_range(1.0..2.0) * rate;
        let target = unit(direction(rng.random_range(0.6..PI / 2.0), rng.random_range(0.0..TAU)));
        (start, span, target)
    });

    let upright = [1.0, 0.0, 0.0];
    let dynamic: Vec<Vec3> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let mut v = scale(sway.at(t), 0.35);
            if let Some((centre, width, dir)) = bump {
                let x = (i as f64 - centre) / width;
                if x.abs() < 1.0 {
                    v = add(v, scale(dir, (PI / 2.0 * (1.0 - x.abs())).sin()));
                }
            }
            v
        })
        .collect();
    let dyn_max = dynamic.iter().map(|&v| norm(v)).fold(0.0, f64::max);
    let k = if dyn_max > 0.0 { peak / dyn_max } else { 0.0 };

    let signal = dynamic
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            let base = match posture {
                Some((start, span, target)) => {
                    unit(lerp(upright, target, smoothstep((i as f64 - start) / span)))
                }
                None => upright,
            };
            add(base, scale(d, k))
        })
        .collect();
    let noise = colored_noise(n, spec.noise_sd, rng);
    finish(signal, body, &noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::norm_xyz;

    fn max_norm(t: &Trace) -> f64 {
        t.samples.iter().map(norm_xyz).fold(0.0, f64::max)
    }

    #[test]
    fn counts() {
        let ds = synth_generate(&SynthSpec {
            n_subjects: 3,
            falls_per_subject: 2,
            adls_per_subject: 2,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(ds.len(), 12);
        assert_eq!(ds.subjects(), ["S01", "S02", "S03"]);
        assert_eq!(ds.count_label(Label::Fall), 6);
        assert!(ds.traces.iter().all(|t| t.len() == 1200 && t.samples.iter().all(Sample::is_finite)));
    }

    #[test]
    fn same_seed_same_dataset() {
        let spec = SynthSpec {
            n_subjects: 2,
            falls_per_subject: 2,
            adls_per_subject: 2,
            ..Default::default()
        };
        assert_eq!(synth_generate(&spec).unwrap(), synth_generate(&spec).unwrap());
        let other = synth_generate(&SynthSpec { seed: 8, ..spec.clone() }).unwrap();
        assert_ne!(other, synth_generate(&spec).unwrap());
    }

    #[test]
    fn separable_peaks_split_by_max_norm() {
        let ds = synth_generate(&SynthSpec {
            n_subjects: 4,
            falls_per_subject: 10,
            adls_per_subject: 10,
            ..SynthSpec::separable()
        })
        .unwrap();
        let fall_min = ds
            .traces
            .iter()
            .filter(|t| t.label == Label::Fall)
            .map(max_norm)
            .fold(f64::INFINITY, f64::min);
        let adl_max = ds
            .traces
            .iter()
            .filter(|t| t.label == Label::Adl)
            .map(max_norm)
            .fold(0.0, f64::max);
        assert!(fall_min > adl_max, "fall_min={fall_min} adl_max={adl_max}");
    }

    #[test]
    fn overlap_band_mixes_peaks() {
        let ds = synth_generate(&SynthSpec::default()).unwrap();
        let fall_min = ds
            .traces
            .iter()
            .filter(|t| t.label == Label::Fall)
            .map(max_norm)
            .fold(f64::INFINITY, f64::min);
        let adl_max = ds
            .traces
            .iter()
            .filter(|t| t.label == Label::Adl)
            .map(max_norm)
            .fold(0.0, f64::max);
        assert!(fall_min < adl_max);
    }

    #[test]
    fn invalid_specs() {
        let base = SynthSpec::default();
        for spec in [
            SynthSpec { n_subjects: 0, ..base.clone() },
            SynthSpec { adls_per_subject: 0, ..base.clone() },
            SynthSpec { fall_peak_range: (3.0, 3.0), ..base.clone() },
            SynthSpec { adl_peak_range: (2.0, 1.0), ..base.clone() },
            SynthSpec { noise_sd: -1.0, ..base.clone() },
            SynthSpec { trace_duration_s: 0.5, ..base.clone() },
        ] {
            assert!(matches!(synth_generate(&spec), Err(Error::InvalidSpec(_))));
        }
    }
}
