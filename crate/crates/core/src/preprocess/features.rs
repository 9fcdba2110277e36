// SPDX-License-Identifier: Apache-2.0

//! Window statistics in a fixed order:
//!
//! | index   | statistic                                  |
//! |---------|--------------------------------------------|
//! | 0..6    | mean                                       |
//! | 6..12   | standard deviation (population)            |
//! | 12..18  | variance (population)                      |
//! | 18..24  | maximum                                    |
//! | 24..30  | minimum                                    |
//! | 30..36  | range                                      |
//! | 36..42  | excess kurtosis `m4 / m2^2 - 3`            |
//! | 42..48  | skewness `m3 / m2^1.5`                     |
//! | 48..51  | Pearson r of (x,y), (x,z), (y,z)           |
//! | 51..54  | Pearson r of (norm,verti), (norm,hori), (verti,hori) |
//!
//! Each statistic block runs over the channels ax, ay, az, a_norm, a_verti, a_hori.
//! Zero-variance channels report 0 for kurtosis, skewness and correlation.

use serde::{Deserialize, Serialize};

use super::{norm_hori, norm_xyz, Window};
use crate::dataset::Sample;

pub const N_FEATURES: usize = 54;
const N_CHANNELS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn of(self, s: &Sample) -> f64 {
        match self {
            Axis::X => s.ax,
            Axis::Y => s.ay,
            Axis::Z => s.az,
        }
    }
}

/// Which device axes span the coronal plane used for `a_verti`.
///
/// The default takes x as the vertical axis and (x, y) as the coronal plane,
/// consistent with the horizontal plane being (y, z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneConvention {
    pub coronal: (Axis, Axis),
}

impl Default for PlaneConvention {
    fn default() -> Self {
        Self {
            coronal: (Axis::X, Axis::Y),
        }
    }
}

impl PlaneConvention {
    pub fn norm_verti(&self, s: &Sample) -> f64 {
        let (a, b) = (self.coronal.0.of(s), self.coronal.1.of(s));
        (a * a + b * b).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.to_vec()
    }
}

/// Below this the central second moment is treated as zero.
fn is_flat(m2: f64, mean: f64) -> bool {
    m2 <= 1e-24 * (1.0 + mean * mean)
}

struct Moments {
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
    max: f64,
    min: f64,
}

impl Moments {
    fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        let mut max = f64::NEG_INFINITY;
        let mut min = f64::INFINITY;
        for &x in xs {
            let d = x - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
            max = max.max(x);
            min = min.min(x);
        }
        Self {
            mean,
            m2: m2 / n,
            m3: m3 / n,
            m4: m4 / n,
            max,
            min,
        }
    }

    fn flat(&self) -> bool {
        is_flat(self.m2, self.mean)
    }

    fn kurtosis(&self) -> f64 {
        if self.flat() {
            0.0
        } else {
            self.m4 / (self.m2 * self.m2) - 3.0
        }
    }

    fn skewness(&self) -> f64 {
        if self.flat() {
            0.0
        } else {
            self.m3 / self.m2.powf(1.5)
        }
    }
}

fn pearson(a: &[f64], ma: &Moments, b: &[f64], mb: &Moments) -> f64 {
    if ma.flat() || mb.flat() {
        return 0.0;
    }
    let n = a.len() as f64;
    let cov = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - ma.mean) * (y - mb.mean))
        .sum::<f64>()
        / n;
    (cov / (ma.m2.sqrt() * mb.m2.sqrt())).clamp(-1.0, 1.0)
}

/// Computes the 54 features from the raw (unnormalized) window samples.
pub fn extract_features(window: &Window, planes: &PlaneConvention) -> FeatureVector {
    let n = window.samples.len();
    let mut ch: [Vec<f64>; N_CHANNELS] = std::array::from_fn(|_| Vec::with_capacity(n));
    for s in &window.samples {
        ch[0].push(s.ax);
        ch[1].push(s.ay);
        ch[2].push(s.az);
        ch[3].push(norm_xyz(s));
        ch[4].push(planes.norm_verti(s));
        ch[5].push(norm_hori(s));
    }
    let m: Vec<Moments> = ch.iter().map(|c| Moments::of(c)).collect();

    let mut f = [0.0; N_FEATURES];
    for (c, mc) in m.iter().enumerate() {
        f[c] = mc.mean;
        f[6 + c] = mc.m2.sqrt();
        f[12 + c] = mc.m2;
        f[18 + c] = mc.max;
        f[24 + c] = mc.min;
        f[30 + c] = mc.max - mc.min;
        f[36 + c] = mc.kurtosis();
        f[42 + c] = mc.skewness();
    }
    const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)];
    for (k, &(a, b)) in PAIRS.iter().enumerate() {
        f[48 + k] = pearson(&ch[a], &m[a], &ch[b], &m[b]);
    }
    FeatureVector(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Label;

    fn window(samples: Vec<Sample>) -> Window {
        Window {
            impact_index: 0,
            samples,
            label: Label::Adl,
            subject_id: "S".into(),
            trial_id: "t".into(),
        }
    }

    #[test]
    fn constant_window() {
        let w = window(vec![Sample::new(1.0, 0.0, 0.0); 50]);
        let f = extract_features(&w, &PlaneConvention::default()).0;
        assert_eq!(f[0], 1.0);
        assert_eq!(f[6], 0.0);
        assert_eq!(f[12], 0.0);
        assert_eq!(f[18], 1.0);
        assert_eq!(f[24], 1.0);
        assert_eq!(f[30], 0.0);
        // every channel is flat here
        assert!(f[36..].iter().all(|&x| x == 0.0));
        assert!(f.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn equal_axes_correlate_perfectly() {
        let samples = (0..40)
            .map(|i| {
                let v = (i as f64 * 0.3).sin();
                Sample::new(v, v, 0.1 * i as f64)
            })
            .collect();
        let f = extract_features(&window(samples), &PlaneConvention::default()).0;
        assert!((f[48] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn skewed_channel_sign() {
        // one large positive outlier skews ax to the right
        let mut samples = vec![Sample::new(0.0, 1.0, 0.0); 20];
        samples[3].ax = 10.0;
        let f = extract_features(&window(samples), &PlaneConvention::default()).0;
        assert!(f[42] > 0.0);
        assert!(f[36] > 0.0);
    }

    #[test]
    fn coronal_plane_is_configurable() {
        let s = Sample::new(0.0, 3.0, 4.0);
        let xy = PlaneConvention::default();
        let xz = PlaneConvention {
            coronal: (Axis::X, Axis::Z),
        };
        assert_eq!(xy.norm_verti(&s), 3.0);
        assert_eq!(xz.norm_verti(&s), 4.0);
    }
}
