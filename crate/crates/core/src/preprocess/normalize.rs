// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::{Named, Registry};

/// An affine rescaling `(x - offset) / spread` whose parameters come from data.
pub trait Normalizer: Named + Send + Sync {
    /// Returns `(offset, spread)` for one sequence; `spread == 0` marks it degenerate.
    fn fit_params(&self, values: &[f64]) -> (f64, f64);

    fn normalize(&self, values: &[f64]) -> Vec<f64> {
        let (offset, spread) = self.fit_params(values);
        values.iter().map(|&x| apply(x, offset, spread)).collect()
    }
}

fn apply(x: f64, offset: f64, spread: f64) -> f64 {
    if spread == 0.0 {
        0.0
    } else {
        (x - offset) / spread
    }
}

/// Maps the observed minimum to 0 and maximum to 1.
pub struct MinMax;

impl Named for MinMax {
    fn name(&self) -> &'static str {
        "minmax"
    }
}

impl Normalizer for MinMax {
    fn fit_params(&self, values: &[f64]) -> (f64, f64) {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() || max <= min {
            (0.0, 0.0)
        } else {
            (min, max - min)
        }
    }
}

/// Centres on the mean and divides by the population standard deviation.
pub struct ZScore;

impl Named for ZScore {
    fn name(&self) -> &'static str {
        "zscore"
    }
}

impl Normalizer for ZScore {
    fn fit_params(&self, values: &[f64]) -> (f64, f64) {
        if values.len() < 2 {
            return (0.0, 0.0);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        if var <= 1e-24 * (1.0 + mean * mean) {
            (0.0, 0.0)
        } else {
            (mean, var.sqrt())
        }
    }
}

pub fn minmax_normalize(values: &[f64]) -> Vec<f64> {
    MinMax.normalize(values)
}

pub fn zscore_standardize(values: &[f64]) -> Vec<f64> {
    ZScore.normalize(values)
}

pub fn normalizers() -> Registry<dyn Normalizer> {
    let mut r: Registry<dyn Normalizer> = Registry::new("normalization");
    r.register(Box::new(MinMax)).register(Box::new(ZScore));
    r
}

/// Per-column parameters fitted on training rows and reused on test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub method: String,
    pub offset: Vec<f64>,
    pub spread: Vec<f64>,
}

impl ColumnScaler {
    pub fn fit(normalizer: &dyn Normalizer, rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().ok_or(Error::EmptyData)?.len();
        let mut offset = Vec::with_capacity(width);
        let mut spread = Vec::with_capacity(width);
        let mut column = Vec::with_capacity(rows.len());
        for c in 0..width {
            column.clear();
            for r in rows {
                if r.len() != width {
                    return Err(Error::ShapeMismatch {
                        expected: width,
                        got: r.len(),
                    });
                }
                column.push(r[c]);
            }
            let (o, s) = normalizer.fit_params(&column);
            offset.push(o);
            spread.push(s);
        }
        Ok(Self {
            method: normalizer.name().to_string(),
            offset,
            spread,
        })
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.offset.iter().zip(&self.spread))
            .map(|(&x, (&o, &s))| apply(x, o, s))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minmax_examples() {
        assert_eq!(minmax_normalize(&[2.0, 4.0, 6.0]), [0.0, 0.5, 1.0]);
        assert_eq!(minmax_normalize(&[5.0, 5.0, 5.0]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn zscore_examples() {
        assert_eq!(zscore_standardize(&[1.0, 3.0]), [-1.0, 1.0]);
        assert_eq!(zscore_standardize(&[0.0, 0.0, 0.0]), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn registry_names() {
        let r = normalizers();
        assert_eq!(r.names(), ["minmax", "zscore"]);
        assert!(r.get("robust").is_err());
    }

    #[test]
    fn scaler_reuses_training_params() {
        let rows = vec![vec![0.0, 10.0], vec![2.0, 10.0]];
        let s = ColumnScaler::fit(&MinMax, &rows).unwrap();
        assert_eq!(s.transform(&[1.0, 10.0]), [0.5, 0.0]);
        assert_eq!(s.transform(&[4.0, 3.0]), [2.0, 0.0]);
        assert!(ColumnScaler::fit(&MinMax, &[]).is_err());
    }

    proptest! {
        #[test]
        fn minmax_bounds_and_idempotent(v in prop::collection::vec(-1e3..1e3f64, 2..100)) {
            let out = minmax_normalize(&v);
            prop_assert!(out.iter().all(|&x| (0.0..=1.0).contains(&x)));
            let distinct = v.iter().any(|&x| x != v[0]);
            if distinct {
                let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(max, 1.0);
                let again = minmax_normalize(&out);
                for (a, b) in again.iter().zip(&out) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
                // order preserving
                for i in 0..v.len() {
                    for j in 0..v.len() {
                        if v[i] < v[j] {
                            prop_assert!(out[i] <= out[j]);
                        }
                    }
                }
            }
        }

        #[test]
        fn zscore_moments(v in prop::collection::vec(-1e3..1e3f64, 2..200)) {
            let out = zscore_standardize(&v);
            let n = v.len() as f64;
            let mean_in = v.iter().sum::<f64>() / n;
            let var_in = v.iter().map(|x| (x - mean_in).powi(2)).sum::<f64>() / n;
            if var_in > 1e-6 {
                let mean = out.iter().sum::<f64>() / n;
                let sd = (out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((sd - 1.0).abs() < 1e-9);
            }
        }
    }
}
