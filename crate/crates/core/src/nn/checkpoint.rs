// SPDX-License-Identifier: Apache-2.0

//! Text checkpoints.
//!
//! ```text
//! fallcascade-checkpoint 1
//! tier student
//! widths 54 16 2
//! seed 7
//! w <outputs*inputs values, row-major>
//! b <outputs values>
//! ...            (one w/b pair per layer)
//! ```
//!
//! Values use Rust's shortest round-trip decimal form, so load(save(m)) == m bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::{Dense, Tier, TierSpec, TieredModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "fallcascade-checkpoint 1";

fn join(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 20);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
    s
}

impl TieredModel {
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{CHECKPOINT_MAGIC}");
        let _ = writeln!(out, "tier {}", self.spec.tier.as_str());
        let widths: Vec<String> = self.spec.widths.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "widths {}", widths.join(" "));
        let _ = writeln!(out, "seed {}", self.seed);
        for layer in &self.layers {
            let _ = writeln!(out, "w {}", join(&layer.weights));
            let _ = writeln!(out, "b {}", join(&layer.bias));
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let err = |line: usize, reason: &str| Error::Checkpoint {
            line,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (n, line) = lines.next().ok_or_else(|| err(0, "unexpected end of checkpoint"))?;
            if key.is_empty() {
                return Ok((n, line.to_string()));
            }
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' ').or(if rest.is_empty() { Some("") } else { None }))
                .map(|rest| (n, rest.to_string()))
                .ok_or_else(|| err(n, &format!("expected `{key}`")))
        };

        let (n, magic) = field("")?;
        if magic != CHECKPOINT_MAGIC {
            return Err(err(n, "unknown checkpoint header"));
        }
        let (n, tier) = field("tier")?;
        let tier = Tier::parse(&tier).ok_or_else(|| err(n, "unknown tier"))?;
        let (n, widths) = field("widths")?;
        let widths = widths
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<Vec<usize>, _>>()
            .map_err(|_| err(n, "bad width"))?;
        let spec = TierSpec::new(tier, widths).map_err(|e| err(n, &e.to_string()))?;
        let (n, seed) = field("seed")?;
        let seed = seed.parse().map_err(|_| err(n, "bad seed"))?;

        let parse_row = |n: usize, row: &str, len: usize| -> Result<Vec<f64>> {
            let vals = row
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| err(n, "bad number"))?;
            if vals.len() != len || vals.iter().any(|v| !v.is_finite()) {
                return Err(err(n, &format!("expected {len} finite values, got {}", vals.len())));
            }
            Ok(vals)
        };
        let mut layers = Vec::new();
        for w in spec.widths.windows(2) {
            let (n, row) = field("w")?;
            let weights = parse_row(n, &row, w[0] * w[1])?;
            let (n, row) = field("b")?;
            let bias = parse_row(n, &row, w[1])?;
            layers.push(Dense {
                inputs: w[0],
                outputs: w[1],
                weights,
                bias,
            });
        }
        Ok(Self { spec, layers, seed })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&std::fs::read_to_string(path)?)
    }
}
