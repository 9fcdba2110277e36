// SPDX-License-Identifier: Apache-2.0

//! The TOML run configuration.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use fallcascade::cascade::{CascadeConfig, Layout};
use fallcascade::dataset::{load_manifest, synth_generate, Dataset, SynthSpec};
use fallcascade::distill::KdConfig;
use fallcascade::eval::{ExperimentConfig, F1Mode};
use fallcascade::nn::TrainConfig;
use fallcascade::perfmodel::Topology;
use fallcascade::preprocess::{normalizers, PlaneConvention, WindowSpec};
use fallcascade::strategy::TierSpecs;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// Trace manifest; when absent the dataset is synthesized from `synth`.
    pub manifest: Option<PathBuf>,
    pub synth: SynthSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub normalization: String,
    pub strategies: Vec<String>,
    pub layouts: Vec<Layout>,
    pub f1_mode: F1Mode,
    /// Normalizers for the comparison table; empty disables it.
    pub normalization_compare: Vec<String>,
}

impl Default for EvalSection {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self {
            normalization: e.normalization,
            strategies: e.strategies,
            layouts: e.layouts,
            f1_mode: e.f1_mode,
            normalization_compare: vec!["minmax".into(), "zscore".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerfSection {
    /// Topology file; the built-in reference topology when absent.
    pub topology: Option<PathBuf>,
    pub horizon_s: f64,
}

impl Default for PerfSection {
    fn default() -> Self {
        Self {
            topology: None,
            horizon_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Also write the per-window decision log.
    pub decisions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub dataset: DatasetSection,
    pub window: WindowSpec,
    pub planes: PlaneConvention,
    pub tiers: TierSpecs,
    pub train: TrainConfig,
    pub kd: KdConfig,
    pub cascade: CascadeConfig,
    pub eval: EvalSection,
    pub perf: PerfSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: ExperimentConfig::default().seed,
            dataset: DatasetSection::default(),
            window: WindowSpec::default(),
            planes: PlaneConvention::default(),
            tiers: TierSpecs::default(),
            train: TrainConfig::default(),
            kd: KdConfig::default(),
            cascade: CascadeConfig::default(),
            eval: EvalSection::default(),
            perf: PerfSection::default(),
            output: OutputSection::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        resolve(&mut cfg.dataset.manifest);
        resolve(&mut cfg.perf.topology);
        resolve(&mut cfg.output.dir);
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            window: self.window,
            planes: self.planes,
            normalization: self.eval.normalization.clone(),
            tiers: self.tiers.clone(),
            train: self.train.clone(),
            kd: self.kd.clone(),
            cascade: self.cascade,
            strategies: self.eval.strategies.clone(),
            layouts: self.eval.layouts.clone(),
            f1_mode: self.eval.f1_mode,
            horizon_s: self.perf.horizon_s,
            seed: self.seed,
        }
    }

    pub fn topology(&self) -> Result<Topology> {
        let topo = match &self.perf.topology {
            None => Topology::reference(),
            Some(p) => {
                if !p.is_file() {
                    bail!("perf.topology: file not found: {}", p.display());
                }
                let text = std::fs::read_to_string(p)?;
                toml::from_str(&text).with_context(|| format!("perf.topology: parsing {}", p.display()))?
            }
        };
        topo.validate().map_err(|e| anyhow!("perf.topology: {e}"))?;
        Ok(topo)
    }

    pub fn dataset(&self) -> Result<Dataset> {
        match &self.dataset.manifest {
            Some(m) => load_manifest(m).with_context(|| format!("dataset.manifest: {}", m.display())),
            None => synth_generate(&self.dataset.synth).map_err(|e| anyhow!("dataset.synth: {e}")),
        }
    }

    /// Checks every field and referenced file without running anything.
    pub fn validate(&self) -> Result<()> {
        if let Some(m) = &self.dataset.manifest {
            if !m.is_file() {
                bail!("dataset.manifest: file not found: {}", m.display());
            }
        } else {
            self.dataset.synth.validate().map_err(|e| anyhow!("dataset.synth: {e}"))?;
        }
        self.topology()?;
        let reg = normalizers();
        for mode in &self.eval.normalization_compare {
            reg.get(mode).map_err(|e| anyhow!("eval.normalization_compare: {e}"))?;
        }
        self.experiment().validate().map_err(|e| anyhow!("invalid experiment: {e}"))?;
        Ok(())
    }
}
