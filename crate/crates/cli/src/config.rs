//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use splinelc::learn::{config_hash, Loss, TrainConfig};
use splinelc::Activation;

use crate::input_error;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds initialisation, shuffling, probes, attacks and label noise.
    #[serde(default)]
    pub seed: u64,
    /// Where the run directory goes. Not part of the config hash.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    pub arch: ArchSpec,
    pub data: DataSpec,
    #[serde(default)]
    pub train: TrainConfig,
    pub probe: Option<ProbeSpec>,
    pub attack: Option<AttackSpec>,
    pub slice: Option<SliceSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationName {
    Relu,
    LeakyRelu,
    Gelu,
    Identity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    /// Hidden layer widths; the output layer is added to fit the data.
    pub hidden: Vec<usize>,
    #[serde(default = "relu")]
    pub activation: ActivationName,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
    #[serde(default = "one")]
    pub init_scale: f64,
}

fn relu() -> ActivationName {
    ActivationName::Relu
}

fn default_slope() -> f64 {
    0.01
}

fn one() -> f64 {
    1.0
}

impl ArchSpec {
    pub fn activation(&self) -> Activation {
        match self.activation {
            ActivationName::Relu => Activation::Relu,
            ActivationName::LeakyRelu => Activation::leaky(self.leaky_slope),
            ActivationName::Gelu => Activation::Gelu,
            ActivationName::Identity => Activation::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Mnist,
    Piecewise,
    ModularAddition,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub source: DataSource,
    /// MNIST directory holding the four IDX files (optionally `.gz`).
    #[serde(default = "mnist_dir")]
    pub dir: PathBuf,
    pub train_size: Option<usize>,
    pub test_size: Option<usize>,
    /// Keep only these digit classes.
    pub classes: Option<Vec<usize>>,
    /// Fraction of training labels replaced by random classes.
    #[serde(default)]
    pub label_noise: f64,
    #[serde(default = "modulus")]
    pub modulus: usize,
}

fn mnist_dir() -> PathBuf {
    PathBuf::from("data/mnist")
}

fn modulus() -> usize {
    13
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    #[serde(default = "probe_p")]
    pub p: usize,
    #[serde(default = "probe_r")]
    pub r: f64,
    /// Probe centres per point class.
    #[serde(default = "probe_points")]
    pub points: usize,
    #[serde(default)]
    pub layerwise: bool,
}

fn probe_p() -> usize {
    25
}

fn probe_r() -> f64 {
    0.005
}

fn probe_points() -> usize {
    300
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSpec {
    pub epsilons: Vec<f64>,
    #[serde(default = "alpha")]
    pub alpha: f64,
    #[serde(default = "attack_steps")]
    pub steps: usize,
    /// Test points attacked at each checkpoint.
    #[serde(default = "attack_points")]
    pub points: usize,
    #[serde(default = "yes")]
    pub random_start: bool,
    #[serde(default = "unit_range")]
    pub data_range: (f64, f64),
}

fn alpha() -> f64 {
    0.0156
}

fn attack_steps() -> usize {
    100
}

fn attack_points() -> usize {
    500
}

fn yes() -> bool {
    true
}

fn unit_range() -> (f64, f64) {
    (0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorName {
    Random,
    SlopeNorm,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceSpec {
    /// Indices of three training points spanning the slice.
    pub anchors: Option<[usize; 3]>,
    /// `[u_min, u_max, v_min, v_max]`; for 2-D inputs without anchors this
    /// is the input plane itself.
    pub bounds: Option<[f64; 4]>,
    #[serde(default = "margin")]
    pub margin: f64,
    /// Checkpoint steps to snapshot; all checkpoints when absent.
    pub at: Option<Vec<u64>>,
    #[serde(default = "random_color")]
    pub color: ColorName,
}

fn margin() -> f64 {
    0.1
}

fn random_color() -> ColorName {
    ColorName::Random
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| splinelc::Error::File {
            path: path.to_path_buf(),
            source: e,
        })?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    /// Checks that do not need the data loaded.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| input_error(format!("invalid {field}: {why}"));
        if self.arch.hidden.contains(&0) {
            return Err(bad("arch.hidden", "widths must be positive".into()));
        }
        self.arch.activation().validate()?;
        if !(self.arch.init_scale.is_finite() && self.arch.init_scale > 0.0) {
            return Err(bad("arch.init_scale", format!("{} must be positive", self.arch.init_scale)));
        }
        if !(0.0..=1.0).contains(&self.data.label_noise) {
            return Err(bad("data.label_noise", format!("{} outside [0, 1]", self.data.label_noise)));
        }
        if self.data.source == DataSource::Piecewise && self.data.label_noise > 0.0 {
            return Err(bad("data.label_noise", "regression data has no labels".into()));
        }
        match (self.data.source, self.train.loss) {
            (DataSource::Piecewise, Loss::CrossEntropy) => {
                return Err(bad("train.loss", "piecewise regression needs \"mse\"".into()))
            }
            (DataSource::Mnist | DataSource::ModularAddition, Loss::Mse) => {
                return Err(bad("train.loss", "classification data needs \"cross_entropy\"".into()))
            }
            _ => {}
        }
        if self.data.source == DataSource::ModularAddition && self.data.modulus < 2 {
            return Err(bad("data.modulus", "must be at least 2".into()));
        }
        if let Some(a) = &self.attack {
            if self.data.source == DataSource::Piecewise {
                return Err(bad("attack", "attacks need class labels".into()));
            }
            if a.epsilons.is_empty() {
                return Err(bad("attack.epsilons", "list is empty".into()));
            }
            if a.points == 0 {
                return Err(bad("attack.points", "must be positive".into()));
            }
        }
        if let Some(p) = &self.probe {
            if p.points < 2 {
                return Err(bad("probe.points", "need at least 2 probe centres per class".into()));
            }
        }
        if let Some(s) = &self.slice {
            if s.anchors.is_none() && s.bounds.is_none() {
                return Err(bad("slice", "set `anchors` or `bounds`".into()));
            }
            if self.arch.activation == ActivationName::Gelu {
                return Err(splinelc::Error::UnsupportedActivation {
                    layer: 0,
                    activation: "gelu".into(),
                    reason: "slices need piecewise-linear activations",
                }
                .into());
            }
        }
        Ok(())
    }

    /// Hash of everything that determines the run's results.
    pub fn hash(&self) -> String {
        config_hash(self)
    }

    /// Resolved config as TOML, with the provenance line on top.
    pub fn to_toml(&self) -> Result<String> {
        let body = toml::to_string(self)?;
        Ok(format!("# {}\n{body}", crate::output::provenance(&self.hash())))
    }
}
