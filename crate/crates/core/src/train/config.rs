use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domains::CircleMode;
use crate::error::{Error, Result};
use crate::lowdisc::Provenance;
use crate::net::Activation;
use crate::problems::ProblemSpec;

/// One training experiment, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Stem of every artifact the run writes.
    pub name: String,
    pub problem: ProblemSpec,
    pub sampler: SamplerConfig,
    pub boundary: BoundaryConfig,
    pub test: TestSetConfig,
    pub network: NetworkConfig,
    /// Seed of the Xavier initialisation.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub adam: AdamConfig,
    #[serde(default)]
    pub lbfgs: LbfgsConfig,
    #[serde(default)]
    pub loss: LossConfig,
    /// Multiply the network by `prod x_k (1 - x_k)` so `u = 0` on the boundary.
    #[serde(default)]
    pub enforce_dirichlet: bool,
    #[serde(default)]
    pub data: Option<DataConfig>,
    /// Metrics are recorded every `log_every` epochs and at the last epoch.
    #[serde(default = "default_log_every")]
    pub log_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub kind: Provenance,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Explicit GLP generating vector `h`; overrides the lookup.
    #[serde(default)]
    pub vector: Option<Vec<u64>>,
    /// Vector cache consulted for GLP sets that are not Fibonacci lattices.
    /// Relative paths are resolved against the config file's directory.
    #[serde(default)]
    pub vector_cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase", deny_unknown_fields)]
pub enum BoundaryConfig {
    /// No boundary batch; only valid with `enforce_dirichlet`.
    None,
    /// Uniform random points on each face of the box domain.
    Box {
        per_face: usize,
        #[serde(default = "default_seed")]
        seed: u64,
    },
    /// Points on the unit circle.
    Circle {
        n: usize,
        #[serde(default)]
        mode: CircleMode,
        #[serde(default = "default_seed")]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TestSetConfig {
    /// Tensor grid including the box edges (2-d only); grid nodes outside a
    /// disk domain are dropped.
    Grid { per_axis: usize },
    /// Uniform random points in the domain.
    Random {
        n: usize,
        #[serde(default = "default_test_seed")]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub width: usize,
    pub depth: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub epochs: usize,
    #[serde(default = "default_adam_lr")]
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbfgsConfig {
    #[serde(default)]
    pub epochs: usize,
    #[serde(default = "default_lbfgs_lr")]
    pub lr: f64,
    #[serde(default = "default_history")]
    pub history: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self { epochs: 0, lr: default_lbfgs_lr(), history: default_history() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    #[serde(default = "one")]
    pub alpha1: f64,
    #[serde(default = "one")]
    pub alpha2: f64,
    /// Scale the interior term by the domain volume.
    #[serde(default = "yes")]
    pub volume_factor: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { alpha1: 1.0, alpha2: 1.0, volume_factor: true }
    }
}

/// Noisy observations of the exact solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub n_obs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Relative standard deviation of multiplicative Gaussian noise.
    #[serde(default)]
    pub noise_scale: f64,
}

fn default_seed() -> u64 {
    100
}
fn default_test_seed() -> u64 {
    2024
}
fn default_log_every() -> usize {
    100
}
fn default_activation() -> Activation {
    Activation::Tanh
}
fn default_adam_lr() -> f64 {
    1e-4
}
fn default_lbfgs_lr() -> f64 {
    1.0
}
fn default_history() -> usize {
    50
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

impl ExperimentConfig {
    /// Parses JSON; errors carry the line and column of the offending field.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves `vector_cache` against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&fs::read_to_string(path)?, path)?;
        if let Some(cache) = &cfg.sampler.vector_cache {
            if cache.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                cfg.sampler.vector_cache = Some(base.join(cache));
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn total_epochs(&self) -> usize {
        self.adam.epochs + self.lbfgs.epochs
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("name `{}` must be a non-empty file stem", self.name));
        }
        if self.sampler.n == 0 {
            return bad("sampler.n must be at least 1".into());
        }
        if self.sampler.kind == Provenance::Mapped {
            return bad("sampler.kind `mapped` is not a sampler".into());
        }
        if self.network.width == 0 || self.network.depth == 0 {
            return bad("network width and depth must be positive".into());
        }
        if !(self.adam.lr > 0.0) || !(self.lbfgs.lr > 0.0) || self.lbfgs.history == 0 {
            return bad("learning rates and lbfgs.history must be positive".into());
        }
        let LossConfig { alpha1, alpha2, .. } = self.loss;
        if !(alpha1 >= 0.0 && alpha2 >= 0.0 && alpha1.is_finite() && alpha2.is_finite()) {
            return bad("loss weights must be finite and non-negative".into());
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1".into());
        }
        match self.boundary {
            BoundaryConfig::None if !self.enforce_dirichlet => {
                return bad("boundary scheme `none` requires enforce_dirichlet".into())
            }
            BoundaryConfig::Box { per_face: 0, .. } | BoundaryConfig::Circle { n: 0, .. } => {
                return bad("boundary batch must hold at least one point".into())
            }
            _ => {}
        }
        match self.test {
            TestSetConfig::Grid { per_axis } if per_axis < 2 => return bad("test grid needs per_axis >= 2".into()),
            TestSetConfig::Random { n: 0, .. } => return bad("test set must hold at least one point".into()),
            _ => {}
        }
        if let Some(d) = &self.data {
            if d.n_obs == 0 || !(d.noise_scale >= 0.0) {
                return bad("data needs n_obs >= 1 and noise_scale >= 0".into());
            }
        }
        Ok(())
    }
}
