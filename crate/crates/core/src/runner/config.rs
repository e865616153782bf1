//! Flat `key = value` experiment files.
//!
//! ```text
//! # comment
//! run.seeds = 1, 2, 3
//! run.out_dir = out/infinity
//!
//! [dataset]
//! shape = infinity_symbol
//! n_points = 20
//!
//! [trainer]
//! objective = rs-imle
//! epsilon = 0.2
//! epsilon_units = diameter
//! ```
//!
//! A `[section]` line prefixes the keys that follow it with `section.`;
//! fully dotted keys work anywhere. Later assignments override earlier ones.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::datasets::{ToyDatasetSpec, ToyShape};
use crate::error::{Error, Result};
use crate::net::Activation;
use crate::nn_index::{FilterSpace, ProjectionSpec};
use crate::trainer::{DegeneratePolicy, Objective, TrainerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonUnits {
    Absolute,
    /// Multiples of the dataset diameter.
    Diameter,
}

impl EpsilonUnits {
    fn as_str(self) -> &'static str {
        match self {
            EpsilonUnits::Absolute => "absolute",
            EpsilonUnits::Diameter => "diameter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 2,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
        }
    }
}

impl ModelConfig {
    pub fn layer_dims(&self, data_dim: usize) -> Vec<usize> {
        let mut dims = vec![self.latent_dim];
        dims.extend(&self.hidden);
        dims.push(data_dim);
        dims
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsConfig {
    pub eval_samples: usize,
    pub pr_k: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            eval_samples: 1000,
            pr_k: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: ToyDatasetSpec,
    pub model: ModelConfig,
    pub trainer: TrainerConfig,
    pub epsilon_units: EpsilonUnits,
    /// Input dimension of the filter-space projection; `0` filters in raw data space.
    pub projection_dim: usize,
    pub projection_seed: u64,
    pub metrics: MetricsConfig,
    pub sweep: Option<Vec<f64>>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Print a progress line every this many epochs (0 = silent).
    pub log_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: ToyDatasetSpec::default(),
            model: ModelConfig::default(),
            trainer: TrainerConfig::default(),
            epsilon_units: EpsilonUnits::Absolute,
            projection_dim: 0,
            projection_seed: 0,
            metrics: MetricsConfig::default(),
            sweep: None,
            seeds: vec![0],
            out_dir: PathBuf::from("out"),
            log_every: 0,
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key} = {value}: expected {what}"))
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, what))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s, what))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "a boolean")),
    }
}

fn join<T: std::fmt::Debug>(v: &[T]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let cfg = Self::from_file_unchecked(path.as_ref())?;
        cfg.validate().map_err(|e| in_file(path.as_ref(), e))?;
        Ok(cfg)
    }

    /// Reads a file without the cross-field checks of [`ExperimentConfig::validate`].
    /// Run directories of epsilon sweeps echo RS-IMLE with `epsilon = 0`, which
    /// only sweeps may run.
    pub fn from_file_unchecked(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_unchecked(&text).map_err(|e| in_file(path, e))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg = Self::parse_unchecked(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn parse_unchecked(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1))
            })?;
            let key = key.trim();
            let full = if section.is_empty() || key.contains('.') {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            cfg.set(&full, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    /// Assigns one dotted key. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.trainer;
        match key {
            "dataset.shape" => self.dataset.shape = value.parse()?,
            "dataset.n_points" => self.dataset.n_points = parse_num(key, value, "a count")?,
            "dataset.noise_sigma" => self.dataset.noise_sigma = parse_num(key, value, "a real")?,
            "dataset.seed" => self.dataset.seed = parse_num(key, value, "an integer")?,
            "dataset.dim" => self.dataset.dim = parse_num(key, value, "a count")?,
            "model.latent_dim" => self.model.latent_dim = parse_num(key, value, "a count")?,
            "model.hidden" => self.model.hidden = parse_list(key, value, "counts")?,
            "model.activation" => self.model.activation = value.parse()?,
            "trainer.objective" => t.objective = value.parse()?,
            "trainer.epsilon" => t.epsilon = parse_num(key, value, "a real")?,
            "trainer.epsilon_units" => {
                self.epsilon_units = match value {
                    "absolute" => EpsilonUnits::Absolute,
                    "diameter" => EpsilonUnits::Diameter,
                    _ => return Err(bad(key, value, "absolute or diameter")),
                }
            }
            "trainer.sample_factor" => t.sample_factor = parse_num(key, value, "a count")?,
            "trainer.epochs" => t.epochs = parse_num(key, value, "a count")?,
            "trainer.inner_steps" => t.inner_steps = parse_num(key, value, "a count")?,
            "trainer.batch_size" => t.batch_size = parse_num(key, value, "a count")?,
            "trainer.lr" => t.lr = parse_num(key, value, "a real")?,
            "trainer.max_rounds" => t.max_rounds = parse_num(key, value, "a count")?,
            "trainer.on_degenerate" => t.on_degenerate = value.parse::<DegeneratePolicy>()?,
            "trainer.projection_dim" => self.projection_dim = parse_num(key, value, "a count")?,
            "trainer.projection_seed" => self.projection_seed = parse_num(key, value, "an integer")?,
            "metrics.eval_samples" => self.metrics.eval_samples = parse_num(key, value, "a count")?,
            "metrics.pr_k" => self.metrics.pr_k = parse_num(key, value, "a count")?,
            "sweep.epsilons" | "sweep" => {
                let v: Vec<f64> = parse_list(key, value, "reals")?;
                self.sweep = (!v.is_empty()).then_some(v);
            }
            "run.seeds" | "seeds" => self.seeds = parse_list(key, value, "integers")?,
            "run.out_dir" | "out_dir" => self.out_dir = PathBuf::from(value),
            "run.log_every" => self.log_every = parse_num(key, value, "a count")?,
            "run.record_latents" => t.record_latents = parse_bool(key, value)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if let Some(sweep) = &self.sweep {
            if let Some(e) = sweep.iter().find(|e| !(**e >= 0.0) || !e.is_finite()) {
                return Err(Error::Config(format!("sweep epsilons must be >= 0, got {e}")));
            }
        }
        if let ToyShape::CustomCsv(_) = self.dataset.shape {
        } else if self.dataset.n_points == 0 {
            return Err(Error::Config("dataset.n_points must be >= 1".into()));
        }
        if !matches!(self.dataset.shape, ToyShape::CustomCsv(_))
            && self.metrics.eval_samples < self.dataset.n_points
        {
            return Err(Error::Config(format!(
                "metrics.eval_samples ({}) must be at least the dataset size ({})",
                self.metrics.eval_samples, self.dataset.n_points
            )));
        }
        if self.model.latent_dim == 0 || self.model.hidden.contains(&0) {
            return Err(Error::Config("model dims must be positive".into()));
        }
        if self.sweep.is_none() {
            self.trainer.validate()?;
        }
        Ok(())
    }

    /// Absolute epsilon for a value in the configured units.
    pub fn resolve_epsilon(&self, epsilon: f64, diameter: f64) -> f64 {
        match self.epsilon_units {
            EpsilonUnits::Absolute => epsilon,
            EpsilonUnits::Diameter => epsilon * diameter,
        }
    }

    pub fn filter_space(&self, data_dim: usize) -> Result<FilterSpace> {
        if self.projection_dim == 0 {
            Ok(FilterSpace::Raw)
        } else {
            Ok(FilterSpace::Projected(ProjectionSpec::new(
                data_dim,
                self.projection_dim,
                self.projection_seed,
            )?))
        }
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_text(&self) -> String {
        let t = &self.trainer;
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "seeds = {}", join(&self.seeds));
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(s, "log_every = {}", self.log_every);
        let _ = writeln!(s, "record_latents = {}", t.record_latents);
        let _ = writeln!(s, "\n[dataset]");
        let _ = writeln!(s, "shape = {}", self.dataset.shape.name());
        let _ = writeln!(s, "n_points = {}", self.dataset.n_points);
        let _ = writeln!(s, "noise_sigma = {:?}", self.dataset.noise_sigma);
        let _ = writeln!(s, "seed = {}", self.dataset.seed);
        let _ = writeln!(s, "dim = {}", self.dataset.dim);
        let _ = writeln!(s, "\n[model]");
        let _ = writeln!(s, "latent_dim = {}", self.model.latent_dim);
        let _ = writeln!(s, "hidden = {}", join(&self.model.hidden));
        let activation = match self.model.activation {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        };
        let _ = writeln!(s, "activation = {activation}");
        let _ = writeln!(s, "\n[trainer]");
        let _ = writeln!(s, "objective = {}", t.objective);
        let _ = writeln!(s, "epsilon = {:?}", t.epsilon);
        let _ = writeln!(s, "epsilon_units = {}", self.epsilon_units.as_str());
        let _ = writeln!(s, "sample_factor = {}", t.sample_factor);
        let _ = writeln!(s, "epochs = {}", t.epochs);
        let _ = writeln!(s, "inner_steps = {}", t.inner_steps);
        let _ = writeln!(s, "batch_size = {}", t.batch_size);
        let _ = writeln!(s, "lr = {:?}", t.lr);
        let _ = writeln!(s, "max_rounds = {}", t.max_rounds);
        let _ = writeln!(s, "on_degenerate = {}", t.on_degenerate.as_str());
        let _ = writeln!(s, "projection_dim = {}", self.projection_dim);
        let _ = writeln!(s, "projection_seed = {}", self.projection_seed);
        let _ = writeln!(s, "\n[metrics]");
        let _ = writeln!(s, "eval_samples = {}", self.metrics.eval_samples);
        let _ = writeln!(s, "pr_k = {}", self.metrics.pr_k);
        if let Some(sweep) = &self.sweep {
            let _ = writeln!(s, "\n[sweep]");
            let _ = writeln!(s, "epsilons = {}", join(sweep));
        }
        s
    }

    pub fn objective(&self) -> Objective {
        self.trainer.objective
    }
}
