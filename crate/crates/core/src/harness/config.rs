//! Benchmark configuration: data source, scenario grid, per-model training
//! settings. Deserializable from TOML; every field has a default so a config
//! file only needs the overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{self, PriceMatrix};

/// Return-level preset A: the corrected printed levels.
pub const PRESET_A: [f64; 6] = [0.010, 0.015, 0.020, 0.025, 0.030, 0.035];

/// Which generative models to benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Qcbm,
    Rbm,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Qcbm => write!(f, "qcbm"),
            ModelKind::Rbm => write!(f, "rbm"),
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qcbm" => Ok(ModelKind::Qcbm),
            "rbm" => Ok(ModelKind::Rbm),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

/// Return levels: a named preset or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReturnLevels {
    Preset(String),
    Explicit(Vec<f64>),
}

impl ReturnLevels {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        match self {
            ReturnLevels::Preset(name) => match name.to_ascii_lowercase().as_str() {
                "preset-a" | "a" => Ok(PRESET_A.to_vec()),
                "preset-b" | "b" => Ok(PRESET_A.iter().map(|v| v * 0.1).collect()),
                other => Err(Error::Config(format!(
                    "unknown return-level preset {other:?} (use preset-a or preset-b)"
                ))),
            },
            ReturnLevels::Explicit(levels) => {
                if levels.is_empty() {
                    return Err(Error::Config("return levels must be non-empty".into()));
                }
                Ok(levels.clone())
            }
        }
    }
}

/// Cardinality rule per problem size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KappaRule {
    Named(String),
    Fixed(usize),
}

impl KappaRule {
    pub fn resolve(&self, n: usize) -> Result<usize> {
        match self {
            KappaRule::Named(name) if name.eq_ignore_ascii_case("half") => {
                if !n.is_multiple_of(2) {
                    return Err(Error::Config(format!(
                        "kappa rule 'half' needs even sizes, got {n}"
                    )));
                }
                Ok(n / 2)
            }
            KappaRule::Named(other) => {
                Err(Error::Config(format!("unknown kappa rule {other:?}")))
            }
            KappaRule::Fixed(k) => {
                if *k == 0 || *k > n {
                    return Err(Error::Config(format!("kappa {k} invalid for n = {n}")));
                }
                Ok(*k)
            }
        }
    }
}

/// Synthetic price generator settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub assets: usize,
    pub days: usize,
    pub seed: u64,
    pub drift: (f64, f64),
    pub vol: (f64, f64),
}

impl Default for SynthSpec {
    fn default() -> Self {
        // Daily drift/vol ranges sized so the preset-b return levels are
        // attainable for most subsets.
        Self {
            assets: 60,
            days: 45,
            seed: 1,
            drift: (-0.002, 0.005),
            vol: (0.005, 0.03),
        }
    }
}

/// Price data source: a CSV extract or the synthetic generator.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub csv: Option<PathBuf>,
    pub synthetic: Option<SynthSpec>,
}

impl DataConfig {
    pub fn load(&self) -> Result<PriceMatrix> {
        match (&self.csv, &self.synthetic) {
            (Some(path), None) => market_data::load_prices(path),
            (None, Some(s)) => market_data::synth_prices(s.assets, s.days, s.seed, s.drift, s.vol),
            (None, None) => {
                let s = SynthSpec::default();
                market_data::synth_prices(s.assets, s.days, s.seed, s.drift, s.vol)
            }
            (Some(_), Some(_)) => Err(Error::Config(
                "configure either a csv path or a synthetic source, not both".into(),
            )),
        }
    }
}

/// QCBM training budget and initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QcbmConfig {
    /// Evaluation budget; `None` means 20 d^2 for d = n(n+3)/2.
    pub budget: Option<usize>,
    pub init_step: f64,
}

impl Default for QcbmConfig {
    fn default() -> Self {
        Self {
            budget: None,
            init_step: 0.3,
        }
    }
}

/// RBM training settings used by the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbmConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub n_chains: usize,
    /// Samples drawn from the exact target for training.
    pub train_samples: usize,
    /// Train on exact target expectations instead of drawn samples
    /// (one update per epoch).
    pub exact_expectations: bool,
}

impl Default for RbmConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            batch_size: 64,
            epochs: 200,
            n_chains: 64,
            train_samples: 10_000,
            exact_expectations: false,
        }
    }
}

/// Full benchmark configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub kappa: KappaRule,
    pub return_levels: ReturnLevels,
    pub subsets_per_size: usize,
    pub repetitions: usize,
    pub models: Vec<ModelKind>,
    pub k_gibbs: Vec<usize>,
    pub eps: f64,
    /// Per-asset weight bounds in each subset problem.
    pub bounds: (f64, f64),
    pub data: DataConfig,
    pub qcbm: QcbmConfig,
    pub rbm: RbmConfig,
    /// Bootstrap resamples used by summaries.
    pub resamples: usize,
    /// Cap on stored trace points per run record.
    pub trace_points: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            sizes: vec![4, 6, 8, 10],
            kappa: KappaRule::Named("half".into()),
            return_levels: ReturnLevels::Preset("preset-b".into()),
            subsets_per_size: 5,
            repetitions: 11,
            models: vec![ModelKind::Qcbm, ModelKind::Rbm],
            k_gibbs: vec![1],
            eps: 1e-8,
            bounds: (0.0, 1.0),
            data: DataConfig::default(),
            qcbm: QcbmConfig::default(),
            rbm: RbmConfig::default(),
            resamples: 10_000,
            trace_points: 160,
        }
    }
}

impl BenchConfig {
    /// Appendix-style sweep: both models with the Gibbs-depth ladder.
    pub fn k_sweep_preset(mut self) -> Self {
        self.k_gibbs = vec![1, 10, 100];
        self
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: BenchConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad config file: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::Config("sizes must be non-empty".into()));
        }
        for &n in &self.sizes {
            if !(1..=20).contains(&n) {
                return Err(Error::Config(format!("size {n} out of supported range")));
            }
            self.kappa.resolve(n)?;
        }
        self.return_levels.resolve()?;
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.subsets_per_size == 0 {
            return Err(Error::Config("subsets_per_size must be at least 1".into()));
        }
        if self.models.is_empty() {
            return Err(Error::Config("model list must be non-empty".into()));
        }
        if self.k_gibbs.is_empty() || self.k_gibbs.contains(&0) {
            return Err(Error::Config("k_gibbs values must be positive".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("eps must be positive".into()));
        }
        if self.bounds.0 > self.bounds.1 {
            return Err(Error::Config("bounds lower exceeds upper".into()));
        }
        if self.rbm.epochs == 0 || self.rbm.batch_size == 0 || self.rbm.n_chains == 0 {
            return Err(Error::Config("rbm settings must be positive".into()));
        }
        if self.resamples == 0 {
            return Err(Error::Config("resamples must be positive".into()));
        }
        Ok(())
    }
}
