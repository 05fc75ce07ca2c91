//! Run configuration: a flat key=value file, every field explicit, unknown
//! keys rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::digest::text_digest;
use crate::dpo::{RewardWeightMode, TrainConfig};
use crate::lang::validate::Limits;
use crate::preference::WeightMode;
use crate::runtime::planted::{CategoryRule, PlantedWorldSpec};
use crate::scoring::{Metric, MetricKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutorMode {
    Planted,
    Remote,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tasks_path: PathBuf,
    pub bank_path: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// validation:test split parts, e.g. (1, 4).
    pub split: (u32, u32),
    /// Workflows generated per task per iteration.
    pub k: usize,
    /// Maximum outer iterations.
    pub max_iterations: u32,
    /// Resampling cap for candidates that fail the static gate.
    pub resample_cap: u32,
    pub parallelism: usize,
    pub executor_mode: ExecutorMode,
    pub metric: Metric,
    pub planted: PlantedWorldSpec,
    /// Per-category fallback bank index used when resampling gives up.
    pub fallback_templates: BTreeMap<String, usize>,
    pub train: TrainConfig,
    pub limits: Limits,
    pub endpoint_url: String,
    pub model: String,
}

impl RunConfig {
    /// A planted-mode configuration with the documented defaults.
    pub fn planted_defaults(
        tasks_path: impl Into<PathBuf>,
        bank_path: impl Into<PathBuf>,
        output_dir: impl Into<PathBuf>,
        seed: u64,
    ) -> Self {
        RunConfig {
            tasks_path: tasks_path.into(),
            bank_path: bank_path.into(),
            output_dir: output_dir.into(),
            seed,
            split: (1, 4),
            k: 8,
            max_iterations: 3,
            resample_cap: 16,
            parallelism: 8,
            executor_mode: ExecutorMode::Planted,
            metric: Metric::new(MetricKind::ExactMatch, 3),
            planted: PlantedWorldSpec::adaptivity_world(0.0, seed),
            fallback_templates: BTreeMap::new(),
            train: TrainConfig { seed, ..TrainConfig::default() },
            limits: Limits::default(),
            endpoint_url: String::new(),
            model: String::new(),
        }
    }

    /// Canonical key=value rendering; its digest stamps checkpoints and
    /// preference files.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("tasks_path", self.tasks_path.display().to_string());
        kv("bank_path", self.bank_path.display().to_string());
        kv("output_dir", self.output_dir.display().to_string());
        kv("seed", self.seed.to_string());
        kv("split", format!("{}:{}", self.split.0, self.split.1));
        kv("k", self.k.to_string());
        kv("max_iterations", self.max_iterations.to_string());
        kv("resample_cap", self.resample_cap.to_string());
        kv("parallelism", self.parallelism.to_string());
        kv(
            "executor",
            match self.executor_mode {
                ExecutorMode::Planted => "planted".into(),
                ExecutorMode::Remote => "remote".into(),
            },
        );
        kv(
            "metric",
            match self.metric.kind {
                MetricKind::ExactMatch => "exact_match".into(),
                MetricKind::TokenF1 => "token_f1".into(),
            },
        );
        kv("repeats", self.metric.repeats.to_string());
        kv("noise_flip_prob", self.planted.noise_flip_prob.to_string());
        kv("planted_seed", self.planted.seed.to_string());
        for (category, rule) in &self.planted.rules {
            kv(&format!("rule.{category}"), rule.render());
        }
        for (category, index) in &self.fallback_templates {
            kv(&format!("fallback.{category}"), index.to_string());
        }
        kv("beta", self.train.beta.to_string());
        kv("eta", self.train.eta.to_string());
        kv("samples_per_iter", self.train.samples_per_iter.to_string());
        kv("batch_size", self.train.batch_size.to_string());
        kv(
            "reward_weight_mode",
            match self.train.reward_weight_mode {
                RewardWeightMode::Score => "score".into(),
                RewardWeightMode::Unit => "unit".into(),
            },
        );
        kv(
            "weight_mode",
            match self.train.weight_cfg.mode {
                WeightMode::Power => "power".into(),
                WeightMode::Uniform => "uniform".into(),
            },
        );
        kv("alpha", self.train.weight_cfg.alpha.to_string());
        kv("max_epochs_inner", self.train.max_epochs_inner.to_string());
        kv("convergence_eps", self.train.convergence_eps.to_string());
        kv("refresh_reference", self.train.refresh_reference.to_string());
        kv("early_stop", self.train.early_stop.to_string());
        kv("max_loop_bound", self.limits.max_loop_bound.to_string());
        kv("max_static_calls", self.limits.max_static_calls.to_string());
        kv("wall_clock_timeout_secs", self.limits.wall_clock_timeout.as_secs().to_string());
        if self.executor_mode == ExecutorMode::Remote {
            kv("endpoint_url", self.endpoint_url.clone());
            kv("model", self.model.clone());
        }
        out
    }

    pub fn digest(&self) -> String {
        text_digest(&self.render())
    }

    /// Invariants that hold for every accepted configuration.
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.k < 2 {
            return Err(ConfigError::Invariant("k must be at least 2 (pairs need two candidates)".into()));
        }
        if self.max_iterations < 1 {
            return Err(ConfigError::Invariant("max_iterations must be at least 1".into()));
        }
        if self.resample_cap < 1 {
            return Err(ConfigError::Invariant("resample_cap must be at least 1".into()));
        }
        if self.split.0 == 0 || self.split.1 == 0 {
            return Err(ConfigError::Invariant("split parts must both be positive".into()));
        }
        if self.parallelism < 1 {
            return Err(ConfigError::Invariant("parallelism must be at least 1".into()));
        }
        if self.metric.repeats < 1 {
            return Err(ConfigError::Invariant("repeats must be at least 1".into()));
        }
        if !(self.train.beta > 0.0) {
            return Err(ConfigError::Invariant("beta must be positive".into()));
        }
        if self.train.eta < 0.0 {
            return Err(ConfigError::Invariant("eta must be nonnegative".into()));
        }
        if self.train.samples_per_iter < 1 {
            return Err(ConfigError::Invariant("samples_per_iter must be at least 1".into()));
        }
        if !(0.0..0.5).contains(&self.planted.noise_flip_prob) {
            return Err(ConfigError::Invariant("noise_flip_prob must lie in [0, 0.5)".into()));
        }
        if self.train.weight_cfg.alpha < 0.0 {
            return Err(ConfigError::Invariant("alpha must be nonnegative".into()));
        }
        if self.executor_mode == ExecutorMode::Remote
            && (self.endpoint_url.is_empty() || self.model.is_empty())
        {
            return Err(ConfigError::Invariant(
                "remote mode requires endpoint_url and model".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad config line {line}: `{text}` (expected key = value)")]
    Syntax { line: usize, text: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {detail}")]
    BadValue { key: String, detail: String },
    #[error("missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("config invariant violated: {0}")]
    Invariant(String),
}

fn parse_kv(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: idx + 1, text: raw.to_string() });
        };
        out.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn bad(key: &str, detail: impl Into<String>) -> ConfigError {
    ConfigError::BadValue { key: key.to_string(), detail: detail.into() }
}

/// Parse a config document. Every field of the run configuration has a key;
/// unknown keys are errors.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut tasks_path = None;
    let mut bank_path = None;
    let mut output_dir = None;
    let mut cfg = RunConfig::planted_defaults("", "", "", 0);
    let mut planted_seed_set = false;
    cfg.planted.rules.clear();
    let mut rules_set = false;

    for (_, key, value) in parse_kv(text)? {
        let v = value.as_str();
        match key.as_str() {
            "tasks_path" => tasks_path = Some(PathBuf::from(v)),
            "bank_path" => bank_path = Some(PathBuf::from(v)),
            "output_dir" => output_dir = Some(PathBuf::from(v)),
            "seed" => cfg.seed = v.parse().map_err(|_| bad(&key, "expected unsigned integer"))?,
            "split" => {
                let (a, b) = v
                    .split_once(':')
                    .ok_or_else(|| bad(&key, "expected validation:test, e.g. 1:4"))?;
                cfg.split = (
                    a.trim().parse().map_err(|_| bad(&key, "bad validation part"))?,
                    b.trim().parse().map_err(|_| bad(&key, "bad test part"))?,
                );
            }
            "k" => cfg.k = v.parse().map_err(|_| bad(&key, "expected integer"))?,
            "max_iterations" => {
                cfg.max_iterations = v.parse().map_err(|_| bad(&key, "expected integer"))?
            }
            "resample_cap" => {
                cfg.resample_cap = v.parse().map_err(|_| bad(&key, "expected integer"))?
            }
            "parallelism" => {
                cfg.parallelism = v.parse().map_err(|_| bad(&key, "expected integer"))?
            }
            "executor" => {
                cfg.executor_mode = match v {
                    "planted" => ExecutorMode::Planted,
                    "remote" => ExecutorMode::Remote,
                    other => return Err(bad(&key, format!("unknown executor `{other}`"))),
                }
            }
            "metric" => {
                cfg.metric.kind = match v {
                    "exact_match" => MetricKind::ExactMatch,
                    "token_f1" => MetricKind::TokenF1,
                    other => return Err(bad(&key, format!("unknown metric `{other}`"))),
                }
            }
            "repeats" => {
                cfg.metric.repeats = v.parse().map_err(|_| bad(&key, "expected integer"))?
            }
            "noise_flip_prob" => {
                cfg.planted.noise_flip_prob =
                    v.parse().map_err(|_| bad(&key, "expected real"))?
            }
            "planted_seed" => {
                cfg.planted.seed = v.parse().map_err(|_| bad(&key, "expected integer"))?;
                planted_seed_set = true;
            }
            "beta" => cfg.train.beta = v.parse().map_err(|_| bad(&key, "expected real"))?,
            "eta" => cfg.train.eta = v.parse().map_err(|_| bad(&key, "expected real"))?,
            "samples_per_iter" => {
                cfg.train.samples_per_iter =
                    v.parse().map_err(|_| bad(&key, "expected integer"))?
            }
            "batch_size" => {
                cfg.train.batch_size = v.parse().map_err(|_| bad(&key, "expected integer"))?
            }
            "reward_weight_mode" => {
                cfg.train.reward_weight_mode = match v {
                    "score" => RewardWeightMode::Score,
                    "unit" => RewardWeightMode::Unit,
                    other => return Err(bad(&key, format!("unknown mode `{other}`"))),
                }
            }
            "weight_mode" => {
                cfg.train.weight_cfg.mode = match v {
                    "power" => WeightMode::Power,
                    "uniform" => WeightMode::Uniform,
                    other => return Err(bad(&key, format!("unknown mode `{other}`"))),
                }
            }
            "alpha" => {
                cfg.train.weight_cfg.alpha = v.parse().map_err(|_| bad(&key, "expected real"))?
            }
            "max_epochs_inner" => {
                cfg.train.max_epochs_inner =
                    v.parse().map_err(|_| bad(&key, "expected integer"))?
            }
            "convergence_eps" => {
                cfg.train.convergence_eps = v.parse().map_err(|_| bad(&key, "expected real"))?
            }
            "refresh_reference" => {
                cfg.train.refresh_reference =
                    v.parse().map_err(|_| bad(&key, "expected true/false"))?
            }
            "early_stop" => {
                cfg.train.early_stop = v.parse().map_err(|_| bad(&key, "expected true/false"))?
            }
            "max_loop_bound" => {
                cfg.limits.max_loop_bound = v.parse().map_err(|_| bad(&key, "expected integer"))?
            }
            "max_static_calls" => {
                cfg.limits.max_static_calls =
                    v.parse().map_err(|_| bad(&key, "expected integer"))?
            }
            "wall_clock_timeout_secs" => {
                let secs: u64 = v.parse().map_err(|_| bad(&key, "expected integer seconds"))?;
                cfg.limits.wall_clock_timeout = std::time::Duration::from_secs(secs);
            }
            "endpoint_url" => cfg.endpoint_url = v.to_string(),
            "model" => cfg.model = v.to_string(),
            _ => {
                if let Some(category) = key.strip_prefix("rule.") {
                    let rule = CategoryRule::parse(v).map_err(|detail| bad(&key, detail))?;
                    cfg.planted.rules.insert(category.to_string(), rule);
                    rules_set = true;
                } else if let Some(category) = key.strip_prefix("fallback.") {
                    let index: usize =
                        v.parse().map_err(|_| bad(&key, "expected bank index"))?;
                    cfg.fallback_templates.insert(category.to_string(), index);
                } else {
                    return Err(ConfigError::UnknownKey(key));
                }
            }
        }
    }

    cfg.tasks_path = tasks_path.ok_or(ConfigError::MissingKey("tasks_path"))?;
    cfg.bank_path = bank_path.ok_or(ConfigError::MissingKey("bank_path"))?;
    cfg.output_dir = output_dir.ok_or(ConfigError::MissingKey("output_dir"))?;
    if !planted_seed_set {
        cfg.planted.seed = cfg.seed;
    }
    if !rules_set {
        cfg.planted.rules = PlantedWorldSpec::adaptivity_world(0.0, 0).rules;
    }
    cfg.train.seed = cfg.seed;
    cfg.check()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}
