//! Preference data: score-ordered pairs per task and the gap-weighted
//! sampling distribution over the aggregated dataset.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

use crate::policy::FeatureVector;
use crate::scoring::Score;

/// One evaluated candidate: the workflow identity plus its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub task_id: String,
    pub bank_index: usize,
    pub workflow_digest: String,
    pub score: Score,
}

/// A same-task ordered pair with strictly separated scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub task_id: String,
    pub features: FeatureVector,
    pub winner_index: usize,
    pub loser_index: usize,
    pub s_w: f64,
    pub s_l: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum PreferenceError {
    #[error("pair requires s_w > s_l, got s_w={s_w} s_l={s_l}")]
    Domain { s_w: f64, s_l: f64 },
    #[error("scores must lie in [0,1], got {0}")]
    ScoreRange(f64),
    #[error("preference dataset is empty")]
    EmptyDataset,
    #[error("total sampling mass is zero")]
    ZeroMass,
}

impl PreferencePair {
    pub fn new(
        task_id: String,
        features: FeatureVector,
        winner_index: usize,
        loser_index: usize,
        s_w: f64,
        s_l: f64,
    ) -> Result<Self, PreferenceError> {
        for s in [s_w, s_l] {
            if !(0.0..=1.0).contains(&s) {
                return Err(PreferenceError::ScoreRange(s));
            }
        }
        if s_w <= s_l {
            return Err(PreferenceError::Domain { s_w, s_l });
        }
        Ok(PreferencePair { task_id, features, winner_index, loser_index, s_w, s_l })
    }

    pub fn gap(&self) -> f64 {
        self.s_w - self.s_l
    }
}

/// The aggregated dataset with its provenance stamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceDataset {
    pub pairs: Vec<PreferencePair>,
    pub iteration: u32,
    pub config_digest: String,
}

impl PreferenceDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// All ordered pairs with `s_i > s_j` among one task's candidates. Ties
/// produce no pair; candidates with identical workflows but different scores
/// still pair.
pub fn build_pairs(candidates: &[ScoredCandidate], features: &FeatureVector) -> Vec<PreferencePair> {
    let mut pairs = Vec::new();
    for (i, a) in candidates.iter().enumerate() {
        for (j, b) in candidates.iter().enumerate() {
            if i == j {
                continue;
            }
            debug_assert_eq!(a.task_id, b.task_id, "pairs never cross tasks");
            if a.score.value > b.score.value {
                pairs.push(
                    PreferencePair::new(
                        a.task_id.clone(),
                        features.clone(),
                        a.bank_index,
                        b.bank_index,
                        a.score.value,
                        b.score.value,
                    )
                    .expect("strict ordering checked"),
                );
            }
        }
    }
    pairs
}

/// Concatenate per-task pair lists in stable order.
pub fn aggregate(
    per_task: Vec<Vec<PreferencePair>>,
    iteration: u32,
    config_digest: &str,
) -> PreferenceDataset {
    PreferenceDataset {
        pairs: per_task.into_iter().flatten().collect(),
        iteration,
        config_digest: config_digest.to_string(),
    }
}

/// How score gaps weight the sampling distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub mode: WeightMode,
    /// Exponent of the gap weight `(s_w - s_l)^alpha`; ignored in uniform mode.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightMode {
    Power,
    Uniform,
}

impl WeightConfig {
    pub fn power(alpha: f64) -> Self {
        assert!(alpha >= 0.0, "alpha must be nonnegative");
        WeightConfig { mode: WeightMode::Power, alpha }
    }

    pub fn uniform() -> Self {
        WeightConfig { mode: WeightMode::Uniform, alpha: 0.0 }
    }

    /// Gap weight `d(s_w, s_l)` of one pair.
    pub fn weight(&self, s_w: f64, s_l: f64) -> Result<f64, PreferenceError> {
        if s_w <= s_l {
            return Err(PreferenceError::Domain { s_w, s_l });
        }
        Ok(match self.mode {
            WeightMode::Uniform => 1.0,
            WeightMode::Power => (s_w - s_l).powf(self.alpha),
        })
    }

    /// Log-space weights normalized so the largest is 1, which keeps extreme
    /// exponents (alpha = 100) sampleable without underflow.
    pub fn normalized_weights(&self, ds: &PreferenceDataset) -> Result<Vec<f64>, PreferenceError> {
        if ds.is_empty() {
            return Err(PreferenceError::EmptyDataset);
        }
        match self.mode {
            WeightMode::Uniform => Ok(vec![1.0; ds.len()]),
            WeightMode::Power => {
                if self.alpha == 0.0 {
                    return Ok(vec![1.0; ds.len()]);
                }
                let log_weights: Vec<f64> =
                    ds.pairs.iter().map(|p| self.alpha * p.gap().ln()).collect();
                let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if !max.is_finite() {
                    return Err(PreferenceError::ZeroMass);
                }
                Ok(log_weights.iter().map(|lw| (lw - max).exp()).collect())
            }
        }
    }
}

/// Convenience wrapper matching the rest of the training code.
pub fn pair_weight(s_w: f64, s_l: f64, cfg: &WeightConfig) -> Result<f64, PreferenceError> {
    cfg.weight(s_w, s_l)
}

/// Draw `n` pairs with replacement from the gap-weighted distribution.
/// Deterministic given the generator state.
pub fn sample_pairs(
    ds: &PreferenceDataset,
    cfg: &WeightConfig,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> Result<Vec<usize>, PreferenceError> {
    if ds.is_empty() {
        return Err(PreferenceError::EmptyDataset);
    }
    let weights = cfg.normalized_weights(ds)?;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(PreferenceError::ZeroMass);
    }
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        let roll: f64 = rng.gen::<f64>() * total;
        let index = cumulative.partition_point(|c| *c <= roll).min(weights.len() - 1);
        draws.push(index);
    }
    Ok(draws)
}

/// Write the dataset as JSON Lines behind a `#`-prefixed provenance header.
pub fn save_dataset(ds: &PreferenceDataset, path: &Path) -> std::io::Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "# config_digest={} iteration={}", ds.config_digest, ds.iteration)?;
    for pair in &ds.pairs {
        writeln!(file, "{}", serde_json::to_string(pair).expect("pair serializes"))?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum DatasetFileError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad pair record at {path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Read a dataset written by [`save_dataset`]. Header values are restored
/// when present.
pub fn load_dataset(path: &Path) -> Result<PreferenceDataset, DatasetFileError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path)
        .map_err(|source| DatasetFileError::Io { path: display.clone(), source })?;
    let reader = std::io::BufReader::new(file);
    let mut pairs = Vec::new();
    let mut iteration = 0;
    let mut config_digest = String::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| DatasetFileError::Io { path: display.clone(), source })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(header) = trimmed.strip_prefix('#') {
            for field in header.split_whitespace() {
                if let Some(v) = field.strip_prefix("config_digest=") {
                    config_digest = v.to_string();
                } else if let Some(v) = field.strip_prefix("iteration=") {
                    iteration = v.parse().unwrap_or(0);
                }
            }
            continue;
        }
        let pair: PreferencePair =
            serde_json::from_str(trimmed).map_err(|source| DatasetFileError::Parse {
                path: display.clone(),
                line: idx + 1,
                source,
            })?;
        pairs.push(pair);
    }
    Ok(PreferenceDataset { pairs, iteration, config_digest })
}
