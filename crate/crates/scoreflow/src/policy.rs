//! The workflow generator: a linear-softmax policy over a validated bank.
//!
//! Parameters are a `B x F` weight matrix mapping task features to logits
//! over the bank. Log-probabilities and their gradients are exact, which is
//! what makes the optimization-level claims checkable.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

use crate::digest::text_digest;
use crate::lang::validate::Limits;
use crate::lang::{parse_bank_source, print, validate, WorkflowAst};
use crate::runtime::registry::OperatorRegistry;

/// Task features. Entry 0 is a constant bias of 1 by convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// One validated program in the bank.
#[derive(Debug, Clone)]
pub struct BankProgram {
    pub ast: WorkflowAst,
    pub canonical_text: String,
    pub digest: String,
    /// Whether the program passes static validation. Always true for banks
    /// built through [`WorkflowBank::from_programs`].
    pub valid: bool,
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("bank needs at least 2 programs, got {0}")]
    TooSmall(usize),
    #[error("bank program {index} fails validation: {details}")]
    InvalidProgram { index: usize, details: String },
    #[error("bank programs {0} and {1} are identical")]
    DuplicateProgram(usize, usize),
    #[error("bank parse error: {0}")]
    Parse(#[from] crate::lang::SyntaxError),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The generator's reachable search space: a fixed list of validated
/// programs addressed by index.
#[derive(Debug, Clone)]
pub struct WorkflowBank {
    programs: Vec<BankProgram>,
    digest: String,
}

impl WorkflowBank {
    /// Build a bank, validating every program and rejecting duplicates.
    pub fn from_programs(
        programs: Vec<WorkflowAst>,
        registry: &OperatorRegistry,
        limits: &Limits,
    ) -> Result<Self, BankError> {
        if programs.len() < 2 {
            return Err(BankError::TooSmall(programs.len()));
        }
        let mut out = Vec::with_capacity(programs.len());
        for (index, ast) in programs.into_iter().enumerate() {
            let report = validate(&ast, registry, limits);
            if !report.ok {
                let details = report
                    .violations
                    .iter()
                    .map(|v| v.message.clone())
                    .collect::<Vec<_>>()
                    .join("; ");
                return Err(BankError::InvalidProgram { index, details });
            }
            let canonical_text = print(&ast);
            let digest = text_digest(&canonical_text);
            if let Some(prev) = out.iter().position(|p: &BankProgram| p.digest == digest) {
                return Err(BankError::DuplicateProgram(prev, index));
            }
            out.push(BankProgram { ast, canonical_text, digest, valid: true });
        }
        Ok(Self::assemble(out))
    }

    /// Build a bank without validating; invalid programs are marked and the
    /// candidate generator resamples around them. For extension workflows.
    pub fn from_programs_unchecked(
        programs: Vec<WorkflowAst>,
        registry: &OperatorRegistry,
        limits: &Limits,
    ) -> Result<Self, BankError> {
        if programs.len() < 2 {
            return Err(BankError::TooSmall(programs.len()));
        }
        let mut out = Vec::with_capacity(programs.len());
        for ast in programs {
            let report = validate(&ast, registry, limits);
            let canonical_text = print(&ast);
            let digest = text_digest(&canonical_text);
            out.push(BankProgram { ast, canonical_text, digest, valid: report.ok });
        }
        Ok(Self::assemble(out))
    }

    fn assemble(programs: Vec<BankProgram>) -> Self {
        let joined: String =
            programs.iter().map(|p| p.digest.as_str()).collect::<Vec<_>>().join("\n");
        let digest = text_digest(&joined);
        WorkflowBank { programs, digest }
    }

    pub fn from_source(
        source: &str,
        registry: &OperatorRegistry,
        limits: &Limits,
    ) -> Result<Self, BankError> {
        Self::from_programs(parse_bank_source(source)?, registry, limits)
    }

    pub fn from_file(
        path: &Path,
        registry: &OperatorRegistry,
        limits: &Limits,
    ) -> Result<Self, BankError> {
        let source = std::fs::read_to_string(path)
            .map_err(|source| BankError::Io { path: path.display().to_string(), source })?;
        Self::from_source(&source, registry, limits)
    }

    pub fn len(&self) -> usize {
        self.programs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.programs.is_empty()
    }

    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn program(&self, index: usize) -> &BankProgram {
        &self.programs[index]
    }

    pub fn programs(&self) -> &[BankProgram] {
        &self.programs
    }

    /// Lowest-indexed valid program; the candidate generator's fallback.
    pub fn first_valid_index(&self) -> Option<usize> {
        self.programs.iter().position(|p| p.valid)
    }
}

/// Source text of the default bank: the three templates plus eight richer
/// programs (three QA, three math, two coding), eleven in total.
pub fn default_bank_source() -> &'static str {
    include_str!("../assets/default.flows")
}

/// The default eleven-program bank.
pub fn default_bank(registry: &OperatorRegistry, limits: &Limits) -> Result<WorkflowBank, BankError> {
    WorkflowBank::from_source(default_bank_source(), registry, limits)
}

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("feature length {got} does not match policy feature length {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("bank index {index} out of range for bank of size {size}")]
    IndexOutOfBank { index: usize, size: usize },
}

/// Generator parameters: a row-major `B x F` matrix tied to a bank digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub bank_digest: String,
    pub bank_size: usize,
    pub feature_len: usize,
    /// Row-major weights, `weights[b * feature_len + f]`.
    pub weights: Vec<f64>,
}

impl PolicyParams {
    /// Zero-initialized parameters: the uniform policy.
    pub fn zeros(bank: &WorkflowBank, feature_len: usize) -> Self {
        PolicyParams {
            bank_digest: bank.digest().to_string(),
            bank_size: bank.len(),
            feature_len,
            weights: vec![0.0; bank.len() * feature_len],
        }
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.feature_len + col]
    }

    pub fn weight_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.weights[row * self.feature_len + col]
    }

    fn check_features(&self, x: &FeatureVector) -> Result<(), PolicyError> {
        if x.len() != self.feature_len {
            return Err(PolicyError::ShapeMismatch { expected: self.feature_len, got: x.len() });
        }
        Ok(())
    }

    /// `weights . x`, one logit per bank entry.
    pub fn logits(&self, x: &FeatureVector) -> Result<Vec<f64>, PolicyError> {
        self.check_features(x)?;
        let mut out = Vec::with_capacity(self.bank_size);
        for row in 0..self.bank_size {
            let mut acc = 0.0;
            for (col, xv) in x.values().iter().enumerate() {
                acc += self.weight(row, col) * xv;
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// Stable log softmax: `logit_y - logsumexp(logits)`.
    pub fn log_prob(&self, x: &FeatureVector, y: usize) -> Result<f64, PolicyError> {
        if y >= self.bank_size {
            return Err(PolicyError::IndexOutOfBank { index: y, size: self.bank_size });
        }
        let logits = self.logits(x)?;
        Ok(logits[y] - log_sum_exp(&logits))
    }

    /// Full probability vector over the bank.
    pub fn probabilities(&self, x: &FeatureVector) -> Result<Vec<f64>, PolicyError> {
        let logits = self.logits(x)?;
        let lse = log_sum_exp(&logits);
        Ok(logits.iter().map(|l| (l - lse).exp()).collect())
    }

    /// Categorical draw from the softmax distribution.
    pub fn sample_workflow(&self, x: &FeatureVector, rng: &mut ChaCha8Rng) -> Result<usize, PolicyError> {
        let probs = self.probabilities(x)?;
        let roll: f64 = rng.gen();
        let mut acc = 0.0;
        for (index, p) in probs.iter().enumerate() {
            acc += p;
            if roll < acc {
                return Ok(index);
            }
        }
        Ok(probs.len() - 1)
    }

    /// Highest-logit bank entry; ties resolve to the lowest index.
    pub fn argmax(&self, x: &FeatureVector) -> Result<usize, PolicyError> {
        let logits = self.logits(x)?;
        let mut best = 0;
        for (index, l) in logits.iter().enumerate() {
            if *l > logits[best] {
                best = index;
            }
        }
        Ok(best)
    }

    /// Gradient of `log pi(y | x)` with respect to the weights:
    /// row `b` equals `(1[b == y] - softmax_b) * x`.
    pub fn grad_log_prob(&self, x: &FeatureVector, y: usize) -> Result<Vec<f64>, PolicyError> {
        if y >= self.bank_size {
            return Err(PolicyError::IndexOutOfBank { index: y, size: self.bank_size });
        }
        let probs = self.probabilities(x)?;
        let mut grad = vec![0.0; self.bank_size * self.feature_len];
        for row in 0..self.bank_size {
            let coeff = if row == y { 1.0 - probs[row] } else { -probs[row] };
            for (col, xv) in x.values().iter().enumerate() {
                grad[row * self.feature_len + col] = coeff * xv;
            }
        }
        Ok(grad)
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.is_finite())
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Serialized training state: current and frozen reference parameters plus
/// enough RNG state to resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub bank_digest: String,
    #[serde(rename = "B")]
    pub bank_size: usize,
    #[serde(rename = "F")]
    pub feature_len: usize,
    pub theta: Vec<f64>,
    pub theta_ref: Vec<f64>,
    pub rng_state: RngState,
    pub iteration: u32,
    pub config_digest: String,
}

/// ChaCha8 state as (seed, stream position).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed_hex: String,
    pub word_pos: String,
}

impl RngState {
    pub fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed_hex: hex::encode(rng.get_seed()),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(&self) -> Result<ChaCha8Rng, CheckpointError> {
        let seed_bytes = hex::decode(&self.seed_hex)
            .map_err(|_| CheckpointError::Corrupt("bad rng seed hex".into()))?;
        let seed: [u8; 32] = seed_bytes
            .try_into()
            .map_err(|_| CheckpointError::Corrupt("rng seed must be 32 bytes".into()))?;
        let mut rng = ChaCha8Rng::from_seed(seed);
        let pos: u128 = self
            .word_pos
            .parse()
            .map_err(|_| CheckpointError::Corrupt("bad rng word position".into()))?;
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

use rand::SeedableRng;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint bank digest {found} does not match bank {expected}")]
    BankMismatch { expected: String, found: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PolicyCheckpoint {
    pub fn new(
        params: &PolicyParams,
        params_ref: &PolicyParams,
        rng: &ChaCha8Rng,
        iteration: u32,
        config_digest: &str,
    ) -> Self {
        assert_eq!(params.bank_digest, params_ref.bank_digest);
        assert_eq!(params.weights.len(), params_ref.weights.len());
        PolicyCheckpoint {
            bank_digest: params.bank_digest.clone(),
            bank_size: params.bank_size,
            feature_len: params.feature_len,
            theta: params.weights.clone(),
            theta_ref: params_ref.weights.clone(),
            rng_state: RngState::capture(rng),
            iteration,
            config_digest: config_digest.to_string(),
        }
    }

    pub fn params(&self) -> PolicyParams {
        PolicyParams {
            bank_digest: self.bank_digest.clone(),
            bank_size: self.bank_size,
            feature_len: self.feature_len,
            weights: self.theta.clone(),
        }
    }

    pub fn params_ref(&self) -> PolicyParams {
        PolicyParams {
            bank_digest: self.bank_digest.clone(),
            bank_size: self.bank_size,
            feature_len: self.feature_len,
            weights: self.theta_ref.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let json = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        std::fs::write(path, json)
            .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })
    }

    /// Load and verify shape and digest against the bank in use.
    pub fn load(path: &Path, expected_bank_digest: Option<&str>) -> Result<Self, CheckpointError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
        let ckpt: PolicyCheckpoint =
            serde_json::from_str(&raw).map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let expected_len = ckpt.bank_size * ckpt.feature_len;
        if ckpt.theta.len() != expected_len || ckpt.theta_ref.len() != expected_len {
            return Err(CheckpointError::Corrupt(format!(
                "weight length {} does not match B*F = {expected_len}",
                ckpt.theta.len()
            )));
        }
        if !ckpt.theta.iter().chain(&ckpt.theta_ref).all(|w| w.is_finite()) {
            return Err(CheckpointError::Corrupt("non-finite weights".into()));
        }
        if let Some(expected) = expected_bank_digest {
            if ckpt.bank_digest != expected {
                return Err(CheckpointError::BankMismatch {
                    expected: expected.to_string(),
                    found: ckpt.bank_digest,
                });
            }
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::registry::build_registry;

    fn registry() -> OperatorRegistry {
        build_registry(vec![]).unwrap()
    }

    fn small_params(weights: Vec<Vec<f64>>) -> PolicyParams {
        let bank_size = weights.len();
        let feature_len = weights[0].len();
        PolicyParams {
            bank_digest: "test".into(),
            bank_size,
            feature_len,
            weights: weights.into_iter().flatten().collect(),
        }
    }

    #[test]
    fn default_bank_has_eleven_valid_programs() {
        let bank = default_bank(&registry(), &Limits::default()).unwrap();
        assert_eq!(bank.len(), 11);
        assert!(bank.programs().iter().all(|p| p.valid));
        // Digests unique by construction.
        let digests: std::collections::BTreeSet<_> =
            bank.programs().iter().map(|p| p.digest.clone()).collect();
        assert_eq!(digests.len(), 11);
        // Templates are small; the planted "simple" rule accepts them.
        for index in 0..3 {
            assert!(bank.program(index).ast.static_call_count() <= 2);
        }
        // The math programs carry programmer + ensemble.
        for index in 6..9 {
            let ops = bank.program(index).ast.operators_present();
            assert!(ops.contains("programmer") && ops.contains("sc_ensemble"), "program {index}");
        }
    }

    #[test]
    fn zero_params_give_uniform_softmax() {
        let bank = default_bank(&registry(), &Limits::default()).unwrap();
        let params = PolicyParams::zeros(&bank, 3);
        let x = FeatureVector::new(vec![1.0, 0.0, 0.5]);
        let logits = params.logits(&x).unwrap();
        assert!(logits.iter().all(|l| *l == 0.0));
        let lp = params.log_prob(&x, 0).unwrap();
        assert!((lp - (1.0f64 / 11.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn log_prob_matches_hand_value() {
        // B=2, F=1, theta = [[1], [-1]], x = [1]: logits [1, -1].
        let params = small_params(vec![vec![1.0], vec![-1.0]]);
        let x = FeatureVector::new(vec![1.0]);
        assert_eq!(params.logits(&x).unwrap(), vec![1.0, -1.0]);
        // log p(0) = -log(1 + e^{-2})
        let expected = -(1.0 + (-2.0f64).exp()).ln();
        assert!((params.log_prob(&x, 0).unwrap() - expected).abs() < 1e-12);
        assert!((params.log_prob(&x, 0).unwrap() - (-0.126928)).abs() < 1e-6);
    }

    #[test]
    fn probabilities_normalize() {
        let params = small_params(vec![vec![0.3, -1.2], vec![2.0, 0.7], vec![-0.5, 0.1]]);
        let x = FeatureVector::new(vec![1.0, -0.4]);
        let total: f64 = params.probabilities(&x).unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let exp_sum: f64 =
            (0..3).map(|y| params.log_prob(&x, y).unwrap().exp()).sum();
        assert!((exp_sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let params = small_params(vec![vec![1.0], vec![-1.0]]);
        let x = FeatureVector::new(vec![1.0, 2.0]);
        assert_eq!(
            params.logits(&x).unwrap_err(),
            PolicyError::ShapeMismatch { expected: 1, got: 2 }
        );
        assert_eq!(
            params.log_prob(&FeatureVector::new(vec![1.0]), 5).unwrap_err(),
            PolicyError::IndexOutOfBank { index: 5, size: 2 }
        );
    }

    #[test]
    fn grad_at_uniform_is_half_signed() {
        // Zero theta, B=2, x=[1]: grad rows for y=0 are [+0.5], [-0.5].
        let params = small_params(vec![vec![0.0], vec![0.0]]);
        let x = FeatureVector::new(vec![1.0]);
        let grad = params.grad_log_prob(&x, 0).unwrap();
        assert!((grad[0] - 0.5).abs() < 1e-15);
        assert!((grad[1] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn grad_rows_sum_to_zero() {
        let params = small_params(vec![vec![0.7, -0.2], vec![1.1, 0.4], vec![-0.3, 0.9]]);
        let x = FeatureVector::new(vec![0.8, -1.5]);
        let grad = params.grad_log_prob(&x, 1).unwrap();
        for col in 0..2 {
            let col_sum: f64 = (0..3).map(|row| grad[row * 2 + col]).sum();
            assert!(col_sum.abs() < 1e-12, "column {col} sums to {col_sum}");
        }
    }

    #[test]
    fn grad_matches_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let bank_size = rng.gen_range(2..5);
            let feature_len = rng.gen_range(1..4);
            let mut params = PolicyParams {
                bank_digest: "t".into(),
                bank_size,
                feature_len,
                weights: (0..bank_size * feature_len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let x = FeatureVector::new((0..feature_len).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let y = rng.gen_range(0..bank_size);
            let analytic = params.grad_log_prob(&x, y).unwrap();
            let h = 1e-6;
            for idx in 0..params.weights.len() {
                let orig = params.weights[idx];
                params.weights[idx] = orig + h;
                let plus = params.log_prob(&x, y).unwrap();
                params.weights[idx] = orig - h;
                let minus = params.log_prob(&x, y).unwrap();
                params.weights[idx] = orig;
                let fd = (plus - minus) / (2.0 * h);
                let denom = analytic[idx].abs().max(fd.abs()).max(1e-3);
                assert!(
                    ((analytic[idx] - fd) / denom).abs() <= 1e-6,
                    "entry {idx}: analytic {} vs fd {fd}",
                    analytic[idx]
                );
            }
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        // Adding a constant to every logit (shift every row along the bias
        // feature) leaves log probabilities unchanged.
        let mut params = small_params(vec![vec![0.4, 1.0], vec![-0.9, 0.2], vec![0.1, -0.6]]);
        let x = FeatureVector::new(vec![1.0, 0.7]);
        let before: Vec<f64> = (0..3).map(|y| params.log_prob(&x, y).unwrap()).collect();
        for row in 0..3 {
            *params.weight_mut(row, 0) += 5.0;
        }
        for (y, b) in before.iter().enumerate() {
            let after = params.log_prob(&x, y).unwrap();
            assert!((after - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_logit_owns_sampling() {
        use rand::SeedableRng;
        let params = small_params(vec![vec![50.0], vec![0.0], vec![0.0]]);
        let x = FeatureVector::new(vec![1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let hits = (0..10_000)
            .filter(|_| params.sample_workflow(&x, &mut rng).unwrap() == 0)
            .count();
        assert!(hits as f64 / 10_000.0 > 0.999);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        use rand::SeedableRng;
        let params = small_params(vec![vec![0.5], vec![-0.5], vec![0.0]]);
        let x = FeatureVector::new(vec![1.0]);
        let draw = |seed: u64| -> Vec<usize> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50).map(|_| params.sample_workflow(&x, &mut rng).unwrap()).collect()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        use rand::SeedableRng;
        let bank = default_bank(&registry(), &Limits::default()).unwrap();
        let mut params = PolicyParams::zeros(&bank, 3);
        params.weights.iter_mut().enumerate().for_each(|(i, w)| *w = (i as f64) * 0.1 - 1.3);
        let reference = PolicyParams::zeros(&bank, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let _: f64 = rand::Rng::gen(&mut rng);
        let ckpt = PolicyCheckpoint::new(&params, &reference, &rng, 2, "cfgdigest");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        ckpt.save(&path).unwrap();
        let loaded = PolicyCheckpoint::load(&path, Some(bank.digest())).unwrap();
        assert_eq!(loaded, ckpt);
        assert_eq!(loaded.params().weights, params.weights);
        let restored = loaded.rng_state.restore().unwrap();
        assert_eq!(RngState::capture(&restored), ckpt.rng_state);
    }

    #[test]
    fn truncated_checkpoint_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        std::fs::write(&path, "{\"bank_digest\": \"x\"").unwrap();
        assert!(matches!(
            PolicyCheckpoint::load(&path, None),
            Err(CheckpointError::Corrupt(_))
        ));
    }

    #[test]
    fn bank_digest_mismatch_rejected_on_load() {
        use rand::SeedableRng;
        let bank = default_bank(&registry(), &Limits::default()).unwrap();
        let params = PolicyParams::zeros(&bank, 3);
        let rng = ChaCha8Rng::seed_from_u64(1);
        let ckpt = PolicyCheckpoint::new(&params, &params, &rng, 0, "cfg");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        ckpt.save(&path).unwrap();
        assert!(matches!(
            PolicyCheckpoint::load(&path, Some("other-digest")),
            Err(CheckpointError::BankMismatch { .. })
        ));
    }

    #[test]
    fn bank_rejects_invalid_member() {
        let programs = vec![
            crate::lang::parse("workflow { let s = answer_generate() return s }").unwrap(),
            crate::lang::parse("workflow { let s = magic() return s }").unwrap(),
        ];
        let err =
            WorkflowBank::from_programs(programs, &registry(), &Limits::default()).unwrap_err();
        assert!(matches!(err, BankError::InvalidProgram { index: 1, .. }));
    }
}
