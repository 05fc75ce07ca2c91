//! End-to-end iteration loop and its artifacts.
//!
//! Each iteration: draw `k` candidates per training task from the current
//! policy (statically gated, with a capped resample-then-fallback hook),
//! evaluate them, build the preference dataset, train with the configured
//! objective, then score the greedy policy on both splits. Outputs land in
//! `output_dir`: `checkpoint_<i>.json`, `prefs_<i>.jsonl`, `train_stats.csv`,
//! `metrics.csv`, and `report.json`.
//!
//! Determinism: every random decision is keyed by (seed, role, iteration,
//! task id), never by thread schedule, so two runs of the same planted
//! config produce byte-identical metrics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

use super::config::{ExecutorMode, RunConfig};
use crate::digest::hash_to_u64;
use crate::dpo::{train_inner, TrainError, TrainStats};
use crate::lang::validate::Limits;
use crate::policy::{
    default_bank_source, BankError, CheckpointError, PolicyCheckpoint, PolicyError, PolicyParams,
    WorkflowBank,
};
use crate::preference::{aggregate, build_pairs, PreferenceDataset, ScoredCandidate};
use crate::runtime::executor::{Executor, TokenCost};
use crate::runtime::planted::planted_executor;
use crate::runtime::registry::build_registry;
use crate::runtime::remote::{remote_executor, RemoteConfig, RemoteSetupError};
use crate::runtime::task::{load_tasks, Task, TaskFileError};
use crate::scoring::evaluate_workflow;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] super::config::ConfigError),
    #[error(transparent)]
    Tasks(#[from] TaskFileError),
    #[error(transparent)]
    Bank(#[from] BankError),
    #[error(transparent)]
    Remote(#[from] RemoteSetupError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("task feature lengths are inconsistent: {0} vs {1}")]
    FeatureLen(usize, usize),
    #[error("no tasks on the {0} split")]
    EmptySplit(&'static str),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

/// Full record of one iteration.
#[derive(Debug, Clone)]
pub struct IterationState {
    pub iteration: u32,
    pub per_task_candidates: Vec<(String, Vec<ScoredCandidate>)>,
    pub dataset: PreferenceDataset,
    pub train_stats: Vec<TrainStats>,
    pub validation_solve_rate: f64,
    pub test_solve_rate: f64,
    pub executor_calls: u64,
    pub token_cost: TokenCost,
    pub checkpoint_path: PathBuf,
}

/// Compact per-iteration record kept in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: u32,
    pub dataset_pairs: usize,
    pub train_stats: Vec<TrainStats>,
    pub validation_solve_rate: f64,
    pub test_solve_rate: f64,
    pub executor_calls: u64,
    pub token_cost: TokenCost,
    pub checkpoint_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_digest: String,
    pub bank_digest: String,
    /// Expected solve rates of the initial (uniform) policy.
    pub baseline_validation_solve_rate: f64,
    pub baseline_test_solve_rate: f64,
    pub iterations: Vec<IterationSummary>,
    pub final_validation_solve_rate: f64,
    pub final_test_solve_rate: f64,
    pub converged: bool,
    pub stop_reason: String,
    pub wall_clock_secs: f64,
    pub executor_calls: u64,
    pub token_cost: TokenCost,
}

struct Pipeline {
    cfg: RunConfig,
    config_digest: String,
    bank: WorkflowBank,
    tasks: Vec<Task>,
    validation_idx: Vec<usize>,
    test_idx: Vec<usize>,
    executor: Box<dyn Executor>,
    feature_len: usize,
    pool: rayon::ThreadPool,
}

impl Pipeline {
    fn new(cfg: &RunConfig) -> Result<Self, PipelineError> {
        cfg.check()?;
        let registry = build_registry(vec![]).expect("fixed catalog has no duplicates");
        let bank = WorkflowBank::from_file(&cfg.bank_path, &registry, &cfg.limits)?;
        let tasks = load_tasks(&cfg.tasks_path)?;
        let feature_len = tasks.first().map(|t| t.features.len()).unwrap_or(0);
        for task in &tasks {
            if task.features.len() != feature_len {
                return Err(PipelineError::FeatureLen(feature_len, task.features.len()));
            }
        }
        // Stride split: of every (v + t) consecutive tasks, the first v go to
        // validation. Deterministic and category-balanced for interleaved
        // task files.
        let parts = (cfg.split.0 + cfg.split.1) as usize;
        let mut validation_idx = Vec::new();
        let mut test_idx = Vec::new();
        for index in 0..tasks.len() {
            if index % parts < cfg.split.0 as usize {
                validation_idx.push(index);
            } else {
                test_idx.push(index);
            }
        }
        if validation_idx.is_empty() {
            return Err(PipelineError::EmptySplit("validation"));
        }
        if test_idx.is_empty() {
            return Err(PipelineError::EmptySplit("test"));
        }
        let executor: Box<dyn Executor> = match cfg.executor_mode {
            ExecutorMode::Planted => Box::new(planted_executor(cfg.planted.clone())),
            ExecutorMode::Remote => {
                let remote = RemoteConfig::new(cfg.endpoint_url.clone(), cfg.model.clone());
                Box::new(remote_executor(remote)?)
            }
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallelism)
            .build()
            .map_err(|e| PipelineError::Pool(e.to_string()))?;
        std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
        Ok(Pipeline {
            config_digest: cfg.digest(),
            cfg: cfg.clone(),
            bank,
            tasks,
            validation_idx,
            test_idx,
            executor,
            feature_len,
            pool,
        })
    }

    fn limits(&self) -> &Limits {
        &self.cfg.limits
    }

    fn task_rng(&self, role: &str, iteration: u32, task_id: &str) -> ChaCha8Rng {
        let seed = hash_to_u64(&[
            &self.cfg.seed.to_le_bytes(),
            role.as_bytes(),
            &iteration.to_le_bytes(),
            task_id.as_bytes(),
        ]);
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn fallback_index(&self, category: &str) -> usize {
        self.cfg
            .fallback_templates
            .get(category)
            .copied()
            .filter(|idx| *idx < self.bank.len())
            .or_else(|| self.bank.first_valid_index())
            .unwrap_or(0)
    }

    /// Draw k candidates for one task; statically invalid draws are
    /// resampled up to the cap, then replaced by the fallback template.
    fn generate_candidates(
        &self,
        task: &Task,
        params: &PolicyParams,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<usize>, PipelineError> {
        let mut out = Vec::with_capacity(self.cfg.k);
        for _ in 0..self.cfg.k {
            let mut chosen = None;
            for _ in 0..self.cfg.resample_cap {
                let idx = params.sample_workflow(&task.features, rng)?;
                if self.bank.program(idx).valid {
                    chosen = Some(idx);
                    break;
                }
            }
            out.push(chosen.unwrap_or_else(|| self.fallback_index(&task.category)));
        }
        Ok(out)
    }

    /// Score one task's candidates; runtime-gate failures drop out.
    fn score_candidates(
        &self,
        task: &Task,
        candidate_indices: &[usize],
    ) -> (Vec<ScoredCandidate>, u64, TokenCost) {
        let mut scored = Vec::with_capacity(candidate_indices.len());
        let mut calls = 0;
        let mut cost = TokenCost::default();
        for &bank_index in candidate_indices {
            let program = self.bank.program(bank_index);
            match evaluate_workflow(
                &program.ast,
                task,
                self.executor.as_ref(),
                &self.cfg.metric,
                self.limits(),
            ) {
                Ok(eval) => {
                    calls += eval.executor_calls;
                    cost.add(eval.token_cost.prompt_tokens, eval.token_cost.completion_tokens);
                    scored.push(ScoredCandidate {
                        task_id: task.id.clone(),
                        bank_index,
                        workflow_digest: program.digest.clone(),
                        score: eval.score,
                    });
                }
                Err(_) => {
                    // Candidate failed the runtime executability gate; it
                    // contributes no score and no pairs.
                }
            }
        }
        (scored, calls, cost)
    }

    /// Greedy solve rate over a split: one argmax workflow per task.
    fn argmax_solve_rate(
        &self,
        indices: &[usize],
        params: &PolicyParams,
    ) -> Result<(f64, u64, TokenCost), PipelineError> {
        let scores: Vec<Result<(f64, u64, TokenCost), PolicyError>> = self.pool.install(|| {
            indices
                .par_iter()
                .map(|&task_idx| {
                    let task = &self.tasks[task_idx];
                    let bank_index = params.argmax(&task.features)?;
                    let program = self.bank.program(bank_index);
                    match evaluate_workflow(
                        &program.ast,
                        task,
                        self.executor.as_ref(),
                        &self.cfg.metric,
                        self.limits(),
                    ) {
                        Ok(eval) => Ok((eval.score.value, eval.executor_calls, eval.token_cost)),
                        Err(_) => Ok((0.0, 0, TokenCost::default())),
                    }
                })
                .collect()
        });
        let mut total = 0.0;
        let mut calls = 0;
        let mut cost = TokenCost::default();
        for item in scores {
            let (value, c, tc) = item?;
            total += value;
            calls += c;
            cost.add(tc.prompt_tokens, tc.completion_tokens);
        }
        Ok((total / indices.len() as f64, calls, cost))
    }

    /// Expected solve rate of the policy mixture, used as the iteration-0
    /// baseline in planted mode (exact, no sampling noise).
    fn expected_solve_rate(
        &self,
        indices: &[usize],
        params: &PolicyParams,
    ) -> Result<(f64, u64, TokenCost), PipelineError> {
        let rows: Vec<Result<(f64, u64, TokenCost), PolicyError>> = self.pool.install(|| {
            indices
                .par_iter()
                .map(|&task_idx| {
                    let task = &self.tasks[task_idx];
                    let probs = params.probabilities(&task.features)?;
                    let mut expectation = 0.0;
                    let mut calls = 0;
                    let mut cost = TokenCost::default();
                    for (bank_index, p) in probs.iter().enumerate() {
                        let program = self.bank.program(bank_index);
                        match evaluate_workflow(
                            &program.ast,
                            task,
                            self.executor.as_ref(),
                            &self.cfg.metric,
                            self.limits(),
                        ) {
                            Ok(eval) => {
                                expectation += p * eval.score.value;
                                calls += eval.executor_calls;
                                cost.add(
                                    eval.token_cost.prompt_tokens,
                                    eval.token_cost.completion_tokens,
                                );
                            }
                            Err(_) => {}
                        }
                    }
                    Ok((expectation, calls, cost))
                })
                .collect()
        });
        let mut total = 0.0;
        let mut calls = 0;
        let mut cost = TokenCost::default();
        for row in rows {
            let (value, c, tc) = row?;
            total += value;
            calls += c;
            cost.add(tc.prompt_tokens, tc.completion_tokens);
        }
        Ok((total / indices.len() as f64, calls, cost))
    }

    /// Sampled baseline for backends where exhaustive evaluation is costly:
    /// one policy draw per task.
    fn sampled_solve_rate(
        &self,
        indices: &[usize],
        params: &PolicyParams,
    ) -> Result<(f64, u64, TokenCost), PipelineError> {
        let mut total = 0.0;
        let mut calls = 0;
        let mut cost = TokenCost::default();
        for &task_idx in indices {
            let task = &self.tasks[task_idx];
            let mut rng = self.task_rng("baseline", 0, &task.id);
            let bank_index = params.sample_workflow(&task.features, &mut rng)?;
            let program = self.bank.program(bank_index);
            if let Ok(eval) = evaluate_workflow(
                &program.ast,
                task,
                self.executor.as_ref(),
                &self.cfg.metric,
                self.limits(),
            ) {
                total += eval.score.value;
                calls += eval.executor_calls;
                cost.add(eval.token_cost.prompt_tokens, eval.token_cost.completion_tokens);
            }
        }
        Ok((total / indices.len() as f64, calls, cost))
    }

    fn run_iteration(
        &self,
        iteration: u32,
        theta: &mut PolicyParams,
        theta_ref: &mut PolicyParams,
    ) -> Result<IterationState, PipelineError> {
        let mut executor_calls = 0u64;
        let mut token_cost = TokenCost::default();

        // Candidate generation and scoring fan out per task; results are
        // gathered in task order before any state changes.
        let snapshot = theta.clone();
        let scored: Vec<Result<(String, Vec<ScoredCandidate>, u64, TokenCost), PipelineError>> =
            self.pool.install(|| {
                self.validation_idx
                    .par_iter()
                    .map(|&task_idx| {
                        let task = &self.tasks[task_idx];
                        let mut rng = self.task_rng("candidates", iteration, &task.id);
                        let indices = self.generate_candidates(task, &snapshot, &mut rng)?;
                        let (scored, calls, cost) = self.score_candidates(task, &indices);
                        Ok((task.id.clone(), scored, calls, cost))
                    })
                    .collect()
            });
        let mut per_task_candidates = Vec::with_capacity(scored.len());
        let mut per_task_pairs = Vec::with_capacity(scored.len());
        for (pos, item) in scored.into_iter().enumerate() {
            let (task_id, candidates, calls, cost) = item?;
            executor_calls += calls;
            token_cost.add(cost.prompt_tokens, cost.completion_tokens);
            let task = &self.tasks[self.validation_idx[pos]];
            per_task_pairs.push(build_pairs(&candidates, &task.features));
            per_task_candidates.push((task_id, candidates));
        }
        let dataset = aggregate(per_task_pairs, iteration, &self.config_digest);
        debug_assert!(
            dataset.pairs.iter().all(|p| {
                self.validation_idx.iter().any(|&i| self.tasks[i].id == p.task_id)
            }),
            "test tasks must never reach the preference dataset"
        );

        let prefs_path = self.cfg.output_dir.join(format!("prefs_{iteration}.jsonl"));
        crate::preference::save_dataset(&dataset, &prefs_path).map_err(io_err(&prefs_path))?;

        if self.cfg.train.refresh_reference {
            *theta_ref = theta.clone();
        }
        let mut trainer_rng = ChaCha8Rng::seed_from_u64(hash_to_u64(&[
            &self.cfg.seed.to_le_bytes(),
            b"train",
            &iteration.to_le_bytes(),
        ]));
        let (trained, train_stats) = if dataset.is_empty() {
            // Nothing to learn from this iteration; carry the policy over.
            (theta.clone(), Vec::new())
        } else {
            train_inner(theta, theta_ref, &dataset, &self.cfg.train, &mut trainer_rng)?
        };
        *theta = trained;

        let (validation_solve_rate, vc, vt) =
            self.argmax_solve_rate(&self.validation_idx, theta)?;
        let (test_solve_rate, tc, tt) = self.argmax_solve_rate(&self.test_idx, theta)?;
        executor_calls += vc + tc;
        token_cost.add(vt.prompt_tokens, vt.completion_tokens);
        token_cost.add(tt.prompt_tokens, tt.completion_tokens);

        let checkpoint_path = self.cfg.output_dir.join(format!("checkpoint_{iteration}.json"));
        PolicyCheckpoint::new(theta, theta_ref, &trainer_rng, iteration, &self.config_digest)
            .save(&checkpoint_path)?;

        Ok(IterationState {
            iteration,
            per_task_candidates,
            dataset,
            train_stats,
            validation_solve_rate,
            test_solve_rate,
            executor_calls,
            token_cost,
            checkpoint_path,
        })
    }
}

/// Run the full loop and write all artifacts under `cfg.output_dir`.
pub fn run(cfg: &RunConfig) -> Result<Report, PipelineError> {
    let started = std::time::Instant::now();
    let pipeline = Pipeline::new(cfg)?;
    let mut theta = PolicyParams::zeros(&pipeline.bank, pipeline.feature_len);
    let mut theta_ref = theta.clone();

    let mut executor_calls = 0u64;
    let mut token_cost = TokenCost::default();

    let ((baseline_val, c1, t1), (baseline_test, c2, t2)) = match cfg.executor_mode {
        ExecutorMode::Planted => (
            pipeline.expected_solve_rate(&pipeline.validation_idx, &theta)?,
            pipeline.expected_solve_rate(&pipeline.test_idx, &theta)?,
        ),
        ExecutorMode::Remote => (
            pipeline.sampled_solve_rate(&pipeline.validation_idx, &theta)?,
            pipeline.sampled_solve_rate(&pipeline.test_idx, &theta)?,
        ),
    };
    executor_calls += c1 + c2;
    token_cost.add(t1.prompt_tokens, t1.completion_tokens);
    token_cost.add(t2.prompt_tokens, t2.completion_tokens);

    let stats_path = cfg.output_dir.join("train_stats.csv");
    let mut stats_file = std::fs::File::create(&stats_path).map_err(io_err(&stats_path))?;
    writeln!(stats_file, "iteration,epoch,samples_seen,mean_loss,grad_norm,fraction_r_in_unit_ball")
        .map_err(io_err(&stats_path))?;

    let mut iterations = Vec::new();
    let mut previous_val = baseline_val;
    let mut converged = false;
    let mut stop_reason = format!("reached max iterations ({})", cfg.max_iterations);

    for iteration in 1..=cfg.max_iterations {
        let state = pipeline.run_iteration(iteration, &mut theta, &mut theta_ref)?;
        executor_calls += state.executor_calls;
        token_cost.add(state.token_cost.prompt_tokens, state.token_cost.completion_tokens);
        for (epoch, row) in state.train_stats.iter().enumerate() {
            writeln!(
                stats_file,
                "{},{},{},{},{},{}",
                iteration,
                epoch + 1,
                row.samples_seen,
                row.mean_loss,
                row.grad_norm,
                row.fraction_r_in_unit_ball
            )
            .map_err(io_err(&stats_path))?;
        }
        iterations.push(IterationSummary {
            iteration,
            dataset_pairs: state.dataset.len(),
            train_stats: state.train_stats.clone(),
            validation_solve_rate: state.validation_solve_rate,
            test_solve_rate: state.test_solve_rate,
            executor_calls: state.executor_calls,
            token_cost: state.token_cost,
            checkpoint_path: state.checkpoint_path.display().to_string(),
        });
        let improvement = state.validation_solve_rate - previous_val;
        previous_val = state.validation_solve_rate;
        if improvement < cfg.train.convergence_eps {
            converged = true;
            stop_reason = format!(
                "converged: validation improvement {improvement:.6} below {}",
                cfg.train.convergence_eps
            );
            break;
        }
    }

    let report = Report {
        config_digest: pipeline.config_digest.clone(),
        bank_digest: pipeline.bank.digest().to_string(),
        baseline_validation_solve_rate: baseline_val,
        baseline_test_solve_rate: baseline_test,
        final_validation_solve_rate: iterations
            .last()
            .map(|s| s.validation_solve_rate)
            .unwrap_or(baseline_val),
        final_test_solve_rate: iterations
            .last()
            .map(|s| s.test_solve_rate)
            .unwrap_or(baseline_test),
        iterations,
        converged,
        stop_reason,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        executor_calls,
        token_cost,
    };

    emit_metrics(&report, &cfg.output_dir.join("metrics.csv"))?;
    let report_path = cfg.output_dir.join("report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report).expect("report serializes"))
        .map_err(io_err(&report_path))?;
    Ok(report)
}

/// Write the per-iteration metrics table: two solve-rate rows per iteration.
pub fn emit_metrics(report: &Report, path: &Path) -> Result<(), PipelineError> {
    let mut out = String::from(
        "iteration,split,solve_rate,mean_loss,fraction_r_in_unit_ball,executor_calls,token_cost\n",
    );
    for summary in &report.iterations {
        let last = summary.train_stats.last();
        let mean_loss = last.map(|s| s.mean_loss).unwrap_or(0.0);
        let fraction = last.map(|s| s.fraction_r_in_unit_ball).unwrap_or(0.0);
        for (split, rate) in [
            ("validation", summary.validation_solve_rate),
            ("test", summary.test_solve_rate),
        ] {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                summary.iteration,
                split,
                rate,
                mean_loss,
                fraction,
                summary.executor_calls,
                summary.token_cost.total()
            ));
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// One arm of the alpha sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub alpha: f64,
    pub final_validation_solve_rate: f64,
    pub final_test_solve_rate: f64,
    pub iterations: u32,
}

/// Run the loop once per alpha with shared seeds (common random numbers).
/// `alpha = 0` runs the plain-DPO arm: uniform sampling and unit reward
/// weights. Writes `ablation.csv` under the base output directory.
pub fn ablate(cfg: &RunConfig, alphas: &[f64]) -> Result<Vec<AblationRow>, PipelineError> {
    assert!(!alphas.is_empty(), "alpha list must be nonempty");
    let mut rows = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let mut arm = cfg.clone();
        arm.output_dir = cfg.output_dir.join(format!("alpha_{alpha}"));
        if alpha == 0.0 {
            arm.train.weight_cfg = crate::preference::WeightConfig::uniform();
            arm.train.reward_weight_mode = crate::dpo::RewardWeightMode::Unit;
        } else {
            arm.train.weight_cfg = crate::preference::WeightConfig::power(alpha);
            arm.train.reward_weight_mode = crate::dpo::RewardWeightMode::Score;
        }
        let report = run(&arm)?;
        rows.push(AblationRow {
            alpha,
            final_validation_solve_rate: report.final_validation_solve_rate,
            final_test_solve_rate: report.final_test_solve_rate,
            iterations: report.iterations.len() as u32,
        });
    }
    let mut out = String::from("alpha,final_validation_solve_rate,final_test_solve_rate,iterations\n");
    for row in &rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.alpha, row.final_validation_solve_rate, row.final_test_solve_rate, row.iterations
        ));
    }
    std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let path = cfg.output_dir.join("ablation.csv");
    std::fs::write(&path, out).map_err(io_err(&path))?;
    Ok(rows)
}

/// Write the default planted experiment inputs (tasks + bank) into a
/// directory and return their paths. Used by the CLI and examples.
pub fn write_planted_inputs(
    dir: &Path,
    n_simple: usize,
    n_complex: usize,
    seed: u64,
) -> Result<(PathBuf, PathBuf), PipelineError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let tasks_path = dir.join("tasks.jsonl");
    let bank_path = dir.join("bank.flows");
    let tasks = crate::runtime::planted::planted_tasks(n_simple, n_complex, seed);
    crate::runtime::task::save_tasks(&tasks_path, &tasks).map_err(io_err(&tasks_path))?;
    std::fs::write(&bank_path, default_bank_source()).map_err(io_err(&bank_path))?;
    Ok((tasks_path, bank_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    fn planted_cfg(dir: &Path, seed: u64) -> RunConfig {
        let (tasks_path, bank_path) = write_planted_inputs(dir, 10, 10, seed).unwrap();
        let mut cfg =
            RunConfig::planted_defaults(tasks_path, bank_path, dir.join("out"), seed);
        cfg.train.samples_per_iter = 200;
        cfg.metric.repeats = 1;
        cfg
    }

    #[test]
    fn run_improves_over_baseline_and_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = planted_cfg(dir.path(), 5);
        let report = run(&cfg).unwrap();
        assert!(!report.iterations.is_empty());
        assert!(report.final_test_solve_rate > report.baseline_test_solve_rate);
        let metrics_a = std::fs::read(cfg.output_dir.join("metrics.csv")).unwrap();

        let dir_b = tempfile::tempdir().unwrap();
        let mut cfg_b = planted_cfg(dir_b.path(), 5);
        cfg_b.parallelism = 2; // different schedule, same bytes
        let report_b = run(&cfg_b).unwrap();
        let metrics_b = std::fs::read(cfg_b.output_dir.join("metrics.csv")).unwrap();
        assert_eq!(metrics_a, metrics_b);
        assert_eq!(report.final_test_solve_rate, report_b.final_test_solve_rate);
    }

    #[test]
    fn huge_convergence_eps_stops_after_first_iteration() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = planted_cfg(dir.path(), 3);
        cfg.train.convergence_eps = 1.0;
        let report = run(&cfg).unwrap();
        assert_eq!(report.iterations.len(), 1);
        assert!(report.converged);
        assert!(report.stop_reason.starts_with("converged"));
    }

    #[test]
    fn dataset_size_matches_pair_enumeration() {
        // Data-flow conservation: |D_pre| equals the per-task sum of
        // strictly-ordered score pairs.
        let dir = tempfile::tempdir().unwrap();
        let cfg = planted_cfg(dir.path(), 11);
        let pipeline = Pipeline::new(&cfg).unwrap();
        let mut theta = PolicyParams::zeros(&pipeline.bank, pipeline.feature_len);
        let mut theta_ref = theta.clone();
        let state = pipeline.run_iteration(1, &mut theta, &mut theta_ref).unwrap();
        let mut expected = 0usize;
        for (_, candidates) in &state.per_task_candidates {
            for a in candidates {
                for b in candidates {
                    if a.score.value > b.score.value {
                        expected += 1;
                    }
                }
            }
        }
        assert_eq!(state.dataset.len(), expected);
        // Evaluation isolation: every pair's task is a validation task.
        let val_ids: std::collections::BTreeSet<_> =
            pipeline.validation_idx.iter().map(|&i| pipeline.tasks[i].id.clone()).collect();
        assert!(state.dataset.pairs.iter().all(|p| val_ids.contains(&p.task_id)));
    }

    #[test]
    fn broken_bank_program_falls_back_to_template() {
        let dir = tempfile::tempdir().unwrap();
        let registry = build_registry(vec![]).unwrap();
        let limits = Limits::default();
        // Program 1 calls an unregistered operator, so only program 0 is
        // usable; policy mass sits on the broken one.
        let programs = vec![
            parse("workflow { let s = answer_generate() return s }").unwrap(),
            parse("workflow { let s = magic() return s }").unwrap(),
        ];
        let bank =
            WorkflowBank::from_programs_unchecked(programs, &registry, &limits).unwrap();
        assert_eq!(bank.first_valid_index(), Some(0));

        let (tasks_path, bank_path) = write_planted_inputs(dir.path(), 2, 2, 0).unwrap();
        // Overwrite the bank file with the broken two-program bank.
        let broken_source = "workflow { let s = answer_generate() return s }\n---\n\
             workflow { let s = magic() return s }\n";
        std::fs::write(&bank_path, broken_source).unwrap();
        let mut cfg = RunConfig::planted_defaults(tasks_path, bank_path, dir.path().join("o"), 1);
        cfg.metric.repeats = 1;

        // Strict construction rejects the bank outright.
        assert!(matches!(Pipeline::new(&cfg), Err(PipelineError::Bank(_))));

        // The generation hook itself: mass on the broken program exhausts the
        // cap and lands on the fallback.
        let mut params = PolicyParams::zeros(&bank, 3);
        for col in 0..3 {
            *params.weight_mut(1, col) = 50.0;
        }
        let subdir = dir.path().join("ok");
        let (tasks_path, bank_path) = write_planted_inputs(&subdir, 2, 2, 0).unwrap();
        let cfg = RunConfig::planted_defaults(tasks_path, bank_path, dir.path().join("o2"), 1);
        let pipeline = Pipeline::new(&cfg).unwrap();
        let task = pipeline.tasks[0].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut hacked = Pipeline { bank, ..pipeline };
        hacked.cfg.k = 4;
        let candidates = hacked.generate_candidates(&task, &params, &mut rng).unwrap();
        assert_eq!(candidates, vec![0, 0, 0, 0]);
    }

    #[test]
    fn empty_metrics_has_header_only() {
        let report = Report {
            config_digest: "c".into(),
            bank_digest: "b".into(),
            baseline_validation_solve_rate: 0.0,
            baseline_test_solve_rate: 0.0,
            iterations: vec![],
            final_validation_solve_rate: 0.0,
            final_test_solve_rate: 0.0,
            converged: false,
            stop_reason: "none".into(),
            wall_clock_secs: 0.0,
            executor_calls: 0,
            token_cost: TokenCost::default(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        emit_metrics(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        // Re-emission is idempotent.
        emit_metrics(&report, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), text);
    }
}
