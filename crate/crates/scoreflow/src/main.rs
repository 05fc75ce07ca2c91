//! Command-line entry points. All logic lives in the library; this binary
//! parses arguments, runs one subcommand, and prints results.

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use scoreflow::dpo::{RewardWeightMode, SampleRef, TrainConfig};
use scoreflow::lang::{parse, validate, Limits};
use scoreflow::pipeline::config::load_config;
use scoreflow::pipeline::{ablate, run};
use scoreflow::policy::PolicyCheckpoint;
use scoreflow::preference::{load_dataset, WeightConfig};
use scoreflow::runtime::{build_registry, load_tasks, planted_executor};
use scoreflow::scoring::evaluate_workflow;

#[derive(Parser)]
#[command(name = "scoreflow", about = "Workflow-generator optimization over a workflow DSL")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Static executability report for every program in a bank file.
    ValidateBank {
        /// Path to a .flows file.
        bank: PathBuf,
    },
    /// Run the full optimization loop from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sweep the gap-weight exponent with common random numbers.
    Ablate {
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate one program on one task from the configured task set.
    Score {
        #[arg(long)]
        task: String,
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Per-sample influence dump for a preference dataset and checkpoint.
    Influence {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        #[arg(long, default_value_t = 3.0)]
        alpha: f64,
    },
    /// Write a planted task set and the default bank for experimenting.
    GenPlanted {
        #[arg(long, default_value_t = 20)]
        simple: usize,
        #[arg(long, default_value_t = 20)]
        complex: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        dir: PathBuf,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::ValidateBank { bank } => validate_bank(&bank),
        Command::Run { config } => {
            let cfg = load_config(&config).map_err(|e| e.to_string())?;
            let report = run(&cfg).map_err(|e| e.to_string())?;
            println!(
                "baseline validation/test: {:.4} / {:.4}",
                report.baseline_validation_solve_rate, report.baseline_test_solve_rate
            );
            for it in &report.iterations {
                println!(
                    "iteration {}: pairs={} validation={:.4} test={:.4}",
                    it.iteration, it.dataset_pairs, it.validation_solve_rate, it.test_solve_rate
                );
            }
            println!("stop: {}", report.stop_reason);
            println!(
                "executor calls: {}  tokens: {}",
                report.executor_calls,
                report.token_cost.total()
            );
            println!("outputs in {}", cfg.output_dir.display());
            Ok(())
        }
        Command::Ablate { alphas, config } => {
            if alphas.is_empty() {
                return Err("pass at least one alpha".into());
            }
            let cfg = load_config(&config).map_err(|e| e.to_string())?;
            let rows = ablate(&cfg, &alphas).map_err(|e| e.to_string())?;
            println!("alpha,final_validation_solve_rate,final_test_solve_rate,iterations");
            for row in rows {
                println!(
                    "{},{},{},{}",
                    row.alpha,
                    row.final_validation_solve_rate,
                    row.final_test_solve_rate,
                    row.iterations
                );
            }
            Ok(())
        }
        Command::Score { task, program, config } => score_one(&task, &program, &config),
        Command::Influence { dataset, checkpoint, beta, alpha } => {
            influence_dump(&dataset, &checkpoint, beta, alpha)
        }
        Command::GenPlanted { simple, complex, seed, dir } => {
            let (tasks_path, bank_path) =
                scoreflow::pipeline::run::write_planted_inputs(&dir, simple, complex, seed)
                    .map_err(|e| e.to_string())?;
            println!("wrote {} and {}", tasks_path.display(), bank_path.display());
            Ok(())
        }
    }
}

fn validate_bank(bank_path: &PathBuf) -> Result<(), String> {
    let source = std::fs::read_to_string(bank_path).map_err(|e| e.to_string())?;
    let programs = scoreflow::lang::parse_bank_source(&source).map_err(|e| e.to_string())?;
    let registry = build_registry(vec![]).map_err(|e| e.to_string())?;
    let limits = Limits::default();
    let mut all_ok = true;
    for (index, ast) in programs.iter().enumerate() {
        let report = validate(ast, &registry, &limits);
        if report.ok {
            println!("program {index}: ok (static_call_count={})", report.static_call_count);
        } else {
            all_ok = false;
            println!("program {index}: FAIL (static_call_count={})", report.static_call_count);
            for violation in &report.violations {
                println!("  [{:?}] {} at {}", violation.code, violation.message, violation.span);
            }
        }
    }
    if all_ok {
        Ok(())
    } else {
        Err("bank has invalid programs".into())
    }
}

fn score_one(task_id: &str, program: &PathBuf, config: &PathBuf) -> Result<(), String> {
    let cfg = load_config(config).map_err(|e| e.to_string())?;
    let tasks = load_tasks(&cfg.tasks_path).map_err(|e| e.to_string())?;
    let task = tasks
        .iter()
        .find(|t| t.id == task_id)
        .ok_or_else(|| format!("task `{task_id}` not found in {}", cfg.tasks_path.display()))?;
    let source = std::fs::read_to_string(program).map_err(|e| e.to_string())?;
    let ast = parse(&source).map_err(|e| e.to_string())?;
    let registry = build_registry(vec![]).map_err(|e| e.to_string())?;
    let report = validate(&ast, &registry, &cfg.limits);
    if !report.ok {
        let details: Vec<String> =
            report.violations.iter().map(|v| v.message.clone()).collect();
        return Err(format!("program fails static validation: {}", details.join("; ")));
    }
    let executor = planted_executor(cfg.planted.clone());
    let eval = evaluate_workflow(&ast, task, &executor, &cfg.metric, &cfg.limits)
        .map_err(|e| e.to_string())?;
    println!("{}", serde_json::to_string_pretty(&eval.score).expect("score serializes"));
    Ok(())
}

fn influence_dump(
    dataset_path: &PathBuf,
    checkpoint_path: &PathBuf,
    beta: f64,
    alpha: f64,
) -> Result<(), String> {
    let ds = load_dataset(dataset_path).map_err(|e| e.to_string())?;
    let ckpt = PolicyCheckpoint::load(checkpoint_path, None).map_err(|e| e.to_string())?;
    let params = ckpt.params();
    let reference = ckpt.params_ref();
    let cfg = TrainConfig {
        beta,
        weight_cfg: if alpha == 0.0 { WeightConfig::uniform() } else { WeightConfig::power(alpha) },
        reward_weight_mode: if alpha == 0.0 { RewardWeightMode::Unit } else { RewardWeightMode::Score },
        ..TrainConfig::default()
    };
    // Enumerate distinct samples (task, workflow, score) across both sides.
    let mut samples: Vec<SampleRef> = Vec::new();
    for pair in &ds.pairs {
        for (index, score) in
            [(pair.winner_index, pair.s_w), (pair.loser_index, pair.s_l)]
        {
            let z = SampleRef { task_id: pair.task_id.clone(), bank_index: index, score };
            if !samples.iter().any(|s| s == &z) {
                samples.push(z);
            }
        }
    }
    println!("task_id,bank_index,score,influence");
    for z in &samples {
        let value = scoreflow::dpo::influence(z, &ds, &params, &reference, &cfg)
            .map_err(|e| e.to_string())?;
        println!("{},{},{},{}", z.task_id, z.bank_index, z.score, value);
    }
    Ok(())
}
