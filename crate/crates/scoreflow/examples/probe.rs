// Scratch probe for planted-run dynamics. Not part of the deliverable docs;
// prints per-iteration argmax structure per category.

use scoreflow::pipeline::run::write_planted_inputs;
use scoreflow::pipeline::RunConfig;
use scoreflow::policy::{default_bank, PolicyCheckpoint};
use scoreflow::runtime::{build_registry, load_tasks};
use scoreflow::lang::Limits;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let eta: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let beta: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let refresh: bool = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(true);
    let m: u32 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(3);
    let seed: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(7);

    let dir = tempfile::tempdir().unwrap();
    let (tasks_path, bank_path) = write_planted_inputs(dir.path(), 20, 20, seed).unwrap();
    let mut cfg = RunConfig::planted_defaults(
        tasks_path.clone(),
        bank_path,
        dir.path().join("out"),
        seed,
    );
    cfg.train.samples_per_iter = 600;
    cfg.train.convergence_eps = -1.0;
    cfg.train.eta = eta;
    cfg.train.beta = beta;
    cfg.train.refresh_reference = refresh;
    cfg.max_iterations = m;

    let report = scoreflow::pipeline::run(&cfg).unwrap();
    println!(
        "eta={eta} beta={beta} refresh={refresh} M={m} seed={seed}: baseline test {:.4}",
        report.baseline_test_solve_rate
    );
    for it in &report.iterations {
        println!(
            "iter {}: pairs={} val={:.4} test={:.4} loss={:.4}",
            it.iteration,
            it.dataset_pairs,
            it.validation_solve_rate,
            it.test_solve_rate,
            it.train_stats.last().map(|s| s.mean_loss).unwrap_or(0.0)
        );
    }

    // Inspect each iteration's argmax by category.
    let registry = build_registry(vec![]).unwrap();
    let bank = default_bank(&registry, &Limits::default()).unwrap();
    let tasks = load_tasks(&tasks_path).unwrap();
    for iteration in 1..=report.iterations.len() as u32 {
        let ckpt = PolicyCheckpoint::load(
            &cfg.output_dir.join(format!("checkpoint_{iteration}.json")),
            Some(bank.digest()),
        )
        .unwrap();
        let params = ckpt.params();
        let mut simple_hits = std::collections::BTreeMap::new();
        let mut complex_hits = std::collections::BTreeMap::new();
        for task in &tasks {
            let best = params.argmax(&task.features).unwrap();
            if task.category == "simple" {
                *simple_hits.entry(best).or_insert(0) += 1;
            } else {
                *complex_hits.entry(best).or_insert(0) += 1;
            }
        }
        println!("iter {iteration}: simple argmax {simple_hits:?} complex argmax {complex_hits:?}");
    }
}
