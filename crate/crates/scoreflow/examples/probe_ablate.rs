// Scratch probe for the noisy-arm alpha sweep.

use scoreflow::pipeline::run::write_planted_inputs;
use scoreflow::pipeline::{ablate, RunConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let noise: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.15);
    let s: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(600);
    let repeats: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    let eta: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let first_seed: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(101);
    let n_seeds: u64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(3);

    println!("noise={noise} S={s} repeats={repeats} eta={eta}");
    let mut ge0 = 0;
    let mut gt100 = 0;
    for seed in (0..n_seeds).map(|i| first_seed + i * 101) {
        let dir = tempfile::tempdir().unwrap();
        let (tasks_path, bank_path) = write_planted_inputs(dir.path(), 20, 20, seed).unwrap();
        let mut cfg =
            RunConfig::planted_defaults(tasks_path, bank_path, dir.path().join("out"), seed);
        cfg.planted.noise_flip_prob = noise;
        cfg.train.samples_per_iter = s;
        cfg.metric.repeats = repeats;
        cfg.train.eta = eta;
        let rows = ablate(&cfg, &[0.0, 3.0, 100.0]).unwrap();
        let rate =
            |alpha: f64| rows.iter().find(|r| r.alpha == alpha).unwrap().final_test_solve_rate;
        let iters =
            |alpha: f64| rows.iter().find(|r| r.alpha == alpha).unwrap().iterations;
        println!(
            "seed {seed}: a0 {:.4} ({}it)  a3 {:.4} ({}it)  a100 {:.4} ({}it)   a3>=a0 {}  a3>a100 {}",
            rate(0.0),
            iters(0.0),
            rate(3.0),
            iters(3.0),
            rate(100.0),
            iters(100.0),
            rate(3.0) >= rate(0.0),
            rate(3.0) > rate(100.0)
        );
        ge0 += u32::from(rate(3.0) >= rate(0.0));
        gt100 += u32::from(rate(3.0) > rate(100.0));
    }
    println!("majority: a3>=a0 {ge0}/{n_seeds}  a3>a100 {gt100}/{n_seeds}");
}
