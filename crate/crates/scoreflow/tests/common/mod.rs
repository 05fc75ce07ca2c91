//! Shared helpers for the integration suites: a chi-squared goodness-of-fit
//! check, a random AST generator for fuzzing, and random preference
//! datasets for the optimization checks.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use scoreflow::lang::ast::{Call, Expr, Kwarg, KwargValue, Span, Statement, WorkflowAst};
use scoreflow::policy::{FeatureVector, PolicyParams};
use scoreflow::preference::{PreferenceDataset, PreferencePair};

/// Goodness-of-fit p-value of observed counts against target probabilities.
/// Cells with expected count below 5 are pooled (Cochran's rule).
pub fn chi_squared_p_value(observed: &[u64], probabilities: &[f64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    assert_eq!(observed.len(), probabilities.len());
    let n: u64 = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new(); // (observed, expected)
    let mut pooled = (0.0, 0.0);
    for (&obs, &p) in observed.iter().zip(probabilities) {
        let expected = p * n as f64;
        if expected < 5.0 {
            pooled.0 += obs as f64;
            pooled.1 += expected;
        } else {
            cells.push((obs as f64, expected));
        }
    }
    if pooled.1 > 0.0 {
        cells.push(pooled);
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let statistic: f64 =
        cells.iter().map(|(obs, exp)| (obs - exp) * (obs - exp) / exp).sum();
    let dof = (cells.len() - 1) as f64;
    let dist = ChiSquared::new(dof).expect("dof positive");
    1.0 - dist.cdf(statistic)
}

const OPERATOR_POOL: &[(&str, Option<&str>)] = &[
    ("answer_generate", None),
    ("custom", Some("instruction")),
    ("code_generate", Some("instruction")),
];

/// Random well-formed AST for round-trip fuzzing. Depth-bounded; uses the
/// full construct set including lists, loops, and conditionals.
pub fn random_ast(rng: &mut ChaCha8Rng) -> WorkflowAst {
    let mut counter = 0usize;
    let mut bound: Vec<String> = Vec::new();
    let mut lists: Vec<String> = Vec::new();
    let statements = random_block(rng, 2, &mut counter, &mut bound, &mut lists);
    let mut statements = statements;
    // Guarantee at least one scalar binding so the return target exists.
    if bound.is_empty() {
        let name = fresh(&mut counter);
        statements.push(Statement::Let {
            name: name.clone(),
            call: make_call(rng, &bound, &lists),
            span: Span::ZERO,
        });
        bound.push(name);
    }
    let ret = bound[rng.gen_range(0..bound.len())].clone();
    WorkflowAst { statements, return_expr: Expr { name: ret, span: Span::ZERO } }
}

fn fresh(counter: &mut usize) -> String {
    let name = format!("v{counter}");
    *counter += 1;
    name
}

fn make_call(rng: &mut ChaCha8Rng, bound: &[String], lists: &[String]) -> Call {
    // Prefer var/list-consuming operators when bindings exist.
    let choice = rng.gen_range(0..6);
    let (operator, kwargs) = match choice {
        0 | 1 => {
            let (name, kwarg) = OPERATOR_POOL[rng.gen_range(0..OPERATOR_POOL.len())];
            let kwargs = kwarg
                .map(|k| {
                    vec![Kwarg {
                        name: k.to_string(),
                        value: KwargValue::StringLit(random_string(rng)),
                        span: Span::ZERO,
                    }]
                })
                .unwrap_or_default();
            (name.to_string(), kwargs)
        }
        2 if !bound.is_empty() => {
            let var = bound[rng.gen_range(0..bound.len())].clone();
            (
                "review".to_string(),
                vec![Kwarg {
                    name: "pre_solution".into(),
                    value: KwargValue::Var(var),
                    span: Span::ZERO,
                }],
            )
        }
        3 if !bound.is_empty() => {
            let count = rng.gen_range(1..=3.min(bound.len()));
            let vars: Vec<String> =
                (0..count).map(|_| bound[rng.gen_range(0..bound.len())].clone()).collect();
            (
                "sc_ensemble".to_string(),
                vec![Kwarg {
                    name: "solutions".into(),
                    value: KwargValue::VarList(vars),
                    span: Span::ZERO,
                }],
            )
        }
        4 if !lists.is_empty() => {
            let list = lists[rng.gen_range(0..lists.len())].clone();
            (
                "sc_ensemble".to_string(),
                vec![Kwarg {
                    name: "solutions".into(),
                    value: KwargValue::Var(list),
                    span: Span::ZERO,
                }],
            )
        }
        _ => ("answer_generate".to_string(), vec![]),
    };
    Call { operator_name: operator, kwargs, span: Span::ZERO }
}

fn random_string(rng: &mut ChaCha8Rng) -> String {
    let pool = ["plan it", "solve \"fast\"", "a\\b", "check twice", ""];
    pool[rng.gen_range(0..pool.len())].to_string()
}

fn random_block(
    rng: &mut ChaCha8Rng,
    depth: u32,
    counter: &mut usize,
    bound: &mut Vec<String>,
    lists: &mut Vec<String>,
) -> Vec<Statement> {
    let len = rng.gen_range(1..=4);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let roll = rng.gen_range(0..10);
        match roll {
            0 if depth > 0 => {
                let body = random_block(rng, depth - 1, counter, bound, lists);
                out.push(Statement::Repeat {
                    count: rng.gen_range(1..=4),
                    body,
                    span: Span::ZERO,
                });
            }
            1 if depth > 0 && !bound.is_empty() => {
                let condition = bound[rng.gen_range(0..bound.len())].clone();
                // Branch bodies bind only throwaway names; the enclosing
                // scope keeps its bindings, matching the intersection join.
                let mut then_bound = bound.clone();
                let mut else_bound = bound.clone();
                let then_body =
                    random_block(rng, depth - 1, counter, &mut then_bound, &mut lists.clone());
                let else_body =
                    random_block(rng, depth - 1, counter, &mut else_bound, &mut lists.clone());
                out.push(Statement::IfTest {
                    condition: Expr { name: condition, span: Span::ZERO },
                    then_body,
                    else_body,
                    span: Span::ZERO,
                });
            }
            2 => {
                let name = fresh(counter);
                lists.push(name.clone());
                out.push(Statement::LetEmptyList { name, span: Span::ZERO });
            }
            3 if !lists.is_empty() && !bound.is_empty() => {
                let list = lists[rng.gen_range(0..lists.len())].clone();
                let value = bound[rng.gen_range(0..bound.len())].clone();
                out.push(Statement::Push {
                    list_name: list,
                    value: Expr { name: value, span: Span::ZERO },
                    span: Span::ZERO,
                });
            }
            _ => {
                let call = make_call(rng, bound, lists);
                let name = fresh(counter);
                bound.push(name.clone());
                out.push(Statement::Let { name, call, span: Span::ZERO });
            }
        }
    }
    out
}

/// A random same-task preference dataset with distinct per-candidate scores,
/// for the optimization-level checks. Every candidate index is unique per
/// task, so (task, bank index) identifies one sample.
pub struct RandomDataset {
    pub dataset: PreferenceDataset,
    pub params: PolicyParams,
    pub reference: PolicyParams,
    /// (task_id, features, candidate bank indices with scores)
    pub tasks: Vec<(String, FeatureVector, Vec<(usize, f64)>)>,
}

pub fn random_dataset(rng: &mut ChaCha8Rng, max_pairs: usize) -> RandomDataset {
    let bank_size = rng.gen_range(4..8);
    let feature_len = rng.gen_range(1..4);
    let gen_weights = |rng: &mut ChaCha8Rng, scale: f64| -> Vec<f64> {
        (0..bank_size * feature_len).map(|_| rng.gen_range(-scale..scale)).collect()
    };
    let reference = PolicyParams {
        bank_digest: "random".into(),
        bank_size,
        feature_len,
        weights: gen_weights(rng, 0.4),
    };
    let mut params = reference.clone();
    for (w, delta) in params.weights.iter_mut().zip(gen_weights(rng, 0.2)) {
        *w += delta;
    }
    let n_tasks = rng.gen_range(1..3);
    let mut tasks = Vec::new();
    let mut pairs = Vec::new();
    for t in 0..n_tasks {
        let task_id = format!("task-{t}");
        let features =
            FeatureVector::new((0..feature_len).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let m = rng.gen_range(2..=4.min(bank_size));
        // Distinct candidate indices and well-separated scores.
        let mut indices: Vec<usize> = (0..bank_size).collect();
        for i in (1..indices.len()).rev() {
            let j = rng.gen_range(0..=i);
            indices.swap(i, j);
        }
        indices.truncate(m);
        let mut scores: Vec<f64> = Vec::new();
        while scores.len() < m {
            let s = (rng.gen_range(0..=20) as f64) / 20.0;
            if scores.iter().all(|prev| (prev - s).abs() > 1e-9) {
                scores.push(s);
            }
        }
        let candidates: Vec<(usize, f64)> =
            indices.into_iter().zip(scores.into_iter()).collect();
        for (i, &(wi, sw)) in candidates.iter().enumerate() {
            for (j, &(li, sl)) in candidates.iter().enumerate() {
                if i != j && sw > sl && pairs.len() < max_pairs {
                    pairs.push(
                        PreferencePair::new(
                            task_id.clone(),
                            features.clone(),
                            wi,
                            li,
                            sw,
                            sl,
                        )
                        .unwrap(),
                    );
                }
            }
        }
        tasks.push((task_id, features, candidates));
    }
    RandomDataset {
        dataset: PreferenceDataset { pairs, iteration: 0, config_digest: "random".into() },
        params,
        reference,
        tasks,
    }
}
