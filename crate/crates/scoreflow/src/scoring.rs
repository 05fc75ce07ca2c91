//! Evaluation scores in `[0, 1]`: token-level F1 for QA-style answers,
//! exact match with a numeric-equivalence fallback for the rest, averaged
//! over repeated evaluations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::validate::Limits;
use crate::lang::WorkflowAst;
use crate::runtime::executor::{Executor, TokenCost};
use crate::runtime::interpret;
use crate::runtime::task::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricKind {
    TokenF1,
    ExactMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub kind: MetricKind,
    pub repeats: u32,
}

impl Metric {
    pub fn new(kind: MetricKind, repeats: u32) -> Self {
        assert!(repeats >= 1, "repeats must be at least 1");
        Metric { kind, repeats }
    }

    pub fn score(&self, prediction: &str, gold: &str) -> f64 {
        match self.kind {
            MetricKind::TokenF1 => token_f1(prediction, gold),
            MetricKind::ExactMatch => exact_match(prediction, gold),
        }
    }
}

impl Default for Metric {
    fn default() -> Self {
        Metric { kind: MetricKind::ExactMatch, repeats: 3 }
    }
}

/// Mean of the per-repeat scores for one (task, workflow) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub value: f64,
    pub repeats_used: u32,
    pub per_repeat: Vec<f64>,
}

/// Lowercase, strip ASCII punctuation, drop articles, split on whitespace.
pub fn normalize_answer(text: &str) -> Vec<String> {
    let lowered: String = text
        .chars()
        .flat_map(|c| c.to_lowercase())
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    lowered
        .split_whitespace()
        .filter(|tok| !matches!(*tok, "a" | "an" | "the"))
        .map(|tok| tok.to_string())
        .collect()
}

/// Bag-of-tokens F1 between normalized prediction and gold.
pub fn token_f1(prediction: &str, gold: &str) -> f64 {
    let pred = normalize_answer(prediction);
    let gold = normalize_answer(gold);
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        (false, false) => {}
    }
    let mut counts = std::collections::BTreeMap::new();
    for tok in &pred {
        *counts.entry(tok.as_str()).or_insert(0i64) += 1;
    }
    let mut overlap = 0i64;
    for tok in &gold {
        if let Some(n) = counts.get_mut(tok.as_str()) {
            if *n > 0 {
                *n -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Parse a plain decimal, allowing a trailing percent sign that divides the
/// value by 100. Rejects anything that is not a finite literal number.
fn parse_decimal(text: &str) -> Option<f64> {
    let trimmed = text.trim();
    let (body, scale) =
        if let Some(stripped) = trimmed.strip_suffix('%') { (stripped.trim(), 0.01) } else { (trimmed, 1.0) };
    if !body.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    let value: f64 = body.parse().ok()?;
    value.is_finite().then_some(value * scale)
}

/// 1 iff the normalized token lists are equal, or both sides parse as
/// decimals equal within 1e-9 relative tolerance (`10%` equals `0.1`).
pub fn exact_match(prediction: &str, gold: &str) -> f64 {
    if normalize_answer(prediction) == normalize_answer(gold) {
        return 1.0;
    }
    if let (Some(a), Some(b)) = (parse_decimal(prediction), parse_decimal(gold)) {
        if a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) {
            return 1.0;
        }
    }
    0.0
}

/// All evaluation repeats faulted: the candidate fails the executability
/// condition at runtime.
#[derive(Debug, Error)]
#[error("all {repeats} evaluation repeats faulted; last fault: {last_fault}")]
pub struct CStarFailure {
    pub repeats: u32,
    pub last_fault: String,
}

/// A scored evaluation together with its executor accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub score: Score,
    pub token_cost: TokenCost,
    pub executor_calls: u64,
}

/// Interpret a workflow `metric.repeats` times (repeat index salted into the
/// execution) and average the per-repeat scores. Faulted repeats score zero;
/// if every repeat faults the candidate is rejected.
pub fn evaluate_workflow(
    ast: &WorkflowAst,
    task: &Task,
    executor: &dyn Executor,
    metric: &Metric,
    limits: &Limits,
) -> Result<Evaluation, CStarFailure> {
    let mut per_repeat = Vec::with_capacity(metric.repeats as usize);
    let mut faults = 0;
    let mut last_fault = String::new();
    let mut token_cost = TokenCost::default();
    let mut executor_calls = 0u64;
    for repeat in 0..metric.repeats {
        match interpret(ast, task, executor, limits, u64::from(repeat)) {
            Ok(result) => {
                per_repeat.push(metric.score(&result.output, &task.gold));
                token_cost
                    .add(result.token_cost.prompt_tokens, result.token_cost.completion_tokens);
                executor_calls += result.per_call_trace.len() as u64;
            }
            Err(fault) => {
                per_repeat.push(0.0);
                faults += 1;
                last_fault = fault.to_string();
            }
        }
    }
    if faults == metric.repeats {
        return Err(CStarFailure { repeats: metric.repeats, last_fault });
    }
    let value = per_repeat.iter().sum::<f64>() / per_repeat.len() as f64;
    Ok(Evaluation {
        score: Score { value, repeats_used: metric.repeats, per_repeat },
        token_cost,
        executor_calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::runtime::planted::{planted_executor, planted_tasks, PlantedWorldSpec};

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_answer("The cat, sat."), vec!["cat", "sat"]);
        assert_eq!(normalize_answer(""), Vec::<String>::new());
        assert_eq!(normalize_answer("A  B the b"), vec!["b", "b"]);
    }

    #[test]
    fn f1_identity_and_disjoint() {
        assert_eq!(token_f1("cat sat", "cat sat"), 1.0);
        assert_eq!(token_f1("x", "y"), 0.0);
        assert_eq!(token_f1("", ""), 1.0);
        assert_eq!(token_f1("word", ""), 0.0);
    }

    #[test]
    fn f1_partial_overlap_hand_value() {
        // pred tokens {cat, sat}, gold {cat, sat, down}: P=1, R=2/3, F1=0.8.
        let got = token_f1("the cat sat", "cat sat down");
        assert!((got - 0.8).abs() < 1e-12);
    }

    #[test]
    fn f1_is_symmetric() {
        let a = "alpha beta beta gamma";
        let b = "beta gamma gamma delta";
        assert!((token_f1(a, b) - token_f1(b, a)).abs() < 1e-15);
    }

    #[test]
    fn exact_match_basics() {
        assert_eq!(exact_match("42", "42"), 1.0);
        assert_eq!(exact_match("41", "42"), 0.0);
        assert_eq!(exact_match("10%", "0.1"), 1.0);
        assert_eq!(exact_match("0.1", "10%"), 1.0);
        assert_eq!(exact_match("0.5", "50%"), 1.0);
        assert_eq!(exact_match("Paris", "paris."), 1.0);
    }

    #[test]
    fn numeric_fallback_rejects_non_numbers() {
        assert_eq!(exact_match("inf", "inf"), 1.0); // token equality, not numeric
        assert_eq!(exact_match("inf", "infinity"), 0.0);
        assert_eq!(exact_match("%", "0"), 0.0);
    }

    #[test]
    fn exact_match_implies_token_f1_on_token_branch() {
        for (a, b) in [("The answer", "answer"), ("42", "42.")] {
            if exact_match(a, b) == 1.0 && normalize_answer(a) == normalize_answer(b) {
                assert_eq!(token_f1(a, b), 1.0);
            }
        }
    }

    #[test]
    fn evaluate_clean_simple_task_is_perfect() {
        let ast = parse("workflow { let s = answer_generate() return s }").unwrap();
        let executor = planted_executor(PlantedWorldSpec::adaptivity_world(0.0, 1));
        let task = planted_tasks(1, 0, 7).remove(0);
        let metric = Metric::new(MetricKind::ExactMatch, 3);
        let eval =
            evaluate_workflow(&ast, &task, &executor, &metric, &Limits::default()).unwrap();
        assert_eq!(eval.score.value, 1.0);
        assert_eq!(eval.score.per_repeat, vec![1.0, 1.0, 1.0]);
        assert_eq!(eval.executor_calls, 6); // 2 calls per repeat
    }

    #[test]
    fn evaluate_complex_task_with_template_scores_zero() {
        let ast = parse("workflow { let s = answer_generate() return s }").unwrap();
        let executor = planted_executor(PlantedWorldSpec::adaptivity_world(0.0, 1));
        let task = planted_tasks(0, 1, 7).remove(0);
        let metric = Metric::new(MetricKind::ExactMatch, 3);
        let eval =
            evaluate_workflow(&ast, &task, &executor, &metric, &Limits::default()).unwrap();
        assert_eq!(eval.score.value, 0.0);
    }

    #[test]
    fn noisy_per_repeat_pattern_is_reproducible() {
        let ast = parse("workflow { let s = answer_generate() return s }").unwrap();
        let executor = planted_executor(PlantedWorldSpec::adaptivity_world(0.3, 9));
        let task = planted_tasks(1, 0, 5).remove(0);
        let metric = Metric::new(MetricKind::ExactMatch, 5);
        let a = evaluate_workflow(&ast, &task, &executor, &metric, &Limits::default()).unwrap();
        let b = evaluate_workflow(&ast, &task, &executor, &metric, &Limits::default()).unwrap();
        assert_eq!(a, b);
        let mean = a.score.per_repeat.iter().sum::<f64>() / a.score.per_repeat.len() as f64;
        assert!((a.score.value - mean).abs() < 1e-15);
    }
}
