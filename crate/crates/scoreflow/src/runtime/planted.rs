//! A deterministic planted world: a stand-in executor whose correctness rules
//! are known, so end-to-end behavior can be asserted exactly.
//!
//! Each task category maps to a rule over the whole workflow: either a cap on
//! the weighted static call count or a set of operators that must be present.
//! The terminal `extract_answer` call resolves to the task's gold answer when
//! the rule accepts, and to a fixed wrong string otherwise. An optional
//! seeded noise flip perturbs the verdict per (task, workflow, repeat) so the
//! same pair always scores the same within a run.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::executor::{
    estimate_tokens, CallContext, Executor, ExecutorFault, ExecutorRequest, OperatorResponse,
};
use super::task::Task;
use crate::digest::{hash_to_unit, short_digest};
use crate::policy::FeatureVector;

pub const WRONG_OUTPUT: &str = "WRONG";

/// Acceptance rule for one task category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CategoryRule {
    /// Accept workflows whose weighted static call count is at most this.
    MaxStaticCalls(u64),
    /// Accept workflows that call every one of these operators.
    RequiresOperators(Vec<String>),
    /// Accept everything; useful in unit tests.
    AlwaysCorrect,
}

impl CategoryRule {
    pub fn accepts(&self, static_call_count: u64, operators: &std::collections::BTreeSet<String>) -> bool {
        match self {
            CategoryRule::MaxStaticCalls(max) => static_call_count <= *max,
            CategoryRule::RequiresOperators(required) => {
                required.iter().all(|op| operators.contains(op))
            }
            CategoryRule::AlwaysCorrect => true,
        }
    }

    /// Parse the config-file form: `max_calls:N`, `requires:a+b`, or `always`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        if text == "always" {
            return Ok(CategoryRule::AlwaysCorrect);
        }
        if let Some(rest) = text.strip_prefix("max_calls:") {
            let max = rest.trim().parse::<u64>().map_err(|_| {
                format!("bad max_calls rule `{text}`: expected max_calls:<integer>")
            })?;
            return Ok(CategoryRule::MaxStaticCalls(max));
        }
        if let Some(rest) = text.strip_prefix("requires:") {
            let ops: Vec<String> = rest
                .split('+')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            if ops.is_empty() {
                return Err(format!("bad requires rule `{text}`: no operators listed"));
            }
            return Ok(CategoryRule::RequiresOperators(ops));
        }
        Err(format!("unknown rule `{text}`: expected max_calls:<n>, requires:<a+b>, or always"))
    }

    pub fn render(&self) -> String {
        match self {
            CategoryRule::MaxStaticCalls(max) => format!("max_calls:{max}"),
            CategoryRule::RequiresOperators(ops) => format!("requires:{}", ops.join("+")),
            CategoryRule::AlwaysCorrect => "always".to_string(),
        }
    }
}

/// Full description of the planted world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedWorldSpec {
    pub rules: BTreeMap<String, CategoryRule>,
    /// Probability in `[0, 0.5)` that a verdict flips, keyed per
    /// (task, workflow, repeat).
    pub noise_flip_prob: f64,
    pub seed: u64,
}

impl PlantedWorldSpec {
    /// The two-category world used by the end-to-end experiments: simple
    /// tasks reward small programs, complex tasks reward programs that run
    /// both the programmer and the ensemble.
    pub fn adaptivity_world(noise_flip_prob: f64, seed: u64) -> Self {
        let mut rules = BTreeMap::new();
        rules.insert("simple".to_string(), CategoryRule::MaxStaticCalls(2));
        rules.insert(
            "complex".to_string(),
            CategoryRule::RequiresOperators(vec!["programmer".into(), "sc_ensemble".into()]),
        );
        PlantedWorldSpec { rules, noise_flip_prob, seed }
    }

    /// True verdict before noise: does the rule for this category accept?
    pub fn base_verdict(
        &self,
        category: &str,
        static_call_count: u64,
        operators: &std::collections::BTreeSet<String>,
    ) -> bool {
        self.rules
            .get(category)
            .map(|rule| rule.accepts(static_call_count, operators))
            .unwrap_or(false)
    }

    /// Verdict after the seeded noise flip.
    pub fn noisy_verdict(&self, ctx: &CallContext<'_>) -> bool {
        let base = self.base_verdict(&ctx.task.category, ctx.static_call_count, ctx.operators_present);
        if self.noise_flip_prob <= 0.0 {
            return base;
        }
        let roll = hash_to_unit(&[
            &self.seed.to_le_bytes(),
            &ctx.eval_salt.to_le_bytes(),
            ctx.task.id.as_bytes(),
            ctx.workflow_digest.as_bytes(),
        ]);
        if roll < self.noise_flip_prob {
            !base
        } else {
            base
        }
    }
}

/// Deterministic executor over a [`PlantedWorldSpec`].
pub struct PlantedExecutor {
    spec: PlantedWorldSpec,
}

pub fn planted_executor(spec: PlantedWorldSpec) -> PlantedExecutor {
    PlantedExecutor { spec }
}

impl PlantedExecutor {
    pub fn spec(&self) -> &PlantedWorldSpec {
        &self.spec
    }
}

impl Executor for PlantedExecutor {
    fn call(
        &self,
        request: &ExecutorRequest,
        ctx: &CallContext<'_>,
    ) -> Result<OperatorResponse, ExecutorFault> {
        let (text, verdict) = match request.operator_name.as_str() {
            "extract_answer" => {
                let verdict = self.spec.noisy_verdict(ctx);
                let text =
                    if verdict { ctx.task.gold.clone() } else { WRONG_OUTPUT.to_string() };
                (text, None)
            }
            "test" => {
                let solution = request
                    .kwarg_values
                    .get("solution")
                    .map(|k| k.render())
                    .unwrap_or_default();
                let pass = solution == ctx.task.gold;
                (solution, Some(pass))
            }
            op => {
                // Deterministic trace string: a function of the call and the
                // (task, workflow) identity only.
                let request_repr = serde_json::to_string(request).expect("request serializes");
                let text = format!(
                    "[{op} {} w{} r{}]",
                    ctx.task.id,
                    &ctx.workflow_digest[..12.min(ctx.workflow_digest.len())],
                    short_digest(&request_repr)
                );
                (text, None)
            }
        };
        let prompt_tokens = estimate_tokens(&request.task_prompt);
        let completion_tokens = estimate_tokens(&text);
        Ok(OperatorResponse {
            text,
            verdict,
            prompt_tokens,
            completion_tokens,
            elapsed: std::time::Duration::ZERO,
            attempts: 1,
        })
    }
}

/// Generate an interleaved simple/complex task set for planted experiments.
///
/// Features are `[1, category, normalized prompt length]` with the category
/// signed as simple = -1, complex = +1. The signed encoding gives both
/// categories a discriminating direction; a 0/1 bit leaves the zero-coded
/// category separable only through features it shares with the other one,
/// which makes the planted experiment a seed-dependent coin flip.
///
/// Prompt lengths vary deterministically so the third feature spreads over
/// its range without carrying rule information.
pub fn planted_tasks(n_simple: usize, n_complex: usize, seed: u64) -> Vec<Task> {
    let total = n_simple + n_complex;
    let mut tasks = Vec::with_capacity(total);
    let mut remaining = (n_simple, n_complex);
    for index in 0..total {
        // Alternate categories while both remain, so any stride-based split
        // stays balanced.
        let simple = if remaining.0 > 0 && remaining.1 > 0 {
            index % 2 == 0
        } else {
            remaining.0 > 0
        };
        if simple {
            remaining.0 -= 1;
        } else {
            remaining.1 -= 1;
        }
        let category = if simple { "simple" } else { "complex" };
        let padding_words =
            (hash_to_u64_local(seed, index as u64) % 24) as usize;
        let mut prompt = format!("Task {index}: resolve item {} in the {category} track.", index * 7 + 3);
        for w in 0..padding_words {
            prompt.push_str(&format!(" detail{w}"));
        }
        let norm_len = (prompt.len() as f64 / 200.0).min(1.0);
        tasks.push(Task {
            id: format!("task-{index:03}"),
            category: category.to_string(),
            prompt,
            gold: format!("gold-{index}"),
            features: FeatureVector::new(vec![1.0, if simple { -1.0 } else { 1.0 }, norm_len]),
            public_tests: None,
        });
    }
    tasks
}

fn hash_to_u64_local(seed: u64, index: u64) -> u64 {
    crate::digest::hash_to_u64(&[b"planted-task", &seed.to_le_bytes(), &index.to_le_bytes()])
}
