//! The executor abstraction: how operator calls reach a backend.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Duration;
use thiserror::Error;

use super::task::Task;

/// One operator invocation as seen by a backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutorRequest {
    pub operator_name: String,
    pub task_prompt: String,
    pub kwarg_values: BTreeMap<String, KwargData>,
    /// Sampling temperature, in `[0, 2]`.
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KwargData {
    Str(String),
    List(Vec<String>),
}

impl KwargData {
    pub fn render(&self) -> String {
        match self {
            KwargData::Str(s) => s.clone(),
            KwargData::List(items) => items.join("\n"),
        }
    }
}

/// Workflow-level context accompanying a request. Wire executors ignore it;
/// the planted executor keys its deterministic world off these fields.
#[derive(Debug, Clone)]
pub struct CallContext<'a> {
    pub task: &'a Task,
    pub workflow_digest: &'a str,
    pub static_call_count: u64,
    pub operators_present: &'a std::collections::BTreeSet<String>,
    /// Evaluation salt; repeated evaluations mix their repeat index in here.
    pub eval_salt: u64,
}

/// What a backend returns for one call.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorResponse {
    pub text: String,
    /// Pass/fail result, populated only by the `test` operator.
    pub verdict: Option<bool>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Backend-reported latency. Deterministic backends report zero so whole
    /// execution results stay bit-identical across hosts.
    pub elapsed: Duration,
    /// How many attempts the backend needed (retries count).
    pub attempts: u32,
}

#[derive(Debug, Error)]
pub enum ExecutorFault {
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// A backend that can run operator calls. Implementations must tolerate
/// concurrent calls.
pub trait Executor: Send + Sync {
    fn call(&self, request: &ExecutorRequest, ctx: &CallContext<'_>) -> Result<OperatorResponse, ExecutorFault>;
}

/// Prompt/completion token tally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenCost {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl TokenCost {
    pub fn add(&mut self, prompt: u64, completion: u64) {
        self.prompt_tokens += prompt;
        self.completion_tokens += completion;
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

/// Whitespace token estimate, used when a backend reports no usage.
pub fn estimate_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// One line of the per-call trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub operator_name: String,
    pub request_digest: String,
    pub response_digest: String,
    pub elapsed: Duration,
    pub attempts: u32,
}

/// Successful interpretation of one workflow on one task.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    pub output: String,
    pub per_call_trace: Vec<TraceEntry>,
    pub total_elapsed: Duration,
    pub token_cost: TokenCost,
    /// Test verdicts recorded for `let`-bound test calls, keyed by variable.
    pub verdicts: BTreeMap<String, bool>,
}

/// Faults that fail the executability condition at runtime.
#[derive(Debug, Error)]
pub enum RuntimeFault {
    #[error("workflow exceeded the wall-clock budget ({elapsed:?} > {budget:?})")]
    Timeout { elapsed: Duration, budget: Duration },
    #[error("executor fault in `{operator}`: {source}")]
    Executor {
        operator: String,
        #[source]
        source: ExecutorFault,
    },
    #[error("invalid program reached the interpreter: {0}")]
    Invalid(String),
}
