//! Adaptive agent-workflow generation and Score-DPO optimization.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`lang`] — a closed workflow description language (parser, canonical
//!   printer, static validator). Programs describe operator call graphs with
//!   bounded loops and test-gated conditionals.
//! * [`runtime`] — the operator registry, the workflow interpreter, and two
//!   executors: a deterministic planted executor for experiments and tests,
//!   and an HTTP chat-completion executor for live backends.
//! * [`scoring`] — token-level F1 and exact-match evaluation of executed
//!   outputs, averaged over repeated runs.
//! * [`policy`] — a linear-softmax generator over a validated workflow bank
//!   with exact log-probabilities and analytic gradients.
//! * [`preference`] — preference-pair construction from scored candidates and
//!   the gap-weighted sampling distribution.
//! * [`dpo`] — the Score-DPO loss, its gradient, per-sample influence, and
//!   the inner training loop (plus plain-DPO and SFT baseline modes).
//! * [`pipeline`] — the outer iteration loop, configuration, metrics, and the
//!   alpha-sweep ablation driver.
//!
//! See the `examples/` directory for one runnable program per capability and
//! the `scoreflow` binary for the command-line entry points.

pub mod digest;
pub mod dpo;
pub mod lang;
pub mod pipeline;
pub mod policy;
pub mod preference;
pub mod runtime;
pub mod scoring;

pub use lang::{parse, print, validate, Limits, ValidationReport, WorkflowAst};
pub use policy::{FeatureVector, PolicyParams, WorkflowBank};
pub use runtime::{interpret, OperatorRegistry, Task};
