//! The outer optimization loop: candidate generation under the
//! executability gate, scoring, preference collection, training, evaluation,
//! and the alpha-sweep ablation driver.

pub mod config;
pub mod run;

pub use config::{ExecutorMode, RunConfig};
pub use run::{ablate, emit_metrics, run, AblationRow, IterationState, Report};
