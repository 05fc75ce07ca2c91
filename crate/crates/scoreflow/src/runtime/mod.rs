//! Operator registry, workflow interpreter, and executors.

pub mod executor;
pub mod interpreter;
pub mod planted;
pub mod registry;
pub mod remote;
pub mod task;

pub use executor::{
    CallContext, ExecutionResult, Executor, ExecutorFault, ExecutorRequest, KwargData,
    OperatorResponse, RuntimeFault, TokenCost, TraceEntry,
};
pub use interpreter::interpret;
pub use planted::{planted_executor, planted_tasks, CategoryRule, PlantedExecutor, PlantedWorldSpec};
pub use registry::{build_registry, catalog, DuplicateOperator, KwargKind, OperatorRegistry, OperatorSpec};
pub use remote::{remote_executor, RemoteConfig, RemoteExecutor, RemoteSetupError, API_KEY_ENV};
pub use task::{load_tasks, save_tasks, Task, TaskFileError};
