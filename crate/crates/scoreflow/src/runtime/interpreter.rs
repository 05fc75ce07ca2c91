//! The workflow interpreter: runs a validated program against an executor.
//!
//! Statements execute in order; `repeat` bodies run their literal bound,
//! `if test(x)` dispatches the test operator and branches on its verdict, and
//! the return value is passed through `extract_answer` to form the final
//! output. The wall-clock budget is checked after every executor call, so an
//! overrun is detected within one call granularity.

use std::collections::BTreeMap;
use std::time::Instant;

use super::executor::{
    CallContext, ExecutionResult, Executor, ExecutorRequest, KwargData, RuntimeFault, TokenCost,
    TraceEntry,
};
use super::task::Task;
use crate::digest::short_digest;
use crate::lang::ast::{Call, Expr, KwargValue, Statement, WorkflowAst};
use crate::lang::validate::Limits;

#[derive(Debug, Clone)]
enum Value {
    Str(String),
    List(Vec<String>),
}

struct Interp<'a> {
    executor: &'a dyn Executor,
    ctx: CallContext<'a>,
    limits: &'a Limits,
    started: Instant,
    env: BTreeMap<String, Value>,
    trace: Vec<TraceEntry>,
    token_cost: TokenCost,
    verdicts: BTreeMap<String, bool>,
    /// Sum of backend-reported latencies; deterministic for planted runs.
    reported_elapsed: std::time::Duration,
}

impl<'a> Interp<'a> {
    fn scalar(&self, expr: &Expr) -> Result<String, RuntimeFault> {
        match self.env.get(&expr.name) {
            Some(Value::Str(s)) => Ok(s.clone()),
            Some(Value::List(items)) => Ok(items.join("\n")),
            None => Err(RuntimeFault::Invalid(format!("unbound variable `{}`", expr.name))),
        }
    }

    fn dispatch(&mut self, call: &Call) -> Result<(String, Option<bool>), RuntimeFault> {
        let mut kwarg_values = BTreeMap::new();
        for kwarg in &call.kwargs {
            let data = match &kwarg.value {
                KwargValue::StringLit(s) => KwargData::Str(s.clone()),
                KwargValue::Var(v) => match self.env.get(v) {
                    Some(Value::Str(s)) => KwargData::Str(s.clone()),
                    Some(Value::List(items)) => KwargData::List(items.clone()),
                    None => {
                        return Err(RuntimeFault::Invalid(format!("unbound variable `{v}`")))
                    }
                },
                KwargValue::VarList(vars) => {
                    let mut items = Vec::new();
                    for v in vars {
                        match self.env.get(v) {
                            Some(Value::Str(s)) => items.push(s.clone()),
                            Some(Value::List(nested)) => items.extend(nested.iter().cloned()),
                            None => {
                                return Err(RuntimeFault::Invalid(format!(
                                    "unbound variable `{v}`"
                                )))
                            }
                        }
                    }
                    KwargData::List(items)
                }
            };
            kwarg_values.insert(kwarg.name.clone(), data);
        }
        self.dispatch_request(&call.operator_name, kwarg_values)
    }

    fn dispatch_request(
        &mut self,
        operator: &str,
        kwarg_values: BTreeMap<String, KwargData>,
    ) -> Result<(String, Option<bool>), RuntimeFault> {
        let request = ExecutorRequest {
            operator_name: operator.to_string(),
            task_prompt: self.ctx.task.prompt.clone(),
            kwarg_values,
            temperature: 0.0,
        };
        let response = self
            .executor
            .call(&request, &self.ctx)
            .map_err(|source| RuntimeFault::Executor { operator: operator.to_string(), source })?;
        let request_repr = serde_json::to_string(&request).expect("request serializes");
        self.trace.push(TraceEntry {
            operator_name: operator.to_string(),
            request_digest: short_digest(&request_repr),
            response_digest: short_digest(&response.text),
            elapsed: response.elapsed,
            attempts: response.attempts,
        });
        self.token_cost.add(response.prompt_tokens, response.completion_tokens);
        self.reported_elapsed += response.elapsed;
        let wall = self.started.elapsed();
        if wall > self.limits.wall_clock_timeout {
            return Err(RuntimeFault::Timeout { elapsed: wall, budget: self.limits.wall_clock_timeout });
        }
        Ok((response.text, response.verdict))
    }

    fn run_block(&mut self, stmts: &[Statement]) -> Result<(), RuntimeFault> {
        for stmt in stmts {
            match stmt {
                Statement::Let { name, call, .. } => {
                    let (text, verdict) = self.dispatch(call)?;
                    if let Some(flag) = verdict {
                        self.verdicts.insert(name.clone(), flag);
                    }
                    self.env.insert(name.clone(), Value::Str(text));
                }
                Statement::LetEmptyList { name, .. } => {
                    self.env.insert(name.clone(), Value::List(Vec::new()));
                }
                Statement::Push { list_name, value, .. } => {
                    let item = self.scalar(value)?;
                    match self.env.get_mut(list_name) {
                        Some(Value::List(items)) => items.push(item),
                        Some(Value::Str(_)) => {
                            return Err(RuntimeFault::Invalid(format!(
                                "push target `{list_name}` is not a list"
                            )))
                        }
                        None => {
                            return Err(RuntimeFault::Invalid(format!(
                                "push target `{list_name}` is not bound"
                            )))
                        }
                    }
                }
                Statement::Repeat { count, body, .. } => {
                    for _ in 0..*count {
                        self.run_block(body)?;
                    }
                }
                Statement::IfTest { condition, then_body, else_body, .. } => {
                    let solution = self.scalar(condition)?;
                    let mut kwargs = BTreeMap::new();
                    kwargs.insert("solution".to_string(), KwargData::Str(solution));
                    let (_, verdict) = self.dispatch_request("test", kwargs)?;
                    if verdict.unwrap_or(false) {
                        self.run_block(then_body)?;
                    } else {
                        self.run_block(else_body)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Interpret a workflow for one task. `eval_salt` distinguishes repeated
/// evaluations of the same pair; pass 0 for one-off runs.
pub fn interpret(
    ast: &WorkflowAst,
    task: &Task,
    executor: &dyn Executor,
    limits: &Limits,
    eval_salt: u64,
) -> Result<ExecutionResult, RuntimeFault> {
    let canonical = crate::lang::print(ast);
    let digest = crate::digest::text_digest(&canonical);
    let ctx = CallContext {
        task,
        workflow_digest: &digest,
        static_call_count: ast.static_call_count(),
        operators_present: &ast.operators_present(),
        eval_salt,
    };
    let mut interp = Interp {
        executor,
        ctx,
        limits,
        started: Instant::now(),
        env: BTreeMap::new(),
        trace: Vec::new(),
        token_cost: TokenCost::default(),
        verdicts: BTreeMap::new(),
        reported_elapsed: std::time::Duration::ZERO,
    };
    interp.run_block(&ast.statements)?;
    let returned = interp.scalar(&ast.return_expr)?;
    let mut kwargs = BTreeMap::new();
    kwargs.insert("solution".to_string(), KwargData::Str(returned));
    let (output, _) = interp.dispatch_request("extract_answer", kwargs)?;
    Ok(ExecutionResult {
        output,
        per_call_trace: interp.trace,
        total_elapsed: interp.reported_elapsed,
        token_cost: interp.token_cost,
        verdicts: interp.verdicts,
    })
}
