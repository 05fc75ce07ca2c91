//! Static validation: operator existence, signature conformance, definite
//! assignment, loop bounds, and the call budget.
//!
//! Violations are data, not faults; `validate` never errors. A program that
//! validates cleanly interprets without unknown-operator or unbound-variable
//! runtime faults.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::ast::{Call, Expr, KwargValue, Span, Statement, WorkflowAst};
use crate::runtime::registry::{KwargKind, OperatorRegistry};

/// Static limits on accepted programs. The wall-clock timeout is enforced by
/// the interpreter, not here, but lives with the other limits so one value
/// travels through configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub max_loop_bound: u32,
    pub max_static_calls: u64,
    pub wall_clock_timeout: std::time::Duration,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_loop_bound: 10,
            max_static_calls: 50,
            wall_clock_timeout: std::time::Duration::from_secs(120),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationCode {
    UnknownOperator,
    UnboundVariable,
    UnboundReturn,
    BadKwarg,
    LoopBound,
    CallBudget,
    PushTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub static_call_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarKind {
    Scalar,
    List,
}

struct Checker<'a> {
    registry: &'a OperatorRegistry,
    limits: &'a Limits,
    violations: Vec<Violation>,
}

impl<'a> Checker<'a> {
    fn violation(&mut self, code: ViolationCode, span: Span, message: impl Into<String>) {
        self.violations.push(Violation { code, message: message.into(), span });
    }

    fn check_block(&mut self, stmts: &[Statement], scope: &mut BTreeMap<String, VarKind>) {
        for stmt in stmts {
            match stmt {
                Statement::Let { name, call, .. } => {
                    self.check_call(call, scope);
                    scope.insert(name.clone(), VarKind::Scalar);
                }
                Statement::LetEmptyList { name, .. } => {
                    scope.insert(name.clone(), VarKind::List);
                }
                Statement::Push { list_name, value, span } => {
                    match scope.get(list_name) {
                        None => self.violation(
                            ViolationCode::UnboundVariable,
                            *span,
                            format!("push target `{list_name}` is not bound"),
                        ),
                        Some(VarKind::Scalar) => self.violation(
                            ViolationCode::PushTarget,
                            *span,
                            format!("push target `{list_name}` is not a list"),
                        ),
                        Some(VarKind::List) => {}
                    }
                    self.check_scalar_ref(value, scope, "pushed value");
                }
                Statement::Repeat { count, body, span } => {
                    if *count < 1 {
                        self.violation(
                            ViolationCode::LoopBound,
                            *span,
                            "loop bound must be at least 1",
                        );
                    } else if *count > self.limits.max_loop_bound {
                        self.violation(
                            ViolationCode::LoopBound,
                            *span,
                            format!(
                                "loop bound {count} exceeds limit {}",
                                self.limits.max_loop_bound
                            ),
                        );
                    }
                    // A loop body executes at least once, so its bindings
                    // remain visible afterwards.
                    self.check_block(body, scope);
                }
                Statement::IfTest { condition, then_body, else_body, span } => {
                    if self.registry.get("test").is_none() {
                        self.violation(
                            ViolationCode::UnknownOperator,
                            *span,
                            "`if test(..)` requires the test operator to be registered",
                        );
                    }
                    self.check_scalar_ref(condition, scope, "test condition");
                    let mut then_scope = scope.clone();
                    let mut else_scope = scope.clone();
                    self.check_block(then_body, &mut then_scope);
                    self.check_block(else_body, &mut else_scope);
                    // Only bindings present in both branches survive the join.
                    for (name, kind) in then_scope {
                        if else_scope.get(&name) == Some(&kind) {
                            scope.insert(name, kind);
                        }
                    }
                }
            }
        }
    }

    fn check_scalar_ref(&mut self, expr: &Expr, scope: &BTreeMap<String, VarKind>, what: &str) {
        match scope.get(&expr.name) {
            None => self.violation(
                ViolationCode::UnboundVariable,
                expr.span,
                format!("{what} `{}` is not bound", expr.name),
            ),
            Some(VarKind::List) => self.violation(
                ViolationCode::PushTarget,
                expr.span,
                format!("{what} `{}` must be a string variable, not a list", expr.name),
            ),
            Some(VarKind::Scalar) => {}
        }
    }

    fn check_call(&mut self, call: &Call, scope: &BTreeMap<String, VarKind>) {
        let Some(spec) = self.registry.get(&call.operator_name) else {
            self.violation(
                ViolationCode::UnknownOperator,
                call.span,
                format!("unknown operator `{}`", call.operator_name),
            );
            return;
        };
        let mut seen = Vec::new();
        for kwarg in &call.kwargs {
            if seen.contains(&kwarg.name) {
                self.violation(
                    ViolationCode::BadKwarg,
                    kwarg.span,
                    format!("duplicate keyword argument `{}`", kwarg.name),
                );
                continue;
            }
            seen.push(kwarg.name.clone());
            let Some(kind) = spec.kwarg_kind(&kwarg.name) else {
                self.violation(
                    ViolationCode::BadKwarg,
                    kwarg.span,
                    format!(
                        "operator `{}` has no keyword argument `{}`",
                        call.operator_name, kwarg.name
                    ),
                );
                continue;
            };
            match (kind, &kwarg.value) {
                (KwargKind::Str, KwargValue::StringLit(_)) => {}
                (KwargKind::Var, KwargValue::Var(v)) => {
                    match scope.get(v) {
                        None => self.violation(
                            ViolationCode::UnboundVariable,
                            kwarg.span,
                            format!("variable `{v}` is not bound"),
                        ),
                        Some(VarKind::List) => self.violation(
                            ViolationCode::BadKwarg,
                            kwarg.span,
                            format!("`{}` expects a string variable, `{v}` is a list", kwarg.name),
                        ),
                        Some(VarKind::Scalar) => {}
                    }
                }
                (KwargKind::List, KwargValue::VarList(vars)) => {
                    for v in vars {
                        match scope.get(v) {
                            None => self.violation(
                                ViolationCode::UnboundVariable,
                                kwarg.span,
                                format!("variable `{v}` is not bound"),
                            ),
                            Some(VarKind::List) => self.violation(
                                ViolationCode::BadKwarg,
                                kwarg.span,
                                format!("list elements must be string variables, `{v}` is a list"),
                            ),
                            Some(VarKind::Scalar) => {}
                        }
                    }
                }
                (KwargKind::List, KwargValue::Var(v)) => {
                    match scope.get(v) {
                        None => self.violation(
                            ViolationCode::UnboundVariable,
                            kwarg.span,
                            format!("variable `{v}` is not bound"),
                        ),
                        Some(VarKind::Scalar) => self.violation(
                            ViolationCode::BadKwarg,
                            kwarg.span,
                            format!("`{}` expects a list, `{v}` is a string", kwarg.name),
                        ),
                        Some(VarKind::List) => {}
                    }
                }
                (expected, _) => self.violation(
                    ViolationCode::BadKwarg,
                    kwarg.span,
                    format!("`{}` expects a {} value", kwarg.name, expected.describe()),
                ),
            }
        }
        for (name, _) in spec.kwarg_schema.iter() {
            if !seen.contains(name) {
                self.violation(
                    ViolationCode::BadKwarg,
                    call.span,
                    format!("missing keyword argument `{name}` for operator `{}`", call.operator_name),
                );
            }
        }
    }
}

/// Statically validate a program against a registry and limits.
pub fn validate(ast: &WorkflowAst, registry: &OperatorRegistry, limits: &Limits) -> ValidationReport {
    let mut checker = Checker { registry, limits, violations: Vec::new() };
    let mut scope = BTreeMap::new();
    checker.check_block(&ast.statements, &mut scope);
    match scope.get(&ast.return_expr.name) {
        None => checker.violation(
            ViolationCode::UnboundReturn,
            ast.return_expr.span,
            format!("return value `{}` is not bound", ast.return_expr.name),
        ),
        Some(_) => {}
    }
    let static_call_count = ast.static_call_count();
    if static_call_count > limits.max_static_calls {
        checker.violation(
            ViolationCode::CallBudget,
            Span::new(1, 1),
            format!(
                "program makes {static_call_count} static calls, budget is {}",
                limits.max_static_calls
            ),
        );
    }
    ValidationReport {
        ok: checker.violations.is_empty(),
        violations: checker.violations,
        static_call_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::runtime::registry::build_registry;

    fn check(src: &str) -> ValidationReport {
        let ast = parse(src).unwrap();
        validate(&ast, &build_registry(vec![]).unwrap(), &Limits::default())
    }

    #[test]
    fn qa_template_is_clean() {
        let report = check("workflow { let s = answer_generate() return s }");
        assert!(report.ok);
        assert_eq!(report.static_call_count, 1);
    }

    #[test]
    fn unknown_operator_flagged() {
        let report = check("workflow { let s = magic() return s }");
        assert!(!report.ok);
        assert_eq!(report.violations[0].code, ViolationCode::UnknownOperator);
    }

    #[test]
    fn unbound_return_flagged() {
        let report = check("workflow { return s }");
        assert!(!report.ok);
        assert_eq!(report.violations[0].code, ViolationCode::UnboundReturn);
        assert_eq!(report.static_call_count, 0);
    }

    #[test]
    fn unbound_variable_flagged() {
        let report = check("workflow { let s = review(pre_solution=ghost) return s }");
        assert!(!report.ok);
        assert_eq!(report.violations[0].code, ViolationCode::UnboundVariable);
    }

    #[test]
    fn bad_kwarg_name_flagged() {
        let report = check("workflow { let s = custom(prompt=\"x\") return s }");
        assert!(!report.ok);
        assert!(report.violations.iter().any(|v| v.code == ViolationCode::BadKwarg));
    }

    #[test]
    fn missing_kwarg_flagged() {
        let report = check("workflow { let s = custom() return s }");
        assert!(!report.ok);
        assert_eq!(report.violations[0].code, ViolationCode::BadKwarg);
    }

    #[test]
    fn loop_bound_over_limit_flagged() {
        let report = check(
            "workflow { repeat 11 { let s = answer_generate() } return s }",
        );
        assert!(!report.ok);
        assert!(report.violations.iter().any(|v| v.code == ViolationCode::LoopBound));
    }

    #[test]
    fn call_budget_flagged() {
        // 10 * 6 = 60 > 50.
        let report = check(
            "workflow { repeat 10 { let a = answer_generate() let b = answer_generate() \
             let c = answer_generate() let d = answer_generate() let e = answer_generate() \
             let f = answer_generate() } return a }",
        );
        assert!(!report.ok);
        assert!(report.violations.iter().any(|v| v.code == ViolationCode::CallBudget));
        assert_eq!(report.static_call_count, 60);
    }

    #[test]
    fn branch_bindings_join_by_intersection() {
        // `only_then` is bound in one branch only, so using it afterwards fails.
        let report = check(
            "workflow { let s = answer_generate() \
             if test(s) { let only_then = answer_generate() } else { let other = answer_generate() } \
             let r = review(pre_solution=only_then) return r }",
        );
        assert!(!report.ok);
        assert!(report.violations.iter().any(|v| v.code == ViolationCode::UnboundVariable));
    }

    #[test]
    fn loop_bindings_survive() {
        let report = check(
            "workflow { repeat 2 { let s = answer_generate() } let r = review(pre_solution=s) return r }",
        );
        assert!(report.ok);
    }

    #[test]
    fn list_kwarg_accepts_literal_and_variable() {
        let report = check(
            "workflow { let a = answer_generate() let xs = [] push xs, a \
             let e1 = sc_ensemble(solutions=[a, a]) let e2 = sc_ensemble(solutions=xs) return e2 }",
        );
        assert!(report.ok);
    }

    #[test]
    fn list_passed_as_scalar_flagged() {
        let report = check(
            "workflow { let xs = [] let r = review(pre_solution=xs) return r }",
        );
        assert!(!report.ok);
        assert!(report.violations.iter().any(|v| v.code == ViolationCode::BadKwarg));
    }

    #[test]
    fn push_into_scalar_flagged() {
        let report = check(
            "workflow { let a = answer_generate() push a, a return a }",
        );
        assert!(!report.ok);
        assert_eq!(report.violations[0].code, ViolationCode::PushTarget);
    }

    #[test]
    fn deterministic_reports() {
        let src = "workflow { let s = magic() repeat 11 { let t = wizard() } return ghost }";
        let a = check(src);
        let b = check(src);
        assert_eq!(a, b);
        assert!(!a.ok);
    }
}
