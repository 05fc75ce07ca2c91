//! Syntax tree for the workflow description language.

use serde::{Deserialize, Serialize};

/// Source position, 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub const ZERO: Span = Span { line: 0, col: 0 };

    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A parsed workflow program: a statement list and a single return expression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkflowAst {
    pub statements: Vec<Statement>,
    pub return_expr: Expr,
}

/// A variable reference. The grammar has no other expression form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expr {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statement {
    /// `let name = call(...)`
    Let { name: String, call: Call, span: Span },
    /// `let name = []`
    LetEmptyList { name: String, span: Span },
    /// `push list_name, expr`
    Push { list_name: String, value: Expr, span: Span },
    /// `repeat N { ... }` with a literal bound.
    Repeat { count: u32, body: Vec<Statement>, span: Span },
    /// `if test(expr) { ... } else { ... }` — branches on the test operator's
    /// pass/fail verdict for the named variable.
    IfTest {
        condition: Expr,
        then_body: Vec<Statement>,
        else_body: Vec<Statement>,
        span: Span,
    },
}

impl Statement {
    pub fn span(&self) -> Span {
        match self {
            Statement::Let { span, .. }
            | Statement::LetEmptyList { span, .. }
            | Statement::Push { span, .. }
            | Statement::Repeat { span, .. }
            | Statement::IfTest { span, .. } => *span,
        }
    }
}

/// An operator invocation with keyword arguments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Call {
    pub operator_name: String,
    pub kwargs: Vec<Kwarg>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Kwarg {
    pub name: String,
    pub value: KwargValue,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum KwargValue {
    /// `name="literal"`
    StringLit(String),
    /// `name=variable`
    Var(String),
    /// `name=[a, b, c]`
    VarList(Vec<String>),
}

impl WorkflowAst {
    /// Count `Call` nodes weighted by enclosing literal loop bounds.
    ///
    /// `if test(...)` branches count as the max of the two arms; the implicit
    /// condition test is not counted. This is the complexity measure used by
    /// planted-world rules.
    pub fn static_call_count(&self) -> u64 {
        count_calls(&self.statements)
    }

    /// Names of all operators that appear in call position.
    pub fn operators_present(&self) -> std::collections::BTreeSet<String> {
        let mut ops = std::collections::BTreeSet::new();
        collect_ops(&self.statements, &mut ops);
        ops
    }

    /// Copy with all spans zeroed. Structural equality is equality of
    /// normalized trees, which is what the parse/print round-trip preserves.
    pub fn normalized(&self) -> WorkflowAst {
        WorkflowAst {
            statements: self.statements.iter().map(normalize_stmt).collect(),
            return_expr: Expr { name: self.return_expr.name.clone(), span: Span::ZERO },
        }
    }

    pub fn structurally_equals(&self, other: &WorkflowAst) -> bool {
        self.normalized() == other.normalized()
    }
}

fn normalize_stmt(stmt: &Statement) -> Statement {
    match stmt {
        Statement::Let { name, call, .. } => Statement::Let {
            name: name.clone(),
            call: Call {
                operator_name: call.operator_name.clone(),
                kwargs: call
                    .kwargs
                    .iter()
                    .map(|k| Kwarg { name: k.name.clone(), value: k.value.clone(), span: Span::ZERO })
                    .collect(),
                span: Span::ZERO,
            },
            span: Span::ZERO,
        },
        Statement::LetEmptyList { name, .. } => {
            Statement::LetEmptyList { name: name.clone(), span: Span::ZERO }
        }
        Statement::Push { list_name, value, .. } => Statement::Push {
            list_name: list_name.clone(),
            value: Expr { name: value.name.clone(), span: Span::ZERO },
            span: Span::ZERO,
        },
        Statement::Repeat { count, body, .. } => Statement::Repeat {
            count: *count,
            body: body.iter().map(normalize_stmt).collect(),
            span: Span::ZERO,
        },
        Statement::IfTest { condition, then_body, else_body, .. } => Statement::IfTest {
            condition: Expr { name: condition.name.clone(), span: Span::ZERO },
            then_body: then_body.iter().map(normalize_stmt).collect(),
            else_body: else_body.iter().map(normalize_stmt).collect(),
            span: Span::ZERO,
        },
    }
}

fn count_calls(stmts: &[Statement]) -> u64 {
    let mut total = 0u64;
    for stmt in stmts {
        match stmt {
            Statement::Let { .. } => total += 1,
            Statement::LetEmptyList { .. } | Statement::Push { .. } => {}
            Statement::Repeat { count, body, .. } => {
                total += u64::from(*count) * count_calls(body);
            }
            Statement::IfTest { then_body, else_body, .. } => {
                total += count_calls(then_body).max(count_calls(else_body));
            }
        }
    }
    total
}

fn collect_ops(stmts: &[Statement], ops: &mut std::collections::BTreeSet<String>) {
    for stmt in stmts {
        match stmt {
            Statement::Let { call, .. } => {
                ops.insert(call.operator_name.clone());
            }
            Statement::LetEmptyList { .. } | Statement::Push { .. } => {}
            Statement::Repeat { body, .. } => collect_ops(body, ops),
            Statement::IfTest { then_body, else_body, .. } => {
                ops.insert("test".to_string());
                collect_ops(then_body, ops);
                collect_ops(else_body, ops);
            }
        }
    }
}
