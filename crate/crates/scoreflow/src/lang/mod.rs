//! The workflow description language: syntax tree, parser, canonical
//! printer, and static validator.

pub mod ast;
pub mod parser;
pub mod printer;
pub mod validate;

pub use ast::{Call, Expr, Kwarg, KwargValue, Span, Statement, WorkflowAst};
pub use parser::{parse, parse_bank_source, SyntaxError};
pub use printer::print;
pub use validate::{validate, Limits, ValidationReport, Violation, ViolationCode};
