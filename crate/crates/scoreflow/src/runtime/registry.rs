//! The operator registry: the agent space available to workflow programs.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KwargKind {
    /// A double-quoted instruction literal.
    Str,
    /// A reference to a string variable.
    Var,
    /// A list of string variables (literal or list-bound variable).
    List,
}

impl KwargKind {
    pub fn describe(&self) -> &'static str {
        match self {
            KwargKind::Str => "string literal",
            KwargKind::Var => "string variable",
            KwargKind::List => "list",
        }
    }
}

/// Signature of one operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub name: String,
    pub kwarg_schema: Vec<(String, KwargKind)>,
    /// Only the `test` operator reports a pass/fail verdict.
    pub produces_boolean: bool,
}

impl OperatorSpec {
    pub fn new(name: &str, kwarg_schema: &[(&str, KwargKind)]) -> Self {
        OperatorSpec {
            name: name.to_string(),
            kwarg_schema: kwarg_schema.iter().map(|(n, k)| (n.to_string(), *k)).collect(),
            produces_boolean: name == "test",
        }
    }

    pub fn kwarg_kind(&self, name: &str) -> Option<KwargKind> {
        self.kwarg_schema.iter().find(|(n, _)| n == name).map(|(_, k)| *k)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("duplicate operator `{0}`")]
pub struct DuplicateOperator(pub String);

/// Name-indexed operator catalog. The eight fixed entries are always present;
/// extensions may only add new names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorRegistry {
    operators: BTreeMap<String, OperatorSpec>,
}

/// The fixed catalog.
pub fn catalog() -> Vec<OperatorSpec> {
    use KwargKind::*;
    vec![
        OperatorSpec::new("custom", &[("instruction", Str)]),
        OperatorSpec::new("answer_generate", &[]),
        OperatorSpec::new("code_generate", &[("instruction", Str)]),
        OperatorSpec::new("programmer", &[("analysis", Var)]),
        OperatorSpec::new("sc_ensemble", &[("solutions", List)]),
        OperatorSpec::new("review", &[("pre_solution", Var)]),
        OperatorSpec::new("test", &[("solution", Var)]),
        OperatorSpec::new("extract_answer", &[("solution", Var)]),
    ]
}

/// Build a registry from the fixed catalog plus extensions.
pub fn build_registry(extensions: Vec<OperatorSpec>) -> Result<OperatorRegistry, DuplicateOperator> {
    let mut operators = BTreeMap::new();
    for spec in catalog().into_iter().chain(extensions) {
        if operators.contains_key(&spec.name) {
            return Err(DuplicateOperator(spec.name));
        }
        operators.insert(spec.name.clone(), spec);
    }
    Ok(OperatorRegistry { operators })
}

impl OperatorRegistry {
    pub fn get(&self, name: &str) -> Option<&OperatorSpec> {
        self.operators.get(name)
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.operators.keys().map(|s| s.as_str())
    }
}
