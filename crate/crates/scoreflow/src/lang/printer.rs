//! Canonical pretty-printer. `parse(print(ast))` is a structural identity.

use super::ast::{Call, KwargValue, Statement, WorkflowAst};

/// Render a workflow in canonical form: two-space indentation, one statement
/// per line, kwargs separated by `, `.
pub fn print(ast: &WorkflowAst) -> String {
    let mut out = String::from("workflow {\n");
    for stmt in &ast.statements {
        print_stmt(stmt, 1, &mut out);
    }
    out.push_str(&format!("  return {}\n", ast.return_expr.name));
    out.push_str("}\n");
    out
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn print_stmt(stmt: &Statement, depth: usize, out: &mut String) {
    indent(depth, out);
    match stmt {
        Statement::Let { name, call, .. } => {
            out.push_str(&format!("let {name} = "));
            print_call(call, out);
            out.push('\n');
        }
        Statement::LetEmptyList { name, .. } => {
            out.push_str(&format!("let {name} = []\n"));
        }
        Statement::Push { list_name, value, .. } => {
            out.push_str(&format!("push {list_name}, {}\n", value.name));
        }
        Statement::Repeat { count, body, .. } => {
            out.push_str(&format!("repeat {count} {{\n"));
            for inner in body {
                print_stmt(inner, depth + 1, out);
            }
            indent(depth, out);
            out.push_str("}\n");
        }
        Statement::IfTest { condition, then_body, else_body, .. } => {
            out.push_str(&format!("if test({}) {{\n", condition.name));
            for inner in then_body {
                print_stmt(inner, depth + 1, out);
            }
            indent(depth, out);
            out.push_str("} else {\n");
            for inner in else_body {
                print_stmt(inner, depth + 1, out);
            }
            indent(depth, out);
            out.push_str("}\n");
        }
    }
}

fn print_call(call: &Call, out: &mut String) {
    out.push_str(&call.operator_name);
    out.push('(');
    for (i, kwarg) in call.kwargs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&kwarg.name);
        out.push('=');
        match &kwarg.value {
            KwargValue::StringLit(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '\\' => out.push_str("\\\\"),
                        '"' => out.push_str("\\\""),
                        other => out.push(other),
                    }
                }
                out.push('"');
            }
            KwargValue::Var(v) => out.push_str(v),
            KwargValue::VarList(vars) => {
                out.push('[');
                out.push_str(&vars.join(", "));
                out.push(']');
            }
        }
    }
    out.push(')');
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse;
    use super::*;

    #[test]
    fn minimal_template_prints_canonically() {
        let ast = parse("workflow{let s=answer_generate()return s}").unwrap();
        assert_eq!(print(&ast), "workflow {\n  let s = answer_generate()\n  return s\n}\n");
    }

    #[test]
    fn round_trip_is_identity() {
        let src = r#"
            workflow {
              let a = custom(instruction="quote \" and slash \\")
              let xs = []
              push xs, a
              repeat 2 {
                let b = answer_generate()
                push xs, b
              }
              if test(a) {
                let c = review(pre_solution=a)
              } else {
                let c = sc_ensemble(solutions=xs)
              }
              return c
            }
        "#;
        let ast = parse(src).unwrap();
        let reparsed = parse(&print(&ast)).unwrap();
        assert!(ast.structurally_equals(&reparsed));
        // Printing is idempotent once canonical.
        assert_eq!(print(&ast), print(&reparsed));
    }
}
