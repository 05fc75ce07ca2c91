//! Recursive-descent parser for the workflow language.
//!
//! The grammar is fixed:
//!
//! ```text
//! workflow := "workflow" "{" stmt* "return" expr "}"
//! stmt     := "let" IDENT "=" call
//!           | "let" IDENT "=" "[" "]"
//!           | "push" IDENT "," expr
//!           | "repeat" INT "{" stmt* "}"
//!           | "if" "test" "(" expr ")" "{" stmt* "}" "else" "{" stmt* "}"
//! call     := IDENT "(" (kwarg ("," kwarg)*)? ")"
//! kwarg    := IDENT "=" (STRING | IDENT | "[" IDENT ("," IDENT)* "]")
//! expr     := IDENT
//! ```
//!
//! Strings are double-quoted with `\\` and `\"` escapes; `#` starts a line
//! comment. Keywords are contextual, so `test` stays available as an operator
//! name. Parsing never panics; all failures surface as [`SyntaxError`].

use thiserror::Error;

use super::ast::{Call, Expr, Kwarg, KwargValue, Span, Statement, WorkflowAst};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("syntax error at {span}: found {found}, expected {}", expected.join(" | "))]
pub struct SyntaxError {
    pub span: Span,
    pub found: String,
    pub expected: Vec<String>,
}

impl SyntaxError {
    fn new(span: Span, found: impl Into<String>, expected: &[&str]) -> Self {
        SyntaxError {
            span,
            found: found.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u32),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Eq,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::LBrace => "`{`".to_string(),
            Tok::RBrace => "`}`".to_string(),
            Tok::LParen => "`(`".to_string(),
            Tok::RParen => "`)`".to_string(),
            Tok::LBracket => "`[`".to_string(),
            Tok::RBracket => "`]`".to_string(),
            Tok::Comma => "`,`".to_string(),
            Tok::Eq => "`=`".to_string(),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { chars: text.chars().peekable(), line: 1, col: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn tokenize(mut self) -> Result<Vec<(Tok, Span)>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            // Skip whitespace and comments.
            loop {
                match self.chars.peek() {
                    Some(c) if c.is_whitespace() => {
                        self.bump();
                    }
                    Some('#') => {
                        while let Some(&c) = self.chars.peek() {
                            if c == '\n' {
                                break;
                            }
                            self.bump();
                        }
                    }
                    _ => break,
                }
            }
            let span = Span::new(self.line, self.col);
            let Some(&c) = self.chars.peek() else {
                out.push((Tok::Eof, span));
                return Ok(out);
            };
            let tok = match c {
                '{' => {
                    self.bump();
                    Tok::LBrace
                }
                '}' => {
                    self.bump();
                    Tok::RBrace
                }
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                '[' => {
                    self.bump();
                    Tok::LBracket
                }
                ']' => {
                    self.bump();
                    Tok::RBracket
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '=' => {
                    self.bump();
                    Tok::Eq
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            None | Some('\n') => {
                                return Err(SyntaxError::new(
                                    span,
                                    "unterminated string",
                                    &["closing `\"`"],
                                ))
                            }
                            Some('\\') => match self.bump() {
                                Some('\\') => s.push('\\'),
                                Some('"') => s.push('"'),
                                other => {
                                    return Err(SyntaxError::new(
                                        Span::new(self.line, self.col),
                                        match other {
                                            Some(c) => format!("escape `\\{c}`"),
                                            None => "end of input".to_string(),
                                        },
                                        &["`\\\\`", "`\\\"`"],
                                    ))
                                }
                            },
                            Some('"') => break,
                            Some(c) => s.push(c),
                        }
                    }
                    Tok::Str(s)
                }
                'a'..='z' | '_' => {
                    let mut s = String::new();
                    while let Some(&c) = self.chars.peek() {
                        if c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' {
                            s.push(c);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    Tok::Ident(s)
                }
                '0'..='9' => {
                    let mut value: u64 = 0;
                    let mut overflow = false;
                    while let Some(&c) = self.chars.peek() {
                        if let Some(d) = c.to_digit(10) {
                            value = value.saturating_mul(10).saturating_add(u64::from(d));
                            overflow |= value > u64::from(u32::MAX);
                            self.bump();
                        } else {
                            break;
                        }
                    }
                    if overflow {
                        return Err(SyntaxError::new(
                            span,
                            "integer literal out of range",
                            &["integer \u{2264} 4294967295"],
                        ));
                    }
                    Tok::Int(value as u32)
                }
                other => {
                    return Err(SyntaxError::new(
                        span,
                        format!("character `{}`", other.escape_default()),
                        &["token"],
                    ))
                }
            };
            out.push((tok, span));
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &(Tok, Span) {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn next(&mut self) -> (Tok, Span) {
        let item = self.toks[self.pos.min(self.toks.len() - 1)].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        item
    }

    fn err(&self, expected: &[&str]) -> SyntaxError {
        let (tok, span) = self.peek();
        SyntaxError::new(*span, tok.describe(), expected)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<Span, SyntaxError> {
        match self.peek() {
            (Tok::Ident(s), span) if s == kw => {
                let span = *span;
                self.next();
                Ok(span)
            }
            _ => Err(self.err(&[&format!("`{kw}`")])),
        }
    }

    fn expect_tok(&mut self, tok: Tok, label: &str) -> Result<Span, SyntaxError> {
        if &self.peek().0 == &tok {
            Ok(self.next().1)
        } else {
            Err(self.err(&[label]))
        }
    }

    fn expect_ident(&mut self, label: &str) -> Result<(String, Span), SyntaxError> {
        match self.peek() {
            (Tok::Ident(s), span) => {
                let out = (s.clone(), *span);
                self.next();
                Ok(out)
            }
            _ => Err(self.err(&[label])),
        }
    }

    fn parse_workflow(&mut self) -> Result<WorkflowAst, SyntaxError> {
        self.expect_keyword("workflow")?;
        self.expect_tok(Tok::LBrace, "`{`")?;
        let (statements, return_expr) = self.parse_body_until_return()?;
        let return_expr = return_expr.ok_or_else(|| self.err(&["statement", "`return`"]))?;
        self.expect_tok(Tok::RBrace, "`}`")?;
        if self.peek().0 != Tok::Eof {
            return Err(self.err(&["end of input"]));
        }
        Ok(WorkflowAst { statements, return_expr })
    }

    /// Statements until `return expr` (top level) or `}` (nested blocks).
    fn parse_block(&mut self) -> Result<Vec<Statement>, SyntaxError> {
        self.expect_tok(Tok::LBrace, "`{`")?;
        let mut stmts = Vec::new();
        while self.peek().0 != Tok::RBrace {
            stmts.push(self.parse_stmt()?);
        }
        self.expect_tok(Tok::RBrace, "`}`")?;
        Ok(stmts)
    }

    fn parse_body_until_return(
        &mut self,
    ) -> Result<(Vec<Statement>, Option<Expr>), SyntaxError> {
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                (Tok::Ident(kw), _) if kw == "return" => {
                    self.next();
                    let (name, span) = self.expect_ident("identifier")?;
                    return Ok((stmts, Some(Expr { name, span })));
                }
                (Tok::RBrace, _) | (Tok::Eof, _) => {
                    return Err(self.err(&["statement", "`return`"]));
                }
                _ => stmts.push(self.parse_stmt()?),
            }
        }
    }

    fn parse_stmt(&mut self) -> Result<Statement, SyntaxError> {
        let (tok, span) = self.peek().clone();
        let kw = match tok {
            Tok::Ident(s) => s,
            _ => return Err(self.err(&["`let`", "`push`", "`repeat`", "`if`"])),
        };
        match kw.as_str() {
            "let" => {
                self.next();
                let (name, _) = self.expect_ident("identifier")?;
                self.expect_tok(Tok::Eq, "`=`")?;
                if self.peek().0 == Tok::LBracket {
                    self.next();
                    self.expect_tok(Tok::RBracket, "`]`")?;
                    Ok(Statement::LetEmptyList { name, span })
                } else {
                    let call = self.parse_call()?;
                    Ok(Statement::Let { name, call, span })
                }
            }
            "push" => {
                self.next();
                let (list_name, _) = self.expect_ident("identifier")?;
                self.expect_tok(Tok::Comma, "`,`")?;
                let (name, vspan) = self.expect_ident("identifier")?;
                Ok(Statement::Push { list_name, value: Expr { name, span: vspan }, span })
            }
            "repeat" => {
                self.next();
                let count = match self.peek().0.clone() {
                    Tok::Int(n) => {
                        self.next();
                        n
                    }
                    _ => return Err(self.err(&["integer loop bound"])),
                };
                let body = self.parse_block()?;
                Ok(Statement::Repeat { count, body, span })
            }
            "if" => {
                self.next();
                self.expect_keyword("test")?;
                self.expect_tok(Tok::LParen, "`(`")?;
                let (name, cspan) = self.expect_ident("identifier")?;
                self.expect_tok(Tok::RParen, "`)`")?;
                let then_body = self.parse_block()?;
                self.expect_keyword("else")?;
                let else_body = self.parse_block()?;
                Ok(Statement::IfTest {
                    condition: Expr { name, span: cspan },
                    then_body,
                    else_body,
                    span,
                })
            }
            _ => Err(self.err(&["`let`", "`push`", "`repeat`", "`if`", "`return`"])),
        }
    }

    fn parse_call(&mut self) -> Result<Call, SyntaxError> {
        let (operator_name, span) = self.expect_ident("operator name")?;
        self.expect_tok(Tok::LParen, "`(`")?;
        let mut kwargs = Vec::new();
        if self.peek().0 != Tok::RParen {
            loop {
                kwargs.push(self.parse_kwarg()?);
                if self.peek().0 == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect_tok(Tok::RParen, "`)`")?;
        Ok(Call { operator_name, kwargs, span })
    }

    fn parse_kwarg(&mut self) -> Result<Kwarg, SyntaxError> {
        let (name, span) = self.expect_ident("keyword-argument name")?;
        self.expect_tok(Tok::Eq, "`=`")?;
        let value = match self.peek().0.clone() {
            Tok::Str(s) => {
                self.next();
                KwargValue::StringLit(s)
            }
            Tok::Ident(v) => {
                self.next();
                KwargValue::Var(v)
            }
            Tok::LBracket => {
                self.next();
                let mut vars = Vec::new();
                let (first, _) = self.expect_ident("identifier")?;
                vars.push(first);
                while self.peek().0 == Tok::Comma {
                    self.next();
                    let (v, _) = self.expect_ident("identifier")?;
                    vars.push(v);
                }
                self.expect_tok(Tok::RBracket, "`]`")?;
                KwargValue::VarList(vars)
            }
            _ => return Err(self.err(&["string literal", "identifier", "`[`"])),
        };
        Ok(Kwarg { name, value, span })
    }
}

/// Parse one workflow program.
pub fn parse(text: &str) -> Result<WorkflowAst, SyntaxError> {
    let toks = Lexer::new(text).tokenize()?;
    Parser { toks, pos: 0 }.parse_workflow()
}

/// Parse a bank file: workflow programs separated by lines containing only `---`.
pub fn parse_bank_source(text: &str) -> Result<Vec<WorkflowAst>, SyntaxError> {
    let mut programs = Vec::new();
    let mut chunk = String::new();
    let flush = |chunk: &mut String, programs: &mut Vec<WorkflowAst>| -> Result<(), SyntaxError> {
        if !chunk.trim().is_empty() {
            programs.push(parse(chunk)?);
        }
        chunk.clear();
        Ok(())
    };
    for line in text.lines() {
        if line.trim() == "---" {
            flush(&mut chunk, &mut programs)?;
        } else {
            chunk.push_str(line);
            chunk.push('\n');
        }
    }
    flush(&mut chunk, &mut programs)?;
    Ok(programs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_template_parses() {
        let ast = parse("workflow { let s = answer_generate() return s }").unwrap();
        assert_eq!(ast.statements.len(), 1);
        assert_eq!(ast.return_expr.name, "s");
        assert_eq!(ast.static_call_count(), 1);
    }

    #[test]
    fn unbound_return_still_parses() {
        // Grammar and semantics are separate; `validate` rejects this later.
        let ast = parse("workflow { return s }").unwrap();
        assert!(ast.statements.is_empty());
    }

    #[test]
    fn unclosed_paren_reports_position() {
        let err = parse("workflow { let s = custom(instruction=\"x\" }").unwrap_err();
        assert_eq!(err.span.line, 1);
        assert_eq!(err.span.col, 43);
    }

    #[test]
    fn keywords_are_contextual() {
        // `test` works as an operator name outside `if`.
        let ast = parse(
            "workflow { let s = answer_generate() let t = test(solution=s) return t }",
        )
        .unwrap();
        assert_eq!(ast.statements.len(), 2);
    }

    #[test]
    fn full_construct_coverage() {
        let src = r#"
            # build an ensemble
            workflow {
              let seed = custom(instruction="go \"deep\"")
              let items = []
              push items, seed
              repeat 3 {
                let extra = answer_generate()
                push items, extra
              }
              if test(seed) {
                let out = sc_ensemble(solutions=items)
              } else {
                let out = sc_ensemble(solutions=[seed, seed])
              }
              return out
            }
        "#;
        let ast = parse(src).unwrap();
        assert_eq!(ast.statements.len(), 5);
        assert_eq!(ast.static_call_count(), 1 + 3 + 1);
        assert!(ast.operators_present().contains("test"));
    }

    #[test]
    fn trailing_garbage_rejected() {
        assert!(parse("workflow { return s } extra").is_err());
    }

    #[test]
    fn bank_files_split_on_dashes() {
        let src = "workflow { return a }\n---\nworkflow { let s = answer_generate() return s }\n";
        let programs = parse_bank_source(src).unwrap();
        assert_eq!(programs.len(), 2);
    }

    #[test]
    fn never_panics_on_fragments() {
        for src in ["", "workflow", "workflow {", "workflow { let", "{}[]()\"", "\"\\q\"", "repeat"] {
            let _ = parse(src);
        }
    }
}
