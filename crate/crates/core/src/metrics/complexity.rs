//! Code-level complexity: code lines, cyclomatic complexity, Halstead
//! difficulty and volume, and block nesting depth.
//!
//! Halstead token table (docstrings, comments and layout never count):
//!
//! | class     | tokens                                                             |
//! |-----------|--------------------------------------------------------------------|
//! | operator  | `=` `:=` and augmented assignments                                 |
//! | operator  | `+ - * / // % ** @ & \| ^ ~ << >>`                                 |
//! | operator  | `< > <= >= == !=`, attribute `.`                                   |
//! | operator  | `and or not in is`, plus `not in` and `is not` as single operators |
//! | operator  | `()` once per call, `[]` once per subscript                        |
//! | operand   | identifiers, numbers, strings, `True False None`, `...`            |
//! | neither   | other punctuation, statement keywords, the `in` of a `for` header  |
//!
//! A `(` or `[` is a call or subscript when it directly follows a name,
//! literal keyword, string, `)` or `]`. Operands are distinguished by their
//! source text.

use std::collections::HashSet;

use rustpython_ast::{self as ast, Visitor};
use rustpython_parser::Tok;
use serde::{Deserialize, Serialize};

use crate::python::{visit_all_children, BodyToken, SyntaxError, UnitSyntax};
use crate::repo::FunctionUnit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HalsteadCounts {
    /// Distinct operators.
    pub eta1: usize,
    /// Distinct operands.
    pub eta2: usize,
    /// Total operators.
    pub n1: usize,
    /// Total operands.
    pub n2: usize,
}

impl HalsteadCounts {
    /// D = (eta1 / 2) * (N2 / eta2); 0 without operands.
    pub fn difficulty(&self) -> f64 {
        if self.eta2 == 0 {
            0.0
        } else {
            (self.eta1 as f64 / 2.0) * (self.n2 as f64 / self.eta2 as f64)
        }
    }

    /// V = N * log2(eta); 0 for an empty vocabulary.
    pub fn volume(&self) -> f64 {
        let vocab = self.eta1 + self.eta2;
        if vocab == 0 {
            0.0
        } else {
            (self.n1 + self.n2) as f64 * (vocab as f64).log2()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complexity {
    pub loc: usize,
    pub cyclomatic: usize,
    pub halstead: HalsteadCounts,
    pub nesting_depth: usize,
}

impl Complexity {
    pub fn of_syntax(syntax: &UnitSyntax) -> Self {
        Self {
            loc: code_lines(&syntax.tokens),
            cyclomatic: cyclomatic(&syntax.body),
            halstead: halstead_counts(&syntax.tokens),
            nesting_depth: nesting(syntax),
        }
    }

    pub fn of_unit(unit: &FunctionUnit) -> Result<Self, SyntaxError> {
        Ok(Self::of_syntax(&syntax_of(unit)?))
    }
}

fn syntax_of(unit: &FunctionUnit) -> Result<UnitSyntax, SyntaxError> {
    UnitSyntax::new(&unit.signature, &unit.docstring, &unit.body)
}

pub fn count_code_lines(unit: &FunctionUnit) -> Result<usize, SyntaxError> {
    Ok(code_lines(&syntax_of(unit)?.tokens))
}

pub fn cyclomatic_complexity(unit: &FunctionUnit) -> Result<usize, SyntaxError> {
    Ok(cyclomatic(&syntax_of(unit)?.body))
}

/// Returns (difficulty, volume).
pub fn halstead(unit: &FunctionUnit) -> Result<(f64, f64), SyntaxError> {
    let counts = halstead_counts(&syntax_of(unit)?.tokens);
    Ok((counts.difficulty(), counts.volume()))
}

pub fn nesting_depth(unit: &FunctionUnit) -> Result<usize, SyntaxError> {
    Ok(nesting(&syntax_of(unit)?))
}

fn code_lines(tokens: &[BodyToken]) -> usize {
    let lines: HashSet<usize> = tokens.iter().flat_map(|t| t.first_line..=t.last_line).collect();
    lines.len()
}

#[derive(Default)]
struct DecisionPoints(usize);

impl Visitor for DecisionPoints {
    visit_all_children!();

    fn visit_stmt_if(&mut self, node: ast::StmtIf) {
        self.0 += 1;
        self.generic_visit_stmt_if(node);
    }
    fn visit_stmt_for(&mut self, node: ast::StmtFor) {
        self.0 += 1;
        self.generic_visit_stmt_for(node);
    }
    fn visit_stmt_async_for(&mut self, node: ast::StmtAsyncFor) {
        self.0 += 1;
        self.generic_visit_stmt_async_for(node);
    }
    fn visit_stmt_while(&mut self, node: ast::StmtWhile) {
        self.0 += 1;
        self.generic_visit_stmt_while(node);
    }
    fn visit_excepthandler(&mut self, node: ast::ExceptHandler) {
        self.0 += 1;
        self.generic_visit_excepthandler(node);
    }
    fn visit_expr_if_exp(&mut self, node: ast::ExprIfExp) {
        self.0 += 1;
        self.generic_visit_expr_if_exp(node);
    }
    fn visit_expr_bool_op(&mut self, node: ast::ExprBoolOp) {
        self.0 += node.values.len().saturating_sub(1);
        self.generic_visit_expr_bool_op(node);
    }
    fn visit_comprehension(&mut self, node: ast::Comprehension) {
        self.0 += 1 + node.ifs.len();
        self.generic_visit_comprehension(node);
    }
    fn visit_match_case(&mut self, node: ast::MatchCase) {
        self.0 += 1;
        self.generic_visit_match_case(node);
    }
}

fn cyclomatic(body: &[ast::Stmt]) -> usize {
    let mut points = DecisionPoints::default();
    for stmt in body {
        points.visit_stmt(stmt.clone());
    }
    1 + points.0
}

fn nesting(syntax: &UnitSyntax) -> usize {
    fn walk(syntax: &UnitSyntax, stmts: &[ast::Stmt], depth: usize, best: &mut usize) {
        for stmt in stmts {
            *best = (*best).max(depth);
            match stmt {
                ast::Stmt::If(s) => {
                    walk(syntax, &s.body, depth + 1, best);
                    let elif = matches!(s.orelse.as_slice(), [only @ ast::Stmt::If(_)] if syntax.is_elif(only));
                    walk(syntax, &s.orelse, if elif { depth } else { depth + 1 }, best);
                }
                ast::Stmt::For(s) => {
                    walk(syntax, &s.body, depth + 1, best);
                    walk(syntax, &s.orelse, depth + 1, best);
                }
                ast::Stmt::AsyncFor(s) => {
                    walk(syntax, &s.body, depth + 1, best);
                    walk(syntax, &s.orelse, depth + 1, best);
                }
                ast::Stmt::While(s) => {
                    walk(syntax, &s.body, depth + 1, best);
                    walk(syntax, &s.orelse, depth + 1, best);
                }
                ast::Stmt::With(s) => walk(syntax, &s.body, depth + 1, best),
                ast::Stmt::AsyncWith(s) => walk(syntax, &s.body, depth + 1, best),
                ast::Stmt::FunctionDef(s) => walk(syntax, &s.body, depth + 1, best),
                ast::Stmt::AsyncFunctionDef(s) => walk(syntax, &s.body, depth + 1, best),
                ast::Stmt::ClassDef(s) => walk(syntax, &s.body, depth + 1, best),
                ast::Stmt::Try(s) => try_parts(syntax, &s.body, &s.handlers, &s.orelse, &s.finalbody, depth, best),
                ast::Stmt::TryStar(s) => try_parts(syntax, &s.body, &s.handlers, &s.orelse, &s.finalbody, depth, best),
                ast::Stmt::Match(s) => {
                    for case in &s.cases {
                        walk(syntax, &case.body, depth + 2, best);
                    }
                }
                _ => {}
            }
        }
    }

    fn try_parts(
        syntax: &UnitSyntax,
        body: &[ast::Stmt],
        handlers: &[ast::ExceptHandler],
        orelse: &[ast::Stmt],
        finalbody: &[ast::Stmt],
        depth: usize,
        best: &mut usize,
    ) {
        walk(syntax, body, depth + 1, best);
        for ast::ExceptHandler::ExceptHandler(h) in handlers {
            walk(syntax, &h.body, depth + 1, best);
        }
        walk(syntax, orelse, depth + 1, best);
        walk(syntax, finalbody, depth + 1, best);
    }

    let mut best = 0;
    walk(syntax, &syntax.body, 0, &mut best);
    best
}

const SYMBOL_OPERATORS: &[&str] = &[
    "=", ":=", "+=", "-=", "*=", "/=", "//=", "%=", "**=", "@=", "&=", "|=", "^=", ">>=", "<<=", "+", "-", "*", "/",
    "//", "%", "**", "@", "&", "|", "^", "~", "<<", ">>", "<", ">", "<=", ">=", "==", "!=", ".",
];

/// Identifier-like tokens: plain names and soft keywords used as names.
fn is_name(t: &BodyToken) -> bool {
    matches!(t.tok, Tok::Name { .. } | Tok::Type) || (matches!(t.tok, Tok::Match | Tok::Case) && !t.soft_keyword)
}

fn is_literal_keyword(t: &BodyToken) -> bool {
    matches!(t.tok, Tok::True | Tok::False | Tok::None)
}

fn is_hard_keyword(t: &BodyToken) -> bool {
    !is_name(t) && !t.soft_keyword && t.text.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && t.text.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(t.tok, Tok::Int { .. } | Tok::Float { .. } | Tok::Complex { .. } | Tok::String { .. })
}

fn halstead_counts(tokens: &[BodyToken]) -> HalsteadCounts {
    let mut operators: Vec<&str> = Vec::new();
    let mut operands: Vec<&str> = Vec::new();
    let mut depth = 0i64;
    let mut pending_for: Vec<i64> = Vec::new();
    let mut prev_callable = false;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        let text = t.text.as_str();
        let next = tokens.get(i + 1).map(|n| n.text.as_str());
        if t.soft_keyword {
            // statement keyword, not counted
        } else if is_literal_keyword(t) || is_name(t) {
            operands.push(text);
        } else if is_hard_keyword(t) {
            match text {
                "for" => pending_for.push(depth),
                "in" if pending_for.last() == Some(&depth) => {
                    pending_for.pop();
                }
                "not" if next == Some("in") => {
                    operators.push("not in");
                    i += 1;
                }
                "is" if next == Some("not") => {
                    operators.push("is not");
                    i += 1;
                }
                "and" | "or" | "not" | "in" | "is" => operators.push(text),
                _ => {}
            }
        } else {
            match &t.tok {
                Tok::Int { .. } | Tok::Float { .. } | Tok::Complex { .. } | Tok::String { .. } | Tok::Ellipsis => {
                    operands.push(text)
                }
                Tok::Lpar | Tok::Lsqb => {
                    if prev_callable {
                        operators.push(if matches!(t.tok, Tok::Lpar) { "()" } else { "[]" });
                    }
                    depth += 1;
                }
                Tok::Lbrace => depth += 1,
                Tok::Rpar | Tok::Rsqb | Tok::Rbrace => depth -= 1,
                _ if SYMBOL_OPERATORS.contains(&text) => operators.push(text),
                _ => {}
            }
        }
        prev_callable = (!t.soft_keyword && (is_name(t) || is_literal_keyword(t)))
            || matches!(t.tok, Tok::String { .. } | Tok::Rpar | Tok::Rsqb);
        i += 1;
    }
    let distinct = |v: &[&str]| v.iter().collect::<HashSet<_>>().len();
    HalsteadCounts {
        eta1: distinct(&operators),
        eta2: distinct(&operands),
        n1: operators.len(),
        n2: operands.len(),
    }
}
