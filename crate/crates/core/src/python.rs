//! Python frontend: splits a module into definition units, collects call
//! sites and import bindings, and lexes unit bodies for token metrics.
//!
//! Only this frontend ships; everything above it works on [`ParsedModule`]
//! and [`UnitSyntax`], so another language needs only these two views.

use rustpython_ast::text_size::TextRange;
use rustpython_ast::{self as ast, Ranged, Visitor};
use rustpython_parser::lexer::lex;
use rustpython_parser::{Mode, Parse, Tok};

use crate::repo::UnitKind;

/// Fills the descents `rustpython_ast::Visitor` leaves empty (comprehension
/// clauses, argument defaults and annotations, keyword arguments, `with`
/// items, match-case guards and bodies) so a visitor sees every nested
/// expression and statement.
macro_rules! visit_all_children {
    () => {
        fn generic_visit_comprehension(&mut self, node: ::rustpython_ast::Comprehension) {
            self.visit_expr(node.target);
            self.visit_expr(node.iter);
            for e in node.ifs {
                self.visit_expr(e);
            }
        }
        fn generic_visit_arguments(&mut self, node: ::rustpython_ast::Arguments) {
            for a in node.posonlyargs.into_iter().chain(node.args).chain(node.kwonlyargs) {
                if let Some(ann) = a.def.annotation {
                    self.visit_expr(*ann);
                }
                if let Some(default) = a.default {
                    self.visit_expr(*default);
                }
            }
            for a in node.vararg.into_iter().chain(node.kwarg) {
                if let Some(ann) = a.annotation {
                    self.visit_expr(*ann);
                }
            }
        }
        fn generic_visit_keyword(&mut self, node: ::rustpython_ast::Keyword) {
            self.visit_expr(node.value);
        }
        fn generic_visit_withitem(&mut self, node: ::rustpython_ast::WithItem) {
            self.visit_expr(node.context_expr);
            if let Some(v) = node.optional_vars {
                self.visit_expr(*v);
            }
        }
        fn generic_visit_match_case(&mut self, node: ::rustpython_ast::MatchCase) {
            if let Some(guard) = node.guard {
                self.visit_expr(*guard);
            }
            for s in node.body {
                self.visit_stmt(s);
            }
        }
    };
}
pub(crate) use visit_all_children;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub message: String,
}

/// Byte offset to 1-based line lookups.
#[derive(Debug, Clone)]
pub struct LineIndex {
    starts: Vec<usize>,
    len: usize,
}

impl LineIndex {
    pub fn new(text: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        Self { starts, len: text.len() }
    }

    pub fn line_of(&self, offset: usize) -> usize {
        match self.starts.binary_search(&offset) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }

    pub fn line_start(&self, line: usize) -> usize {
        self.starts[line - 1]
    }

    /// Offset just past the newline that ends `line` (or end of text).
    pub fn line_end(&self, line: usize) -> usize {
        self.starts.get(line).copied().unwrap_or(self.len)
    }
}

/// How a call expression names its callee.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum CallTarget {
    /// `f(...)`, `mod.f(...)`, `self.m(...)`: a dotted chain of names.
    Dotted(Vec<String>),
    /// `expr.m(...)` where the receiver is not a plain name chain.
    Method(String),
}

impl CallTarget {
    pub fn last(&self) -> &str {
        match self {
            CallTarget::Dotted(parts) => parts.last().map(String::as_str).unwrap_or(""),
            CallTarget::Method(name) => name,
        }
    }

    pub fn display(&self) -> String {
        match self {
            CallTarget::Dotted(parts) => parts.join("."),
            CallTarget::Method(name) => format!("<expr>.{name}"),
        }
    }
}

/// A name bound by an import statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportBinding {
    /// Name visible in the importing module.
    pub local: String,
    /// Absolute dotted module path (relative imports already resolved).
    pub module: String,
    /// For `from m import x`, the imported attribute `x`.
    pub attr: Option<String>,
}

/// One definition unit located in a module's text.
#[derive(Debug, Clone)]
pub struct ParsedUnit {
    pub qualname: String,
    pub kind: UnitKind,
    /// Byte offsets into the module text.
    pub start: usize,
    pub body_start: usize,
    pub doc_end: usize,
    pub end: usize,
    pub start_line: usize,
    pub end_line: usize,
    /// Enclosing class qualname for methods.
    pub class: Option<String>,
    pub calls: Vec<CallTarget>,
}

impl ParsedUnit {
    pub fn signature<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.body_start]
    }

    pub fn docstring<'a>(&self, text: &'a str) -> &'a str {
        &text[self.body_start..self.doc_end]
    }

    pub fn body<'a>(&self, text: &'a str) -> &'a str {
        &text[self.doc_end..self.end]
    }

    pub fn source<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }

    /// Leading whitespace of the unit's first line.
    pub fn indent<'a>(&self, text: &'a str) -> &'a str {
        leading_whitespace(&text[self.start..])
    }
}

#[derive(Debug, Clone)]
pub struct ParsedModule {
    pub units: Vec<ParsedUnit>,
    pub imports: Vec<ImportBinding>,
}

impl ParsedModule {
    pub fn unit(&self, qualname: &str) -> Option<&ParsedUnit> {
        self.units.iter().find(|u| u.qualname == qualname)
    }
}

pub fn check_syntax(text: &str, path: &str) -> Result<ast::Suite, SyntaxError> {
    ast::Suite::parse(text, path).map_err(|e| {
        let offset = usize::from(e.offset).min(text.len());
        SyntaxError {
            line: LineIndex::new(text).line_of(offset),
            message: e.error.to_string(),
        }
    })
}

/// Parses a module and extracts its units.
///
/// `module_name` is the dotted module path of the file, used to resolve
/// relative imports; `is_package` is true for `__init__.py`.
pub fn parse_module(
    text: &str,
    path: &str,
    module_name: &str,
    is_package: bool,
) -> Result<ParsedModule, SyntaxError> {
    let suite = check_syntax(text, path)?;
    let index = LineIndex::new(text);
    let mut units = Vec::new();
    for stmt in &suite {
        match stmt {
            ast::Stmt::FunctionDef(_) | ast::Stmt::AsyncFunctionDef(_) => {
                units.push(make_unit(text, &index, stmt, "", None, UnitKind::Function));
            }
            ast::Stmt::ClassDef(class) => collect_class(text, &index, stmt, class, "", &mut units),
            _ => {}
        }
    }
    dedupe_qualnames(&mut units);

    let mut imports = ImportCollector {
        package: package_of(module_name, is_package),
        out: Vec::new(),
    };
    for stmt in suite {
        imports.visit_stmt(stmt);
    }
    Ok(ParsedModule { units, imports: imports.out })
}

fn collect_class(
    text: &str,
    index: &LineIndex,
    stmt: &ast::Stmt,
    class: &ast::StmtClassDef,
    prefix: &str,
    out: &mut Vec<ParsedUnit>,
) {
    let qual = format!("{prefix}{}", class.name.as_str());
    let parent = if prefix.is_empty() {
        None
    } else {
        Some(prefix.trim_end_matches('.').to_string())
    };
    out.push(make_unit(text, index, stmt, prefix, parent, UnitKind::Class));
    let inner_prefix = format!("{qual}.");
    for member in &class.body {
        match member {
            ast::Stmt::FunctionDef(_) | ast::Stmt::AsyncFunctionDef(_) => out.push(make_unit(
                text,
                index,
                member,
                &inner_prefix,
                Some(qual.clone()),
                UnitKind::Method,
            )),
            ast::Stmt::ClassDef(inner) => collect_class(text, index, member, inner, &inner_prefix, out),
            _ => {}
        }
    }
}

// Redefinitions (property setters, conditional overrides) would collide;
// later ones get a `#n` suffix.
fn dedupe_qualnames(units: &mut [ParsedUnit]) {
    let mut seen = std::collections::HashMap::<String, usize>::new();
    for unit in units.iter_mut() {
        let n = seen.entry(unit.qualname.clone()).or_insert(0);
        *n += 1;
        if *n > 1 {
            unit.qualname = format!("{}#{}", unit.qualname, n);
        }
    }
}

struct DefParts<'a> {
    name: &'a str,
    range: TextRange,
    decorators: &'a [ast::Expr],
    body: &'a [ast::Stmt],
}

fn def_parts(stmt: &ast::Stmt) -> DefParts<'_> {
    match stmt {
        ast::Stmt::FunctionDef(f) => DefParts {
            name: f.name.as_str(),
            range: f.range,
            decorators: &f.decorator_list,
            body: &f.body,
        },
        ast::Stmt::AsyncFunctionDef(f) => DefParts {
            name: f.name.as_str(),
            range: f.range,
            decorators: &f.decorator_list,
            body: &f.body,
        },
        ast::Stmt::ClassDef(c) => DefParts {
            name: c.name.as_str(),
            range: c.range,
            decorators: &c.decorator_list,
            body: &c.body,
        },
        _ => unreachable!("def_parts called on a non-definition statement"),
    }
}

fn make_unit(
    text: &str,
    index: &LineIndex,
    stmt: &ast::Stmt,
    prefix: &str,
    class: Option<String>,
    kind: UnitKind,
) -> ParsedUnit {
    let parts = def_parts(stmt);
    let def_start = usize::from(parts.range.start());
    let first_offset = parts
        .decorators
        .iter()
        .map(|d| usize::from(d.start()))
        .chain(std::iter::once(def_start))
        .min()
        .unwrap_or(def_start);
    let start_line = index.line_of(first_offset);
    let start = index.line_start(start_line);

    let last_end = usize::from(parts.range.end());
    let end_line = index.line_of(last_end.saturating_sub(1).max(def_start));
    let end = index.line_end(end_line);

    let first = &parts.body[0];
    let first_start = usize::from(first.start());
    let first_line_start = index.line_start(index.line_of(first_start));
    let body_start = if text[first_line_start..first_start].trim().is_empty() {
        first_line_start
    } else {
        first_start
    };

    let doc_end = if is_docstring(first) {
        match parts.body.get(1) {
            Some(next) if index.line_of(usize::from(next.start())) == index.line_of(usize::from(first.end())) => {
                usize::from(next.start())
            }
            _ => index.line_end(index.line_of(usize::from(first.end()).saturating_sub(1))).min(end),
        }
    } else {
        body_start
    };

    let mut calls = CallCollector::default();
    let in_scope: Vec<&ast::Stmt> = if kind == UnitKind::Class {
        parts
            .body
            .iter()
            .filter(|s| {
                !matches!(
                    s,
                    ast::Stmt::FunctionDef(_) | ast::Stmt::AsyncFunctionDef(_) | ast::Stmt::ClassDef(_)
                )
            })
            .collect()
    } else {
        parts.body.iter().collect()
    };
    for s in in_scope {
        calls.visit_stmt(s.clone());
    }

    ParsedUnit {
        qualname: format!("{prefix}{}", parts.name),
        kind,
        start,
        body_start,
        doc_end,
        end,
        start_line,
        end_line,
        class,
        calls: calls.out,
    }
}

pub(crate) fn is_docstring(stmt: &ast::Stmt) -> bool {
    matches!(
        stmt,
        ast::Stmt::Expr(e) if matches!(
            e.value.as_ref(),
            ast::Expr::Constant(c) if matches!(c.value, ast::Constant::Str(_))
        )
    )
}

#[derive(Default)]
struct CallCollector {
    out: Vec<CallTarget>,
}

fn dotted_name(expr: &ast::Expr) -> Option<Vec<String>> {
    match expr {
        ast::Expr::Name(n) => Some(vec![n.id.to_string()]),
        ast::Expr::Attribute(a) => {
            let mut parts = dotted_name(&a.value)?;
            parts.push(a.attr.to_string());
            Some(parts)
        }
        _ => None,
    }
}

impl Visitor for CallCollector {
    visit_all_children!();

    fn visit_expr_call(&mut self, node: ast::ExprCall) {
        if let Some(parts) = dotted_name(&node.func) {
            self.out.push(CallTarget::Dotted(parts));
        } else if let ast::Expr::Attribute(a) = node.func.as_ref() {
            self.out.push(CallTarget::Method(a.attr.to_string()));
        }
        self.generic_visit_expr_call(node);
    }
}

struct ImportCollector {
    package: Vec<String>,
    out: Vec<ImportBinding>,
}

fn package_of(module_name: &str, is_package: bool) -> Vec<String> {
    let mut parts: Vec<String> = module_name
        .split('.')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if !is_package {
        parts.pop();
    }
    parts
}

impl Visitor for ImportCollector {
    visit_all_children!();

    fn visit_stmt_import(&mut self, node: ast::StmtImport) {
        for alias in &node.names {
            let full = alias.name.to_string();
            match &alias.asname {
                Some(asname) => self.out.push(ImportBinding {
                    local: asname.to_string(),
                    module: full,
                    attr: None,
                }),
                None => {
                    // `import a.b` binds `a`; calls then spell out `a.b.f`.
                    let head = full.split('.').next().unwrap_or_default().to_string();
                    self.out.push(ImportBinding {
                        local: head.clone(),
                        module: head,
                        attr: None,
                    });
                }
            }
        }
    }

    fn visit_stmt_import_from(&mut self, node: ast::StmtImportFrom) {
        let level = node.level.map(|l| l.to_u32()).unwrap_or(0) as usize;
        let mut base: Vec<String> = if level == 0 {
            Vec::new()
        } else {
            let keep = self.package.len().saturating_sub(level - 1);
            self.package[..keep].to_vec()
        };
        if let Some(module) = &node.module {
            base.extend(module.as_str().split('.').map(str::to_string));
        }
        let module = base.join(".");
        for alias in &node.names {
            if alias.name.as_str() == "*" {
                continue;
            }
            self.out.push(ImportBinding {
                local: alias.asname.as_ref().unwrap_or(&alias.name).to_string(),
                module: module.clone(),
                attr: Some(alias.name.to_string()),
            });
        }
    }
}

pub fn leading_whitespace(text: &str) -> &str {
    let n = text.len() - text.trim_start_matches([' ', '\t']).len();
    &text[..n]
}

/// Removes `indent` from the start of every line that carries it.
pub fn dedent(text: &str, indent: &str) -> String {
    if indent.is_empty() {
        return text.to_string();
    }
    text.split_inclusive('\n')
        .map(|line| line.strip_prefix(indent).unwrap_or(line))
        .collect()
}

/// Re-indents a (column-0) definition to `indent`, leaving blank lines empty.
pub fn indent_lines(text: &str, indent: &str) -> String {
    if indent.is_empty() {
        return text.to_string();
    }
    text.split_inclusive('\n')
        .map(|line| {
            if line.trim().is_empty() {
                line.trim_start_matches([' ', '\t']).to_string()
            } else {
                format!("{indent}{line}")
            }
        })
        .collect()
}

/// A standalone definition (`def` or `class`) split into its parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Definition {
    pub name: String,
    pub is_class: bool,
    /// Leading whitespace of the first line.
    pub indent: String,
    /// Parts of the dedented text.
    pub signature: String,
    pub docstring: String,
    pub body: String,
}

/// Parses text holding exactly one definition, at any indentation.
pub fn parse_definition(source: &str) -> Result<Definition, SyntaxError> {
    let first = source.lines().find(|l| !l.trim().is_empty()).unwrap_or_default();
    let indent = leading_whitespace(first).to_string();
    let mut text = dedent(source.trim_start_matches(['\n', '\r']), &indent);
    if !text.ends_with('\n') {
        text.push('\n');
    }
    let suite = check_syntax(&text, "<definition>")?;
    let [stmt] = suite.as_slice() else {
        return Err(SyntaxError {
            line: 1,
            message: format!("expected exactly one definition, found {} statements", suite.len()),
        });
    };
    let kind = match stmt {
        ast::Stmt::FunctionDef(_) | ast::Stmt::AsyncFunctionDef(_) => UnitKind::Function,
        ast::Stmt::ClassDef(_) => UnitKind::Class,
        _ => {
            return Err(SyntaxError {
                line: 1,
                message: "expected a function or class definition".into(),
            })
        }
    };
    let unit = make_unit(&text, &LineIndex::new(&text), stmt, "", None, kind);
    Ok(Definition {
        name: unit.qualname.clone(),
        is_class: kind == UnitKind::Class,
        indent,
        signature: unit.signature(&text).to_string(),
        docstring: unit.docstring(&text).to_string(),
        body: text[unit.doc_end..].to_string(),
    })
}

/// Lexes a unit's verbatim source (possibly indented), returning tokens
/// with byte ranges relative to `source`. Layout tokens are dropped.
pub fn lex_unit(source: &str) -> Result<Vec<(Tok, std::ops::Range<usize>)>, SyntaxError> {
    let indented = source.starts_with([' ', '\t']);
    let prefix = if indented { "if 1:\n" } else { "" };
    let text = format!("{prefix}{source}");
    let index = LineIndex::new(&text);
    let mut out = Vec::new();
    for item in lex(&text, Mode::Module) {
        let (tok, range) = item.map_err(|e| SyntaxError {
            line: index.line_of(usize::from(e.location).min(text.len())).saturating_sub(usize::from(indented)).max(1),
            message: e.error.to_string(),
        })?;
        if is_layout(&tok) {
            continue;
        }
        let start = usize::from(range.start());
        if start < prefix.len() {
            continue;
        }
        out.push((tok, start - prefix.len()..usize::from(range.end()) - prefix.len()));
    }
    Ok(out)
}

/// A lexed token of a unit body, with the facts the metrics need.
#[derive(Debug, Clone)]
pub struct BodyToken {
    pub tok: Tok,
    pub text: String,
    pub first_line: usize,
    pub last_line: usize,
    /// `match`/`case` acting as a statement keyword.
    pub soft_keyword: bool,
}

/// A standalone, re-parsed view of one unit used by the complexity metrics.
#[derive(Debug, Clone)]
pub struct UnitSyntax {
    /// Dedented unit source.
    pub source: String,
    /// Offset where the body (after signature and own docstring) begins.
    pub body_offset: usize,
    /// Statements of the definition body, own docstring removed.
    pub body: Vec<ast::Stmt>,
    /// Body tokens excluding comments, layout tokens and every docstring.
    pub tokens: Vec<BodyToken>,
}

impl UnitSyntax {
    pub fn new(signature: &str, docstring: &str, body: &str) -> Result<Self, SyntaxError> {
        let indent = leading_whitespace(signature).to_string();
        let sig = dedent(signature, &indent);
        let doc = dedent(docstring, &indent);
        let rest = dedent(body, &indent);
        let mut source = format!("{sig}{doc}{rest}");
        if !source.ends_with('\n') {
            source.push('\n');
        }
        let body_offset = sig.len() + doc.len();
        let suite = check_syntax(&source, "<unit>")?;
        let def = suite.into_iter().next().ok_or_else(|| SyntaxError {
            line: 1,
            message: "empty unit".into(),
        })?;
        let mut stmts = match def {
            ast::Stmt::FunctionDef(f) => f.body,
            ast::Stmt::AsyncFunctionDef(f) => f.body,
            ast::Stmt::ClassDef(c) => c.body,
            _ => {
                return Err(SyntaxError {
                    line: 1,
                    message: "unit is not a definition".into(),
                })
            }
        };
        if stmts.first().is_some_and(is_docstring) && usize::from(stmts[0].start()) < body_offset {
            stmts.remove(0);
        }

        let mut docs = DocstringRanges::default();
        for s in &stmts {
            docs.visit_stmt(s.clone());
        }
        let tokens = lex_body(&source, body_offset, &docs.ranges)?;
        Ok(Self {
            source,
            body_offset,
            body: stmts,
            tokens,
        })
    }

    /// True when the statement at `stmt` is spelled `elif`.
    pub fn is_elif(&self, stmt: &ast::Stmt) -> bool {
        self.source[usize::from(stmt.start())..].starts_with("elif")
    }
}

#[derive(Default)]
struct DocstringRanges {
    ranges: Vec<(usize, usize)>,
}

impl DocstringRanges {
    fn record(&mut self, body: &[ast::Stmt]) {
        if let Some(first) = body.first().filter(|s| is_docstring(s)) {
            self.ranges.push((usize::from(first.start()), usize::from(first.end())));
        }
    }
}

impl Visitor for DocstringRanges {
    visit_all_children!();

    fn visit_stmt_function_def(&mut self, node: ast::StmtFunctionDef) {
        self.record(&node.body);
        self.generic_visit_stmt_function_def(node);
    }
    fn visit_stmt_async_function_def(&mut self, node: ast::StmtAsyncFunctionDef) {
        self.record(&node.body);
        self.generic_visit_stmt_async_function_def(node);
    }
    fn visit_stmt_class_def(&mut self, node: ast::StmtClassDef) {
        self.record(&node.body);
        self.generic_visit_stmt_class_def(node);
    }
}

fn is_layout(tok: &Tok) -> bool {
    matches!(tok, Tok::Newline | Tok::Indent | Tok::Dedent | Tok::EndOfFile)
}

fn is_assign_like(tok: &Tok) -> bool {
    matches!(
        tok,
        Tok::Equal
            | Tok::ColonEqual
            | Tok::PlusEqual
            | Tok::MinusEqual
            | Tok::StarEqual
            | Tok::SlashEqual
            | Tok::DoubleSlashEqual
            | Tok::PercentEqual
            | Tok::DoubleStarEqual
            | Tok::AtEqual
            | Tok::AmperEqual
            | Tok::VbarEqual
            | Tok::CircumflexEqual
            | Tok::LeftShiftEqual
            | Tok::RightShiftEqual
    )
}

fn lex_body(source: &str, body_offset: usize, docstrings: &[(usize, usize)]) -> Result<Vec<BodyToken>, SyntaxError> {
    let index = LineIndex::new(source);
    let mut all: Vec<(Tok, TextRange)> = Vec::new();
    for item in lex(source, Mode::Module) {
        let (tok, range) = item.map_err(|e| SyntaxError {
            line: index.line_of(usize::from(e.location).min(source.len())),
            message: e.error.to_string(),
        })?;
        all.push((tok, range));
    }

    let soft = soft_keyword_flags(&all);
    let mut out = Vec::new();
    for ((tok, range), soft_keyword) in all.into_iter().zip(soft) {
        let start = usize::from(range.start());
        let end = usize::from(range.end());
        if is_layout(&tok) || start < body_offset {
            continue;
        }
        if docstrings.iter().any(|&(a, b)| a <= start && start < b) {
            continue;
        }
        out.push(BodyToken {
            text: source[start..end].to_string(),
            first_line: index.line_of(start),
            last_line: index.line_of(end.saturating_sub(1).max(start)),
            tok,
            soft_keyword,
        });
    }
    Ok(out)
}

// `match`/`case` are keywords only when they open a statement, are not
// assigned to or accessed, and a ':' follows at bracket depth 0 on the same
// logical line.
fn soft_keyword_flags(tokens: &[(Tok, TextRange)]) -> Vec<bool> {
    let mut flags = vec![false; tokens.len()];
    let mut at_start = true;
    for (i, (tok, _)) in tokens.iter().enumerate() {
        if matches!(tok, Tok::Newline | Tok::Indent | Tok::Dedent) {
            at_start = true;
            continue;
        }
        if matches!(tok, Tok::EndOfFile) {
            continue;
        }
        let starts = std::mem::replace(&mut at_start, false);
        if !(starts && matches!(tok, Tok::Match | Tok::Case)) {
            continue;
        }
        match tokens.get(i + 1).map(|(t, _)| t) {
            Some(t) if is_assign_like(t) || matches!(t, Tok::Colon | Tok::Dot | Tok::Comma | Tok::Rpar | Tok::Rsqb) => {
                continue
            }
            _ => {}
        }
        let mut depth = 0i32;
        for (next, _) in &tokens[i + 1..] {
            match next {
                Tok::Newline => break,
                Tok::Lpar | Tok::Lsqb | Tok::Lbrace => depth += 1,
                Tok::Rpar | Tok::Rsqb | Tok::Rbrace => depth -= 1,
                Tok::Colon if depth == 0 => {
                    flags[i] = true;
                    break;
                }
                _ => {}
            }
        }
    }
    flags
}
