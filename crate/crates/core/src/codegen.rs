//! Tree to if/else-ladder source text, and a reference evaluator that reads
//! the emitted text back and executes it.
//!
//! Branches of a categorical node are emitted most-populous first (ties in
//! domain order). When a node has a branch for every domain value, the last
//! branch becomes the closing `else`, so the function contains one `return`
//! per leaf. Nodes that cover only part of their domain get an explicit
//! closing `else` that returns the node's fallback label.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt::Write;

use crate::dataset::{FeatureSource, FeatureValue, Schema};
use crate::induction::{TrainedModel, TreeNode, SplitTest, BRANCH_GT, BRANCH_LE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodegenError {
    #[error("`{0}` is not a valid function name for this dialect")]
    InvalidIdentifier(String),
    #[error("model cannot be emitted: {0}")]
    InvalidModel(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("missing feature `{0}`")]
    MissingFeature(String),
    #[error("evaluation failed: {0}")]
    Runtime(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum EmitDialect {
    PseudoCode,
    CStyle,
    PythonStyle,
}

impl EmitDialect {
    pub const ALL: [EmitDialect; 3] = [
        EmitDialect::PseudoCode,
        EmitDialect::CStyle,
        EmitDialect::PythonStyle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EmitDialect::PseudoCode => "pseudo",
            EmitDialect::CStyle => "c",
            EmitDialect::PythonStyle => "python",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pseudo" | "pseudocode" => Some(EmitDialect::PseudoCode),
            "c" | "cstyle" | "c-style" => Some(EmitDialect::CStyle),
            "python" | "py" | "pythonstyle" => Some(EmitDialect::PythonStyle),
            _ => None,
        }
    }

    fn keywords(self) -> &'static [&'static str] {
        match self {
            EmitDialect::PseudoCode => &[
                "and", "else", "end", "false", "function", "if", "not", "or", "return", "then",
                "true",
            ],
            EmitDialect::CStyle => &[
                "auto", "break", "case", "char", "const", "continue", "default", "do", "double",
                "else", "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long",
                "register", "restrict", "return", "short", "signed", "sizeof", "static", "strcmp",
                "struct", "switch", "typedef", "union", "unsigned", "void", "volatile", "while",
            ],
            EmitDialect::PythonStyle => &[
                "False", "None", "True", "and", "as", "assert", "async", "await", "break",
                "class", "continue", "def", "del", "elif", "else", "except", "finally", "for",
                "from", "global", "if", "import", "in", "is", "lambda", "nonlocal", "not", "or",
                "pass", "raise", "return", "try", "while", "with", "yield",
            ],
        }
    }

    fn is_identifier(self, s: &str) -> bool {
        let mut chars = s.chars();
        let head_ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_');
        head_ok
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
            && !self.keywords().contains(&s)
    }
}

impl core::fmt::Display for EmitDialect {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmitOptions {
    /// Keep model features that no node tests as trailing parameters.
    pub keep_unused_features: bool,
}

/// One parameter of the emitted function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parameter {
    pub name: String,
    pub feature: String,
    pub continuous: bool,
}

enum Cond<'a> {
    Eq(&'a str, &'a str),
    Le(&'a str, f64),
}

enum Tail<'a> {
    /// The last branch, taken by every value the arms did not match.
    Branch(&'a str, &'a TreeNode),
    Fallback(&'a str),
}

struct Ladder<'a> {
    arms: Vec<(Cond<'a>, &'a TreeNode)>,
    tail: Tail<'a>,
}

fn ladder<'a>(
    schema: &Schema,
    test: &'a SplitTest,
    branches: &'a BTreeMap<String, TreeNode>,
    fallback: &'a str,
) -> Result<Ladder<'a>, CodegenError> {
    match test {
        SplitTest::Continuous {
            attribute,
            threshold,
        } => match (branches.get(BRANCH_LE), branches.get(BRANCH_GT)) {
            (Some(le), Some(gt)) if branches.len() == 2 => Ok(Ladder {
                arms: alloc::vec![(Cond::Le(attribute, *threshold), le)],
                tail: Tail::Branch(BRANCH_GT, gt),
            }),
            _ => Err(CodegenError::InvalidModel(format!(
                "continuous test on `{attribute}` needs exactly `<=` and `>` branches"
            ))),
        },
        SplitTest::Categorical { attribute } => {
            let domain = schema.attribute(attribute).and_then(|a| a.kind.domain());
            let rank = |k: &str| {
                domain
                    .and_then(|d| d.iter().position(|v| v == k))
                    .unwrap_or(usize::MAX)
            };
            let mut ordered: Vec<(&str, &TreeNode)> =
                branches.iter().map(|(k, c)| (k.as_str(), c)).collect();
            ordered.sort_by(|(ka, a), (kb, b)| {
                b.distribution()
                    .total()
                    .partial_cmp(&a.distribution().total())
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| rank(ka).cmp(&rank(kb)))
                    .then_with(|| ka.cmp(kb))
            });
            let covers_domain = domain.is_some_and(|d| {
                d.len() == branches.len() && d.iter().all(|v| branches.contains_key(v))
            });
            let tail = match ordered.last() {
                Some(&(k, c)) if covers_domain => {
                    ordered.pop();
                    Tail::Branch(k, c)
                }
                _ => Tail::Fallback(fallback),
            };
            Ok(Ladder {
                arms: ordered
                    .into_iter()
                    .map(|(k, c)| (Cond::Eq(attribute, k), c))
                    .collect(),
                tail,
            })
        }
    }
}

fn sanitize(feature: &str, dialect: EmitDialect) -> String {
    let mut s: String = feature
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit()) {
        s.insert(0, '_');
    }
    if dialect.keywords().contains(&s.as_str()) {
        s.push('_');
    }
    s
}

fn tested_features<'a>(
    schema: &Schema,
    node: &'a TreeNode,
    out: &mut Vec<&'a str>,
) -> Result<(), CodegenError> {
    if let TreeNode::Internal {
        test,
        branches,
        fallback_label,
        ..
    } = node
    {
        if !out.contains(&test.attribute()) {
            out.push(test.attribute());
        }
        let l = ladder(schema, test, branches, fallback_label)?;
        for (_, child) in &l.arms {
            tested_features(schema, child, out)?;
        }
        if let Tail::Branch(_, child) = l.tail {
            tested_features(schema, child, out)?;
        }
    }
    Ok(())
}

/// Parameters of the emitted function: tested features in first-use order,
/// then (optionally) the remaining model features in model order.
pub fn signature(
    model: &TrainedModel,
    dialect: EmitDialect,
    options: &EmitOptions,
) -> Result<Vec<Parameter>, CodegenError> {
    let mut features = Vec::new();
    tested_features(&model.schema, &model.root, &mut features)?;
    if options.keep_unused_features {
        for f in &model.features {
            if !features.contains(&f.as_str()) {
                features.push(f);
            }
        }
    }
    let mut taken = BTreeSet::new();
    let mut params = Vec::with_capacity(features.len());
    for feature in features {
        let base = sanitize(feature, dialect);
        let mut name = base.clone();
        let mut n = 2;
        while !taken.insert(name.clone()) {
            name = format!("{base}_{n}");
            n += 1;
        }
        let continuous = model
            .schema
            .attribute(feature)
            .is_some_and(|a| a.kind.is_continuous());
        params.push(Parameter {
            name,
            feature: feature.to_string(),
            continuous,
        });
    }
    Ok(params)
}

pub fn emit(
    model: &TrainedModel,
    dialect: EmitDialect,
    function_name: &str,
) -> Result<String, CodegenError> {
    emit_with(model, dialect, function_name, &EmitOptions::default())
}

pub fn emit_with(
    model: &TrainedModel,
    dialect: EmitDialect,
    function_name: &str,
    options: &EmitOptions,
) -> Result<String, CodegenError> {
    if !dialect.is_identifier(function_name) {
        return Err(CodegenError::InvalidIdentifier(function_name.to_string()));
    }
    let params = signature(model, dialect, options)?;
    let names: BTreeMap<&str, &str> = params
        .iter()
        .map(|p| (p.feature.as_str(), p.name.as_str()))
        .collect();
    let mut e = Emitter {
        out: String::new(),
        dialect,
        schema: &model.schema,
        names: &names,
    };
    e.header(function_name, &params);
    e.node(&model.root, 1)?;
    e.footer();
    Ok(e.out)
}

struct Emitter<'a> {
    out: String,
    dialect: EmitDialect,
    schema: &'a Schema,
    names: &'a BTreeMap<&'a str, &'a str>,
}

impl Emitter<'_> {
    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn header(&mut self, name: &str, params: &[Parameter]) {
        let list: Vec<String> = params
            .iter()
            .map(|p| match self.dialect {
                EmitDialect::CStyle if p.continuous => format!("double {}", p.name),
                EmitDialect::CStyle => format!("const char *{}", p.name),
                _ => p.name.clone(),
            })
            .collect();
        let list = list.join(", ");
        let text = match self.dialect {
            EmitDialect::PseudoCode => format!("function {name}({list})"),
            EmitDialect::CStyle if list.is_empty() => format!("const char *{name}(void) {{"),
            EmitDialect::CStyle => format!("const char *{name}({list}) {{"),
            EmitDialect::PythonStyle => format!("def {name}({list}):"),
        };
        self.line(0, &text);
    }

    fn footer(&mut self) {
        match self.dialect {
            EmitDialect::PseudoCode => self.line(0, "end function"),
            EmitDialect::CStyle => self.line(0, "}"),
            EmitDialect::PythonStyle => {}
        }
    }

    fn ret(&mut self, depth: usize, label: &str) {
        let lit = quote(label);
        let text = match self.dialect {
            EmitDialect::CStyle => format!("return {lit};"),
            _ => format!("return {lit}"),
        };
        self.line(depth, &text);
    }

    fn cond(&self, c: &Cond<'_>) -> String {
        let param = |f: &str| self.names.get(f).copied().unwrap_or(f).to_string();
        match (c, self.dialect) {
            (Cond::Eq(f, v), EmitDialect::CStyle) => {
                format!("strcmp({}, {}) == 0", param(f), quote(v))
            }
            (Cond::Eq(f, v), _) => format!("{} == {}", param(f), quote(v)),
            (Cond::Le(f, t), _) => format!("{} <= {}", param(f), t),
        }
    }

    fn node(&mut self, node: &TreeNode, depth: usize) -> Result<(), CodegenError> {
        let (test, branches, fallback) = match node {
            TreeNode::Leaf { label, .. } => {
                self.ret(depth, label);
                return Ok(());
            }
            TreeNode::Internal {
                test,
                branches,
                fallback_label,
                ..
            } => (test, branches, fallback_label),
        };
        let l = ladder(self.schema, test, branches, fallback)?;
        for (i, (cond, child)) in l.arms.iter().enumerate() {
            let c = self.cond(cond);
            let text = match (self.dialect, i) {
                (EmitDialect::PseudoCode, 0) => format!("if {c} then"),
                (EmitDialect::PseudoCode, _) => format!("else if {c} then"),
                (EmitDialect::CStyle, 0) => format!("if ({c}) {{"),
                (EmitDialect::CStyle, _) => format!("}} else if ({c}) {{"),
                (EmitDialect::PythonStyle, 0) => format!("if {c}:"),
                (EmitDialect::PythonStyle, _) => format!("elif {c}:"),
            };
            self.line(depth, &text);
            self.node(child, depth + 1)?;
        }
        if l.arms.is_empty() {
            // A lone branch covering the whole domain needs no test.
            match l.tail {
                Tail::Branch(_, child) => return self.node(child, depth),
                Tail::Fallback(label) => {
                    self.ret(depth, label);
                    return Ok(());
                }
            }
        }
        let text = match self.dialect {
            EmitDialect::PseudoCode => "else",
            EmitDialect::CStyle => "} else {",
            EmitDialect::PythonStyle => "else:",
        };
        self.line(depth, text);
        match l.tail {
            Tail::Branch(_, child) => self.node(child, depth + 1)?,
            Tail::Fallback(label) => self.ret(depth + 1, label),
        }
        match self.dialect {
            EmitDialect::PseudoCode => self.line(depth, "end if"),
            EmitDialect::CStyle => self.line(depth, "}"),
            EmitDialect::PythonStyle => {}
        }
        Ok(())
    }
}

/// Double-quoted literal valid in all three dialects.
fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => {
                let _ = write!(out, "\\{:03o}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Classifies `record` by walking the same ladder the emitter prints. Values
/// a node has no branch for (unseen or missing) yield that node's fallback
/// label, so the result always equals tree classification.
pub fn interpret<S: FeatureSource + ?Sized>(
    model: &TrainedModel,
    record: &S,
) -> Result<String, CodegenError> {
    let mut node = &model.root;
    loop {
        let (test, branches, fallback) = match node {
            TreeNode::Leaf { label, .. } => return Ok(label.clone()),
            TreeNode::Internal {
                test,
                branches,
                fallback_label,
                ..
            } => (test, branches, fallback_label),
        };
        let value = record
            .feature(test.attribute())
            .ok_or_else(|| CodegenError::MissingFeature(test.attribute().to_string()))?;
        let l = ladder(&model.schema, test, branches, fallback)?;
        let mut next = None;
        for (cond, child) in &l.arms {
            let hit = match (cond, value) {
                (Cond::Eq(_, v), FeatureValue::Text(s)) => *v == s,
                (Cond::Le(_, t), FeatureValue::Number(x)) => x <= *t,
                (Cond::Le(f, t), FeatureValue::Text(s)) => {
                    let x: f64 = s.trim().parse().map_err(|_| {
                        CodegenError::Runtime(format!("`{f}` is not numeric: {s:?}"))
                    })?;
                    x <= *t
                }
                (_, FeatureValue::Missing) => {
                    return Ok(fallback.clone());
                }
                (Cond::Eq(f, _), FeatureValue::Number(_)) => {
                    return Err(CodegenError::Runtime(format!("`{f}` expects text")))
                }
            };
            if hit {
                next = Some(*child);
                break;
            }
        }
        node = match (next, &l.tail) {
            (Some(child), _) => child,
            (None, Tail::Branch(key, child)) => {
                let belongs = match value {
                    FeatureValue::Text(s) => test_is_continuous(test) || s == *key,
                    FeatureValue::Number(_) => true,
                    FeatureValue::Missing => false,
                };
                if belongs {
                    child
                } else {
                    return Ok(fallback.clone());
                }
            }
            (None, Tail::Fallback(label)) => return Ok(label.to_string()),
        };
    }
}

fn test_is_continuous(test: &SplitTest) -> bool {
    matches!(test, SplitTest::Continuous { .. })
}

/// Argument value for [`Program::run`].
#[derive(Debug, Clone, PartialEq)]
pub enum Arg {
    Text(String),
    Number(f64),
    /// Matches no equality test; a numeric comparison on it is an error.
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
enum Test {
    Eq(String, String),
    Le(String, f64),
}

#[derive(Debug, Clone, PartialEq)]
enum Stmt {
    Return(String),
    If {
        arms: Vec<(Test, Vec<Stmt>)>,
        otherwise: Option<Vec<Stmt>>,
    },
}

/// Emitted source parsed back into a function.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub name: String,
    pub params: Vec<String>,
    body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
enum Line {
    Header(String, Vec<String>),
    If(Test),
    ElseIf(Test),
    Else,
    End,
    Return(String),
}

impl Program {
    /// Parses text in the shape [`emit`] produces for `dialect`.
    pub fn parse(source: &str, dialect: EmitDialect) -> Result<Program, CodegenError> {
        let mut lines = Vec::new();
        for (i, raw) in source.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let err = |message: &str| CodegenError::Parse {
                line: i + 1,
                message: message.to_string(),
            };
            let body = raw.trim_start_matches(' ');
            let spaces = raw.len() - body.len();
            if spaces % 4 != 0 || body.starts_with('\t') {
                return Err(err("indentation must be a multiple of four spaces"));
            }
            let line = classify_line(body.trim_end(), dialect).map_err(|m| err(&m))?;
            lines.push((i + 1, spaces / 4, line));
        }
        let mut p = Parser {
            lines,
            pos: 0,
            dialect,
        };
        let (name, params) = match p.next() {
            Some((_, 0, Line::Header(n, ps))) => (n, ps),
            _ => return Err(p.error("expected a function header")),
        };
        let body = p.block(1)?;
        if dialect != EmitDialect::PythonStyle {
            match p.next() {
                Some((_, 0, Line::End)) => {}
                _ => return Err(p.error("expected end of function")),
            }
        }
        if p.pos < p.lines.len() {
            return Err(p.error("unexpected text after function"));
        }
        let declared: BTreeSet<&str> = params.iter().map(String::as_str).collect();
        if declared.len() != params.len() {
            return Err(CodegenError::Parse {
                line: 1,
                message: "duplicate parameter".into(),
            });
        }
        check_declared(&body, &declared)?;
        Ok(Program { name, params, body })
    }

    /// Runs the function with arguments bound by parameter name.
    pub fn run(&self, args: &BTreeMap<String, Arg>) -> Result<String, CodegenError> {
        for p in &self.params {
            if !args.contains_key(p) {
                return Err(CodegenError::MissingFeature(p.clone()));
            }
        }
        exec(&self.body, args)?
            .ok_or_else(|| CodegenError::Runtime("function ended without returning".into()))
    }

    /// Runs the function on a record, binding parameters through `signature`.
    pub fn run_record<S: FeatureSource + ?Sized>(
        &self,
        signature: &[Parameter],
        record: &S,
    ) -> Result<String, CodegenError> {
        let mut args = BTreeMap::new();
        for p in signature {
            let arg = match record.feature(&p.feature) {
                Some(FeatureValue::Text(s)) => Arg::Text(s.to_string()),
                Some(FeatureValue::Number(x)) => Arg::Number(x),
                Some(FeatureValue::Missing) => Arg::Missing,
                None => return Err(CodegenError::MissingFeature(p.feature.clone())),
            };
            args.insert(p.name.clone(), arg);
        }
        self.run(&args)
    }
}

fn check_declared(stmts: &[Stmt], declared: &BTreeSet<&str>) -> Result<(), CodegenError> {
    for s in stmts {
        if let Stmt::If { arms, otherwise } = s {
            for (t, body) in arms {
                let (Test::Eq(name, _) | Test::Le(name, _)) = t;
                if !declared.contains(name.as_str()) {
                    return Err(CodegenError::Parse {
                        line: 0,
                        message: format!("undeclared parameter `{name}`"),
                    });
                }
                check_declared(body, declared)?;
            }
            if let Some(body) = otherwise {
                check_declared(body, declared)?;
            }
        }
    }
    Ok(())
}

fn exec(stmts: &[Stmt], args: &BTreeMap<String, Arg>) -> Result<Option<String>, CodegenError> {
    for s in stmts {
        match s {
            Stmt::Return(label) => return Ok(Some(label.clone())),
            Stmt::If { arms, otherwise } => {
                let mut taken = None;
                for (test, body) in arms {
                    if holds(test, args)? {
                        taken = Some(body);
                        break;
                    }
                }
                if let Some(body) = taken.or(otherwise.as_ref()) {
                    if let Some(label) = exec(body, args)? {
                        return Ok(Some(label));
                    }
                }
            }
        }
    }
    Ok(None)
}

fn holds(test: &Test, args: &BTreeMap<String, Arg>) -> Result<bool, CodegenError> {
    match test {
        Test::Eq(name, lit) => match &args[name] {
            Arg::Text(s) => Ok(s == lit),
            Arg::Missing => Ok(false),
            Arg::Number(_) => Err(CodegenError::Runtime(format!(
                "`{name}` compared as text but bound to a number"
            ))),
        },
        Test::Le(name, t) => match &args[name] {
            Arg::Number(x) => Ok(*x <= *t),
            Arg::Text(s) => s
                .trim()
                .parse::<f64>()
                .map(|x| x <= *t)
                .map_err(|_| CodegenError::Runtime(format!("`{name}` is not numeric: {s:?}"))),
            Arg::Missing => Err(CodegenError::Runtime(format!("`{name}` has no value"))),
        },
    }
}

struct Parser {
    lines: Vec<(usize, usize, Line)>,
    pos: usize,
    dialect: EmitDialect,
}

impl Parser {
    fn peek(&self) -> Option<&(usize, usize, Line)> {
        self.lines.get(self.pos)
    }

    fn next(&mut self) -> Option<(usize, usize, Line)> {
        let l = self.lines.get(self.pos).cloned();
        self.pos += 1;
        l
    }

    fn error(&self, message: &str) -> CodegenError {
        let line = self
            .lines
            .get(self.pos.saturating_sub(1))
            .map_or(0, |l| l.0);
        CodegenError::Parse {
            line,
            message: message.to_string(),
        }
    }

    fn block(&mut self, indent: usize) -> Result<Vec<Stmt>, CodegenError> {
        let mut stmts = Vec::new();
        while let Some((_, ind, line)) = self.peek() {
            if *ind != indent {
                if *ind > indent {
                    self.pos += 1;
                    return Err(self.error("unexpected indentation"));
                }
                break;
            }
            match line {
                Line::Return(_) => {
                    let Some((_, _, Line::Return(label))) = self.next() else {
                        unreachable!()
                    };
                    stmts.push(Stmt::Return(label));
                }
                Line::If(_) => stmts.push(self.if_chain(indent)?),
                _ => break,
            }
        }
        if stmts.is_empty() {
            self.pos += 1;
            return Err(self.error("expected a statement"));
        }
        Ok(stmts)
    }

    fn if_chain(&mut self, indent: usize) -> Result<Stmt, CodegenError> {
        let Some((_, _, Line::If(first))) = self.next() else {
            unreachable!()
        };
        let mut arms = alloc::vec![(first, self.block(indent + 1)?)];
        let mut otherwise = None;
        loop {
            match self.peek() {
                Some((_, ind, Line::ElseIf(_))) if *ind == indent => {
                    let Some((_, _, Line::ElseIf(t))) = self.next() else {
                        unreachable!()
                    };
                    arms.push((t, self.block(indent + 1)?));
                }
                Some((_, ind, Line::Else)) if *ind == indent => {
                    self.pos += 1;
                    otherwise = Some(self.block(indent + 1)?);
                    break;
                }
                _ => break,
            }
        }
        if self.dialect != EmitDialect::PythonStyle {
            match self.next() {
                Some((_, ind, Line::End)) if ind == indent => {}
                _ => return Err(self.error("expected end of if")),
            }
        }
        Ok(Stmt::If { arms, otherwise })
    }
}

fn classify_line(s: &str, dialect: EmitDialect) -> Result<Line, String> {
    let strip = |s: &'_ str, pre: &str, suf: &str| -> Option<String> {
        s.strip_prefix(pre)?.strip_suffix(suf).map(str::to_string)
    };
    match dialect {
        EmitDialect::PseudoCode => {
            if s == "else" {
                Ok(Line::Else)
            } else if s == "end if" || s == "end function" {
                Ok(Line::End)
            } else if let Some(c) = strip(s, "else if ", " then") {
                Ok(Line::ElseIf(parse_test(&c, dialect)?))
            } else if let Some(c) = strip(s, "if ", " then") {
                Ok(Line::If(parse_test(&c, dialect)?))
            } else if let Some(r) = s.strip_prefix("return ") {
                Ok(Line::Return(parse_string(r)?))
            } else if let Some(h) = s.strip_prefix("function ") {
                parse_header(h, dialect)
            } else {
                Err(format!("unrecognised line {s:?}"))
            }
        }
        EmitDialect::CStyle => {
            if s == "} else {" {
                Ok(Line::Else)
            } else if s == "}" {
                Ok(Line::End)
            } else if let Some(c) = strip(s, "} else if (", ") {") {
                Ok(Line::ElseIf(parse_test(&c, dialect)?))
            } else if let Some(c) = strip(s, "if (", ") {") {
                Ok(Line::If(parse_test(&c, dialect)?))
            } else if let Some(r) = strip(s, "return ", ";") {
                Ok(Line::Return(parse_string(&r)?))
            } else if let Some(h) = strip(s, "const char *", " {") {
                parse_header(&h, dialect)
            } else {
                Err(format!("unrecognised line {s:?}"))
            }
        }
        EmitDialect::PythonStyle => {
            if s == "else:" {
                Ok(Line::Else)
            } else if let Some(c) = strip(s, "elif ", ":") {
                Ok(Line::ElseIf(parse_test(&c, dialect)?))
            } else if let Some(c) = strip(s, "if ", ":") {
                Ok(Line::If(parse_test(&c, dialect)?))
            } else if let Some(r) = s.strip_prefix("return ") {
                Ok(Line::Return(parse_string(r)?))
            } else if let Some(h) = strip(s, "def ", ":") {
                parse_header(&h, dialect)
            } else {
                Err(format!("unrecognised line {s:?}"))
            }
        }
    }
}

fn split_identifier(s: &str) -> Option<(&str, &str)> {
    let end = s
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_alphanumeric() || c == '_') || (i == 0 && c.is_ascii_digit()))
        .map_or(s.len(), |(i, _)| i);
    (end > 0).then(|| s.split_at(end))
}

fn parse_header(h: &str, dialect: EmitDialect) -> Result<Line, String> {
    let (name, rest) = split_identifier(h).ok_or("expected a function name")?;
    let inner = rest
        .strip_prefix('(')
        .and_then(|r| r.strip_suffix(')'))
        .ok_or("expected a parameter list")?;
    let mut params = Vec::new();
    if !(inner.is_empty() || (dialect == EmitDialect::CStyle && inner == "void")) {
        for part in inner.split(", ") {
            let ident = match dialect {
                EmitDialect::CStyle => part
                    .strip_prefix("const char *")
                    .or_else(|| part.strip_prefix("double "))
                    .ok_or_else(|| format!("bad parameter {part:?}"))?,
                _ => part,
            };
            if !dialect.is_identifier(ident) {
                return Err(format!("bad parameter {part:?}"));
            }
            params.push(ident.to_string());
        }
    }
    Ok(Line::Header(name.to_string(), params))
}

fn parse_test(c: &str, dialect: EmitDialect) -> Result<Test, String> {
    if dialect == EmitDialect::CStyle {
        if let Some(inner) = c.strip_prefix("strcmp(").and_then(|r| r.strip_suffix(") == 0")) {
            let (name, rest) = split_identifier(inner).ok_or("expected a parameter")?;
            let lit = rest.strip_prefix(", ").ok_or("expected `,`")?;
            return Ok(Test::Eq(name.to_string(), parse_string(lit)?));
        }
    }
    let (name, rest) = split_identifier(c).ok_or("expected a parameter")?;
    if let Some(lit) = rest.strip_prefix(" == ") {
        if dialect == EmitDialect::CStyle {
            return Err("C strings are compared with strcmp".into());
        }
        Ok(Test::Eq(name.to_string(), parse_string(lit)?))
    } else if let Some(num) = rest.strip_prefix(" <= ") {
        let t: f64 = num.parse().map_err(|_| format!("bad number {num:?}"))?;
        if !t.is_finite() {
            return Err(format!("bad number {num:?}"));
        }
        Ok(Test::Le(name.to_string(), t))
    } else {
        Err(format!("unrecognised condition {c:?}"))
    }
}

fn parse_string(lit: &str) -> Result<String, String> {
    let inner = lit
        .strip_prefix('"')
        .and_then(|r| r.strip_suffix('"'))
        .ok_or_else(|| format!("expected a string literal, got {lit:?}"))?;
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => return Err("unescaped quote in literal".into()),
            '\\' => match chars.next() {
                Some('"') => out.push('"'),
                Some('\\') => out.push('\\'),
                Some('n') => out.push('\n'),
                Some('r') => out.push('\r'),
                Some('t') => out.push('\t'),
                Some(d) if d.is_digit(8) => {
                    let mut code = d.to_digit(8).unwrap_or(0);
                    for _ in 0..2 {
                        let d = chars
                            .next()
                            .and_then(|d| d.to_digit(8))
                            .ok_or("octal escapes take three digits")?;
                        code = code * 8 + d;
                    }
                    out.push(char::from_u32(code).ok_or("bad octal escape")?);
                }
                _ => return Err("unknown escape".into()),
            },
            c => out.push(c),
        }
    }
    Ok(out)
}
