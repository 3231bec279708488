//! Plain-text scenario files.
//!
//! ```text
//! # comment
//! name = "relay_focus"
//! dimension = 2
//! X = "0.2*x1 - x2 + 1, x1 + 0.2*x2 - 0.2"
//! Y = "0, 1"
//! h = "x2"
//! domain.lo = [-4.9, -1.2]
//! domain.hi = [2.5, 4.2]
//! tolerances.rtol = 1e-10
//! task simulate { p0 = [0.1, -0.5]  T = 20 }
//! ```
//!
//! Grammar:
//!
//! ```text
//! file   := item*
//! item   := assign | "task" IDENT "{" assign* "}"
//! assign := key "=" value
//! key    := IDENT ("." IDENT)*
//! value  := STRING | NUMBER | IDENT | "[" (value ("," value)*)? "]"
//! ```

use std::fmt::{self, Write as _};

use filippov::poincare::CrossingSense;
use filippov::poly::PolyError;
use filippov::system::{DomainBox, PiecewiseSystem, SmoothField, SystemError, Tolerances};
use filippov::poly::Polynomial;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("semantic error at line {line}, column {column}: {message}")]
    Semantic {
        line: usize,
        column: usize,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Loc {
    pub line: usize,
    pub column: usize,
}

impl Loc {
    fn parse_err(self, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Parse {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn semantic(self, message: impl Into<String>) -> ScenarioError {
        ScenarioError::Semantic {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Num(f64),
    Ident(String),
    List(Vec<(Value, Loc)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub key_loc: Loc,
    pub value: Value,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskBlock {
    pub name: String,
    pub loc: Loc,
    pub entries: Vec<Entry>,
}

/// Untyped syntax tree of a scenario file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Document {
    pub entries: Vec<Entry>,
    pub tasks: Vec<TaskBlock>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Num(f64),
    Eq,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn loc(&self) -> Loc {
        Loc {
            line: self.line,
            column: self.col,
        }
    }

    fn bump(&mut self) -> Option<u8> {
        let c = *self.src.get(self.pos)?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else if c & 0xC0 != 0x80 {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(&c) = self.src.get(self.pos) {
            if c == b'#' {
                while self.src.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.bump();
                }
            } else if c.is_ascii_whitespace() || c == b';' {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn next(&mut self) -> Result<(Tok, Loc), ScenarioError> {
        self.skip_trivia();
        let loc = self.loc();
        let Some(&c) = self.src.get(self.pos) else {
            return Ok((Tok::Eof, loc));
        };
        let simple = match c {
            b'=' => Some(Tok::Eq),
            b'{' => Some(Tok::LBrace),
            b'}' => Some(Tok::RBrace),
            b'[' => Some(Tok::LBracket),
            b']' => Some(Tok::RBracket),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = simple {
            self.bump();
            return Ok((t, loc));
        }
        if c == b'"' {
            self.bump();
            let start = self.pos;
            loop {
                match self.bump() {
                    Some(b'"') => break,
                    Some(b'\n') | None => return Err(loc.parse_err("unterminated string")),
                    Some(b'\\') => return Err(self.loc().parse_err("escapes are not supported in strings")),
                    _ => {}
                }
            }
            let s = std::str::from_utf8(&self.src[start..self.pos - 1]).unwrap();
            return Ok((Tok::Str(s.to_string()), loc));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = self.pos;
            while self
                .src
                .get(self.pos)
                .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_' || *c == b'.')
            {
                self.bump();
            }
            let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return Ok((Tok::Ident(s.to_string()), loc));
        }
        if c.is_ascii_digit() || c == b'-' || c == b'+' || c == b'.' {
            let start = self.pos;
            self.bump();
            while let Some(&d) = self.src.get(self.pos) {
                let exp_sign = (d == b'-' || d == b'+')
                    && matches!(self.src[self.pos - 1], b'e' | b'E');
                if d.is_ascii_digit() || d == b'.' || d == b'e' || d == b'E' || exp_sign {
                    self.bump();
                } else {
                    break;
                }
            }
            let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            return s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| (Tok::Num(v), loc))
                .ok_or_else(|| loc.parse_err(format!("invalid number `{s}`")));
        }
        let ch = std::str::from_utf8(&self.src[self.pos..])
            .ok()
            .and_then(|s| s.chars().next())
            .unwrap_or('?');
        Err(loc.parse_err(format!("unexpected character `{ch}`")))
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    tok: Tok,
    loc: Loc,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ScenarioError> {
        let mut lex = Lexer::new(src);
        let (tok, loc) = lex.next()?;
        Ok(Parser { lex, tok, loc })
    }

    fn advance(&mut self) -> Result<(Tok, Loc), ScenarioError> {
        let (t, l) = self.lex.next()?;
        Ok((std::mem::replace(&mut self.tok, t), std::mem::replace(&mut self.loc, l)))
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Loc, ScenarioError> {
        if self.tok == want {
            Ok(self.advance()?.1)
        } else {
            Err(self.loc.parse_err(format!("expected {what}, found {}", describe(&self.tok))))
        }
    }

    fn document(&mut self) -> Result<Document, ScenarioError> {
        let mut doc = Document::default();
        loop {
            match &self.tok {
                Tok::Eof => return Ok(doc),
                Tok::Ident(k) if k == "task" => {
                    let (_, loc) = self.advance()?;
                    let name = match self.advance()? {
                        (Tok::Ident(n), _) => n,
                        (t, l) => return Err(l.parse_err(format!("expected task name, found {}", describe(&t)))),
                    };
                    self.expect(Tok::LBrace, "`{`")?;
                    let mut entries = Vec::new();
                    while self.tok != Tok::RBrace {
                        if self.tok == Tok::Eof {
                            return Err(self.loc.parse_err(format!("unclosed block of task `{name}`")));
                        }
                        entries.push(self.assign()?);
                    }
                    self.advance()?;
                    doc.tasks.push(TaskBlock { name, loc, entries });
                }
                _ => doc.entries.push(self.assign()?),
            }
        }
    }

    fn assign(&mut self) -> Result<Entry, ScenarioError> {
        let (key, key_loc) = match self.advance()? {
            (Tok::Ident(k), l) => (k, l),
            (t, l) => return Err(l.parse_err(format!("expected key, found {}", describe(&t)))),
        };
        self.expect(Tok::Eq, "`=`")?;
        let (value, loc) = self.value()?;
        Ok(Entry {
            key,
            key_loc,
            value,
            loc,
        })
    }

    fn value(&mut self) -> Result<(Value, Loc), ScenarioError> {
        let (tok, loc) = self.advance()?;
        let v = match tok {
            Tok::Str(s) => Value::Str(s),
            Tok::Num(x) => Value::Num(x),
            Tok::Ident(s) => Value::Ident(s),
            Tok::LBracket => {
                let mut items = Vec::new();
                if self.tok != Tok::RBracket {
                    loop {
                        items.push(self.value()?);
                        if self.tok == Tok::Comma {
                            self.advance()?;
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBracket, "`,` or `]`")?;
                Value::List(items)
            }
            t => return Err(loc.parse_err(format!("expected a value, found {}", describe(&t)))),
        };
        Ok((v, loc))
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Str(_) => "a string".into(),
        Tok::Num(_) => "a number".into(),
        Tok::Eq => "`=`".into(),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::RBracket => "`]`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Eof => "end of input".into(),
    }
}

pub fn parse_document(text: &str) -> Result<Document, ScenarioError> {
    Parser::new(text)?.document()
}

/// Parses the right-hand side of a `--set key=value` override. Text that
/// is not a single value is taken as a bare string.
pub fn parse_value(text: &str) -> Value {
    let attempt = || -> Result<Value, ScenarioError> {
        let mut p = Parser::new(text)?;
        let (v, _) = p.value()?;
        if p.tok != Tok::Eof {
            return Err(p.loc.parse_err("trailing input"));
        }
        Ok(v)
    };
    attempt().unwrap_or_else(|_| Value::Str(text.trim().to_string()))
}

impl Document {
    /// Applies `key=value`. Keys of the form `task.key` update every task
    /// block of that kind; other keys replace or add a top-level entry.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ScenarioError> {
        let loc = Loc { line: 0, column: 1 };
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| loc.parse_err(format!("override `{assignment}` lacks `=`")))?;
        let key = key.trim().to_string();
        let value = parse_value(raw);
        let entry = |k: &str| Entry {
            key: k.to_string(),
            key_loc: loc,
            value: value.clone(),
            loc,
        };
        if let Some((task, sub)) = key.split_once('.') {
            if TASK_NAMES.contains(&task) {
                let mut hit = false;
                for block in self.tasks.iter_mut().filter(|b| b.name == task) {
                    block.entries.retain(|e| e.key != sub);
                    block.entries.push(entry(sub));
                    hit = true;
                }
                if !hit {
                    return Err(loc.semantic(format!("override `{key}`: scenario has no `{task}` task")));
                }
                return Ok(());
            }
        }
        self.entries.retain(|e| e.key != key);
        self.entries.push(entry(&key));
        Ok(())
    }
}

const TASK_NAMES: [&str; 6] = ["validate", "classify", "simulate", "detect", "conley", "regularize"];

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyTask {
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateTask {
    pub p0: Vec<f64>,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectTask {
    pub anchor: Vec<f64>,
    pub normal: Vec<f64>,
    pub radius: f64,
    pub sense: CrossingSense,
    pub window: f64,
    pub seed: Vec<f64>,
    pub t_cap: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConleyTask {
    /// Grid box; the scenario domain when absent.
    pub grid_box: Option<DomainBox>,
    pub resolution: usize,
    pub tau: Option<f64>,
    pub tau_fraction: f64,
    pub bloat: usize,
    pub samples: usize,
    /// Tube radius around the orbit trace, in multiples of `bloat`.
    pub tube: usize,
    pub section_samples: usize,
    pub t_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularizeTask {
    pub eps: Vec<f64>,
    pub t_cap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Validate,
    Classify(ClassifyTask),
    Simulate(SimulateTask),
    Detect(DetectTask),
    Conley(ConleyTask),
    Regularize(RegularizeTask),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Validate => "validate",
            Task::Classify(_) => "classify",
            Task::Simulate(_) => "simulate",
            Task::Detect(_) => "detect",
            Task::Conley(_) => "conley",
            Task::Regularize(_) => "regularize",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub dimension: usize,
    pub x: String,
    pub y: String,
    pub h: String,
    pub domain: DomainBox,
    pub tolerances: Tolerances,
    pub tasks: Vec<Task>,
}

impl Scenario {
    pub fn system(&self) -> Result<PiecewiseSystem, SystemError> {
        let n = self.dimension;
        let z = PiecewiseSystem::new(
            SmoothField::parse(&self.x, n)?,
            SmoothField::parse(&self.y, n)?,
            Polynomial::parse(&self.h, n)?,
            self.domain.clone(),
        )?;
        Ok(z.with_tolerances(self.tolerances))
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    build_scenario(&parse_document(text)?)
}

pub fn parse_scenario_with(text: &str, overrides: &[String]) -> Result<Scenario, ScenarioError> {
    let mut doc = parse_document(text)?;
    for o in overrides {
        doc.apply_override(o)?;
    }
    build_scenario(&doc)
}

struct Fields<'a> {
    entries: &'a [Entry],
    used: Vec<bool>,
    context: String,
}

impl<'a> Fields<'a> {
    fn new(entries: &'a [Entry], context: &str) -> Result<Self, ScenarioError> {
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].iter().any(|f| f.key == e.key) {
                return Err(e.key_loc.semantic(format!("duplicate key `{}`", e.key)));
            }
        }
        Ok(Fields {
            entries,
            used: vec![false; entries.len()],
            context: context.to_string(),
        })
    }

    fn take(&mut self, key: &str) -> Option<&'a Entry> {
        let i = self.entries.iter().position(|e| e.key == key)?;
        self.used[i] = true;
        Some(&self.entries[i])
    }

    fn finish(self) -> Result<(), ScenarioError> {
        match self.used.iter().position(|u| !u) {
            Some(i) => {
                let e = &self.entries[i];
                Err(e.key_loc.semantic(format!("unknown key `{}` in {}", e.key, self.context)))
            }
            None => Ok(()),
        }
    }

    fn positive(&mut self, key: &str) -> Result<Option<f64>, ScenarioError> {
        match self.take(key) {
            Some(e) => {
                let v = as_number(&e.value, e.loc)?;
                if v > 0.0 {
                    Ok(Some(v))
                } else {
                    Err(e.loc.semantic(format!("`{key}` must be positive")))
                }
            }
            None => Ok(None),
        }
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>, ScenarioError> {
        match self.take(key) {
            Some(e) => {
                let v = as_number(&e.value, e.loc)?;
                if v >= 0.0 && v.fract() == 0.0 && v < 1e9 {
                    Ok(Some(v as usize))
                } else {
                    Err(e.loc.semantic(format!("`{key}` must be a non-negative integer")))
                }
            }
            None => Ok(None),
        }
    }

    fn point(&mut self, key: &str, dim: usize) -> Result<Option<Vec<f64>>, ScenarioError> {
        match self.take(key) {
            Some(e) => as_point(&e.value, e.loc, dim).map(Some),
            None => Ok(None),
        }
    }

    fn require<T>(&self, v: Option<T>, key: &str, loc: Loc) -> Result<T, ScenarioError> {
        v.ok_or_else(|| loc.semantic(format!("{} requires `{key}`", self.context)))
    }
}

fn as_number(v: &Value, loc: Loc) -> Result<f64, ScenarioError> {
    match v {
        Value::Num(x) => Ok(*x),
        _ => Err(loc.semantic("expected a number")),
    }
}

fn as_point(v: &Value, loc: Loc, dim: usize) -> Result<Vec<f64>, ScenarioError> {
    match v {
        Value::List(items) => {
            if items.len() != dim {
                return Err(loc.semantic(format!(
                    "expected {dim} coordinates, found {}",
                    items.len()
                )));
            }
            items.iter().map(|(x, l)| as_number(x, *l)).collect()
        }
        _ => Err(loc.semantic(format!("expected a list of {dim} numbers"))),
    }
}

fn check_expression(
    text: &str,
    loc: Loc,
    dim: usize,
    field: bool,
) -> Result<(), ScenarioError> {
    let result = if field {
        SmoothField::parse(text, dim).map(|_| ())
    } else {
        Polynomial::parse(text, dim).map(|_| ()).map_err(SystemError::from)
    };
    // Columns inside the string are offset by the opening quote.
    let at = |column: usize| Loc {
        line: loc.line,
        column: loc.column + column,
    };
    match result {
        Ok(()) => Ok(()),
        Err(SystemError::Poly(PolyError::Parse { column, message })) => Err(at(column).parse_err(message)),
        Err(SystemError::Poly(e @ PolyError::UnknownVariable { column, .. })) => {
            Err(at(column).semantic(e.to_string()))
        }
        Err(e) => Err(loc.semantic(e.to_string())),
    }
}

pub fn build_scenario(doc: &Document) -> Result<Scenario, ScenarioError> {
    let origin = Loc { line: 1, column: 1 };
    let mut top = Fields::new(&doc.entries, "the scenario")?;
    let name = match top.take("name") {
        Some(e) => match &e.value {
            Value::Str(s) | Value::Ident(s) => s.clone(),
            _ => return Err(e.loc.semantic("`name` must be a string")),
        },
        None => "scenario".to_string(),
    };
    let dim_entry = top.take("dimension");
    let dimension = match dim_entry {
        Some(e) => {
            let d = as_number(&e.value, e.loc)?;
            if d != 2.0 && d != 3.0 {
                return Err(e.loc.semantic("dimension must be 2 or 3"));
            }
            d as usize
        }
        None => return Err(origin.semantic("missing `dimension`")),
    };
    let mut expr = |key: &str, field: bool| -> Result<String, ScenarioError> {
        let e = top
            .take(key)
            .ok_or_else(|| origin.semantic(format!("missing `{key}`")))?;
        match &e.value {
            Value::Str(s) => {
                check_expression(s, e.loc, dimension, field)?;
                Ok(s.clone())
            }
            _ => Err(e.loc.semantic(format!("`{key}` must be a quoted expression"))),
        }
    };
    let x = expr("X", true)?;
    let y = expr("Y", true)?;
    let h = expr("h", false)?;
    let lo = top.point("domain.lo", dimension)?;
    let hi = top.point("domain.hi", dimension)?;
    let (lo, hi) = match (lo, hi) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Err(origin.semantic("missing `domain.lo` or `domain.hi`")),
    };
    if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
        let l = top.take("domain.hi").map(|e| e.loc).unwrap_or(origin);
        return Err(l.semantic("domain box has empty interior"));
    }
    let domain = DomainBox::new(lo, hi);

    let mut tol = Tolerances::default();
    {
        let slots: [(&str, &mut f64); 10] = [
            ("epsSigma", &mut tol.eps_sigma),
            ("epsTan", &mut tol.eps_tan),
            ("epsReg", &mut tol.eps_reg),
            ("rankFloor", &mut tol.rank_floor),
            ("epsDenominator", &mut tol.eps_denominator),
            ("epsPe", &mut tol.eps_pe),
            ("epsGlue", &mut tol.eps_glue),
            ("equilibrium", &mut tol.equilibrium),
            ("rtol", &mut tol.rtol),
            ("atol", &mut tol.atol),
        ];
        for (k, slot) in slots {
            if let Some(v) = top.positive(&format!("tolerances.{k}"))? {
                *slot = v;
            }
        }
    }
    if let Some(v) = top.count("tolerances.maxSwitches")? {
        tol.max_switches = v;
    }
    top.finish()?;

    if doc.tasks.is_empty() {
        return Err(origin.semantic("scenario declares no tasks"));
    }
    let tasks = doc
        .tasks
        .iter()
        .map(|b| build_task(b, dimension))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Scenario {
        name,
        dimension,
        x,
        y,
        h,
        domain,
        tolerances: tol,
        tasks,
    })
}

fn build_task(b: &TaskBlock, dim: usize) -> Result<Task, ScenarioError> {
    let mut f = Fields::new(&b.entries, &format!("task `{}`", b.name))?;
    let task = match b.name.as_str() {
        "validate" => Task::Validate,
        "classify" => {
            let points = match f.take("points") {
                Some(e) => match &e.value {
                    Value::List(items) => items
                        .iter()
                        .map(|(v, l)| as_point(v, *l, dim))
                        .collect::<Result<Vec<_>, _>>()?,
                    _ => return Err(e.loc.semantic("`points` must be a list of points")),
                },
                None => Vec::new(),
            };
            Task::Classify(ClassifyTask { points })
        }
        "simulate" => {
            let p0 = f.point("p0", dim)?;
            let t = f.positive("T")?;
            Task::Simulate(SimulateTask {
                p0: f.require(p0, "p0", b.loc)?,
                t: f.require(t, "T", b.loc)?,
            })
        }
        "detect" => {
            let anchor = f.point("anchor", dim)?;
            let normal = f.point("normal", dim)?;
            let radius = f.positive("radius")?;
            let sense = match f.take("sense") {
                Some(e) => match &e.value {
                    Value::Ident(s) | Value::Str(s) => match s.as_str() {
                        "positive" => CrossingSense::Positive,
                        "negative" => CrossingSense::Negative,
                        "both" => CrossingSense::Both,
                        _ => return Err(e.loc.semantic("sense must be positive, negative or both")),
                    },
                    _ => return Err(e.loc.semantic("sense must be positive, negative or both")),
                },
                None => CrossingSense::Positive,
            };
            let window = f.positive("window")?.unwrap_or(1.0);
            let seed = f.point("seed", dim)?;
            let t_cap = f.positive("tcap")?.unwrap_or(100.0);
            let max_iter = f.count("maxIter")?.unwrap_or(50);
            let anchor = f.require(anchor, "anchor", b.loc)?;
            Task::Detect(DetectTask {
                seed: seed.unwrap_or_else(|| anchor.clone()),
                anchor,
                normal: f.require(normal, "normal", b.loc)?,
                radius: f.require(radius, "radius", b.loc)?,
                sense,
                window,
                t_cap,
                max_iter,
            })
        }
        "conley" => {
            let lo = f.point("lo", dim)?;
            let hi = f.point("hi", dim)?;
            let grid_box = match (lo, hi) {
                (Some(lo), Some(hi)) => Some(DomainBox::new(lo, hi)),
                (None, None) => None,
                _ => return Err(b.loc.semantic("conley box needs both `lo` and `hi`")),
            };
            let resolution = f.count("resolution")?.unwrap_or(if dim == 2 { 64 } else { 32 });
            if resolution < 4 {
                return Err(b.loc.semantic("resolution must be at least 4"));
            }
            let samples = f.count("samples")?.unwrap_or(3);
            if samples < 2 {
                return Err(b.loc.semantic("samples must be at least 2"));
            }
            Task::Conley(ConleyTask {
                grid_box,
                resolution,
                tau: f.positive("tau")?,
                tau_fraction: f.positive("tauFraction")?.unwrap_or(0.1),
                bloat: f.count("bloat")?.unwrap_or(1),
                samples,
                tube: f.count("tube")?.unwrap_or(2),
                section_samples: f.count("sectionSamples")?.unwrap_or(200),
                t_cap: f.positive("tcap")?,
            })
        }
        "regularize" => {
            let eps = match f.take("eps") {
                Some(e) => match &e.value {
                    Value::List(items) if !items.is_empty() => items
                        .iter()
                        .map(|(v, l)| {
                            let x = as_number(v, *l)?;
                            if x > 0.0 {
                                Ok(x)
                            } else {
                                Err(l.semantic("eps values must be positive"))
                            }
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                    _ => return Err(e.loc.semantic("`eps` must be a nonempty list")),
                },
                None => vec![0.1, 0.05, 0.025, 0.0125],
            };
            Task::Regularize(RegularizeTask {
                eps,
                t_cap: f.positive("tcap")?.unwrap_or(100.0),
            })
        }
        other => {
            return Err(b.loc.semantic(format!(
                "unknown task `{other}` (expected one of {})",
                TASK_NAMES.join(", ")
            )))
        }
    };
    f.finish()?;
    Ok(task)
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn list(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", "))
}

impl fmt::Display for Scenario {
    /// Canonical text form; parses back to an equal scenario.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let _ = writeln!(s, "name = \"{}\"", self.name);
        let _ = writeln!(s, "dimension = {}", self.dimension);
        let _ = writeln!(s, "X = \"{}\"", self.x);
        let _ = writeln!(s, "Y = \"{}\"", self.y);
        let _ = writeln!(s, "h = \"{}\"", self.h);
        let _ = writeln!(s, "domain.lo = {}", list(&self.domain.lo));
        let _ = writeln!(s, "domain.hi = {}", list(&self.domain.hi));
        let d = Tolerances::default();
        let t = &self.tolerances;
        let pairs = [
            ("epsSigma", t.eps_sigma, d.eps_sigma),
            ("epsTan", t.eps_tan, d.eps_tan),
            ("epsReg", t.eps_reg, d.eps_reg),
            ("rankFloor", t.rank_floor, d.rank_floor),
            ("epsDenominator", t.eps_denominator, d.eps_denominator),
            ("epsPe", t.eps_pe, d.eps_pe),
            ("epsGlue", t.eps_glue, d.eps_glue),
            ("equilibrium", t.equilibrium, d.equilibrium),
            ("rtol", t.rtol, d.rtol),
            ("atol", t.atol, d.atol),
        ];
        for (k, v, dv) in pairs {
            if v != dv {
                let _ = writeln!(s, "tolerances.{k} = {}", num(v));
            }
        }
        if t.max_switches != d.max_switches {
            let _ = writeln!(s, "tolerances.maxSwitches = {}", t.max_switches);
        }
        for task in &self.tasks {
            let _ = write!(s, "\ntask {} {{", task.name());
            let mut body: Vec<String> = Vec::new();
            match task {
                Task::Validate => {}
                Task::Classify(c) => {
                    if !c.points.is_empty() {
                        let pts: Vec<String> = c.points.iter().map(|p| list(p)).collect();
                        body.push(format!("points = [{}]", pts.join(", ")));
                    }
                }
                Task::Simulate(t) => {
                    body.push(format!("p0 = {}", list(&t.p0)));
                    body.push(format!("T = {}", num(t.t)));
                }
                Task::Detect(t) => {
                    body.push(format!("anchor = {}", list(&t.anchor)));
                    body.push(format!("normal = {}", list(&t.normal)));
                    body.push(format!("radius = {}", num(t.radius)));
                    let sense = match t.sense {
                        CrossingSense::Positive => "positive",
                        CrossingSense::Negative => "negative",
                        CrossingSense::Both => "both",
                    };
                    body.push(format!("sense = {sense}"));
                    body.push(format!("window = {}", num(t.window)));
                    body.push(format!("seed = {}", list(&t.seed)));
                    body.push(format!("tcap = {}", num(t.t_cap)));
                    body.push(format!("maxIter = {}", t.max_iter));
                }
                Task::Conley(t) => {
                    if let Some(b) = &t.grid_box {
                        body.push(format!("lo = {}", list(&b.lo)));
                        body.push(format!("hi = {}", list(&b.hi)));
                    }
                    body.push(format!("resolution = {}", t.resolution));
                    if let Some(tau) = t.tau {
                        body.push(format!("tau = {}", num(tau)));
                    }
                    body.push(format!("tauFraction = {}", num(t.tau_fraction)));
                    body.push(format!("bloat = {}", t.bloat));
                    body.push(format!("samples = {}", t.samples));
                    body.push(format!("tube = {}", t.tube));
                    body.push(format!("sectionSamples = {}", t.section_samples));
                    if let Some(c) = t.t_cap {
                        body.push(format!("tcap = {}", num(c)));
                    }
                }
                Task::Regularize(t) => {
                    body.push(format!("eps = {}", list(&t.eps)));
                    body.push(format!("tcap = {}", num(t.t_cap)));
                }
            }
            if body.is_empty() {
                s.push_str("}\n");
            } else {
                s.push('\n');
                for line in body {
                    let _ = writeln!(s, "  {line}");
                }
                s.push_str("}\n");
            }
        }
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        # constant sliding
        name = "cs"
        dimension = 3
        X = "0, 0, -1"
        Y = "0, 0, 1"
        h = "x3"
        domain.lo = [-1, -1, -1]
        domain.hi = [1, 1, 1]
        task validate {}
        task simulate { p0 = [0.2, 0.1, 0.5]; T = 2 }
    "#;

    #[test]
    fn parses_minimal() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.dimension, 3);
        assert_eq!(s.tasks.len(), 2);
        let z = s.system().unwrap();
        assert_eq!(z.x.eval_vec(&[0.0; 3]), vec![0.0, 0.0, -1.0]);
        assert_eq!(
            s.tasks[1],
            Task::Simulate(SimulateTask { p0: vec![0.2, 0.1, 0.5], t: 2.0 })
        );
    }

    #[test]
    fn two_term_h() {
        let text = MINIMAL.replace("h = \"x3\"", "h = \"x1^2 + x2\"");
        let s = parse_scenario(&text).unwrap();
        assert_eq!(Polynomial::parse(&s.h, 3).unwrap().len(), 2);
    }

    #[test]
    fn unknown_variable_is_semantic() {
        let text = MINIMAL.replace("h = \"x3\"", "h = \"x4\"");
        match parse_scenario(&text) {
            Err(ScenarioError::Semantic { line, column, .. }) => {
                assert_eq!(line, 7);
                assert_eq!(column, 14);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn error_locations() {
        let bad = "dimension = 2\nX = \"1, 0\"\nY = \"0, 1\"\nh = \"x2 +* x1\"\n";
        match parse_scenario(bad) {
            Err(ScenarioError::Parse { line, column, .. }) => assert_eq!((line, column), (4, 10)),
            other => panic!("{other:?}"),
        }
        match parse_document("task simulate { p0 = [1, 2 }") {
            Err(ScenarioError::Parse { line, column, .. }) => assert_eq!((line, column), (1, 28)),
            other => panic!("{other:?}"),
        }
        match parse_document("name = \"open") {
            Err(ScenarioError::Parse { column, .. }) => assert_eq!(column, 8),
            other => panic!("{other:?}"),
        }
        let wrong_dim = MINIMAL.replace("X = \"0, 0, -1\"", "X = \"0, -1\"");
        assert!(matches!(parse_scenario(&wrong_dim), Err(ScenarioError::Semantic { .. })));
        let no_tasks: String = MINIMAL.lines().filter(|l| !l.contains("task")).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_scenario(&no_tasks), Err(ScenarioError::Semantic { .. })));
        let unknown = MINIMAL.replace("T = 2", "T = 2 speed = 3");
        match parse_scenario(&unknown) {
            Err(ScenarioError::Semantic { message, .. }) => assert!(message.contains("speed")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let s = parse_scenario(MINIMAL).unwrap();
        let again = parse_scenario(&s.to_string()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn overrides() {
        let s = parse_scenario_with(
            MINIMAL,
            &["simulate.T=5".into(), "X=0, 0, -2".into(), "tolerances.rtol=1e-11".into()],
        )
        .unwrap();
        assert_eq!(s.x, "0, 0, -2");
        assert_eq!(s.tolerances.rtol, 1e-11);
        match &s.tasks[1] {
            Task::Simulate(t) => assert_eq!(t.t, 5.0),
            other => panic!("{other:?}"),
        }
        assert!(parse_scenario_with(MINIMAL, &["conley.bloat=2".into()]).is_err());
    }
}
