//! Surface syntax of the pi-calculus dialect: labels, variables, the process
//! tree, a text parser, a pretty-printer and the bang desugaring.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! par   := seq ('|' seq)*
//! seq   := '0' | '(' par ')' | 'new' x (',' x)* 'in' seq | '!'[l] seq
//!        | c '!'[l] args cont | c '?'[l] args cont | '*' c '?'[l] args cont
//! args  := ('[' x (',' x)* ']' | '[' ']')?
//! cont  := ('.' seq)?
//! ```
//!
//! A label is an integer or identifier written directly after `!` or `?`.
//! Unlabeled prefixes and bangs are numbered in preorder with the smallest
//! integers not used explicitly. `#` starts a comment running to end of line.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A program point label. Labels produced by bang desugaring carry trailing
/// primes (`12'`, `12''`); user labels never do.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(Arc<str>);

impl Label {
    pub fn new(text: impl AsRef<str>) -> Self {
        Label(Arc::from(text.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The label with one more trailing prime.
    pub fn primed(&self) -> Label {
        Label::new(format!("{}'", self.0))
    }

    fn sort_key(&self) -> (u8, u64, &str, usize) {
        let base = self.0.trim_end_matches('\'');
        let primes = self.0.len() - base.len();
        match base.parse::<u64>() {
            Ok(n) if base.bytes().all(|b| b.is_ascii_digit()) => (0, n, base, primes),
            _ => (1, 0, base, primes),
        }
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key())
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Label({})", self.0)
    }
}

/// A variable name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(text: impl AsRef<str>) -> Self {
        Var(Arc::from(text.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var({})", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrefixKind {
    Output,
    Input,
    Fetch,
}

impl PrefixKind {
    pub fn is_receiver(self) -> bool {
        matches!(self, PrefixKind::Input | PrefixKind::Fetch)
    }
}

impl fmt::Display for PrefixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrefixKind::Output => "output",
            PrefixKind::Input => "input",
            PrefixKind::Fetch => "fetch",
        })
    }
}

/// `c!l[x..].P`, `c?l[x..].P` or `*c?l[x..].P`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prefix {
    pub kind: PrefixKind,
    pub chan: Var,
    pub label: Label,
    pub args: Vec<Var>,
    pub cont: Box<Process>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Process {
    Nil,
    Par(Box<Process>, Box<Process>),
    New(Var, Box<Process>),
    Prefix(Prefix),
    /// `!l P`; removed by [`desugar_bang`].
    Bang(Label, Box<Process>),
}

impl Process {
    pub fn par(p: Process, q: Process) -> Process {
        Process::Par(Box::new(p), Box::new(q))
    }

    pub fn new_var(x: Var, p: Process) -> Process {
        Process::New(x, Box::new(p))
    }

    pub fn prefix(kind: PrefixKind, chan: Var, label: Label, args: Vec<Var>, cont: Process) -> Process {
        Process::Prefix(Prefix { kind, chan, label, args, cont: Box::new(cont) })
    }

    /// Labels of the threads launched when this process is spawned.
    pub fn beta(&self) -> BTreeSet<Label> {
        let mut out = BTreeSet::new();
        self.collect_beta(&mut out);
        out
    }

    fn collect_beta(&self, out: &mut BTreeSet<Label>) {
        match self {
            Process::Nil => {}
            Process::Par(p, q) => {
                p.collect_beta(out);
                q.collect_beta(out);
            }
            Process::New(_, p) => p.collect_beta(out),
            Process::Prefix(pre) => {
                out.insert(pre.label.clone());
            }
            // a bang launches its desugared output and resource
            Process::Bang(l, _) => {
                out.insert(l.clone());
                out.insert(l.primed());
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut Vec::new(), &mut out);
        out
    }

    fn collect_fv(&self, bound: &mut Vec<Var>, out: &mut BTreeSet<Var>) {
        let mut note = |v: &Var, bound: &Vec<Var>| {
            if !bound.contains(v) {
                out.insert(v.clone());
            }
        };
        match self {
            Process::Nil => {}
            Process::Par(p, q) => {
                p.collect_fv(bound, out);
                q.collect_fv(bound, out);
            }
            Process::New(x, p) => {
                bound.push(x.clone());
                p.collect_fv(bound, out);
                bound.pop();
            }
            Process::Prefix(pre) => {
                note(&pre.chan, bound);
                match pre.kind {
                    PrefixKind::Output => {
                        for a in &pre.args {
                            note(a, bound);
                        }
                        pre.cont.collect_fv(bound, out);
                    }
                    PrefixKind::Input | PrefixKind::Fetch => {
                        let depth = bound.len();
                        bound.extend(pre.args.iter().cloned());
                        pre.cont.collect_fv(bound, out);
                        bound.truncate(depth);
                    }
                }
            }
            Process::Bang(_, p) => p.collect_fv(bound, out),
        }
    }

    /// Every label occurring in the tree, in preorder, with repetitions.
    pub fn labels(&self) -> Vec<Label> {
        let mut out = Vec::new();
        self.walk_labels(&mut out);
        out
    }

    fn walk_labels(&self, out: &mut Vec<Label>) {
        match self {
            Process::Nil => {}
            Process::Par(p, q) => {
                p.walk_labels(out);
                q.walk_labels(out);
            }
            Process::New(_, p) => p.walk_labels(out),
            Process::Prefix(pre) => {
                out.push(pre.label.clone());
                pre.cont.walk_labels(out);
            }
            Process::Bang(l, p) => {
                out.push(l.clone());
                p.walk_labels(out);
            }
        }
    }

    pub fn has_bang(&self) -> bool {
        match self {
            Process::Nil => false,
            Process::Par(p, q) => p.has_bang() || q.has_bang(),
            Process::New(_, p) => p.has_bang(),
            Process::Prefix(pre) => pre.cont.has_bang(),
            Process::Bang(..) => true,
        }
    }
}

/// Name of the replication channel introduced for `!l P`.
pub fn rec_var(l: &Label) -> Var {
    Var::new(format!("rec@{l}"))
}

/// Expands `!l P` into `(new rec@l)(rec@l!l[] | *rec@l?l'[].(rec@l!l''[] | P))`.
pub fn desugar_bang(p: &Process) -> Process {
    match p {
        Process::Nil => Process::Nil,
        Process::Par(a, b) => Process::par(desugar_bang(a), desugar_bang(b)),
        Process::New(x, body) => Process::new_var(x.clone(), desugar_bang(body)),
        Process::Prefix(pre) => Process::Prefix(Prefix {
            cont: Box::new(desugar_bang(&pre.cont)),
            ..pre.clone()
        }),
        Process::Bang(l, body) => {
            let rec = rec_var(l);
            let l1 = l.primed();
            let l2 = l1.primed();
            let again = Process::prefix(PrefixKind::Output, rec.clone(), l2, vec![], Process::Nil);
            let resource = Process::prefix(
                PrefixKind::Fetch,
                rec.clone(),
                l1,
                vec![],
                Process::par(again, desugar_bang(body)),
            );
            let first = Process::prefix(PrefixKind::Output, rec.clone(), l.clone(), vec![], Process::Nil);
            Process::new_var(rec, Process::par(first, resource))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

/// Parses a system and numbers its unlabeled prefixes.
pub fn parse_system(text: &str) -> Result<Process, SyntaxError> {
    let mut parser = Parser::new(text);
    parser.skip_ws();
    if parser.at_end() {
        return Err(parser.error("empty input"));
    }
    let mut process = parser.parse_par()?;
    parser.skip_ws();
    if !parser.at_end() {
        return Err(parser.error(format!("unexpected `{}`", parser.peek().unwrap_or(' '))));
    }
    let used: BTreeSet<u64> = parser
        .explicit_labels
        .keys()
        .filter_map(|l| l.as_str().parse::<u64>().ok())
        .collect();
    let mut next = 0u64;
    assign_labels(&mut process, &used, &mut next);
    Ok(process)
}

fn fresh_number(used: &BTreeSet<u64>, next: &mut u64) -> Label {
    loop {
        *next += 1;
        if !used.contains(next) {
            return Label::new(next.to_string());
        }
    }
}

fn assign_labels(p: &mut Process, used: &BTreeSet<u64>, next: &mut u64) {
    match p {
        Process::Nil => {}
        Process::Par(a, b) => {
            assign_labels(a, used, next);
            assign_labels(b, used, next);
        }
        Process::New(_, body) => assign_labels(body, used, next),
        Process::Prefix(pre) => {
            if pre.label.as_str().is_empty() {
                pre.label = fresh_number(used, next);
            }
            assign_labels(&mut pre.cont, used, next);
        }
        Process::Bang(l, body) => {
            if l.as_str().is_empty() {
                *l = fresh_number(used, next);
            }
            assign_labels(body, used, next);
        }
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    explicit_labels: HashMap<Label, (usize, usize)>,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

fn is_label_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl Parser {
    fn new(text: &str) -> Self {
        Parser { chars: text.chars().collect(), pos: 0, line: 1, col: 1, explicit_labels: HashMap::new() }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> SyntaxError {
        SyntaxError { line: self.line, col: self.col, message: message.into() }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, c: char) -> Result<(), SyntaxError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<Var, SyntaxError> {
        self.skip_ws();
        match self.peek() {
            Some(c) if is_ident_start(c) => {}
            _ => return Err(self.error("expected identifier")),
        }
        let mut s = String::new();
        while let Some(c) = self.peek() {
            if is_ident_char(c) {
                s.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if s == "new" || s == "in" {
            return Err(self.error(format!("`{s}` is a keyword")));
        }
        Ok(Var::new(s))
    }

    fn peek_word(&self) -> String {
        let mut s = String::new();
        let mut i = self.pos;
        while let Some(&c) = self.chars.get(i) {
            if is_ident_char(c) {
                s.push(c);
                i += 1;
            } else {
                break;
            }
        }
        s
    }

    /// A label written directly after `!` or `?`; empty when absent.
    fn opt_label(&mut self) -> Result<Label, SyntaxError> {
        let (line, col) = (self.line, self.col);
        let mut s = String::new();
        let mut i = self.pos;
        while let Some(&c) = self.chars.get(i) {
            if is_label_char(c) {
                s.push(c);
                i += 1;
            } else {
                break;
            }
        }
        if s.is_empty() || s == "new" {
            return Ok(Label::new(""));
        }
        for _ in 0..s.chars().count() {
            self.bump();
        }
        let label = Label::new(&s);
        if self.explicit_labels.insert(label.clone(), (line, col)).is_some() {
            return Err(SyntaxError { line, col, message: format!("duplicate label {s}") });
        }
        Ok(label)
    }

    fn parse_par(&mut self) -> Result<Process, SyntaxError> {
        let mut p = self.parse_seq()?;
        loop {
            self.skip_ws();
            if self.peek() == Some('|') {
                self.bump();
                let q = self.parse_seq()?;
                p = Process::par(p, q);
            } else {
                return Ok(p);
            }
        }
    }

    fn parse_seq(&mut self) -> Result<Process, SyntaxError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some('(') => {
                self.bump();
                let p = self.parse_par()?;
                self.expect(')')?;
                Ok(p)
            }
            Some('0') if !self.peek_at(1).is_some_and(is_ident_char) => {
                self.bump();
                Ok(Process::Nil)
            }
            Some('!') => {
                self.bump();
                let label = self.opt_label()?;
                let body = self.parse_seq()?;
                Ok(Process::Bang(label, Box::new(body)))
            }
            Some('*') => {
                self.bump();
                let chan = self.ident()?;
                if self.peek() != Some('?') {
                    return Err(self.error("expected `?` after resource channel"));
                }
                self.bump();
                self.finish_prefix(PrefixKind::Fetch, chan)
            }
            Some(c) if is_ident_start(c) => {
                if self.peek_word() == "new" {
                    return self.parse_new();
                }
                let chan = self.ident()?;
                match self.peek() {
                    Some('!') => {
                        self.bump();
                        self.finish_prefix(PrefixKind::Output, chan)
                    }
                    Some('?') => {
                        self.bump();
                        self.finish_prefix(PrefixKind::Input, chan)
                    }
                    _ => Err(self.error(format!("expected `!` or `?` after `{chan}`"))),
                }
            }
            Some(c) => Err(self.error(format!("unexpected `{c}`"))),
        }
    }

    fn parse_new(&mut self) -> Result<Process, SyntaxError> {
        for _ in 0..3 {
            self.bump();
        }
        let mut vars = vec![self.ident()?];
        loop {
            self.skip_ws();
            if self.peek() == Some(',') {
                self.bump();
                vars.push(self.ident()?);
            } else {
                break;
            }
        }
        self.skip_ws();
        if self.peek_word() != "in" {
            return Err(self.error("expected `in`"));
        }
        self.bump();
        self.bump();
        let body = self.parse_seq()?;
        Ok(vars.into_iter().rev().fold(body, |p, x| Process::new_var(x, p)))
    }

    fn finish_prefix(&mut self, kind: PrefixKind, chan: Var) -> Result<Process, SyntaxError> {
        let label = self.opt_label()?;
        self.skip_ws();
        let mut args = Vec::new();
        if self.peek() == Some('[') {
            let (line, col) = (self.line, self.col);
            self.bump();
            self.skip_ws();
            if self.peek() == Some(']') {
                self.bump();
            } else {
                loop {
                    args.push(self.ident()?);
                    self.skip_ws();
                    match self.peek() {
                        Some(',') => {
                            self.bump();
                        }
                        Some(']') => {
                            self.bump();
                            break;
                        }
                        _ => return Err(self.error("expected `,` or `]`")),
                    }
                }
            }
            if kind.is_receiver() {
                let distinct: BTreeSet<&Var> = args.iter().collect();
                if distinct.len() != args.len() {
                    return Err(SyntaxError {
                        line,
                        col,
                        message: "input tuple binds the same variable twice".into(),
                    });
                }
            }
        }
        self.skip_ws();
        let cont = if self.peek() == Some('.') {
            self.bump();
            self.parse_seq()?
        } else {
            Process::Nil
        };
        Ok(Process::prefix(kind, chan, label, args, cont))
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Process::Par(p, q) => {
                write!(f, "{p} | ")?;
                write_seq(f, q)
            }
            _ => write_seq(f, self),
        }
    }
}

/// Writes `p` so that it parses back as a single `seq` term.
fn write_seq(f: &mut fmt::Formatter<'_>, p: &Process) -> fmt::Result {
    match p {
        Process::Nil => f.write_str("0"),
        Process::Par(..) => write!(f, "({p})"),
        Process::New(..) => {
            let mut names = Vec::new();
            let mut cur = p;
            while let Process::New(x, body) = cur {
                names.push(x.as_str());
                cur = body;
            }
            write!(f, "new {} in ", names.join(", "))?;
            write_seq(f, cur)
        }
        Process::Prefix(pre) => {
            if pre.kind == PrefixKind::Fetch {
                f.write_str("*")?;
            }
            let op = if pre.kind == PrefixKind::Output { '!' } else { '?' };
            let args: Vec<&str> = pre.args.iter().map(Var::as_str).collect();
            write!(f, "{}{}{}[{}]", pre.chan, op, pre.label, args.join(", "))?;
            if *pre.cont != Process::Nil {
                f.write_str(".")?;
                write_seq(f, &pre.cont)?;
            }
            Ok(())
        }
        Process::Bang(l, body) => {
            write!(f, "!{l} ")?;
            write_seq(f, body)
        }
    }
}
