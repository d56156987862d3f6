//! Batch analysis: load a system, compute the product fixpoint, evaluate
//! property queries, render reports, and cross-check against bounded
//! concrete exploration.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::concrete::{
    alpha_unit, explore, unit_of, ConcreteUnit, ExploreLimits, ExploredState, SemanticsError, UnitHistory,
};
use crate::contents::{CUMap, ContentsAnalysis};
use crate::engine::{iterate, Coalesced, IterationStats};
use crate::env::{EnvAnalysis, EnvMap};
use crate::index::{LoadError, SystemIndex};
use crate::numeric::{CountSpace, CountVar, LinExpr};
use crate::partition::{AbstractUnit, GetVar, PartitionMode, PartitionSpecError};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PartitionChoice {
    Channel,
    Marker,
    /// A JSON partition spec.
    Spec(String),
}

impl PartitionChoice {
    pub fn getvar(&self, sys: &SystemIndex) -> Result<GetVar, PartitionSpecError> {
        match self {
            PartitionChoice::Channel => Ok(GetVar::channel(sys)),
            PartitionChoice::Marker => Ok(GetVar::marker(sys)),
            PartitionChoice::Spec(json) => GetVar::from_spec(sys, json),
        }
    }

    fn describe(&self) -> &str {
        match self {
            PartitionChoice::Channel => "chan",
            PartitionChoice::Marker => "marker",
            PartitionChoice::Spec(_) => "spec",
        }
    }
}

#[derive(Clone, Debug)]
pub struct AnalysisConfig {
    pub partition: PartitionChoice,
    pub max_iter: usize,
    pub queries: Vec<String>,
    /// Count, per unit, the steps that created it (see [`ContentsAnalysis::new`]).
    pub track_creation: bool,
    pub trace: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            partition: PartitionChoice::Channel,
            max_iter: 1000,
            queries: Vec::new(),
            track_creation: true,
            trace: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalyzerError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error(transparent)]
    Partition(#[from] PartitionSpecError),
    #[error("query `{query}`: {message}")]
    Query { query: String, message: String },
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error("max iterations must be at least 1")]
    NoIterations,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

/// Which variable a query term names, before resolution against a system.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TermVar {
    X(String),
    Y(String, String),
    Z(String, String),
    Created,
}

/// `sum(coeff * var) rel bound` over the counts of one abstract unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub text: String,
    /// A restriction variable, or `*` for the single unit of marker mode.
    pub unit: String,
    pub terms: Vec<(i64, TermVar)>,
    pub relation: Relation,
    pub bound: i64,
}

struct Cursor<'a> {
    s: &'a [u8],
    i: usize,
}

impl<'a> Cursor<'a> {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.ws();
        if self.s[self.i..].starts_with(tok.as_bytes()) {
            self.i += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), String> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(format!("expected `{tok}` at offset {}", self.i))
        }
    }

    fn word(&mut self) -> Result<String, String> {
        self.ws();
        let start = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || b"_'@*".contains(&self.s[self.i])) {
            self.i += 1;
        }
        if start == self.i {
            return Err(format!("expected a name at offset {start}"));
        }
        Ok(String::from_utf8_lossy(&self.s[start..self.i]).into_owned())
    }

    fn int(&mut self) -> Option<i64> {
        self.ws();
        let start = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        std::str::from_utf8(&self.s[start..self.i]).ok()?.parse().ok()
    }

    fn label(&mut self) -> Result<String, String> {
        self.ws();
        let start = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || b"_'".contains(&self.s[self.i])) {
            self.i += 1;
        }
        if start == self.i {
            return Err(format!("expected a label at offset {start}"));
        }
        Ok(String::from_utf8_lossy(&self.s[start..self.i]).into_owned())
    }

    fn done(&mut self) -> bool {
        self.ws();
        self.i == self.s.len()
    }
}

impl Query {
    /// Parses `mutex unit <var> over {l1,...}` or
    /// `unit <var>: [k*]x@l (+|- [k*]x@l)* (<=|>=|=) <int>`, where terms may
    /// also be `y@(l?,l!)`, `z@(l?,l!)` or `created`. The `@` is optional.
    pub fn parse(text: &str) -> Result<Query, String> {
        let mut c = Cursor { s: text.as_bytes(), i: 0 };
        if c.eat("mutex") {
            c.expect("unit")?;
            let unit = c.word()?;
            c.expect("over")?;
            c.expect("{")?;
            let mut terms = Vec::new();
            loop {
                terms.push((1, TermVar::X(c.label()?)));
                if !c.eat(",") {
                    break;
                }
            }
            c.expect("}")?;
            if !c.done() {
                return Err(format!("trailing input at offset {}", c.i));
            }
            return Ok(Query { text: text.trim().into(), unit, terms, relation: Relation::Le, bound: 1 });
        }
        c.expect("unit")?;
        let unit = c.word()?;
        c.expect(":")?;
        let mut terms = Vec::new();
        let mut sign = if c.eat("-") { -1 } else { 1 };
        loop {
            let coeff = match c.int() {
                Some(k) => {
                    c.expect("*")?;
                    k
                }
                None => 1,
            };
            let var = if c.eat("x") {
                c.eat("@");
                TermVar::X(c.label()?)
            } else if c.eat("y") || c.eat("z") {
                let is_y = c.s[c.i - 1] == b'y';
                c.eat("@");
                c.expect("(")?;
                let r = c.label()?;
                c.expect(",")?;
                let s = c.label()?;
                c.expect(")")?;
                if is_y { TermVar::Y(r, s) } else { TermVar::Z(r, s) }
            } else if c.eat("created") {
                TermVar::Created
            } else {
                return Err(format!("expected a term at offset {}", c.i));
            };
            terms.push((sign * coeff, var));
            if c.eat("+") {
                sign = 1;
            } else if c.eat("-") {
                sign = -1;
            } else {
                break;
            }
        }
        let relation = if c.eat("<=") {
            Relation::Le
        } else if c.eat(">=") {
            Relation::Ge
        } else if c.eat("=") {
            Relation::Eq
        } else {
            return Err(format!("expected `<=`, `>=` or `=` at offset {}", c.i));
        };
        let neg = c.eat("-");
        let bound = c.int().ok_or_else(|| format!("expected an integer at offset {}", c.i))?;
        if !c.done() {
            return Err(format!("trailing input at offset {}", c.i));
        }
        Ok(Query { text: text.trim().into(), unit, terms, relation, bound: if neg { -bound } else { bound } })
    }

    /// The targeted unit and the expression over its count variables.
    pub fn resolve(&self, sys: &SystemIndex, gv: &GetVar, space: &CountSpace) -> Result<(AbstractUnit, LinExpr), String> {
        let unit = match gv.mode() {
            PartitionMode::MarkerOnly => AbstractUnit::trivial(),
            PartitionMode::FullName => {
                let v = sys.lookup_var(&self.unit).ok_or_else(|| format!("unknown variable `{}`", self.unit))?;
                if !sys.restriction_vars().contains(&v) {
                    return Err(format!("`{}` is not a restriction variable", self.unit));
                }
                AbstractUnit(vec![v; gv.key_count()])
            }
        };
        let label = |l: &str| sys.lookup_label(l).ok_or_else(|| format!("unknown label {l}"));
        let mut terms = Vec::new();
        for (k, t) in &self.terms {
            let var = match t {
                TermVar::X(l) => CountVar::Occupancy(label(l)?),
                TermVar::Y(r, s) => CountVar::StepCount(label(r)?, label(s)?),
                TermVar::Z(r, s) => CountVar::StepFlag(label(r)?, label(s)?),
                TermVar::Created => CountVar::Created,
            };
            let j = space.index(var).ok_or_else(|| match t {
                TermVar::Created => "creation counts are disabled".to_string(),
                _ => format!("no step pair for `{t:?}`"),
            })?;
            terms.push((j, *k));
        }
        Ok((unit, LinExpr::new(terms)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Proved,
    Unknown,
}

#[derive(Clone, Debug, Serialize)]
pub struct QueryResult {
    pub query: String,
    pub verdict: Verdict,
}

/// Whether the counts of `unit` satisfy `expr rel bound` in every
/// configuration described by `cu`.
pub fn decide(cu: &CUMap, unit: &AbstractUnit, expr: &LinExpr, rel: Relation, bound: i64) -> Verdict {
    let e = cu.get(unit);
    let neg = LinExpr { terms: expr.terms.iter().map(|(j, c)| (*j, -c.clone())).collect(), constant: -expr.constant.clone() };
    let le = || e.entails_le(expr, bound);
    let ge = || e.entails_le(&neg, -bound);
    let proved = match rel {
        Relation::Le => le(),
        Relation::Ge => ge(),
        Relation::Eq => {
            let mut shifted = expr.clone();
            shifted.constant -= crate::numeric::affine::q(bound);
            e.entails_zero(&shifted) || (le() && ge())
        }
    };
    if proved { Verdict::Proved } else { Verdict::Unknown }
}

/// The outcome of [`run`].
pub struct Analysis {
    pub sys: SystemIndex,
    pub gv: GetVar,
    pub space: CountSpace,
    pub env: EnvMap,
    pub contents: CUMap,
    pub iterations: usize,
    pub stabilized: bool,
    pub trace: Vec<IterationStats>,
    pub queries: Vec<QueryResult>,
    partition: String,
    keep_trace: bool,
}

/// Parses, indexes and analyzes `source`, then evaluates the queries.
pub fn run(source: &str, config: &AnalysisConfig) -> Result<Analysis, AnalyzerError> {
    if config.max_iter == 0 {
        return Err(AnalyzerError::NoIterations);
    }
    let sys = SystemIndex::from_source(source)?;
    let gv = config.partition.getvar(&sys)?;
    let parsed: Vec<Query> = config
        .queries
        .iter()
        .map(|q| Query::parse(q).map_err(|message| AnalyzerError::Query { query: q.clone(), message }))
        .collect::<Result<_, _>>()?;
    let ca = ContentsAnalysis::new(&sys, &gv, config.track_creation);
    let space = ca.space().clone();
    let resolved: Vec<(AbstractUnit, LinExpr)> = parsed
        .iter()
        .map(|q| q.resolve(&sys, &gv, &space).map_err(|message| AnalyzerError::Query { query: q.text.clone(), message }))
        .collect::<Result<_, _>>()?;
    let product = Coalesced(EnvAnalysis::new(&sys, &gv), ca);
    let fix = iterate(&product, &sys, &gv, config.max_iter);
    let (env, contents) = fix.element;
    let queries = parsed
        .iter()
        .zip(&resolved)
        .map(|(q, (unit, expr))| QueryResult {
            query: q.text.clone(),
            verdict: decide(&contents, unit, expr, q.relation, q.bound),
        })
        .collect();
    Ok(Analysis {
        sys,
        gv,
        space,
        env,
        contents,
        iterations: fix.iterations,
        stabilized: fix.stabilized,
        trace: fix.trace,
        queries,
        partition: config.partition.describe().into(),
        keep_trace: config.trace,
    })
}

impl Analysis {
    pub fn all_proved(&self) -> bool {
        self.queries.iter().all(|q| q.verdict == Verdict::Proved)
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({
            "system": self.sys.root().to_string(),
            "partition": self.partition,
            "iterations": self.iterations,
            "stabilized": self.stabilized,
            "environments": self.env.to_json(&self.sys),
            "contents": self.contents.to_json(&self.sys, &self.space),
            "queries": self.queries,
        });
        if self.keep_trace {
            v["trace"] = json!(self.trace);
        }
        v
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("system: {}\n", self.sys.root()));
        out.push_str(&format!("partition: {}\n", self.partition));
        out.push_str(&format!(
            "fixpoint: {} after {} iterations\n",
            if self.stabilized { "stable" } else { "NOT stable" },
            self.iterations
        ));
        out.push_str("\nenvironments:\n");
        out.push_str(&self.env.render(&self.sys));
        out.push_str("\ncontents:\n");
        for line in self.contents.render(&self.sys, &self.space).lines() {
            out.push_str(&format!("  {line}\n"));
        }
        if !self.queries.is_empty() {
            out.push_str("\nqueries:\n");
            for q in &self.queries {
                let v = match q.verdict {
                    Verdict::Proved => "proved",
                    Verdict::Unknown => "unknown",
                };
                out.push_str(&format!("  {v}: {}\n", q.query));
            }
        }
        if self.keep_trace {
            out.push_str("\ntrace:\n");
            for s in &self.trace {
                out.push_str(&format!(
                    "  iteration {}: {} live cases, {} refuted cases, {} refuted pairs\n",
                    s.iteration, s.cases_live, s.cases_refuted, s.pairs_refuted
                ));
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    /// Index of the offending configuration in the exploration.
    pub state: usize,
    pub description: String,
    pub configuration: String,
    /// Steps from the initial configuration.
    pub trace: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub configurations: usize,
    pub truncated: bool,
    pub max_depth: usize,
    pub units_checked: usize,
    pub violations: Vec<Violation>,
}

impl OracleReport {
    pub fn render_text(&self) -> String {
        let mut out = format!(
            "explored {} configurations (max depth {}{}), checked {} unit occurrences: {} violations\n",
            self.configurations,
            self.max_depth,
            if self.truncated { ", truncated" } else { ", exhaustive" },
            self.units_checked,
            self.violations.len()
        );
        for v in &self.violations {
            out.push_str(&format!("\nviolation in configuration #{}: {}\n", v.state, v.description));
            out.push_str(&format!("  configuration: {}\n", v.configuration));
            out.push_str("  trace:\n");
            for s in &v.trace {
                out.push_str(&format!("    {s}\n"));
            }
        }
        out
    }
}

/// The count vector of every concrete unit that has threads in, or a
/// history up to, an explored configuration.
pub fn unit_vectors(sys: &SystemIndex, gv: &GetVar, space: &CountSpace, st: &ExploredState) -> BTreeMap<ConcreteUnit, Vec<i64>> {
    let mut per_unit: BTreeMap<ConcreteUnit, BTreeMap<usize, i64>> = BTreeMap::new();
    for t in st.config.threads() {
        *per_unit.entry(unit_of(sys, gv, &t)).or_default().entry(space.x(t.label)).or_insert(0) += 1;
    }
    for u in st.history.keys() {
        per_unit.entry(u.clone()).or_default();
    }
    per_unit
        .into_iter()
        .map(|(u, threads)| {
            let counts = unit_counts(space, &threads, st.history.get(&u));
            (u, counts)
        })
        .collect()
}

fn unit_counts(space: &CountSpace, threads: &BTreeMap<usize, i64>, history: Option<&UnitHistory>) -> Vec<i64> {
    let mut p = vec![0i64; space.dim()];
    for (&j, &n) in threads {
        p[j] = n;
    }
    if let Some(h) = history {
        for (&(r, s), &n) in &h.steps {
            if let Some(k) = space.pair_index(r, s) {
                p[space.y(k)] = n as i64;
                p[space.z(k)] = i64::from(n > 0);
            }
        }
        if let Some(c) = space.created() {
            p[c] = h.created as i64;
        }
    }
    p
}

/// Explores the concrete semantics and checks every configuration against
/// both components of a fixpoint.
pub fn check_soundness(
    sys: &SystemIndex,
    gv: &GetVar,
    space: &CountSpace,
    env: &EnvMap,
    contents: &CUMap,
    limits: ExploreLimits,
) -> Result<OracleReport, SemanticsError> {
    let exploration = explore(sys, Some(gv), limits)?;
    let mut violations = Vec::new();
    let mut units_checked = 0;
    for (i, st) in exploration.states.iter().enumerate() {
        let mut report = |description: String| {
            violations.push(Violation {
                state: i,
                description,
                configuration: st.config.display(sys),
                trace: exploration.trace(i),
            })
        };
        for t in st.config.threads() {
            let a = env.get(t.label);
            let values: Vec<_> = a.vars().iter().map(|&v| t.lookup(sys, v).cloned()).collect();
            let ok = values.iter().all(Option::is_some) && {
                let values: Vec<_> = values.into_iter().map(Option::unwrap).collect();
                a.admits(&values, |n| n.var)
            };
            if !ok {
                report(format!(
                    "thread at {} with marker {} is outside the environment abstraction",
                    sys.label(t.label),
                    t.marker.display(sys)
                ));
            }
        }
        for (u, counts) in unit_vectors(sys, gv, space, st) {
            units_checked += 1;
            let abs = alpha_unit(&u);
            if !contents.get(&abs).contains(&counts) {
                let shown: Vec<String> = counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &n)| n != 0)
                    .map(|(j, n)| format!("{}={}", space.name(j), n))
                    .collect();
                report(format!(
                    "unit {} (abstract [{}]) has counts {{{}}} outside its contents abstraction",
                    u.display(sys),
                    abs.display(sys),
                    shown.join(", ")
                ));
            }
        }
    }
    Ok(OracleReport {
        configurations: exploration.states.len(),
        truncated: exploration.truncated,
        max_depth: exploration.states.iter().map(|s| s.depth).max().unwrap_or(0),
        units_checked,
        violations,
    })
}
