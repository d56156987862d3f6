//! The labelled non-standard semantics: threads carry a marker recording the
//! replications that created them, and every name is a restriction variable
//! paired with the marker of the thread that declared it.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::index::{LabelId, SystemIndex, VarId};
use crate::partition::{AbstractUnit, GetVar, PartitionCase, PartitionMode, Role, Roster};
use crate::syntax::PrefixKind;

/// Sequence of replication labels, most recent first.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Marker(Arc<[LabelId]>);

impl Marker {
    pub fn epsilon() -> Marker {
        Marker::default()
    }

    pub fn from_labels(labels: Vec<LabelId>) -> Marker {
        Marker(labels.into())
    }

    pub fn labels(&self) -> &[LabelId] {
        &self.0
    }

    /// `l.id`
    pub fn push(&self, l: LabelId) -> Marker {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.push(l);
        v.extend_from_slice(&self.0);
        Marker(v.into())
    }

    pub fn display(&self, sys: &SystemIndex) -> String {
        if self.0.is_empty() {
            return "e".into();
        }
        self.0.iter().map(|&l| sys.label(l).to_string()).collect::<Vec<_>>().join(".")
    }
}

impl fmt::Debug for Marker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter().map(|l| l.0)).finish()
    }
}

/// A channel name: a restriction variable and the marker of its declarer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name {
    pub var: VarId,
    pub marker: Marker,
}

impl Name {
    pub fn display(&self, sys: &SystemIndex) -> String {
        format!("({},{})", sys.var(self.var), self.marker.display(sys))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Thread {
    pub label: LabelId,
    pub marker: Marker,
    /// Bindings of the interface of `label`, in interface order.
    pub env: Vec<Name>,
}

impl Thread {
    pub fn lookup<'a>(&'a self, sys: &SystemIndex, v: VarId) -> Option<&'a Name> {
        let i = sys.interface(self.label).binary_search(&v).ok()?;
        Some(&self.env[i])
    }

    fn get(&self, sys: &SystemIndex, v: VarId) -> &Name {
        self.lookup(sys, v).expect("variable bound in thread interface")
    }
}

/// A set of threads keyed by label and marker.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    threads: BTreeMap<(LabelId, Marker), Vec<Name>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("internal error: two threads at label {label} with marker {marker}")]
    MarkerCollision { label: String, marker: String },
}

impl Configuration {
    pub fn len(&self) -> usize {
        self.threads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.threads.is_empty()
    }

    pub fn threads(&self) -> impl Iterator<Item = Thread> + '_ {
        self.threads
            .iter()
            .map(|((l, m), env)| Thread { label: *l, marker: m.clone(), env: env.clone() })
    }

    pub fn contains(&self, label: LabelId, marker: &Marker) -> bool {
        self.threads.contains_key(&(label, marker.clone()))
    }

    pub fn insert(&mut self, sys: &SystemIndex, t: Thread) -> Result<(), SemanticsError> {
        let key = (t.label, t.marker.clone());
        if self.threads.contains_key(&key) {
            return Err(SemanticsError::MarkerCollision {
                label: sys.label(t.label).to_string(),
                marker: t.marker.display(sys),
            });
        }
        self.threads.insert(key, t.env);
        Ok(())
    }

    fn remove(&mut self, t: &Thread) {
        self.threads.remove(&(t.label, t.marker.clone()));
    }

    pub fn to_json(&self, sys: &SystemIndex) -> Value {
        let threads: Vec<Value> = self
            .threads()
            .map(|t| {
                let env: serde_json::Map<String, Value> = sys
                    .interface(t.label)
                    .iter()
                    .zip(&t.env)
                    .map(|(&v, n)| (sys.var(v).to_string(), json!([sys.var(n.var).to_string(), marker_json(sys, &n.marker)])))
                    .collect();
                json!({"label": sys.label(t.label).to_string(), "marker": marker_json(sys, &t.marker), "env": env})
            })
            .collect();
        json!({ "threads": threads })
    }

    pub fn display(&self, sys: &SystemIndex) -> String {
        let parts: Vec<String> = self
            .threads()
            .map(|t| {
                let env: Vec<String> = sys
                    .interface(t.label)
                    .iter()
                    .zip(&t.env)
                    .map(|(&v, n)| format!("{}:{}", sys.var(v), n.display(sys)))
                    .collect();
                format!("({}, {}, [{}])", sys.label(t.label), t.marker.display(sys), env.join(", "))
            })
            .collect();
        format!("{{{}}}", parts.join("; "))
    }
}

fn marker_json(sys: &SystemIndex, m: &Marker) -> Value {
    Value::Array(m.labels().iter().map(|&l| Value::String(sys.label(l).to_string())).collect())
}

/// Threads spawned for `beta` with marker `id`: variables bound in `env`
/// keep their binding, the others are fresh names tagged with `id`.
pub fn launch(sys: &SystemIndex, beta: &[LabelId], id: &Marker, env: &HashMap<VarId, Name>) -> Vec<Thread> {
    beta.iter()
        .map(|&l| Thread {
            label: l,
            marker: id.clone(),
            env: sys
                .interface(l)
                .iter()
                .map(|&x| env.get(&x).cloned().unwrap_or_else(|| Name { var: x, marker: id.clone() }))
                .collect(),
        })
        .collect()
}

pub fn initial_config(sys: &SystemIndex) -> Configuration {
    let mut c = Configuration::default();
    for t in launch(sys, sys.root_beta(), &Marker::epsilon(), &HashMap::new()) {
        c.insert(sys, t).expect("root labels are distinct");
    }
    c
}

/// One enabled interaction together with the threads it launches.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteStep {
    pub receiver: Thread,
    pub sender: Thread,
    pub launched_receiver: Vec<Thread>,
    pub launched_sender: Vec<Thread>,
}

impl ConcreteStep {
    pub fn pair(&self) -> (LabelId, LabelId) {
        (self.receiver.label, self.sender.label)
    }

    /// The thread standing for entry `i` of the step's roster.
    pub fn roster_thread(&self, roster: &Roster, i: usize) -> &Thread {
        match (i, roster.entries[i]) {
            (0, _) => &self.receiver,
            (1, _) => &self.sender,
            (_, (l, Role::Receiver)) => self.launched_receiver.iter().find(|t| t.label == l).expect("roster entry"),
            (_, (l, Role::Sender)) => self.launched_sender.iter().find(|t| t.label == l).expect("roster entry"),
        }
    }

    pub fn display(&self, sys: &SystemIndex) -> String {
        format!(
            "({},{}) receiver marker {} sender marker {}",
            sys.label(self.receiver.label),
            sys.label(self.sender.label),
            self.receiver.marker.display(sys),
            self.sender.marker.display(sys)
        )
    }
}

/// All enabled steps, sorted by labels then markers.
pub fn enabled_steps(sys: &SystemIndex, c: &Configuration) -> Vec<ConcreteStep> {
    let mut senders: HashMap<Name, Vec<Thread>> = HashMap::new();
    for t in c.threads().filter(|t| sys.kind(t.label) == PrefixKind::Output) {
        let ch = t.get(sys, sys.chan(t.label)).clone();
        senders.entry(ch).or_default().push(t);
    }
    let mut steps = Vec::new();
    for r in c.threads().filter(|t| sys.kind(t.label).is_receiver()) {
        let ch = r.get(sys, sys.chan(r.label));
        let Some(candidates) = senders.get(ch) else { continue };
        for s in candidates {
            let rp = sys.prefix(r.label);
            let sp = sys.prefix(s.label);
            if rp.args.len() != sp.args.len() {
                continue;
            }
            let mut renv: HashMap<VarId, Name> =
                sys.interface(r.label).iter().copied().zip(r.env.iter().cloned()).collect();
            for (&y, &x) in rp.args.iter().zip(&sp.args) {
                renv.insert(y, s.get(sys, x).clone());
            }
            let senv: HashMap<VarId, Name> = sys.interface(s.label).iter().copied().zip(s.env.iter().cloned()).collect();
            let rid = match rp.kind {
                PrefixKind::Fetch => s.marker.push(s.label),
                _ => r.marker.clone(),
            };
            steps.push(ConcreteStep {
                launched_receiver: launch(sys, &rp.cont_beta, &rid, &renv),
                launched_sender: launch(sys, &sp.cont_beta, &s.marker, &senv),
                receiver: r.clone(),
                sender: s.clone(),
            });
        }
    }
    steps.sort_by(|a, b| {
        (a.receiver.label, a.sender.label, &a.receiver.marker, &a.sender.marker).cmp(&(
            b.receiver.label,
            b.sender.label,
            &b.receiver.marker,
            &b.sender.marker,
        ))
    });
    steps
}

/// The configuration after a step. Inputs consume both threads; a fetch
/// keeps the resource.
pub fn apply_step(sys: &SystemIndex, c: &Configuration, step: &ConcreteStep) -> Result<Configuration, SemanticsError> {
    let mut next = c.clone();
    if sys.kind(step.receiver.label) == PrefixKind::Input {
        next.remove(&step.receiver);
    }
    next.remove(&step.sender);
    for t in step.launched_receiver.iter().chain(&step.launched_sender) {
        next.insert(sys, t.clone())?;
    }
    Ok(next)
}

/// A computation unit: per key, a channel name or just its marker.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConcreteUnit {
    Names(Vec<Name>),
    Markers(Vec<Marker>),
}

impl ConcreteUnit {
    pub fn display(&self, sys: &SystemIndex) -> String {
        match self {
            ConcreteUnit::Names(ns) => ns.iter().map(|n| n.display(sys)).collect::<Vec<_>>().join(","),
            ConcreteUnit::Markers(ms) => ms.iter().map(|m| m.display(sys)).collect::<Vec<_>>().join(","),
        }
    }
}

pub fn unit_of(sys: &SystemIndex, gv: &GetVar, t: &Thread) -> ConcreteUnit {
    let names = gv.vars(t.label).iter().map(|&v| t.get(sys, v).clone());
    match gv.mode() {
        PartitionMode::FullName => ConcreteUnit::Names(names.collect()),
        PartitionMode::MarkerOnly => ConcreteUnit::Markers(names.map(|n| n.marker).collect()),
    }
}

pub fn alpha_unit(u: &ConcreteUnit) -> AbstractUnit {
    match u {
        ConcreteUnit::Names(ns) => AbstractUnit(ns.iter().map(|n| n.var).collect()),
        ConcreteUnit::Markers(_) => AbstractUnit::trivial(),
    }
}

/// The partition case of a concrete step.
pub fn alpha_step(sys: &SystemIndex, gv: &GetVar, step: &ConcreteStep) -> PartitionCase {
    let roster = Roster::new(sys, step.receiver.label, step.sender.label);
    let (case, _) = step_units(sys, gv, &roster, step);
    case
}

/// The partition case of a step and the concrete unit of each class.
pub fn step_units(sys: &SystemIndex, gv: &GetVar, roster: &Roster, step: &ConcreteStep) -> (PartitionCase, Vec<ConcreteUnit>) {
    let mut units: Vec<ConcreteUnit> = Vec::new();
    let mut class_of = Vec::with_capacity(roster.len());
    for i in 0..roster.len() {
        let u = unit_of(sys, gv, step.roster_thread(roster, i));
        let c = match units.iter().position(|x| *x == u) {
            Some(c) => c,
            None => {
                units.push(u);
                units.len() - 1
            }
        };
        class_of.push(c);
    }
    let case = PartitionCase { class_of, units: units.iter().map(alpha_unit).collect() };
    (case, units)
}

/// Per concrete unit, how many steps of each pair modified it.
/// What happened to one concrete unit so far.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct UnitHistory {
    /// Steps per receiver/sender pair that involved the unit.
    pub steps: BTreeMap<(LabelId, LabelId), u64>,
    /// Steps in which the unit appeared with a name (or marker) that did not
    /// exist before the step.
    pub created: u64,
}

pub type History = BTreeMap<ConcreteUnit, UnitHistory>;

impl Configuration {
    fn names(&self) -> HashSet<&Name> {
        self.threads.values().flatten().collect()
    }

    fn markers(&self) -> HashSet<&Marker> {
        self.threads.keys().map(|(_, m)| m).chain(self.threads.values().flatten().map(|n| &n.marker)).collect()
    }
}

/// Whether `u` mentions a name or marker absent from `before`.
fn is_new_unit(u: &ConcreteUnit, names: &HashSet<&Name>, markers: &HashSet<&Marker>) -> bool {
    match u {
        ConcreteUnit::Names(ns) => ns.iter().any(|n| !names.contains(n)),
        ConcreteUnit::Markers(ms) => ms.iter().any(|m| !markers.contains(m)),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExploreLimits {
    pub max_configs: usize,
    pub max_depth: usize,
}

impl Default for ExploreLimits {
    fn default() -> Self {
        ExploreLimits { max_configs: 5000, max_depth: usize::MAX }
    }
}

#[derive(Clone, Debug)]
pub struct ExploredState {
    pub config: Configuration,
    pub history: History,
    pub depth: usize,
    /// Predecessor index and a description of the step taken.
    pub parent: Option<(usize, String)>,
}

#[derive(Clone, Debug)]
pub struct Exploration {
    pub states: Vec<ExploredState>,
    pub truncated: bool,
}

impl Exploration {
    /// Steps leading from the initial configuration to state `i`.
    pub fn trace(&self, mut i: usize) -> Vec<String> {
        let mut out = Vec::new();
        while let Some((p, step)) = &self.states[i].parent {
            out.push(step.clone());
            i = *p;
        }
        out.reverse();
        out
    }
}

/// Breadth-first exploration from the initial configuration. When `gv` is
/// given, each state also records the per-unit step history.
pub fn explore(
    sys: &SystemIndex,
    gv: Option<&GetVar>,
    limits: ExploreLimits,
) -> Result<Exploration, SemanticsError> {
    let start = ExploredState { config: initial_config(sys), history: History::new(), depth: 0, parent: None };
    let mut seen: HashSet<(Configuration, History)> = HashSet::new();
    seen.insert((start.config.clone(), start.history.clone()));
    let mut states = vec![start];
    let mut queue = VecDeque::from([0usize]);
    let mut truncated = false;
    while let Some(i) = queue.pop_front() {
        let steps = enabled_steps(sys, &states[i].config);
        if steps.is_empty() {
            continue;
        }
        if states[i].depth >= limits.max_depth {
            truncated = true;
            continue;
        }
        for step in steps {
            let config = apply_step(sys, &states[i].config, &step)?;
            let mut history = states[i].history.clone();
            if let Some(gv) = gv {
                let roster = Roster::new(sys, step.receiver.label, step.sender.label);
                let (_, units) = step_units(sys, gv, &roster, &step);
                let before = &states[i].config;
                let (names, markers) = (before.names(), before.markers());
                for u in units {
                    let fresh = is_new_unit(&u, &names, &markers);
                    let h = history.entry(u).or_default();
                    *h.steps.entry(step.pair()).or_insert(0) += 1;
                    h.created += u64::from(fresh);
                }
            }
            let key = (config, history);
            if seen.contains(&key) {
                continue;
            }
            if states.len() >= limits.max_configs {
                truncated = true;
                return Ok(Exploration { states, truncated });
            }
            seen.insert(key.clone());
            let (config, history) = key;
            states.push(ExploredState { config, history, depth: states[i].depth + 1, parent: Some((i, step.display(sys))) });
            queue.push_back(states.len() - 1);
        }
    }
    Ok(Exploration { states, truncated })
}
