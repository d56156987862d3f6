//! Thread partitioning: unit keys, abstract units, the roster of threads
//! touched by a step, and enumeration of partition cases `(~, A)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Deserialize;
use thiserror::Error;

use crate::index::{LabelId, SystemIndex, VarId};
use crate::syntax::PrefixKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Receiver,
    Sender,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Receiver => "?",
            Role::Sender => "!",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionMode {
    /// Units are tuples of channel names.
    FullName,
    /// Units are tuples of the markers of channel names.
    MarkerOnly,
}

/// How threads are mapped to computation units: for each label and key, the
/// interface variable whose binding identifies the unit.
#[derive(Clone, Debug)]
pub struct GetVar {
    keys: Vec<String>,
    stable: Vec<usize>,
    map: Vec<Vec<VarId>>,
    mode: PartitionMode,
}

#[derive(Debug, Error)]
pub enum PartitionSpecError {
    #[error("invalid partition spec: {0}")]
    Json(#[from] serde_json::Error),
    #[error("partition spec declares no keys")]
    NoKeys,
    #[error("stable key `{0}` is not a declared key")]
    UnknownStableKey(String),
    #[error("partition spec mentions unknown label {0}")]
    UnknownLabel(String),
    #[error("partition spec mentions unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}` of label {label} maps to `{var}`, which is not free at that label")]
    NotInInterface { label: String, key: String, var: String },
    #[error("unknown partition mode `{0}`")]
    UnknownMode(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    keys: Vec<String>,
    #[serde(default)]
    stable: Option<Vec<String>>,
    #[serde(default)]
    map: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    mode: Option<String>,
}

impl GetVar {
    /// One key per thread: the channel it operates on.
    pub fn channel(sys: &SystemIndex) -> GetVar {
        GetVar {
            keys: vec!["b".into()],
            stable: vec![0],
            map: sys.label_ids().map(|l| vec![sys.chan(l)]).collect(),
            mode: PartitionMode::FullName,
        }
    }

    /// Threads grouped by the marker of the name of their channel.
    pub fn marker(sys: &SystemIndex) -> GetVar {
        GetVar { mode: PartitionMode::MarkerOnly, ..GetVar::channel(sys) }
    }

    /// Reads a JSON partition spec; labels it does not mention use their
    /// channel for every key.
    pub fn from_spec(sys: &SystemIndex, json: &str) -> Result<GetVar, PartitionSpecError> {
        let spec: SpecFile = serde_json::from_str(json)?;
        if spec.keys.is_empty() {
            return Err(PartitionSpecError::NoKeys);
        }
        let key_index = |k: &str| spec.keys.iter().position(|x| x == k);
        let stable = match &spec.stable {
            None => (0..spec.keys.len()).collect(),
            Some(s) => s
                .iter()
                .map(|k| key_index(k).ok_or_else(|| PartitionSpecError::UnknownStableKey(k.clone())))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let mode = match spec.mode.as_deref() {
            None | Some("full-name") => PartitionMode::FullName,
            Some("marker-only") => PartitionMode::MarkerOnly,
            Some(other) => return Err(PartitionSpecError::UnknownMode(other.into())),
        };
        let mut map: Vec<Vec<VarId>> = sys.label_ids().map(|l| vec![sys.chan(l); spec.keys.len()]).collect();
        for (label, entries) in &spec.map {
            let l = sys.lookup_label(label).ok_or_else(|| PartitionSpecError::UnknownLabel(label.clone()))?;
            for (key, var) in entries {
                let b = key_index(key).ok_or_else(|| PartitionSpecError::UnknownKey(key.clone()))?;
                let not_free = || PartitionSpecError::NotInInterface {
                    label: label.clone(),
                    key: key.clone(),
                    var: var.clone(),
                };
                let v = sys.lookup_var(var).ok_or_else(not_free)?;
                if !sys.interface(l).contains(&v) {
                    return Err(not_free());
                }
                map[l.index()][b] = v;
            }
        }
        Ok(GetVar { keys: spec.keys, stable, map, mode })
    }

    pub fn mode(&self) -> PartitionMode {
        self.mode
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn key_count(&self) -> usize {
        self.keys.len()
    }

    /// `getvar(l)`, one variable per key.
    pub fn vars(&self, l: LabelId) -> &[VarId] {
        &self.map[l.index()]
    }

    /// The key whose agreement forces agreement on all keys, if there is
    /// exactly one.
    pub fn single_stable_key(&self) -> Option<usize> {
        match self.stable.as_slice() {
            [b] => Some(*b),
            _ => None,
        }
    }
}

/// A computation unit with markers erased: one restriction variable per
/// key. Empty in marker-only mode, where there is a single abstract unit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AbstractUnit(pub Vec<VarId>);

impl AbstractUnit {
    pub fn trivial() -> AbstractUnit {
        AbstractUnit(Vec::new())
    }

    pub fn display(&self, sys: &SystemIndex) -> String {
        if self.0.is_empty() {
            return "*".into();
        }
        sys.var_names(&self.0).join(",")
    }
}

/// The threads involved in a step: the two interacting threads and the
/// threads their continuations launch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Roster {
    pub receiver: LabelId,
    pub sender: LabelId,
    /// `(l?, ?)` first, `(l!, !)` second, then created receiver-side and
    /// sender-side threads in label order.
    pub entries: Vec<(LabelId, Role)>,
}

impl Roster {
    pub fn new(sys: &SystemIndex, receiver: LabelId, sender: LabelId) -> Roster {
        let mut entries = vec![(receiver, Role::Receiver), (sender, Role::Sender)];
        entries.extend(sys.prefix(receiver).cont_beta.iter().map(|&l| (l, Role::Receiver)));
        entries.extend(sys.prefix(sender).cont_beta.iter().map(|&l| (l, Role::Sender)));
        Roster { receiver, sender, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, entry: (LabelId, Role)) -> Option<usize> {
        self.entries.iter().position(|&e| e == entry)
    }

    /// Whether the entry at `i` is a thread launched by the step.
    pub fn is_created(&self, i: usize) -> bool {
        i >= 2
    }

    /// The prefix whose continuation binds the variables of entry `i`.
    pub fn parent(&self, i: usize) -> LabelId {
        match self.entries[i].1 {
            Role::Receiver => self.receiver,
            Role::Sender => self.sender,
        }
    }
}

/// An equivalence over roster entries (as class indices in restricted
/// growth form) and an abstract unit per class.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartitionCase {
    pub class_of: Vec<usize>,
    pub units: Vec<AbstractUnit>,
}

impl PartitionCase {
    pub fn class_count(&self) -> usize {
        self.units.len()
    }

    pub fn same_class(&self, i: usize, j: usize) -> bool {
        self.class_of[i] == self.class_of[j]
    }

    pub fn unit_of(&self, i: usize) -> &AbstractUnit {
        &self.units[self.class_of[i]]
    }

    pub fn members(&self, class: usize) -> impl Iterator<Item = usize> + '_ {
        self.class_of.iter().enumerate().filter(move |(_, &c)| c == class).map(|(i, _)| i)
    }

    pub fn display(&self, sys: &SystemIndex, roster: &Roster) -> String {
        let mut parts = Vec::new();
        for c in 0..self.class_count() {
            let members: Vec<String> = self
                .members(c)
                .map(|i| {
                    let (l, r) = roster.entries[i];
                    format!("({},{})", sys.label(l), r)
                })
                .collect();
            parts.push(format!("{{{}}}->[{}]", members.join(" "), self.units[c].display(sys)));
        }
        parts.join(" ")
    }
}

/// Restrictions on the cases worth enumerating. Every case it excludes
/// would be found contradictory by the environment analysis.
#[derive(Clone, Debug, Default)]
pub struct ContextHint {
    /// Per roster entry and key, the restriction variables its key may be
    /// bound to. `None` means any restriction variable.
    pub candidates: Option<Vec<Vec<BTreeSet<VarId>>>>,
    pub must_join: Vec<(usize, usize)>,
    pub must_separate: Vec<(usize, usize)>,
}

impl ContextHint {
    /// No information: every label for every key.
    pub fn top(sys: &SystemIndex, gv: &GetVar, roster: &Roster) -> ContextHint {
        if gv.mode() == PartitionMode::MarkerOnly {
            return ContextHint::default();
        }
        let all: BTreeSet<VarId> = sys.restriction_vars().iter().copied().collect();
        ContextHint {
            candidates: Some(vec![vec![all; gv.key_count()]; roster.len()]),
            ..ContextHint::default()
        }
    }
}

/// Enumerates every partition case of a roster that the hint does not rule
/// out, in a deterministic order.
pub fn enumerate_contexts(roster: &Roster, gv: &GetVar, hint: &ContextHint) -> Vec<PartitionCase> {
    let mut out = Vec::new();
    for_each_context(roster, gv, hint, |case| out.push(case));
    out
}

pub fn for_each_context(roster: &Roster, gv: &GetVar, hint: &ContextHint, mut visit: impl FnMut(PartitionCase)) {
    let n = roster.len();
    let mut joins: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut separations: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &hint.must_join {
        let (lo, hi) = (a.min(b), a.max(b));
        if lo != hi {
            joins[hi].push(lo);
        }
    }
    for &(a, b) in &hint.must_separate {
        if a == b {
            return;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        separations[hi].push(lo);
    }
    let mut search = Search {
        n,
        keys: gv.key_count(),
        hint,
        joins,
        separations,
        class_of: Vec::with_capacity(n),
        class_candidates: Vec::new(),
        marker_mode: gv.mode() == PartitionMode::MarkerOnly || hint.candidates.is_none(),
    };
    search.assign(&mut visit);
}

struct Search<'a> {
    n: usize,
    keys: usize,
    hint: &'a ContextHint,
    joins: Vec<Vec<usize>>,
    separations: Vec<Vec<usize>>,
    class_of: Vec<usize>,
    /// Per class and key, the intersection of member candidates.
    class_candidates: Vec<Vec<BTreeSet<VarId>>>,
    marker_mode: bool,
}

impl Search<'_> {
    fn assign(&mut self, visit: &mut impl FnMut(PartitionCase)) {
        let i = self.class_of.len();
        if i == self.n {
            self.emit_units(visit);
            return;
        }
        let forced: BTreeSet<usize> = self.joins[i].iter().map(|&j| self.class_of[j]).collect();
        if forced.len() > 1 {
            return;
        }
        let forbidden: BTreeSet<usize> = self.separations[i].iter().map(|&j| self.class_of[j]).collect();
        let classes = self.class_candidates.len().max(self.class_of.iter().map(|c| c + 1).max().unwrap_or(0));
        let options: Vec<usize> = match forced.iter().next() {
            Some(&c) => vec![c],
            None => (0..=classes).collect(),
        };
        for c in options {
            if forbidden.contains(&c) {
                continue;
            }
            if self.marker_mode {
                self.class_of.push(c);
                self.assign(visit);
                self.class_of.pop();
                continue;
            }
            let mine = &self.hint.candidates.as_ref().expect("candidates")[i];
            if c == classes {
                if mine.iter().any(BTreeSet::is_empty) {
                    continue;
                }
                self.class_candidates.push(mine.clone());
                self.class_of.push(c);
                self.assign(visit);
                self.class_of.pop();
                self.class_candidates.pop();
            } else {
                let merged: Vec<BTreeSet<VarId>> = self.class_candidates[c]
                    .iter()
                    .zip(mine)
                    .map(|(a, b)| a.intersection(b).copied().collect())
                    .collect();
                if merged.iter().any(BTreeSet::is_empty) {
                    continue;
                }
                let saved = std::mem::replace(&mut self.class_candidates[c], merged);
                self.class_of.push(c);
                self.assign(visit);
                self.class_of.pop();
                self.class_candidates[c] = saved;
            }
        }
    }

    fn emit_units(&self, visit: &mut impl FnMut(PartitionCase)) {
        let classes = self.class_of.iter().map(|c| c + 1).max().unwrap_or(0);
        if self.marker_mode {
            visit(PartitionCase { class_of: self.class_of.clone(), units: vec![AbstractUnit::trivial(); classes] });
            return;
        }
        // odometer over the per-class, per-key candidate lists
        let slots: Vec<Vec<VarId>> = self
            .class_candidates
            .iter()
            .flat_map(|per_key| per_key.iter().map(|s| s.iter().copied().collect::<Vec<_>>()))
            .collect();
        let mut pick = vec![0usize; slots.len()];
        loop {
            let units = (0..classes)
                .map(|c| AbstractUnit((0..self.keys).map(|b| slots[c * self.keys + b][pick[c * self.keys + b]]).collect()))
                .collect();
            visit(PartitionCase { class_of: self.class_of.clone(), units });
            let mut k = slots.len();
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                pick[k] += 1;
                if pick[k] < slots[k].len() {
                    break;
                }
                pick[k] = 0;
            }
        }
    }
}

/// Receiver/output pairs that can interact: matching types and arities.
pub fn abstract_step_labels(sys: &SystemIndex) -> Vec<(LabelId, LabelId)> {
    sys.step_pairs()
        .into_iter()
        .filter(|&(r, s)| sys.kind(r).is_receiver() && sys.kind(s) == PrefixKind::Output)
        .collect()
}
