//! Environment analysis: per program point, which restrictions may have
//! created the names bound to the interface variables, and which of these
//! names are equal or distinct.

mod atom;

pub use atom::{Atom, Constraint, LabelSet};

use std::collections::BTreeSet;

use serde_json::{json, Value};

use crate::index::{LabelId, SystemIndex, VarId};
use crate::partition::{ContextHint, GetVar, PartitionCase, PartitionMode, Role, Roster};

pub type AtomEnv = Atom<VarId>;
/// An element over the variables of both interacting threads.
pub type MolEnv = Atom<(VarId, Role)>;

/// One element per prefix label, over that label's interface.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvMap {
    pub entries: Vec<AtomEnv>,
}

impl EnvMap {
    pub fn bottom(sys: &SystemIndex) -> EnvMap {
        EnvMap { entries: sys.label_ids().map(|l| AtomEnv::bottom(sys.interface(l).to_vec())).collect() }
    }

    pub fn get(&self, l: LabelId) -> &AtomEnv {
        &self.entries[l.index()]
    }

    pub fn is_bottom(&self) -> bool {
        self.entries.iter().all(Atom::is_bottom)
    }

    pub fn join(&self, other: &EnvMap) -> EnvMap {
        EnvMap { entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a.join(b)).collect() }
    }

    pub fn join_in(&mut self, l: LabelId, a: &AtomEnv) {
        let e = &mut self.entries[l.index()];
        *e = e.join(a);
    }

    pub fn leq(&self, other: &EnvMap) -> bool {
        self.entries.iter().zip(&other.entries).all(|(a, b)| a.leq(b))
    }

    /// Label set of a variable at a label; empty when unreachable.
    pub fn labels_of(&self, l: LabelId, v: VarId) -> LabelSet {
        self.get(l).labels(&v).cloned().unwrap_or_default()
    }

    pub fn to_json(&self, sys: &SystemIndex) -> Value {
        let mut out = serde_json::Map::new();
        for l in sys.label_ids() {
            out.insert(sys.label(l).to_string(), atom_json(sys, self.get(l)));
        }
        Value::Object(out)
    }

    pub fn render(&self, sys: &SystemIndex) -> String {
        let mut s = String::new();
        for l in sys.label_ids() {
            s.push_str(&format!("  {}: {}\n", sys.label(l), render_atom(sys, self.get(l))));
        }
        s
    }
}

fn label_names(sys: &SystemIndex, s: &LabelSet) -> Vec<String> {
    s.iter().map(|v| sys.var(v).to_string()).collect()
}

/// Constraints worth printing: equalities, and disequalities not already
/// implied by disjoint label sets.
fn visible_constraints(sys: &SystemIndex, a: &AtomEnv) -> Vec<String> {
    let vars = a.vars();
    a.constraints()
        .into_iter()
        .filter_map(|c| match c {
            Constraint::Eq(i, j) => Some(format!("{} = {}", sys.var(vars[i]), sys.var(vars[j]))),
            Constraint::Neq(i, j) => {
                let (li, lj) = (a.labels_at(i)?, a.labels_at(j)?);
                (!li.is_disjoint(lj)).then(|| format!("{} != {}", sys.var(vars[i]), sys.var(vars[j])))
            }
            Constraint::Lbl(..) => None,
        })
        .collect()
}

fn atom_json(sys: &SystemIndex, a: &AtomEnv) -> Value {
    if a.is_bottom() {
        return Value::Null;
    }
    let mut vars = serde_json::Map::new();
    for &v in a.vars() {
        vars.insert(sys.var(v).to_string(), json!(label_names(sys, a.labels(&v).unwrap())));
    }
    json!({ "labels": vars, "constraints": visible_constraints(sys, a) })
}

pub fn render_atom(sys: &SystemIndex, a: &AtomEnv) -> String {
    if a.is_bottom() {
        return "unreachable".into();
    }
    let vars: Vec<String> = a
        .vars()
        .iter()
        .map(|&v| format!("{} -> {{{}}}", sys.var(v), label_names(sys, a.labels(&v).unwrap()).join(",")))
        .collect();
    let cons = visible_constraints(sys, a);
    if cons.is_empty() {
        format!("[{}]", vars.join(", "))
    } else {
        format!("[{}] with {}", vars.join(", "), cons.join(", "))
    }
}

/// The environment analysis of one system.
pub struct EnvAnalysis<'a> {
    sys: &'a SystemIndex,
    gv: &'a GetVar,
    universe: LabelSet,
}

/// Everything known about a pair of interacting threads before the
/// partition case is considered.
#[derive(Clone, Debug)]
pub struct PairMolecule {
    pub roster: Roster,
    pub mol: MolEnv,
    /// Position in `mol` of each roster entry's key variables.
    pub key_pos: Vec<Vec<usize>>,
}

impl<'a> EnvAnalysis<'a> {
    pub fn new(sys: &'a SystemIndex, gv: &'a GetVar) -> Self {
        let universe = sys.restriction_vars().iter().copied().collect();
        EnvAnalysis { sys, gv, universe }
    }

    pub fn system(&self) -> &SystemIndex {
        self.sys
    }

    /// Fresh declarations of every interface variable at the root labels.
    pub fn init(&self) -> EnvMap {
        let mut m = EnvMap::bottom(self.sys);
        for &l in self.sys.root_beta() {
            let mut a = AtomEnv::empty();
            for &x in self.sys.interface(l) {
                a = a.declare(x, x);
            }
            m.entries[l.index()] = a;
        }
        m
    }

    /// The pair of extended environments with the communication constraints
    /// applied; `None` when the pair cannot interact.
    pub fn molecule(&self, env: &EnvMap, receiver: LabelId, sender: LabelId) -> Option<PairMolecule> {
        let sys = self.sys;
        let (rp, sp) = (sys.prefix(receiver), sys.prefix(sender));
        let input0 = env.get(receiver);
        let output0 = env.get(sender);
        if input0.is_bottom() || output0.is_bottom() {
            return None;
        }
        // marker allocation on fetch carries no information here
        let mut input = input0.clone();
        for &y in &rp.args {
            input = input.extend(y, &self.universe);
        }
        for &u in &rp.fresh {
            input = input.declare(u, u);
        }
        let mut output = output0.clone();
        for &v in &sp.fresh {
            output = output.declare(v, v);
        }
        let mol0 = Atom::pair(&input, Role::Receiver, &output, Role::Sender);
        let rpos = |v: VarId| mol0.position(&(v, Role::Receiver)).expect("receiver variable");
        let spos = |v: VarId| mol0.position(&(v, Role::Sender)).expect("sender variable");
        let mut com = vec![Constraint::Eq(rpos(rp.chan), spos(sp.chan))];
        for (&y, &x) in rp.args.iter().zip(&sp.args) {
            com.push(Constraint::Eq(rpos(y), spos(x)));
        }
        let mol = mol0.sync(&com);
        if mol.is_bottom() {
            return None;
        }
        let roster = Roster::new(sys, receiver, sender);
        let key_pos = roster
            .entries
            .iter()
            .map(|&(l, role)| {
                self.gv.vars(l).iter().map(|&v| mol.position(&(v, role)).expect("key variable in molecule")).collect()
            })
            .collect();
        Some(PairMolecule { roster, mol, key_pos })
    }

    /// Cases that the molecule does not already refute.
    pub fn hint(&self, pm: &PairMolecule) -> ContextHint {
        let n = pm.roster.len();
        let mut hint = ContextHint::default();
        let full = self.gv.mode() == PartitionMode::FullName;
        if full {
            hint.candidates = Some(
                pm.key_pos
                    .iter()
                    .map(|ks| ks.iter().map(|&p| pm.mol.labels_at(p).expect("non-bottom").iter().collect()).collect())
                    .collect(),
            );
        }
        for i in 0..n {
            for j in i + 1..n {
                let stable_equal = self
                    .gv
                    .single_stable_key()
                    .is_some_and(|b| pm.mol.are_equal_at(pm.key_pos[i][b], pm.key_pos[j][b]));
                let all_equal = (0..self.gv.key_count()).all(|b| pm.mol.are_equal_at(pm.key_pos[i][b], pm.key_pos[j][b]));
                if (full && stable_equal) || (!full && all_equal) {
                    hint.must_join.push((i, j));
                }
                if full && (0..self.gv.key_count()).any(|b| pm.mol.are_distinct_at(pm.key_pos[i][b], pm.key_pos[j][b])) {
                    hint.must_separate.push((i, j));
                }
            }
        }
        if !full {
            self.marker_freshness(pm, &mut hint);
        }
        hint
    }

    /// In a fetch, names declared by the new instance carry a marker no
    /// existing name has.
    fn marker_freshness(&self, pm: &PairMolecule, hint: &mut ContextHint) {
        let sys = self.sys;
        let receiver = pm.roster.receiver;
        if sys.kind(receiver) != crate::syntax::PrefixKind::Fetch {
            return;
        }
        let fresh: BTreeSet<VarId> = sys.prefix(receiver).fresh.iter().copied().collect();
        let keys = self.gv.key_count();
        let fresh_key = |i: usize, b: usize| {
            let (l, role) = pm.roster.entries[i];
            role == Role::Receiver && pm.roster.is_created(i) && fresh.contains(&self.gv.vars(l)[b])
        };
        for i in 0..pm.roster.len() {
            for j in i + 1..pm.roster.len() {
                if (0..keys).all(|b| fresh_key(i, b) && fresh_key(j, b)) {
                    hint.must_join.push((i, j));
                }
                if (0..keys).any(|b| fresh_key(i, b) != fresh_key(j, b)) {
                    hint.must_separate.push((i, j));
                }
            }
        }
    }

    /// The partition constraints of a case.
    pub fn case_constraints(&self, pm: &PairMolecule, case: &PartitionCase) -> Vec<Constraint> {
        let mut cons = Vec::new();
        if self.gv.mode() == PartitionMode::MarkerOnly {
            return cons;
        }
        let n = pm.roster.len();
        let keys = self.gv.key_count();
        for i in 0..n {
            for j in i + 1..n {
                if case.same_class(i, j) {
                    cons.extend((0..keys).map(|b| Constraint::Eq(pm.key_pos[i][b], pm.key_pos[j][b])));
                } else if let Some(b) = self.gv.single_stable_key() {
                    cons.push(Constraint::Neq(pm.key_pos[i][b], pm.key_pos[j][b]));
                }
            }
            let unit = case.unit_of(i);
            cons.extend((0..keys).map(|b| Constraint::Lbl(pm.key_pos[i][b], unit.0[b])));
        }
        cons
    }

    /// The environments of the launched threads for one case, or `None` when
    /// the case is contradictory.
    pub fn post_case(&self, pm: &PairMolecule, case: &PartitionCase) -> Option<Vec<(LabelId, AtomEnv)>> {
        let mol1 = pm.mol.sync(&self.case_constraints(pm, case));
        if mol1.is_bottom() {
            return None;
        }
        Some(self.launched(pm, &mol1))
    }

    fn launched(&self, pm: &PairMolecule, mol1: &MolEnv) -> Vec<(LabelId, AtomEnv)> {
        let sys = self.sys;
        let mut out = Vec::new();
        for (parent, role) in [(pm.roster.receiver, Role::Receiver), (pm.roster.sender, Role::Sender)] {
            let side = mol1.project(role);
            for &l in &sys.prefix(parent).cont_beta {
                out.push((l, side.gc(sys.interface(l))));
            }
        }
        out
    }

    /// One application of the transfer function over every step pair and
    /// case, with the partition ignored: the least upper bound of the
    /// per-case results when every case is allowed.
    pub fn post_all(&self, env: &EnvMap) -> EnvMap {
        let mut next = env.clone();
        for (r, s) in crate::partition::abstract_step_labels(self.sys) {
            let Some(pm) = self.molecule(env, r, s) else { continue };
            let hint = self.hint(&pm);
            crate::partition::for_each_context(&pm.roster, self.gv, &hint, |case| {
                if let Some(updates) = self.post_case(&pm, &case) {
                    for (l, a) in updates {
                        next.join_in(l, &a);
                    }
                }
            });
        }
        next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MEMORY: &str = include_str!("../../corpus/memory.pi");

    #[test]
    fn init_on_memory() {
        let sys = SystemIndex::from_source(MEMORY).unwrap();
        let gv = GetVar::channel(&sys);
        let env = EnvAnalysis::new(&sys, &gv).init();
        let live: Vec<String> =
            sys.label_ids().filter(|&l| !env.get(l).is_bottom()).map(|l| sys.label(l).to_string()).collect();
        assert_eq!(live, ["1", "12", "12'"]);
        let l1 = sys.lookup_label("1").unwrap();
        let alloc = sys.lookup_var("alloc").unwrap();
        let null = sys.lookup_var("null").unwrap();
        assert_eq!(env.get(l1).labels(&alloc), Some(&LabelSet::singleton(alloc)));
        assert!(env.get(l1).are_distinct(&alloc, &null));
    }

    #[test]
    fn empty_system_init_is_bottom() {
        let sys = SystemIndex::from_source("0").unwrap();
        let gv = GetVar::channel(&sys);
        assert!(EnvAnalysis::new(&sys, &gv).init().is_bottom());
    }
}
