//! Contents analysis: per abstract unit, the number of threads at each label
//! and the number of steps that touched the unit.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::index::{LabelId, SystemIndex};
use crate::numeric::{CountSpace, NumElem};
use crate::partition::{AbstractUnit, GetVar, PartitionCase, PartitionMode, Role, Roster};
use crate::syntax::PrefixKind;

/// A map from abstract units to counting constraints. Units not stored
/// explicitly map to `default`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CUMap {
    default: NumElem,
    units: BTreeMap<AbstractUnit, NumElem>,
}

impl CUMap {
    pub fn bottom() -> CUMap {
        CUMap { default: NumElem::Bottom, units: BTreeMap::new() }
    }

    pub fn get(&self, a: &AbstractUnit) -> &NumElem {
        self.units.get(a).unwrap_or(&self.default)
    }

    pub fn default_elem(&self) -> &NumElem {
        &self.default
    }

    /// Explicitly stored units, in order.
    pub fn units(&self) -> impl Iterator<Item = (&AbstractUnit, &NumElem)> {
        self.units.iter()
    }

    pub fn is_bottom(&self) -> bool {
        self.default.is_bottom() && self.units.values().all(NumElem::is_bottom)
    }

    pub fn join_in(&mut self, a: &AbstractUnit, e: &NumElem) {
        let cur = self.get(a);
        let j = cur.join(e);
        if j != *cur {
            self.set(a.clone(), j);
        }
    }

    fn set(&mut self, a: AbstractUnit, e: NumElem) {
        if e == self.default {
            self.units.remove(&a);
        } else {
            self.units.insert(a, e);
        }
    }

    fn combine(&self, other: &CUMap, f: impl Fn(&NumElem, &NumElem) -> NumElem) -> CUMap {
        let mut out = CUMap { default: f(&self.default, &other.default), units: BTreeMap::new() };
        for a in self.units.keys().chain(other.units.keys()) {
            if !out.units.contains_key(a) {
                let e = f(self.get(a), other.get(a));
                out.set(a.clone(), e);
            }
        }
        out
    }

    pub fn join(&self, other: &CUMap) -> CUMap {
        self.combine(other, NumElem::join)
    }

    pub fn widen(&self, other: &CUMap) -> CUMap {
        self.combine(other, NumElem::widen)
    }

    pub fn leq(&self, other: &CUMap) -> bool {
        self.default.leq(&other.default)
            && self.units.keys().chain(other.units.keys()).all(|a| self.get(a).leq(other.get(a)))
    }

    pub fn render(&self, sys: &SystemIndex, space: &CountSpace) -> String {
        let mut out = String::new();
        for (a, e) in &self.units {
            out.push_str(&format!("[{}]\n", a.display(sys)));
            for line in e.render(space) {
                out.push_str(&format!("  {line}\n"));
            }
        }
        out.push_str("[_]\n");
        for line in self.default.render(space) {
            out.push_str(&format!("  {line}\n"));
        }
        out
    }

    pub fn to_json(&self, sys: &SystemIndex, space: &CountSpace) -> Value {
        let units: Vec<Value> = self
            .units
            .iter()
            .map(|(a, e)| json!({ "unit": a.display(sys), "constraints": e.to_json(space) }))
            .collect();
        json!({ "units": units, "default": self.default.to_json(space) })
    }
}

pub struct ContentsAnalysis<'a> {
    sys: &'a SystemIndex,
    gv: &'a GetVar,
    space: CountSpace,
}

impl<'a> ContentsAnalysis<'a> {
    /// With `track_creation`, each unit also counts the steps that created
    /// it; that count never exceeds one, which bounds the sum of the step
    /// counts of all the pairs able to create the unit.
    pub fn new(sys: &'a SystemIndex, gv: &'a GetVar, track_creation: bool) -> Self {
        ContentsAnalysis { sys, gv, space: CountSpace::new(sys, track_creation) }
    }

    pub fn space(&self) -> &CountSpace {
        &self.space
    }

    pub fn system(&self) -> &SystemIndex {
        self.sys
    }

    pub fn getvar(&self) -> &GetVar {
        self.gv
    }

    /// The abstract unit of a thread at `l` in the initial configuration.
    fn root_unit(&self, l: LabelId) -> AbstractUnit {
        match self.gv.mode() {
            PartitionMode::FullName => AbstractUnit(self.gv.vars(l).to_vec()),
            PartitionMode::MarkerOnly => AbstractUnit::trivial(),
        }
    }

    /// Root threads grouped by unit, each group joined with the empty unit.
    pub fn init(&self) -> CUMap {
        let dim = self.space.dim();
        let empty = NumElem::chi(dim, &[]);
        let mut groups: BTreeMap<AbstractUnit, Vec<usize>> = BTreeMap::new();
        for &l in self.sys.root_beta() {
            groups.entry(self.root_unit(l)).or_default().push(self.space.x(l));
        }
        let mut cu = CUMap { default: empty.clone(), units: BTreeMap::new() };
        for (a, xs) in groups {
            cu.set(a, NumElem::chi(dim, &xs).join(&empty));
        }
        cu
    }

    /// Whether the thread at roster entry `i` has a key bound to a name
    /// that the step itself creates.
    fn has_fresh_key(&self, roster: &Roster, i: usize) -> bool {
        if !roster.is_created(i) {
            return false;
        }
        let (l, role) = roster.entries[i];
        let parent = self.sys.prefix(roster.parent(i));
        if self.gv.mode() == PartitionMode::MarkerOnly
            && (role != Role::Receiver || parent.kind != PrefixKind::Fetch)
        {
            // only the instance spawned by a resource gets a new marker
            return false;
        }
        self.gv.vars(l).iter().any(|v| parent.fresh.contains(v))
    }

    /// Per-variable lower bounds requiring the interacting threads of
    /// `class` to be present.
    fn participants(&self, roster: &Roster, case: &PartitionCase, class: usize) -> Vec<(usize, i64)> {
        let mut reqs: Vec<(usize, i64)> = Vec::new();
        for i in [0, 1] {
            if case.class_of[i] != class {
                continue;
            }
            let x = self.space.x(roster.entries[i].0);
            match reqs.iter_mut().find(|(v, _)| *v == x) {
                Some((_, k)) => *k += 1,
                None => reqs.push((x, 1)),
            }
        }
        reqs
    }

    /// The contents of the units touched by a step in one partition case,
    /// or `None` when the counts rule the case out.
    pub fn post_case(&self, cu: &CUMap, roster: &Roster, case: &PartitionCase) -> Option<Vec<(AbstractUnit, NumElem)>> {
        let dim = self.space.dim();
        for i in [0, 1] {
            let class = case.class_of[i];
            let reqs = self.participants(roster, case, class);
            if cu.get(&case.units[class]).sync_nonzero(&reqs).is_bottom() {
                return None;
            }
        }
        let pair = self
            .space
            .pair_index(roster.receiver, roster.sender)
            .expect("step pair is materialized");
        let (y, z) = (self.space.y(pair), self.space.z(pair));
        let consumes_input = self.sys.kind(roster.receiver) == PrefixKind::Input;
        let mut out = Vec::with_capacity(case.class_count());
        for class in 0..case.class_count() {
            let unit = &case.units[class];
            let members: Vec<usize> = case.members(class).collect();
            let old = if members.iter().any(|&i| self.has_fresh_key(roster, i)) {
                NumElem::chi(dim, self.space.created().as_slice())
            } else {
                cu.get(unit).sync_nonzero(&self.participants(roster, case, class))
            };
            let mut consumed = Vec::new();
            let mut created = Vec::new();
            for &i in &members {
                let x = self.space.x(roster.entries[i].0);
                match i {
                    0 if consumes_input => consumed.push(x),
                    0 => {}
                    1 => consumed.push(x),
                    _ => created.push(x),
                }
            }
            let content = old.sub_chi(&consumed).add_chi(&created).update_trans(y, z);
            out.push((unit.clone(), content));
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::LinExpr;
    use crate::env::EnvAnalysis;
    use crate::partition::enumerate_contexts;

    const MEMORY: &str = include_str!("../corpus/memory.pi");

    #[test]
    fn init_groups_root_threads() {
        let sys = SystemIndex::from_source(MEMORY).unwrap();
        let gv = GetVar::channel(&sys);
        let ca = ContentsAnalysis::new(&sys, &gv, false);
        let cu = ca.init();
        let sp = ca.space();
        let rec = AbstractUnit(vec![sys.lookup_var("rec@12").unwrap()]);
        let x12 = sp.x(sys.lookup_label("12").unwrap());
        let x12p = sp.x(sys.lookup_label("12'").unwrap());
        assert!(cu.get(&rec).entails_zero(&LinExpr::new([(x12, 1), (x12p, -1)])));
        assert!(cu.get(&rec).entails_le(&LinExpr::new([(x12, 1)]), 1));
        assert!(!cu.get(&rec).entails_le(&LinExpr::new([(x12, 1)]), 0));
        let cell = AbstractUnit(vec![sys.lookup_var("cell").unwrap()]);
        assert_eq!(cu.get(&cell), &NumElem::chi(sp.dim(), &[]));
    }

    #[test]
    fn allocation_launches_into_empty_unit() {
        let sys = SystemIndex::from_source(MEMORY).unwrap();
        let gv = GetVar::channel(&sys);
        let ca = ContentsAnalysis::new(&sys, &gv, false);
        let (r, s) = (sys.lookup_label("1").unwrap(), sys.lookup_label("13").unwrap());
        let mut cu = ca.init();
        let alloc = AbstractUnit(vec![sys.lookup_var("alloc").unwrap()]);
        cu.join_in(&alloc, &NumElem::chi(ca.space().dim(), &[ca.space().x(r), ca.space().x(s)]));
        let env = EnvAnalysis::new(&sys, &gv);
        let mut em = env.init();
        loop {
            let next = env.post_all(&em);
            if next.leq(&em) {
                break;
            }
            em = next;
        }
        let pm = env.molecule(&em, r, s).unwrap();
        let roster = pm.roster.clone();
        let cell = sys.lookup_var("cell").unwrap();
        let i2 = roster.position((sys.lookup_label("2").unwrap(), Role::Receiver)).unwrap();
        let cases = enumerate_contexts(&roster, &gv, &env.hint(&pm));
        let case = cases
            .iter()
            .find(|c| c.unit_of(i2).0 == [cell] && *c.unit_of(0) == alloc && c.same_class(0, 1))
            .unwrap();
        assert!(ca.has_fresh_key(&roster, i2));
        let out = ca.post_case(&cu, &roster, case).unwrap();
        let (_, e) = out.iter().find(|(a, _)| a.0 == [cell]).unwrap();
        let sp = ca.space();
        let x2 = sp.x(sys.lookup_label("2").unwrap());
        let y = sp.y(sp.pair_index(r, s).unwrap());
        assert!(e.entails_zero(&LinExpr::new([(x2, 1), (y, -1)])));
        assert!(e.entails_le(&LinExpr::new([(y, 1)]), 1));
    }
}
