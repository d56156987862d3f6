//! Relational CFA elements: per variable, the set of restrictions that may
//! have created its name, plus equality and disequality constraints, kept in
//! normal form.

use std::collections::BTreeSet;
use std::fmt;

use crate::index::VarId;

/// A set of restriction variables, as a bitset over variable indices.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabelSet(Vec<u64>);

impl LabelSet {
    pub fn empty() -> LabelSet {
        LabelSet(Vec::new())
    }

    pub fn singleton(v: VarId) -> LabelSet {
        let mut s = LabelSet::empty();
        s.insert(v);
        s
    }

    pub fn insert(&mut self, v: VarId) {
        let (w, b) = (v.index() / 64, v.index() % 64);
        if self.0.len() <= w {
            self.0.resize(w + 1, 0);
        }
        self.0[w] |= 1 << b;
    }

    pub fn contains(&self, v: VarId) -> bool {
        let (w, b) = (v.index() / 64, v.index() % 64);
        self.0.get(w).is_some_and(|x| x & (1 << b) != 0)
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn trim(mut self) -> LabelSet {
        while self.0.last() == Some(&0) {
            self.0.pop();
        }
        self
    }

    pub fn intersection(&self, other: &LabelSet) -> LabelSet {
        LabelSet(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect()).trim()
    }

    pub fn union(&self, other: &LabelSet) -> LabelSet {
        let n = self.0.len().max(other.0.len());
        LabelSet((0..n).map(|i| self.0.get(i).unwrap_or(&0) | other.0.get(i).unwrap_or(&0)).collect()).trim()
    }

    pub fn is_subset(&self, other: &LabelSet) -> bool {
        self.0.iter().enumerate().all(|(i, a)| a & !other.0.get(i).unwrap_or(&0) == 0)
    }

    pub fn is_disjoint(&self, other: &LabelSet) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = VarId> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter(move |b| bits & (1u64 << b) != 0).map(move |b| VarId((w * 64 + b) as u32))
        })
    }
}

impl FromIterator<VarId> for LabelSet {
    fn from_iter<I: IntoIterator<Item = VarId>>(iter: I) -> Self {
        let mut s = LabelSet::empty();
        for v in iter {
            s.insert(v);
        }
        s
    }
}

impl fmt::Debug for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|v| v.0)).finish()
    }
}

/// A constraint over the variables of an element, by position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Constraint {
    Eq(usize, usize),
    Neq(usize, usize),
    /// The name bound to the variable was created by this restriction.
    Lbl(usize, VarId),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Body {
    labels: Vec<LabelSet>,
    /// Smallest index of each variable's equality class.
    rep: Vec<u32>,
    /// Disequal class pairs `(rep_a, rep_b)` with `rep_a < rep_b`, closed
    /// under label disjointness.
    neq: BTreeSet<(u32, u32)>,
}

/// An abstract element over an ordered list of variables; `V` is a program
/// variable for single environments and a tagged variable for pairs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom<V> {
    vars: Vec<V>,
    body: Option<Body>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl<V: Clone + PartialEq + fmt::Debug> Atom<V> {
    pub fn bottom(vars: Vec<V>) -> Atom<V> {
        Atom { vars, body: None }
    }

    /// The element over no variables describing the initial marker.
    pub fn empty() -> Atom<V> {
        Atom { vars: Vec::new(), body: Some(Body { labels: Vec::new(), rep: Vec::new(), neq: BTreeSet::new() }) }
    }

    /// Normal form of an arbitrary description; bottom when unsatisfiable.
    pub fn normalize(vars: Vec<V>, labels: Vec<LabelSet>, constraints: &[Constraint]) -> Atom<V> {
        let n = vars.len();
        assert_eq!(labels.len(), n);
        let mut labels = labels;
        let mut parent: Vec<usize> = (0..n).collect();
        let mut neqs = Vec::new();
        for c in constraints {
            match *c {
                Constraint::Eq(i, j) => {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
                Constraint::Neq(i, j) => neqs.push((i, j)),
                Constraint::Lbl(i, l) => labels[i] = labels[i].intersection(&LabelSet::singleton(l)),
            }
        }
        // with union by smaller root, every root is the minimum of its class
        let rep: Vec<u32> = (0..n).map(|i| find(&mut parent, i) as u32).collect();
        let mut class_labels: Vec<Option<LabelSet>> = vec![None; n];
        for i in 0..n {
            let r = rep[i] as usize;
            class_labels[r] = Some(match class_labels[r].take() {
                None => labels[i].clone(),
                Some(s) => s.intersection(&labels[i]),
            });
        }
        let mut neq = BTreeSet::new();
        for (i, j) in neqs {
            let (a, b) = (rep[i], rep[j]);
            if a == b {
                return Atom::bottom(vars);
            }
            neq.insert((a.min(b), a.max(b)));
        }
        let reps: Vec<usize> = (0..n).filter(|&i| rep[i] as usize == i).collect();
        for &r in &reps {
            if class_labels[r].as_ref().expect("class").is_empty() {
                return Atom::bottom(vars);
            }
        }
        for (k, &a) in reps.iter().enumerate() {
            for &b in &reps[k + 1..] {
                let (la, lb) = (class_labels[a].as_ref().unwrap(), class_labels[b].as_ref().unwrap());
                if la.is_disjoint(lb) {
                    neq.insert((a as u32, b as u32));
                }
            }
        }
        let labels = (0..n).map(|i| class_labels[rep[i] as usize].clone().unwrap()).collect();
        Atom { vars, body: Some(Body { labels, rep, neq }) }
    }

    pub fn vars(&self) -> &[V] {
        &self.vars
    }

    pub fn is_bottom(&self) -> bool {
        self.body.is_none()
    }

    pub fn position(&self, v: &V) -> Option<usize> {
        self.vars.iter().position(|x| x == v)
    }

    fn pos(&self, v: &V) -> usize {
        self.position(v).unwrap_or_else(|| panic!("variable {v:?} not in element"))
    }

    pub fn labels(&self, v: &V) -> Option<&LabelSet> {
        let i = self.pos(v);
        self.body.as_ref().map(|b| &b.labels[i])
    }

    pub fn labels_at(&self, i: usize) -> Option<&LabelSet> {
        self.body.as_ref().map(|b| &b.labels[i])
    }

    pub fn are_equal_at(&self, i: usize, j: usize) -> bool {
        self.body.as_ref().is_some_and(|b| b.rep[i] == b.rep[j])
    }

    pub fn are_distinct_at(&self, i: usize, j: usize) -> bool {
        self.body.as_ref().is_some_and(|b| {
            let (x, y) = (b.rep[i], b.rep[j]);
            b.neq.contains(&(x.min(y), x.max(y)))
        })
    }

    pub fn are_equal(&self, v: &V, w: &V) -> bool {
        self.are_equal_at(self.pos(v), self.pos(w))
    }

    pub fn are_distinct(&self, v: &V, w: &V) -> bool {
        self.are_distinct_at(self.pos(v), self.pos(w))
    }

    /// Whether a valuation of `vars()` lies in the concretization; `origin`
    /// gives the restriction variable that created a value.
    pub fn admits<T: PartialEq>(&self, values: &[T], origin: impl Fn(&T) -> VarId) -> bool {
        let Some(b) = &self.body else { return false };
        if values.len() != self.vars.len() {
            return false;
        }
        let n = values.len();
        (0..n).all(|i| b.labels[i].contains(origin(&values[i])))
            && (0..n).all(|i| {
                (i + 1..n).all(|j| {
                    let same = values[i] == values[j];
                    (!self.are_equal_at(i, j) || same) && (!self.are_distinct_at(i, j) || !same)
                })
            })
    }

    /// The constraints held by the element, as a list.
    pub fn constraints(&self) -> Vec<Constraint> {
        let Some(b) = &self.body else { return Vec::new() };
        let mut out: Vec<Constraint> = (0..self.vars.len())
            .filter(|&i| b.rep[i] as usize != i)
            .map(|i| Constraint::Eq(b.rep[i] as usize, i))
            .collect();
        out.extend(b.neq.iter().map(|&(x, y)| Constraint::Neq(x as usize, y as usize)));
        out
    }

    /// Adds constraints and renormalizes.
    pub fn sync(&self, constraints: &[Constraint]) -> Atom<V> {
        let Some(b) = &self.body else { return self.clone() };
        if constraints.is_empty() {
            return self.clone();
        }
        let mut all = self.constraints();
        all.extend_from_slice(constraints);
        Atom::normalize(self.vars.clone(), b.labels.clone(), &all)
    }

    /// Adds a fresh name, distinct from every other variable.
    pub fn declare(&self, x: V, label: VarId) -> Atom<V> {
        assert!(self.position(&x).is_none(), "variable {x:?} already present");
        let mut vars = self.vars.clone();
        vars.push(x);
        let Some(b) = &self.body else { return Atom::bottom(vars) };
        let n = self.vars.len();
        let mut labels = b.labels.clone();
        labels.push(LabelSet::singleton(label));
        let mut cons = self.constraints();
        cons.extend((0..n).map(|i| Constraint::Neq(i, n)));
        Atom::normalize(vars, labels, &cons)
    }

    /// Adds a variable about which nothing is known.
    pub fn extend(&self, x: V, universe: &LabelSet) -> Atom<V> {
        assert!(self.position(&x).is_none(), "variable {x:?} already present");
        let mut vars = self.vars.clone();
        vars.push(x);
        let Some(b) = &self.body else { return Atom::bottom(vars) };
        let mut labels = b.labels.clone();
        labels.push(universe.clone());
        Atom::normalize(vars, labels, &self.constraints())
    }

    /// Projection onto `keep`, in that order.
    pub fn gc(&self, keep: &[V]) -> Atom<V> {
        let idx: Vec<usize> = keep.iter().map(|v| self.pos(v)).collect();
        let Some(b) = &self.body else { return Atom::bottom(keep.to_vec()) };
        let labels = idx.iter().map(|&i| b.labels[i].clone()).collect();
        let mut cons = Vec::new();
        for (p, &i) in idx.iter().enumerate() {
            for (q, &j) in idx.iter().enumerate().skip(p + 1) {
                if b.rep[i] == b.rep[j] {
                    cons.push(Constraint::Eq(p, q));
                } else if self.are_distinct_at(i, j) {
                    cons.push(Constraint::Neq(p, q));
                }
            }
        }
        Atom::normalize(keep.to_vec(), labels, &cons)
    }

    /// Least upper bound of two elements over the same variables.
    pub fn join(&self, other: &Atom<V>) -> Atom<V> {
        assert_eq!(self.vars, other.vars, "join over different variables");
        let (a, b) = match (&self.body, &other.body) {
            (None, _) => return other.clone(),
            (_, None) => return self.clone(),
            (Some(a), Some(b)) => (a, b),
        };
        let n = self.vars.len();
        let labels: Vec<LabelSet> = (0..n).map(|i| a.labels[i].union(&b.labels[i])).collect();
        let mut cons = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if a.rep[i] == a.rep[j] && b.rep[i] == b.rep[j] {
                    cons.push(Constraint::Eq(i, j));
                } else if self.are_distinct_at(i, j) && other.are_distinct_at(i, j) {
                    cons.push(Constraint::Neq(i, j));
                }
            }
        }
        Atom::normalize(self.vars.clone(), labels, &cons)
    }

    /// Inclusion of concretizations, decided on normal forms.
    pub fn leq(&self, other: &Atom<V>) -> bool {
        let (a, b) = match (&self.body, &other.body) {
            (None, _) => return true,
            (_, None) => return false,
            (Some(a), Some(b)) => (a, b),
        };
        let n = self.vars.len();
        (0..n).all(|i| a.labels[i].is_subset(&b.labels[i]))
            && (0..n).all(|i| a.rep[i] == a.rep[b.rep[i] as usize])
            && b.neq.iter().all(|&(x, y)| self.are_distinct_at(x as usize, y as usize))
    }
}

impl<V: Clone + PartialEq + fmt::Debug> Atom<V> {
    /// Tagged union of two elements: no relation between the two sides.
    pub fn pair<R: Copy + PartialEq + fmt::Debug>(left: &Atom<V>, left_tag: R, right: &Atom<V>, right_tag: R) -> Atom<(V, R)> {
        let vars: Vec<(V, R)> = left
            .vars
            .iter()
            .map(|v| (v.clone(), left_tag))
            .chain(right.vars.iter().map(|v| (v.clone(), right_tag)))
            .collect();
        let (a, b) = match (&left.body, &right.body) {
            (Some(a), Some(b)) => (a, b),
            _ => return Atom { vars, body: None },
        };
        let shift = left.vars.len();
        let labels = a.labels.iter().chain(&b.labels).cloned().collect();
        let mut cons = left.constraints();
        cons.extend(right.constraints().into_iter().map(|c| match c {
            Constraint::Eq(i, j) => Constraint::Eq(i + shift, j + shift),
            Constraint::Neq(i, j) => Constraint::Neq(i + shift, j + shift),
            Constraint::Lbl(i, l) => Constraint::Lbl(i + shift, l),
        }));
        Atom::normalize(vars, labels, &cons)
    }
}

impl<V: Clone + PartialEq + fmt::Debug, R: Copy + PartialEq + fmt::Debug> Atom<(V, R)> {
    /// The side of a pair carrying `tag`.
    pub fn project(&self, tag: R) -> Atom<V> {
        let keep: Vec<(V, R)> = self.vars.iter().filter(|(_, r)| *r == tag).cloned().collect();
        let g = self.gc(&keep);
        Atom { vars: keep.into_iter().map(|(v, _)| v).collect(), body: g.body }
    }
}
