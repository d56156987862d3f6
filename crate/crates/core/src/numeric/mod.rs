//! Counting domain: reduced product of natural intervals and affine
//! equalities over a fixed set of count variables.

pub mod affine;

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::index::{LabelId, SystemIndex};
use crate::partition::abstract_step_labels;
pub use affine::{Affine, Row, Sparse, Q};
use affine::{ceil_i64, coeff, floor_i64, q, sub_scaled};

/// Which quantity a count variable tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CountVar {
    /// Threads at a label.
    Occupancy(LabelId),
    /// Steps of a receiver/sender pair that affected the unit.
    StepCount(LabelId, LabelId),
    /// Whether such a step happened at least once.
    StepFlag(LabelId, LabelId),
    /// Steps in which the unit was new; at most one for any unit.
    Created,
}

/// The index set of count variables for one system: every occupancy
/// variable, then step counts, then step flags for the syntactically
/// possible pairs, then optionally the creation counter.
#[derive(Clone, Debug)]
pub struct CountSpace {
    labels: usize,
    pairs: Vec<(LabelId, LabelId)>,
    created: Option<usize>,
    names: Vec<String>,
}

impl CountSpace {
    pub fn new(sys: &SystemIndex, with_created: bool) -> CountSpace {
        let pairs = abstract_step_labels(sys);
        let labels = sys.label_count();
        let mut names: Vec<String> = sys.label_ids().map(|l| format!("x{}", sys.label(l))).collect();
        for (r, s) in &pairs {
            names.push(format!("y({},{})", sys.label(*r), sys.label(*s)));
        }
        for (r, s) in &pairs {
            names.push(format!("z({},{})", sys.label(*r), sys.label(*s)));
        }
        let created = with_created.then(|| {
            names.push("created".into());
            names.len() - 1
        });
        CountSpace { labels, pairs, created, names }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn created(&self) -> Option<usize> {
        self.created
    }

    pub fn pairs(&self) -> &[(LabelId, LabelId)] {
        &self.pairs
    }

    pub fn x(&self, l: LabelId) -> usize {
        l.index()
    }

    pub fn pair_index(&self, r: LabelId, s: LabelId) -> Option<usize> {
        self.pairs.iter().position(|&p| p == (r, s))
    }

    pub fn y(&self, pair: usize) -> usize {
        self.labels + pair
    }

    pub fn z(&self, pair: usize) -> usize {
        self.labels + self.pairs.len() + pair
    }

    pub fn index(&self, v: CountVar) -> Option<usize> {
        match v {
            CountVar::Occupancy(l) => (l.index() < self.labels).then_some(l.index()),
            CountVar::StepCount(r, s) => self.pair_index(r, s).map(|k| self.y(k)),
            CountVar::StepFlag(r, s) => self.pair_index(r, s).map(|k| self.z(k)),
            CountVar::Created => self.created,
        }
    }

    pub fn var(&self, j: usize) -> CountVar {
        if j < self.labels {
            CountVar::Occupancy(LabelId(j as u32))
        } else if j < self.labels + self.pairs.len() {
            let (r, s) = self.pairs[j - self.labels];
            CountVar::StepCount(r, s)
        } else if Some(j) == self.created {
            CountVar::Created
        } else {
            let (r, s) = self.pairs[j - self.labels - self.pairs.len()];
            CountVar::StepFlag(r, s)
        }
    }

    pub fn name(&self, j: usize) -> &str {
        &self.names[j]
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// A natural interval `[lo, hi]`, `hi = None` meaning unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Itv {
    pub lo: i64,
    pub hi: Option<i64>,
}

impl Itv {
    pub const TOP: Itv = Itv { lo: 0, hi: None };

    pub fn point(v: i64) -> Itv {
        Itv { lo: v, hi: Some(v) }
    }

    pub fn contains(&self, v: i64) -> bool {
        self.lo <= v && self.hi.is_none_or(|h| v <= h)
    }

    pub fn hull(&self, o: &Itv) -> Itv {
        Itv { lo: self.lo.min(o.lo), hi: self.hi.zip(o.hi).map(|(a, b)| a.max(b)) }
    }

    pub fn is_subset(&self, o: &Itv) -> bool {
        self.lo >= o.lo
            && match (self.hi, o.hi) {
                (_, None) => true,
                (None, Some(_)) => false,
                (Some(a), Some(b)) => a <= b,
            }
    }

    /// Threshold widening over {0, 1}.
    pub fn widen(&self, o: &Itv) -> Itv {
        let lo = if o.lo < self.lo { if o.lo >= 1 { 1 } else { 0 } } else { self.lo };
        let hi = match (self.hi, o.hi) {
            (Some(a), Some(b)) if b <= a => Some(a),
            (Some(_), Some(b)) if b <= 1 => Some(1),
            _ => None,
        };
        Itv { lo, hi }
    }

    fn fixed(&self) -> Option<i64> {
        (self.hi == Some(self.lo)).then_some(self.lo)
    }
}

impl fmt::Display for Itv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(h) => write!(f, "[{}, {}]", self.lo, h),
            None => write!(f, "[{}, +oo)", self.lo),
        }
    }
}

/// A linear expression `terms . x + constant`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinExpr {
    pub terms: Sparse,
    pub constant: Q,
}

impl LinExpr {
    pub fn new(terms: impl IntoIterator<Item = (usize, i64)>) -> LinExpr {
        let mut acc: std::collections::BTreeMap<usize, Q> = Default::default();
        for (j, c) in terms {
            *acc.entry(j).or_insert_with(Q::zero) += q(c);
        }
        LinExpr { terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(), constant: Q::zero() }
    }

    /// `self - c * (row.terms - row.rhs)`: equal to `self` on the row's space.
    fn rewrite(&self, c: &Q, row: &Row) -> LinExpr {
        LinExpr { terms: sub_scaled(&self.terms, c, &row.terms), constant: &self.constant + c * &row.rhs }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NumVal {
    itv: Vec<Itv>,
    aff: Affine,
}

impl NumVal {
    pub fn intervals(&self) -> &[Itv] {
        &self.itv
    }

    pub fn affine(&self) -> &Affine {
        &self.aff
    }

    pub fn dim(&self) -> usize {
        self.itv.len()
    }

    /// Membership of an integer vector in the concretization.
    pub fn contains(&self, point: &[i64]) -> bool {
        point.len() == self.itv.len()
            && self.itv.iter().zip(point).all(|(i, &v)| i.contains(v))
            && {
                let p: Vec<Q> = point.iter().map(|&v| q(v)).collect();
                self.aff.rows().iter().all(|r| r.satisfied_by(&p))
            }
    }

    fn bounds(&self, e: &LinExpr) -> (Option<Q>, Option<Q>) {
        let mut lo = Some(e.constant.clone());
        let mut hi = Some(e.constant.clone());
        for (j, c) in &e.terms {
            let itv = self.itv[*j];
            let (l, h) = (Some(q(itv.lo)), itv.hi.map(q));
            let (cl, ch) = if c.is_positive() { (l, h) } else { (h, l) };
            lo = lo.zip(cl).map(|(a, b)| a + c * b);
            hi = hi.zip(ch).map(|(a, b)| a + c * b);
        }
        (lo, hi)
    }

    /// An upper bound of `e` over the concretization, found by rewriting
    /// `e` through the equalities until interval evaluation stops improving.
    pub fn upper_bound(&self, e: &LinExpr) -> Option<Q> {
        let better = |a: &Option<Q>, b: &Option<Q>| match (a, b) {
            (Some(x), Some(y)) => x < y,
            (Some(_), None) => true,
            _ => false,
        };
        let reduced = {
            let mut r = e.clone();
            for row in self.aff.rows() {
                if let Some(c) = coeff(&r.terms, row.pivot()).cloned() {
                    r = r.rewrite(&c, row);
                }
            }
            r
        };
        let (mut best, mut best_hi) = (e.clone(), self.bounds(e).1);
        let red_hi = self.bounds(&reduced).1;
        if better(&red_hi, &best_hi) {
            best = reduced;
            best_hi = red_hi;
        }
        for _ in 0..=self.aff.rank() {
            let mut improved = None;
            for row in self.aff.rows() {
                for (j, cr) in &row.terms {
                    let Some(ce) = coeff(&best.terms, *j) else { continue };
                    let cand = best.rewrite(&(ce / cr), row);
                    let h = self.bounds(&cand).1;
                    let cur = improved.as_ref().map(|(_, h)| h).unwrap_or(&best_hi);
                    if better(&h, cur) {
                        improved = Some((cand, h));
                    }
                }
            }
            match improved {
                Some((e, h)) => {
                    best = e;
                    best_hi = h;
                }
                None => break,
            }
        }
        best_hi
    }

    pub fn lower_bound(&self, e: &LinExpr) -> Option<Q> {
        let neg = LinExpr {
            terms: e.terms.iter().map(|(j, c)| (*j, -c.clone())).collect(),
            constant: -e.constant.clone(),
        };
        self.upper_bound(&neg).map(|v| -v)
    }

    /// Whether `e = 0` holds on the affine component.
    pub fn entails_zero(&self, e: &LinExpr) -> bool {
        let row = Row::new(e.terms.clone(), -e.constant.clone());
        self.aff.implies(&row)
    }

    /// Tightens intervals from the equalities and promotes fixed variables
    /// to equalities; `None` on contradiction.
    fn reduce(mut self) -> Option<NumVal> {
        const ROUNDS: usize = 3;
        for _ in 0..ROUNDS {
            let mut changed = false;
            for row in self.aff.rows() {
                changed |= propagate_row(&mut self.itv, row)?;
            }
            for j in 0..self.itv.len() {
                let Some(v) = self.itv[j].fixed() else { continue };
                let eq = Row::new(vec![(j, Q::one())], q(v));
                if !self.aff.implies(&eq) {
                    if !self.aff.add_row(eq) {
                        return None;
                    }
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        Some(self)
    }
}

/// Bound propagation through `row`; `None` when some interval empties.
fn propagate_row(itv: &mut [Itv], row: &Row) -> Option<bool> {
    let lo_of = |itv: &[Itv], j: usize, c: &Q| -> Option<Q> {
        let i = itv[j];
        if c.is_positive() { Some(c * q(i.lo)) } else { i.hi.map(|h| c * q(h)) }
    };
    let hi_of = |itv: &[Itv], j: usize, c: &Q| -> Option<Q> {
        let i = itv[j];
        if c.is_positive() { i.hi.map(|h| c * q(h)) } else { Some(c * q(i.lo)) }
    };
    let mut changed = false;
    for (k, (jk, ck)) in row.terms.iter().enumerate() {
        let mut rest_lo = Some(Q::zero());
        let mut rest_hi = Some(Q::zero());
        for (m, (jm, cm)) in row.terms.iter().enumerate() {
            if m != k {
                rest_lo = rest_lo.zip(lo_of(itv, *jm, cm)).map(|(a, b)| a + b);
                rest_hi = rest_hi.zip(hi_of(itv, *jm, cm)).map(|(a, b)| a + b);
            }
        }
        // ck * x = rhs - rest
        let a = rest_hi.map(|h| (&row.rhs - h) / ck);
        let b = rest_lo.map(|l| (&row.rhs - l) / ck);
        let (lo, hi) = if ck.is_positive() { (a, b) } else { (b, a) };
        let cur = &mut itv[*jk];
        if let Some(l) = lo.as_ref().and_then(ceil_i64) {
            if l > cur.lo {
                cur.lo = l;
                changed = true;
            }
        }
        if let Some(h) = hi.as_ref().and_then(floor_i64) {
            if cur.hi.is_none_or(|c| h < c) {
                cur.hi = Some(h);
                changed = true;
            }
        }
        if cur.hi.is_some_and(|h| h < cur.lo) {
            return None;
        }
    }
    Some(changed)
}

/// An element of the counting domain.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NumElem {
    Bottom,
    Val(NumVal),
}

impl NumElem {
    /// The abstraction of the characteristic vector of `set`.
    pub fn chi(dim: usize, set: &[usize]) -> NumElem {
        let mut p = vec![0i64; dim];
        for &j in set {
            p[j] = 1;
        }
        NumElem::point(&p)
    }

    pub fn point(p: &[i64]) -> NumElem {
        let qs: Vec<Q> = p.iter().map(|&v| q(v)).collect();
        NumElem::Val(NumVal { itv: p.iter().map(|&v| Itv::point(v)).collect(), aff: Affine::point(&qs) })
    }

    /// Every natural vector.
    pub fn top(dim: usize) -> NumElem {
        NumElem::Val(NumVal { itv: vec![Itv::TOP; dim], aff: Affine::top() })
    }

    /// Builds and reduces an element from raw components.
    pub fn from_parts(itv: Vec<Itv>, rows: impl IntoIterator<Item = Row>) -> NumElem {
        match Affine::from_rows(rows) {
            Some(aff) => NumElem::reduced(NumVal { itv, aff }),
            None => NumElem::Bottom,
        }
    }

    fn reduced(v: NumVal) -> NumElem {
        if v.itv.iter().any(|i| i.hi.is_some_and(|h| h < i.lo)) {
            return NumElem::Bottom;
        }
        v.reduce().map_or(NumElem::Bottom, NumElem::Val)
    }

    pub fn is_bottom(&self) -> bool {
        matches!(self, NumElem::Bottom)
    }

    pub fn val(&self) -> Option<&NumVal> {
        match self {
            NumElem::Bottom => None,
            NumElem::Val(v) => Some(v),
        }
    }

    pub fn contains(&self, point: &[i64]) -> bool {
        self.val().is_some_and(|v| v.contains(point))
    }

    pub fn join(&self, other: &NumElem) -> NumElem {
        match (self, other) {
            (NumElem::Bottom, x) | (x, NumElem::Bottom) => x.clone(),
            (NumElem::Val(a), NumElem::Val(b)) => {
                if a == b {
                    return self.clone();
                }
                let itv = a.itv.iter().zip(&b.itv).map(|(x, y)| x.hull(y)).collect();
                let aff = a.aff.join(&b.aff, a.dim());
                NumElem::reduced(NumVal { itv, aff })
            }
        }
    }

    pub fn join_all<'a>(elems: impl IntoIterator<Item = &'a NumElem>) -> NumElem {
        elems.into_iter().fold(NumElem::Bottom, |acc, e| acc.join(e))
    }

    /// Upper bound of both arguments whose repeated application stabilizes.
    /// The result is deliberately not reduced.
    pub fn widen(&self, other: &NumElem) -> NumElem {
        match (self, other) {
            (NumElem::Bottom, x) | (x, NumElem::Bottom) => x.clone(),
            (NumElem::Val(a), NumElem::Val(b)) => {
                if a == b {
                    return self.clone();
                }
                let itv = a.itv.iter().zip(&b.itv).map(|(x, y)| x.widen(y)).collect();
                let aff = a.aff.join(&b.aff, a.dim());
                NumElem::Val(NumVal { itv, aff })
            }
        }
    }

    /// Component-wise inclusion (sound, not complete, for the product).
    pub fn leq(&self, other: &NumElem) -> bool {
        match (self, other) {
            (NumElem::Bottom, _) => true,
            (_, NumElem::Bottom) => false,
            (NumElem::Val(a), NumElem::Val(b)) => {
                a.itv.iter().zip(&b.itv).all(|(x, y)| x.is_subset(y)) && a.aff.leq(&b.aff)
            }
        }
    }

    /// Meets with `v >= k` for every `(v, k)`, then reduces.
    pub fn sync_nonzero(&self, reqs: &[(usize, i64)]) -> NumElem {
        let NumElem::Val(a) = self else { return NumElem::Bottom };
        if reqs.iter().all(|&(j, k)| a.itv[j].lo >= k) {
            return self.clone();
        }
        let mut v = a.clone();
        for &(j, k) in reqs {
            v.itv[j].lo = v.itv[j].lo.max(k);
        }
        NumElem::reduced(v)
    }

    /// Adds the characteristic vector of `set`.
    pub fn add_chi(&self, set: &[usize]) -> NumElem {
        let NumElem::Val(a) = self else { return NumElem::Bottom };
        let mut v = a.clone();
        for &j in set {
            let i = &mut v.itv[j];
            i.lo += 1;
            i.hi = i.hi.map(|h| h + 1);
            v.aff.translate(j, &Q::one());
        }
        NumElem::Val(v)
    }

    /// Subtracts the characteristic vector of `set`, keeping naturals only.
    pub fn sub_chi(&self, set: &[usize]) -> NumElem {
        let NumElem::Val(a) = self else { return NumElem::Bottom };
        let mut v = a.clone();
        let mut clipped = false;
        for &j in set {
            let i = &mut v.itv[j];
            match i.hi {
                Some(0) => return NumElem::Bottom,
                h => i.hi = h.map(|h| h - 1),
            }
            if i.lo == 0 {
                clipped = true;
            } else {
                i.lo -= 1;
            }
            v.aff.translate(j, &-Q::one());
        }
        if clipped { NumElem::reduced(v) } else { NumElem::Val(v) }
    }

    /// Records one more step: the counter goes up by one, the flag is set.
    pub fn update_trans(&self, y: usize, z: usize) -> NumElem {
        let NumElem::Val(a) = self else { return NumElem::Bottom };
        let mut v = a.clone();
        let i = &mut v.itv[y];
        i.lo += 1;
        i.hi = i.hi.map(|h| h + 1);
        v.aff.translate(y, &Q::one());
        v.aff.forget(z);
        v.itv[z] = Itv::point(1);
        v.aff.add_row(Row::new(vec![(z, Q::one())], Q::one()));
        NumElem::reduced(v)
    }

    /// Whether `e <= bound` holds everywhere in the concretization.
    pub fn entails_le(&self, e: &LinExpr, bound: i64) -> bool {
        match self {
            NumElem::Bottom => true,
            NumElem::Val(v) => v.upper_bound(e).is_some_and(|h| h <= q(bound)),
        }
    }

    /// Whether `e = 0` holds everywhere in the concretization.
    pub fn entails_zero(&self, e: &LinExpr) -> bool {
        match self {
            NumElem::Bottom => true,
            NumElem::Val(v) => v.entails_zero(e),
        }
    }

    /// Human-readable constraints: equalities, then non-trivial intervals
    /// of variables that are not pinned to a constant.
    pub fn render(&self, space: &CountSpace) -> Vec<String> {
        let NumElem::Val(v) = self else { return vec!["bottom".into()] };
        let mut out = Vec::new();
        let mut zeros = Vec::new();
        for r in v.aff.rows() {
            if r.terms.len() == 1 && r.rhs.is_zero() {
                zeros.push(space.name(r.pivot()));
            } else {
                out.push(render_row(r, space));
            }
        }
        for (j, i) in v.itv.iter().enumerate() {
            if i.fixed().is_some() || *i == Itv::TOP {
                continue;
            }
            out.push(match i.hi {
                Some(h) => format!("{} <= {} <= {}", i.lo, space.name(j), h),
                None => format!("{} >= {}", space.name(j), i.lo),
            });
        }
        if !zeros.is_empty() {
            out.push(format!("zero: {}", zeros.join(" ")));
        }
        out
    }

    pub fn to_json(&self, space: &CountSpace) -> Value {
        let NumElem::Val(v) = self else { return Value::Null };
        let intervals: Vec<Value> = v
            .itv
            .iter()
            .enumerate()
            .filter(|(_, i)| **i != Itv::TOP)
            .map(|(j, i)| json!({ "var": space.name(j), "lo": i.lo, "hi": i.hi }))
            .collect();
        let equalities: Vec<Value> = v.aff.rows().iter().map(|r| Value::String(render_row(r, space))).collect();
        json!({ "intervals": intervals, "equalities": equalities })
    }
}

fn render_term(c: &Q, name: &str) -> String {
    if c.is_one() { name.to_string() } else { format!("{c}*{name}") }
}

/// Positive terms on the left, negative ones on the right.
pub fn render_row(r: &Row, space: &CountSpace) -> String {
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for (j, c) in &r.terms {
        if c.is_positive() {
            lhs.push(render_term(c, space.name(*j)));
        } else {
            rhs.push(render_term(&-c.clone(), space.name(*j)));
        }
    }
    if !r.rhs.is_zero() || rhs.is_empty() {
        if r.rhs.is_negative() && !rhs.is_empty() {
            lhs.push((-r.rhs.clone()).to_string());
        } else {
            rhs.push(r.rhs.to_string());
        }
    }
    if lhs.is_empty() {
        lhs.push("0".into());
    }
    format!("{} = {}", lhs.join(" + "), rhs.join(" + "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(terms: &[(usize, i64)], rhs: i64) -> Row {
        Row::new(terms.iter().map(|&(j, c)| (j, q(c))).collect(), q(rhs))
    }

    fn itv(lo: i64, hi: Option<i64>) -> Itv {
        Itv { lo, hi }
    }

    #[test]
    fn join_with_empty_keeps_correlation() {
        let a = NumElem::chi(3, &[0, 1]).join(&NumElem::chi(3, &[]));
        let v = a.val().unwrap();
        assert_eq!(v.itv[0], itv(0, Some(1)));
        assert_eq!(v.itv[2], Itv::point(0));
        assert!(a.entails_zero(&LinExpr::new([(0, 1), (1, -1)])));
    }

    #[test]
    fn widening_uses_thresholds() {
        let a = NumElem::from_parts(vec![itv(0, Some(1))], []);
        let b = NumElem::from_parts(vec![itv(0, Some(2))], []);
        assert_eq!(a.widen(&b).val().unwrap().itv[0], itv(0, None));
        let c = NumElem::from_parts(vec![itv(0, Some(0))], []);
        assert_eq!(c.widen(&a).val().unwrap().itv[0], itv(0, Some(1)));
    }

    #[test]
    fn sync_nonzero_propagates() {
        // x2 x5 x6 x10 y
        let a = NumElem::from_parts(
            vec![Itv::TOP, Itv::TOP, Itv::TOP, Itv::TOP, itv(0, Some(1))],
            [row(&[(0, 1), (2, 1), (3, 1), (4, -1)], 0)],
        );
        let s = a.sync_nonzero(&[(1, 1), (3, 1)]);
        let v = s.val().unwrap();
        assert_eq!(v.itv[0], Itv::point(0));
        assert_eq!(v.itv[2], Itv::point(0));
        assert_eq!(v.itv[3], Itv::point(1));
        assert_eq!(v.itv[4], Itv::point(1));
        assert_eq!(v.itv[1], itv(1, None));
        assert!(NumElem::chi(2, &[]).sync_nonzero(&[(0, 1)]).is_bottom());
    }

    #[test]
    fn sub_and_add_chi() {
        assert!(NumElem::chi(2, &[]).sub_chi(&[0]).is_bottom());
        let a = NumElem::chi(2, &[0]).sub_chi(&[0]).add_chi(&[1]);
        assert_eq!(a, NumElem::chi(2, &[1]));
    }

    #[test]
    fn update_trans_twice() {
        let a = NumElem::chi(2, &[]).update_trans(0, 1).update_trans(0, 1);
        assert!(a.contains(&[2, 1]));
        assert!(!a.contains(&[1, 1]));
    }

    #[test]
    fn entailment_uses_equalities() {
        let a = NumElem::from_parts(vec![itv(0, Some(2)); 2], [row(&[(0, 1), (1, 1)], 2)]);
        assert!(a.entails_le(&LinExpr::new([(0, 1), (1, 1)]), 2));
        let b = NumElem::from_parts(
            vec![Itv::TOP, Itv::TOP, Itv::TOP, itv(0, Some(1))],
            [row(&[(0, 1), (1, 1), (2, 1), (3, -1)], 0)],
        );
        assert!(b.entails_le(&LinExpr::new([(0, 1), (1, 1), (2, 1)]), 1));
        assert!(!NumElem::top(1).entails_le(&LinExpr::new([(0, 1)]), 0));
    }
}
