//! Widened fixpoint iteration over an abstraction of the extended
//! transition system, and the coalesced product of two abstractions.

use serde::Serialize;

use crate::contents::{CUMap, ContentsAnalysis};
use crate::env::{AtomEnv, EnvAnalysis, EnvMap, PairMolecule};
use crate::index::{LabelId, SystemIndex};
use crate::numeric::NumElem;
use crate::partition::{abstract_step_labels, for_each_context, AbstractUnit, ContextHint, GetVar, PartitionCase, Roster};

/// An abstraction of the extended transition system. POST is split in
/// two: `prepare` does the per-pair work shared by all cases and may rule
/// the pair out, `post` handles one case and returns the contributions to
/// join into the next iterate (`None` for bottom).
pub trait Abstraction {
    type Elem: Clone + PartialEq;
    type PairCtx;
    type Update;

    fn bottom(&self) -> Self::Elem;
    fn init(&self) -> Self::Elem;
    fn join(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn widen(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn is_bottom(&self, a: &Self::Elem) -> bool;

    fn prepare(&self, c: &Self::Elem, roster: &Roster) -> Option<Self::PairCtx>;
    /// Cases that can be skipped because `post` would return `None`.
    fn hint(&self, ctx: &Self::PairCtx, roster: &Roster) -> ContextHint;
    fn post(&self, c: &Self::Elem, ctx: &Self::PairCtx, roster: &Roster, case: &PartitionCase) -> Option<Self::Update>;
    fn apply(&self, acc: &mut Self::Elem, update: Self::Update);
}

impl Abstraction for EnvAnalysis<'_> {
    type Elem = EnvMap;
    type PairCtx = PairMolecule;
    type Update = Vec<(LabelId, AtomEnv)>;

    fn bottom(&self) -> EnvMap {
        EnvMap::bottom(self.system())
    }

    fn init(&self) -> EnvMap {
        EnvAnalysis::init(self)
    }

    fn join(&self, a: &EnvMap, b: &EnvMap) -> EnvMap {
        a.join(b)
    }

    // label sets and constraint sets are finite, so the join already stabilizes
    fn widen(&self, a: &EnvMap, b: &EnvMap) -> EnvMap {
        a.join(b)
    }

    fn is_bottom(&self, a: &EnvMap) -> bool {
        a.is_bottom()
    }

    fn prepare(&self, c: &EnvMap, roster: &Roster) -> Option<PairMolecule> {
        self.molecule(c, roster.receiver, roster.sender)
    }

    fn hint(&self, ctx: &PairMolecule, _roster: &Roster) -> ContextHint {
        EnvAnalysis::hint(self, ctx)
    }

    fn post(&self, _c: &EnvMap, ctx: &PairMolecule, _roster: &Roster, case: &PartitionCase) -> Option<Self::Update> {
        self.post_case(ctx, case)
    }

    fn apply(&self, acc: &mut EnvMap, update: Self::Update) {
        for (l, a) in update {
            acc.join_in(l, &a);
        }
    }
}

impl Abstraction for ContentsAnalysis<'_> {
    type Elem = CUMap;
    type PairCtx = ();
    type Update = Vec<(AbstractUnit, NumElem)>;

    fn bottom(&self) -> CUMap {
        CUMap::bottom()
    }

    fn init(&self) -> CUMap {
        ContentsAnalysis::init(self)
    }

    fn join(&self, a: &CUMap, b: &CUMap) -> CUMap {
        a.join(b)
    }

    fn widen(&self, a: &CUMap, b: &CUMap) -> CUMap {
        a.widen(b)
    }

    fn is_bottom(&self, a: &CUMap) -> bool {
        a.is_bottom()
    }

    fn prepare(&self, c: &CUMap, _roster: &Roster) -> Option<()> {
        (!c.is_bottom()).then_some(())
    }

    fn hint(&self, _ctx: &(), roster: &Roster) -> ContextHint {
        ContextHint::top(self.system(), self.getvar(), roster)
    }

    fn post(&self, c: &CUMap, _ctx: &(), roster: &Roster, case: &PartitionCase) -> Option<Self::Update> {
        self.post_case(c, roster, case)
    }

    fn apply(&self, acc: &mut CUMap, update: Self::Update) {
        for (a, e) in update {
            acc.join_in(&a, &e);
        }
    }
}

/// Pairs of elements where a case is dropped as soon as either side
/// refutes it.
pub struct Coalesced<A, B>(pub A, pub B);

impl<A: Abstraction, B: Abstraction> Abstraction for Coalesced<A, B> {
    type Elem = (A::Elem, B::Elem);
    type PairCtx = (A::PairCtx, B::PairCtx);
    type Update = (A::Update, B::Update);

    fn bottom(&self) -> Self::Elem {
        (self.0.bottom(), self.1.bottom())
    }

    fn init(&self) -> Self::Elem {
        (self.0.init(), self.1.init())
    }

    fn join(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        (self.0.join(&a.0, &b.0), self.1.join(&a.1, &b.1))
    }

    fn widen(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        (self.0.widen(&a.0, &b.0), self.1.widen(&a.1, &b.1))
    }

    fn is_bottom(&self, a: &Self::Elem) -> bool {
        self.0.is_bottom(&a.0) || self.1.is_bottom(&a.1)
    }

    fn prepare(&self, c: &Self::Elem, roster: &Roster) -> Option<Self::PairCtx> {
        Some((self.0.prepare(&c.0, roster)?, self.1.prepare(&c.1, roster)?))
    }

    fn hint(&self, ctx: &Self::PairCtx, roster: &Roster) -> ContextHint {
        merge_hints(self.0.hint(&ctx.0, roster), self.1.hint(&ctx.1, roster))
    }

    fn post(&self, c: &Self::Elem, ctx: &Self::PairCtx, roster: &Roster, case: &PartitionCase) -> Option<Self::Update> {
        let a = self.0.post(&c.0, &ctx.0, roster, case)?;
        let b = self.1.post(&c.1, &ctx.1, roster, case)?;
        Some((a, b))
    }

    fn apply(&self, acc: &mut Self::Elem, update: Self::Update) {
        self.0.apply(&mut acc.0, update.0);
        self.1.apply(&mut acc.1, update.1);
    }
}

/// Both hints' exclusions.
pub fn merge_hints(a: ContextHint, b: ContextHint) -> ContextHint {
    let candidates = match (a.candidates, b.candidates) {
        (None, x) | (x, None) => x,
        (Some(x), Some(y)) => Some(
            x.into_iter()
                .zip(y)
                .map(|(xs, ys)| xs.into_iter().zip(ys).map(|(p, q)| p.intersection(&q).copied().collect()).collect())
                .collect(),
        ),
    };
    let mut must_join = a.must_join;
    must_join.extend(b.must_join);
    let mut must_separate = a.must_separate;
    must_separate.extend(b.must_separate);
    ContextHint { candidates, must_join, must_separate }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct IterationStats {
    pub iteration: usize,
    /// Step pairs ruled out before any case is considered.
    pub pairs_refuted: usize,
    pub cases_live: usize,
    pub cases_refuted: usize,
}

#[derive(Clone, Debug)]
pub struct FixpointResult<E> {
    pub element: E,
    pub iterations: usize,
    pub stabilized: bool,
    pub trace: Vec<IterationStats>,
}

/// `I ⊔ c ⊔` every case's contribution, for every step pair.
pub fn transfer<A: Abstraction>(a: &A, sys: &SystemIndex, gv: &GetVar, c: &A::Elem) -> (A::Elem, IterationStats) {
    let mut stats = IterationStats::default();
    let mut next = a.join(&a.init(), c);
    if a.is_bottom(c) {
        return (next, stats);
    }
    for (r, s) in abstract_step_labels(sys) {
        let roster = Roster::new(sys, r, s);
        let Some(ctx) = a.prepare(c, &roster) else {
            stats.pairs_refuted += 1;
            continue;
        };
        let hint = a.hint(&ctx, &roster);
        for_each_context(&roster, gv, &hint, |case| match a.post(c, &ctx, &roster, &case) {
            Some(u) => {
                stats.cases_live += 1;
                a.apply(&mut next, u);
            }
            None => stats.cases_refuted += 1,
        });
    }
    (next, stats)
}

/// Iterates `c ↦ c ∇ F(c)` from bottom until an iterate repeats.
pub fn iterate<A: Abstraction>(a: &A, sys: &SystemIndex, gv: &GetVar, max_iter: usize) -> FixpointResult<A::Elem> {
    let mut c = a.bottom();
    let mut trace = Vec::new();
    for n in 1..=max_iter {
        let (f, mut stats) = transfer(a, sys, gv, &c);
        stats.iteration = n;
        trace.push(stats);
        let next = a.widen(&c, &f);
        if next == c {
            return FixpointResult { element: c, iterations: n, stabilized: true, trace };
        }
        c = next;
    }
    FixpointResult { element: c, iterations: max_iter, stabilized: false, trace }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_system_stabilizes_at_init() {
        let sys = SystemIndex::from_source("0").unwrap();
        let gv = GetVar::channel(&sys);
        let p = Coalesced(EnvAnalysis::new(&sys, &gv), ContentsAnalysis::new(&sys, &gv, true));
        let r = iterate(&p, &sys, &gv, 10);
        assert!(r.stabilized);
        assert_eq!(r.iterations, 2);
        assert!(r.element == p.init());
    }

    #[test]
    fn fixpoint_is_stationary() {
        let sys = SystemIndex::from_source("new a in (*a?1[x].a!2[x] | a!3[a])").unwrap();
        let gv = GetVar::channel(&sys);
        let p = Coalesced(EnvAnalysis::new(&sys, &gv), ContentsAnalysis::new(&sys, &gv, true));
        let r = iterate(&p, &sys, &gv, 50);
        assert!(r.stabilized);
        let (f, _) = transfer(&p, &sys, &gv, &r.element);
        assert!(p.widen(&r.element, &f) == r.element);
    }
}
