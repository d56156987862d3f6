mod common;

use pithreads::env::{Atom, Constraint, LabelSet};
use pithreads::VarId;
use proptest::prelude::*;

fn ls(ids: &[u32]) -> LabelSet {
    ids.iter().map(|&i| VarId(i)).collect()
}

#[test]
fn normalize_over_toy_universes() {
    // label sets per variable times subsets of the possible constraints
    let expected = [4 << 2, 16 << 6, 64 << 12];
    for n in 1..=3 {
        assert_eq!(common::check_normalize_universe(n).unwrap(), expected[n - 1]);
    }
}

#[test]
fn equality_across_disjoint_labels_is_bottom() {
    let a = Atom::normalize(vec!["x", "y"], vec![ls(&[0]), ls(&[1])], &[Constraint::Eq(0, 1)]);
    assert!(a.is_bottom());
}

#[test]
fn equality_narrows_labels() {
    let a = Atom::normalize(vec!["x", "y"], vec![ls(&[0, 1]), ls(&[0])], &[Constraint::Eq(0, 1)]);
    assert_eq!(a.labels(&"x"), Some(&ls(&[0])));
    assert!(a.are_equal(&"x", &"y"));
}

#[test]
fn declare_marks_new_names_distinct() {
    let alloc = VarId(0);
    let null = VarId(1);
    let a = Atom::<&str>::empty().declare("alloc", alloc).declare("null", null);
    assert_eq!(a.labels(&"alloc"), Some(&ls(&[0])));
    assert!(a.are_distinct(&"alloc", &"null"));
    let b = Atom::normalize(vec!["y"], vec![ls(&[0])], &[]).declare("x", alloc);
    assert_eq!(b.labels(&"x"), Some(&ls(&[0])));
    assert!(b.are_distinct(&"x", &"y"));
    assert!(Atom::<&str>::bottom(vec![]).declare("x", alloc).is_bottom());
}

fn atom() -> impl Strategy<Value = Atom<usize>> {
    (1usize..=4).prop_flat_map(|n| {
        (
            prop::collection::vec(1u8..8, n),
            prop::collection::vec((0..n, 0..n, any::<bool>()), 0..4),
        )
            .prop_map(move |(masks, cons)| {
                let labels = masks.iter().map(|&m| (0..3).filter(|b| m & (1 << b) != 0).map(VarId).collect()).collect();
                let cons: Vec<Constraint> = cons
                    .into_iter()
                    .filter(|(i, j, _)| i != j)
                    .map(|(i, j, eq)| if eq { Constraint::Eq(i, j) } else { Constraint::Neq(i, j) })
                    .collect();
                Atom::normalize((0..n).collect(), labels, &cons)
            })
    })
}

proptest! {
    #[test]
    fn extend_then_gc_is_identity(a in atom()) {
        let x = a.vars().len();
        let keep: Vec<usize> = a.vars().to_vec();
        prop_assert_eq!(a.extend(x, &ls(&[0, 1, 2])).gc(&keep), a);
    }

    #[test]
    fn join_is_an_upper_bound(a in atom(), b in atom()) {
        prop_assume!(a.vars() == b.vars());
        let j = a.join(&b);
        prop_assert!(a.leq(&j) && b.leq(&j));
        prop_assert_eq!(j, b.join(&a));
    }

    #[test]
    fn join_is_idempotent(a in atom()) {
        prop_assert_eq!(a.join(&a), a);
    }
}
