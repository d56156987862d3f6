mod common;

use pithreads::numeric::affine::{q, Affine, Row};
use pithreads::numeric::{Itv, LinExpr, NumElem};
use proptest::prelude::*;

fn points(max_dim: usize, max_len: usize, max_val: i64) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1..=max_dim).prop_flat_map(move |d| prop::collection::vec(prop::collection::vec(0..=max_val, d), 1..=max_len))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn affine_join_is_the_affine_hull(ps in points(4, 6, 3)) {
        common::check_affine_hull(&ps).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn affine_join_is_an_upper_bound(ps in points(4, 4, 3), qs in points(4, 4, 3)) {
        let dim = ps[0].len();
        let qs: Vec<Vec<i64>> = qs.into_iter().map(|mut p| { p.resize(dim, 0); p }).collect();
        let hull = |s: &[Vec<i64>]| {
            let mut it = s.iter().map(|p| Affine::point(&p.iter().map(|&v| q(v)).collect::<Vec<_>>()));
            let first = it.next().unwrap();
            it.fold(first, |a, b| a.join(&b, dim))
        };
        let (a, b) = (hull(&ps), hull(&qs));
        let j = a.join(&b, dim);
        prop_assert!(a.leq(&j) && b.leq(&j));
        prop_assert_eq!(&j, &b.join(&a, dim));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn widening_chains_stabilize(ps in points(3, 12, 6)) {
        common::check_widening_chain(&ps).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn chi_arithmetic_is_sound_with_equalities(
        ps in points(3, 4, 3),
        set in prop::collection::btree_set(0usize..3, 0..=3),
    ) {
        let dim = ps[0].len();
        let set: Vec<usize> = set.into_iter().filter(|&j| j < dim).collect();
        let e = NumElem::join_all(ps.iter().map(|p| NumElem::point(p)).collect::<Vec<_>>().iter());
        let (added, subbed) = (e.add_chi(&set), e.sub_chi(&set));
        for p in &ps {
            let plus: Vec<i64> = (0..dim).map(|j| p[j] + i64::from(set.contains(&j))).collect();
            prop_assert!(added.contains(&plus));
            let minus: Vec<i64> = (0..dim).map(|j| p[j] - i64::from(set.contains(&j))).collect();
            if minus.iter().all(|&v| v >= 0) {
                prop_assert!(subbed.contains(&minus));
            }
        }
    }

    #[test]
    fn entailment_is_sound(ps in points(3, 5, 3), coeffs in prop::collection::vec(-2i64..=2, 3), bound in -2i64..8) {
        let dim = ps[0].len();
        let e = NumElem::join_all(ps.iter().map(|p| NumElem::point(p)).collect::<Vec<_>>().iter());
        let expr = LinExpr::new((0..dim).map(|j| (j, coeffs[j])));
        let value = |p: &Vec<i64>| (0..dim).map(|j| coeffs[j] * p[j]).sum::<i64>();
        if e.entails_le(&expr, bound) {
            prop_assert!(ps.iter().all(|p| value(p) <= bound));
        }
        if e.entails_zero(&expr) {
            prop_assert!(ps.iter().all(|p| value(p) == 0));
        }
    }
}

#[test]
fn chi_arithmetic_on_all_small_boxes() {
    for dim in 1..=3 {
        let ranges: Vec<(i64, i64)> = (0..=2).flat_map(|lo| (lo..=2).map(move |hi| (lo, hi))).collect();
        let mut boxes: Vec<Vec<(i64, i64)>> = vec![vec![]];
        for _ in 0..dim {
            boxes = boxes.into_iter().flat_map(|b| ranges.iter().map(move |r| [b.clone(), vec![*r]].concat())).collect();
        }
        for b in &boxes {
            for mask in 0..1usize << dim {
                let set: Vec<usize> = (0..dim).filter(|j| mask & (1 << j) != 0).collect();
                common::check_chi_on_box(b, &set).unwrap();
            }
        }
    }
}

#[test]
fn interval_chain_widens_in_three_steps() {
    let mut w = NumElem::from_parts(vec![Itv::point(0)], []);
    let mut steps = 0;
    for n in 1..20 {
        let next = w.widen(&NumElem::from_parts(vec![Itv { lo: 0, hi: Some(n) }], []));
        if next != w {
            steps += 1;
        }
        w = next;
    }
    assert!(steps <= 3);
    assert_eq!(w.val().unwrap().intervals()[0], Itv::TOP);
}

#[test]
fn known_entailments() {
    // x + y = 2 with both in [0, 2]
    let e = NumElem::from_parts(
        vec![Itv { lo: 0, hi: Some(2) }; 2],
        [Row::new(vec![(0, q(1)), (1, q(1))], q(2))],
    );
    assert!(e.entails_le(&LinExpr::new([(0, 1), (1, 1)]), 2));
    assert!(!NumElem::top(1).entails_le(&LinExpr::new([(0, 1)]), 0));
    // a + b + c = y, 0 <= y <= 1
    let e = NumElem::from_parts(
        vec![Itv::TOP, Itv::TOP, Itv::TOP, Itv { lo: 0, hi: Some(1) }],
        [Row::new(vec![(0, q(1)), (1, q(1)), (2, q(1)), (3, q(-1))], q(0))],
    );
    assert!(e.entails_le(&LinExpr::new([(0, 1), (1, 1), (2, 1)]), 1));
    assert!(!e.entails_le(&LinExpr::new([(0, 1), (1, 1), (2, 1)]), 0));
}

#[test]
fn joins_of_characteristic_vectors() {
    let one = NumElem::chi(3, &[0]).join(&NumElem::chi(3, &[]));
    let v = one.val().unwrap();
    assert_eq!(v.intervals(), &[Itv { lo: 0, hi: Some(1) }, Itv::point(0), Itv::point(0)]);
    let both = NumElem::chi(3, &[0, 1]).join(&NumElem::chi(3, &[]));
    assert!(both.entails_zero(&LinExpr::new([(0, 1), (1, -1)])));
    assert_eq!(both.val().unwrap().intervals()[0], Itv { lo: 0, hi: Some(1) });
}
