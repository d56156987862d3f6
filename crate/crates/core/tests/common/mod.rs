//! Independent oracles shared by the property suites and the acceptance
//! runner. Each check returns a description of the first mismatch.
#![allow(dead_code)]

use pithreads::env::{Atom, Constraint, LabelSet};
use pithreads::numeric::affine::{q, Affine, Q};
use pithreads::numeric::{Itv, NumElem};
use pithreads::VarId;

/// Rank of an integer matrix, by fraction-free elimination.
pub fn int_rank(mut rows: Vec<Vec<i128>>) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][c] != 0) else { continue };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && rows[r][c] != 0 {
                let pivot = rows[rank].clone();
                let (a, b) = (pivot[c], rows[r][c]);
                for (v, p) in rows[r].iter_mut().zip(&pivot) {
                    *v = *v * a - p * b;
                }
                let g = rows[r].iter().fold(0i128, |g, &v| gcd(g, v.abs()));
                if g > 1 {
                    rows[r].iter_mut().for_each(|v| *v /= g);
                }
            }
        }
        rank += 1;
    }
    rank
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 { a } else { gcd(b, a % b) }
}

fn qs(p: &[i64]) -> Vec<Q> {
    p.iter().map(|&v| q(v)).collect()
}

/// The affine join of `points` is their affine hull: it contains every
/// point, its dimension equals the rank of the difference vectors, and it
/// does not depend on the join order.
pub fn check_affine_hull(points: &[Vec<i64>]) -> Result<(), String> {
    let dim = points[0].len();
    let fold = |ps: &mut dyn Iterator<Item = &Vec<i64>>| {
        let first = ps.next().unwrap();
        ps.fold(Affine::point(&qs(first)), |a, p| a.join(&Affine::point(&qs(p)), dim))
    };
    let hull = fold(&mut points.iter());
    for p in points {
        if !hull.rows().iter().all(|r| r.satisfied_by(&qs(p))) {
            return Err(format!("{p:?} not in the join of {points:?}"));
        }
    }
    let diffs: Vec<Vec<i128>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(&points[0]).map(|(a, b)| (*a - *b) as i128).collect())
        .collect();
    let expected = if diffs.is_empty() { 0 } else { int_rank(diffs) };
    if dim - hull.rank() != expected {
        return Err(format!(
            "join of {points:?} has dimension {}, the hull has {expected}",
            dim - hull.rank()
        ));
    }
    if fold(&mut points.iter().rev()) != hull {
        return Err(format!("join of {points:?} depends on the order"));
    }
    Ok(())
}

/// All vectors of `dim` naturals up to `max`.
pub fn grid(dim: usize, max: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..dim {
        out = out.into_iter().flat_map(|p| (0..=max).map(move |v| [p.clone(), vec![v]].concat())).collect();
    }
    out
}

/// Adding or subtracting a characteristic vector on a finite box matches
/// pointwise arithmetic exactly, checked over a grid enclosing the result.
pub fn check_chi_on_box(bounds: &[(i64, i64)], set: &[usize]) -> Result<(), String> {
    let dim = bounds.len();
    let e = NumElem::from_parts(bounds.iter().map(|&(lo, hi)| Itv { lo, hi: Some(hi) }).collect(), []);
    let in_box = |p: &[i64]| p.iter().zip(bounds).all(|(v, (lo, hi))| lo <= v && v <= hi);
    let chi: Vec<i64> = (0..dim).map(|j| i64::from(set.contains(&j))).collect();
    let added = e.add_chi(set);
    let subbed = e.sub_chi(set);
    let top = bounds.iter().map(|b| b.1).max().unwrap_or(0) + 2;
    for p in grid(dim, top) {
        let minus: Vec<i64> = p.iter().zip(&chi).map(|(a, b)| a - b).collect();
        let plus: Vec<i64> = p.iter().zip(&chi).map(|(a, b)| a + b).collect();
        if added.contains(&p) != in_box(&minus) {
            return Err(format!("add_chi {set:?} on {bounds:?} wrong at {p:?}"));
        }
        if subbed.contains(&p) != in_box(&plus) {
            return Err(format!("sub_chi {set:?} on {bounds:?} wrong at {p:?}"));
        }
    }
    Ok(())
}

/// Widening the joins of growing point sets keeps every point and changes
/// at most twice per interval bound plus once per affine dimension.
pub fn check_widening_chain(points: &[Vec<i64>]) -> Result<(), String> {
    let dim = points[0].len();
    let mut w = NumElem::point(&points[0]);
    let mut seen = NumElem::point(&points[0]);
    let mut changes = 0;
    for (k, p) in points.iter().enumerate().skip(1) {
        seen = seen.join(&NumElem::point(p));
        let next = w.widen(&seen);
        if !points[..=k].iter().all(|p| next.contains(p)) {
            return Err(format!("widening lost a point of {:?}", &points[..=k]));
        }
        if next != w {
            changes += 1;
        }
        w = next;
    }
    let bound = 5 * dim;
    if changes > bound {
        return Err(format!("{changes} widening changes on {points:?}, expected at most {bound}"));
    }
    Ok(())
}

/// Toy names: (restriction label index, marker index).
type ToyName = (u32, u32);

fn raw_admits(labels: &[u8], cons: &[Constraint], vals: &[ToyName]) -> bool {
    vals.iter().zip(labels).all(|((l, _), set)| set & (1 << l) != 0)
        && cons.iter().all(|c| match *c {
            Constraint::Eq(i, j) => vals[i] == vals[j],
            Constraint::Neq(i, j) => vals[i] != vals[j],
            Constraint::Lbl(i, l) => vals[i].0 == l.0,
        })
}

fn to_labelset(mask: u8) -> LabelSet {
    (0..2).filter(|l| mask & (1 << l) != 0).map(VarId).collect()
}

/// Exhaustively checks that normalization over `n` variables, two
/// restriction labels and two markers is idempotent and preserves the
/// concretization. Returns the number of elements checked.
pub fn check_normalize_universe(n: usize) -> Result<usize, String> {
    let mut possible = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            possible.push(Constraint::Eq(i, j));
            possible.push(Constraint::Neq(i, j));
        }
        for l in 0..2 {
            possible.push(Constraint::Lbl(i, VarId(l)));
        }
    }
    let names: Vec<ToyName> = (0..2).flat_map(|l| (0..2).map(move |m| (l, m))).collect();
    let assignments: Vec<Vec<ToyName>> = grid(n, 3).into_iter().map(|p| p.iter().map(|&k| names[k as usize]).collect()).collect();
    let vars: Vec<usize> = (0..n).collect();
    let mut count = 0;
    for label_code in 0..4usize.pow(n as u32) {
        let labels: Vec<u8> = (0..n).map(|i| ((label_code >> (2 * i)) & 3) as u8).collect();
        for subset in 0..1u32 << possible.len() {
            let cons: Vec<Constraint> =
                (0..possible.len()).filter(|k| subset & (1 << k) != 0).map(|k| possible[k].clone()).collect();
            let a = Atom::normalize(vars.clone(), labels.iter().map(|&m| to_labelset(m)).collect(), &cons);
            for vals in &assignments {
                if raw_admits(&labels, &cons, vals) != a.admits(vals, |v| VarId(v.0)) {
                    return Err(format!("normalize({labels:?}, {cons:?}) changes membership of {vals:?}"));
                }
            }
            if !a.is_bottom() {
                let relabel: Vec<LabelSet> = (0..n).map(|i| a.labels_at(i).unwrap().clone()).collect();
                if Atom::normalize(vars.clone(), relabel, &a.constraints()) != a {
                    return Err(format!("normalize({labels:?}, {cons:?}) is not idempotent"));
                }
            }
            count += 1;
        }
    }
    Ok(count)
}
