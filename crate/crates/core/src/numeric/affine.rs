//! Conjunctions of affine equalities over exact rationals, kept in reduced
//! row-echelon form with leftmost pivots.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Q = BigRational;

/// Sparse vector: strictly increasing columns, no zero coefficients.
pub type Sparse = Vec<(usize, Q)>;

/// `a - c * b` on sparse vectors.
pub fn sub_scaled(a: &[(usize, Q)], c: &Q, b: &[(usize, Q)]) -> Sparse {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let take_a = j == b.len() || (i < a.len() && a[i].0 < b[j].0);
        let take_b = i == a.len() || (j < b.len() && b[j].0 < a[i].0);
        if take_a {
            out.push(a[i].clone());
            i += 1;
        } else if take_b {
            out.push((b[j].0, -(c * &b[j].1)));
            j += 1;
        } else {
            let v = &a[i].1 - c * &b[j].1;
            if !v.is_zero() {
                out.push((a[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

pub fn coeff(v: &[(usize, Q)], col: usize) -> Option<&Q> {
    v.binary_search_by_key(&col, |(c, _)| *c).ok().map(|i| &v[i].1)
}

fn scale(v: &mut Sparse, c: &Q) {
    for (_, x) in v.iter_mut() {
        *x *= c;
    }
}

/// `terms . x = rhs`; in a reduced system the first term is the pivot with
/// coefficient one.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Row {
    pub terms: Sparse,
    pub rhs: Q,
}

impl Row {
    pub fn new(terms: Sparse, rhs: Q) -> Row {
        Row { terms, rhs }
    }

    pub fn pivot(&self) -> usize {
        self.terms[0].0
    }

    fn sub_scaled(&self, c: &Q, other: &Row) -> Row {
        Row { terms: sub_scaled(&self.terms, c, &other.terms), rhs: &self.rhs - c * &other.rhs }
    }

    pub fn satisfied_by(&self, point: &[Q]) -> bool {
        let lhs: Q = self.terms.iter().map(|(j, c)| c * &point[*j]).sum();
        lhs == self.rhs
    }
}

/// The affine space `{x | row.terms . x = row.rhs for every row}`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Affine {
    rows: Vec<Row>,
}

impl Affine {
    pub fn top() -> Affine {
        Affine::default()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// The single point `x = p` (dense).
    pub fn point(p: &[Q]) -> Affine {
        Affine {
            rows: p.iter().enumerate().map(|(j, v)| Row::new(vec![(j, Q::one())], v.clone())).collect(),
        }
    }

    /// Builds the canonical form of a conjunction; `None` when empty.
    pub fn from_rows(rows: impl IntoIterator<Item = Row>) -> Option<Affine> {
        let mut a = Affine::top();
        for r in rows {
            if !a.add_row(r) {
                return None;
            }
        }
        Some(a)
    }

    fn pivot_index(&self, col: usize) -> Result<usize, usize> {
        self.rows.binary_search_by_key(&col, Row::pivot)
    }

    /// Eliminates every pivot column from `r`.
    pub fn reduce(&self, r: &Row) -> Row {
        let mut out = r.clone();
        // pivots only occur in their own row, so one pass suffices; walk the
        // terms of `out` and look each column up among the pivots
        let mut k = 0;
        while k < out.terms.len() {
            let (col, c) = out.terms[k].clone();
            match self.pivot_index(col) {
                Ok(i) => {
                    out = out.sub_scaled(&c, &self.rows[i]);
                    // the pivot column vanished; entries before k are untouched
                }
                Err(_) => k += 1,
            }
        }
        out
    }

    /// Whether every point of `self` satisfies `r`.
    pub fn implies(&self, r: &Row) -> bool {
        let red = self.reduce(r);
        red.terms.is_empty() && red.rhs.is_zero()
    }

    /// Intersects with one equation; returns false when the result is empty.
    pub fn add_row(&mut self, r: Row) -> bool {
        let mut red = self.reduce(&r);
        if red.terms.is_empty() {
            return red.rhs.is_zero();
        }
        let lead = red.terms[0].1.clone();
        if !lead.is_one() {
            let inv = lead.recip();
            scale(&mut red.terms, &inv);
            red.rhs *= &inv;
        }
        let p = red.pivot();
        for row in &mut self.rows {
            if let Some(c) = coeff(&row.terms, p).cloned() {
                *row = row.sub_scaled(&c, &red);
            }
        }
        let at = self.pivot_index(p).unwrap_err();
        self.rows.insert(at, red);
        true
    }

    /// Shifts the space by `delta` along `col`.
    pub fn translate(&mut self, col: usize, delta: &Q) {
        for row in &mut self.rows {
            if let Some(c) = coeff(&row.terms, col) {
                row.rhs += c * delta;
            }
        }
    }

    /// Existential projection of `col`.
    pub fn forget(&mut self, col: usize) {
        if let Ok(i) = self.pivot_index(col) {
            self.rows.remove(i);
            return;
        }
        let Some(i) = self.rows.iter().rposition(|r| coeff(&r.terms, col).is_some()) else { return };
        let elim = self.rows.remove(i);
        let c0 = coeff(&elim.terms, col).expect("column present").clone();
        let rest: Vec<Row> = std::mem::take(&mut self.rows)
            .into_iter()
            .map(|r| match coeff(&r.terms, col) {
                Some(c) => r.sub_scaled(&(c / &c0), &elim),
                None => r,
            })
            .collect();
        *self = Affine::from_rows(rest).expect("projection of a non-empty space");
    }

    /// Some point of the space: free columns at zero.
    pub fn witness(&self) -> Sparse {
        self.rows.iter().filter(|r| !r.rhs.is_zero()).map(|r| (r.pivot(), r.rhs.clone())).collect()
    }

    /// A basis of the direction space: one vector per free column.
    pub fn directions(&self, dim: usize) -> Vec<Sparse> {
        let mut out = Vec::new();
        let mut pivots = self.rows.iter().map(Row::pivot).peekable();
        for f in 0..dim {
            if pivots.peek() == Some(&f) {
                pivots.next();
                continue;
            }
            let mut d: Sparse = vec![(f, Q::one())];
            for r in &self.rows {
                if let Some(c) = coeff(&r.terms, f) {
                    d.push((r.pivot(), -c.clone()));
                }
            }
            d.sort_by_key(|(j, _)| *j);
            out.push(d);
        }
        out
    }

    pub fn leq(&self, other: &Affine) -> bool {
        other.rows.iter().all(|r| self.implies(r))
    }

    /// Affine hull of the union of two spaces of dimension `dim`.
    pub fn join(&self, other: &Affine, dim: usize) -> Affine {
        if other.leq(self) {
            return self.clone();
        }
        if self.leq(other) {
            return other.clone();
        }
        let pa = self.witness();
        let pb = other.witness();
        let mut gens = RightEchelon::default();
        gens.add(sub_scaled(&pb, &Q::one(), &pa));
        for d in self.directions(dim).into_iter().chain(other.directions(dim)) {
            gens.add(d);
        }
        gens.constraints_through(&pa, dim)
    }
}

/// Vectors in reduced echelon form with pivots on their last column.
#[derive(Default)]
struct RightEchelon {
    /// Sorted by pivot column.
    vecs: Vec<Sparse>,
}

impl RightEchelon {
    fn pivot(v: &Sparse) -> usize {
        v.last().expect("non-zero").0
    }

    fn add(&mut self, v: Sparse) {
        let mut v = v;
        for g in &self.vecs {
            let p = Self::pivot(g);
            if let Some(c) = coeff(&v, p).cloned() {
                v = sub_scaled(&v, &c, g);
            }
        }
        let Some((p, lead)) = v.last().cloned() else { return };
        if !lead.is_one() {
            scale(&mut v, &lead.recip());
        }
        for g in &mut self.vecs {
            if let Some(c) = coeff(g, p).cloned() {
                *g = sub_scaled(g, &c, &v);
            }
        }
        let at = self.vecs.binary_search_by_key(&p, Self::pivot).unwrap_err();
        self.vecs.insert(at, v);
    }

    /// The canonical equations of `point + span(self)`.
    fn constraints_through(&self, point: &Sparse, dim: usize) -> Affine {
        let pivots: Vec<usize> = self.vecs.iter().map(Self::pivot).collect();
        // x - point lies in the span iff, for each non-pivot column j,
        // (x - point)[j] = sum_g g[j] * (x - point)[pivot(g)]
        let mut rows = Vec::with_capacity(dim - pivots.len());
        let mut next_pivot = 0;
        for j in 0..dim {
            if next_pivot < pivots.len() && pivots[next_pivot] == j {
                next_pivot += 1;
                continue;
            }
            let mut terms: Sparse = vec![(j, Q::one())];
            let mut rhs = coeff(point, j).cloned().unwrap_or_else(Q::zero);
            for (g, &p) in self.vecs.iter().zip(&pivots) {
                if let Some(c) = coeff(g, j) {
                    terms.push((p, -c.clone()));
                    if let Some(pp) = coeff(point, p) {
                        rhs -= c * pp;
                    }
                }
            }
            terms.sort_by_key(|(k, _)| *k);
            rows.push(Row::new(terms, rhs));
        }
        Affine { rows }
    }
}

pub fn q(n: i64) -> Q {
    Q::from_integer(n.into())
}

pub fn floor_i64(v: &Q) -> Option<i64> {
    i64::try_from(v.floor().to_integer()).ok()
}

pub fn ceil_i64(v: &Q) -> Option<i64> {
    i64::try_from(v.ceil().to_integer()).ok()
}

pub fn is_negative(v: &Q) -> bool {
    v.is_negative()
}
