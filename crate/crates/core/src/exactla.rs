//! Sparse exact linear algebra over ℚ.
//!
//! Matrices are stored column by column, each column a sorted sparse vector,
//! so that "the image of basis vector j" is a direct lookup. Ranks use a
//! fraction-free elimination on primitive integer rows; kernels and images
//! go through a rational reduced row echelon form built on top of it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{OpError, Result};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

/// `(-1)^k` as a rational.
pub fn sign_q(k: i64) -> Q {
    if k.rem_euclid(2) == 0 {
        q(1)
    } else {
        q(-1)
    }
}

/// Renders a rational as `"p/q"` in lowest terms.
pub fn format_q(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `"p/q"`, `"p"` or a plain integer string.
pub fn parse_q(s: &str) -> Option<Q> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(Q::new(n, d))
            }
        }
        None => s.parse::<BigInt>().ok().map(Q::from_integer),
    }
}

/// Sparse vector: strictly increasing indices, no stored zeros.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SparseVec {
    e: Vec<(usize, Q)>,
}

impl SparseVec {
    pub fn zero() -> Self {
        SparseVec { e: Vec::new() }
    }

    pub fn unit(i: usize) -> Self {
        SparseVec { e: vec![(i, q(1))] }
    }

    pub fn single(i: usize, c: Q) -> Self {
        if c.is_zero() {
            Self::zero()
        } else {
            SparseVec { e: vec![(i, c)] }
        }
    }

    /// Builds from arbitrary entries, summing duplicates and dropping zeros.
    pub fn from_entries(mut entries: Vec<(usize, Q)>) -> Self {
        entries.sort_by_key(|(i, _)| *i);
        let mut e: Vec<(usize, Q)> = Vec::with_capacity(entries.len());
        for (i, c) in entries {
            match e.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => e.push((i, c)),
            }
        }
        e.retain(|(_, c)| !c.is_zero());
        SparseVec { e }
    }

    pub fn from_dense(v: &[Q]) -> Self {
        SparseVec {
            e: v.iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| (i, c.clone()))
                .collect(),
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<Q> {
        let mut v = vec![Q::zero(); n];
        for (i, c) in &self.e {
            v[*i] = c.clone();
        }
        v
    }

    pub fn entries(&self) -> &[(usize, Q)] {
        &self.e
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, Q)> {
        self.e.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.e.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.e.len()
    }

    pub fn get(&self, i: usize) -> Q {
        match self.e.binary_search_by_key(&i, |(j, _)| *j) {
            Ok(k) => self.e[k].1.clone(),
            Err(_) => Q::zero(),
        }
    }

    pub fn max_index(&self) -> Option<usize> {
        self.e.last().map(|(i, _)| *i)
    }

    pub fn scaled(&self, c: &Q) -> SparseVec {
        if c.is_zero() {
            return Self::zero();
        }
        SparseVec {
            e: self.e.iter().map(|(i, x)| (*i, x * c)).collect(),
        }
    }

    pub fn neg(&self) -> SparseVec {
        SparseVec {
            e: self.e.iter().map(|(i, x)| (*i, -x)).collect(),
        }
    }

    /// `self + c·other`
    pub fn add_scaled(&self, other: &SparseVec, c: &Q) -> SparseVec {
        if c.is_zero() || other.is_zero() {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.e.len() + other.e.len());
        let (mut a, mut b) = (0, 0);
        while a < self.e.len() || b < other.e.len() {
            let ia = self.e.get(a).map(|x| x.0).unwrap_or(usize::MAX);
            let ib = other.e.get(b).map(|x| x.0).unwrap_or(usize::MAX);
            if ia < ib {
                out.push(self.e[a].clone());
                a += 1;
            } else if ib < ia {
                out.push((ib, &other.e[b].1 * c));
                b += 1;
            } else {
                let s = &self.e[a].1 + &other.e[b].1 * c;
                if !s.is_zero() {
                    out.push((ia, s));
                }
                a += 1;
                b += 1;
            }
        }
        SparseVec { e: out }
    }

    pub fn add(&self, other: &SparseVec) -> SparseVec {
        self.add_scaled(other, &q(1))
    }

    pub fn sub(&self, other: &SparseVec) -> SparseVec {
        self.add_scaled(other, &q(-1))
    }

    pub fn dot(&self, other: &SparseVec) -> Q {
        let mut s = Q::zero();
        let (mut a, mut b) = (0, 0);
        while a < self.e.len() && b < other.e.len() {
            match self.e[a].0.cmp(&other.e[b].0) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    s += &self.e[a].1 * &other.e[b].1;
                    a += 1;
                    b += 1;
                }
            }
        }
        s
    }

    /// Reindexes entries through `f`; `f` must be injective on the support.
    pub fn reindex(&self, f: impl Fn(usize) -> usize) -> SparseVec {
        SparseVec::from_entries(self.e.iter().map(|(i, c)| (f(*i), c.clone())).collect())
    }
}

/// Accumulates `index → coefficient` contributions into a `SparseVec`.
#[derive(Default, Debug, Clone)]
pub struct VecAcc {
    m: HashMap<usize, Q>,
}

impl VecAcc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, i: usize, c: Q) {
        if c.is_zero() {
            return;
        }
        *self.m.entry(i).or_insert_with(Q::zero) += c;
    }

    pub fn add_vec(&mut self, v: &SparseVec, c: &Q) {
        if c.is_zero() {
            return;
        }
        for (i, x) in v.iter() {
            self.add(*i, x * c);
        }
    }

    pub fn finish(self) -> SparseVec {
        SparseVec::from_entries(self.m.into_iter().collect())
    }
}

/// Sparse rational matrix. `rows` is the target dimension, `cols` the source.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    columns: Vec<SparseVec>,
}

impl RationalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RationalMatrix {
            rows,
            cols,
            columns: vec![SparseVec::zero(); cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        RationalMatrix {
            rows: n,
            cols: n,
            columns: (0..n).map(SparseVec::unit).collect(),
        }
    }

    pub fn from_triplets(rows: usize, cols: usize, t: Vec<(usize, usize, Q)>) -> Result<Self> {
        let mut per_col: Vec<Vec<(usize, Q)>> = vec![Vec::new(); cols];
        for (r, c, x) in t {
            if r >= rows || c >= cols {
                return Err(OpError::ShapeMismatch(format!(
                    "entry ({r}, {c}) outside a {rows}×{cols} matrix"
                )));
            }
            per_col[c].push((r, x));
        }
        Ok(RationalMatrix {
            rows,
            cols,
            columns: per_col.into_iter().map(SparseVec::from_entries).collect(),
        })
    }

    /// Builds from integer rows; convenient in tests.
    pub fn from_int_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                if *x != 0 {
                    t.push((i, j, q(*x)));
                }
            }
        }
        Self::from_triplets(r, c, t).expect("rows of equal length")
    }

    pub fn from_columns(rows: usize, columns: Vec<SparseVec>) -> Self {
        debug_assert!(columns
            .iter()
            .all(|c| c.max_index().is_none_or(|m| m < rows)));
        RationalMatrix {
            rows,
            cols: columns.len(),
            columns,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> &SparseVec {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[SparseVec] {
        &self.columns
    }

    pub fn get(&self, r: usize, c: usize) -> Q {
        self.columns[c].get(r)
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(|c| c.nnz()).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.columns.iter().all(|c| c.is_zero())
    }

    /// Entries sorted by (row, col).
    pub fn triplets(&self) -> Vec<(usize, usize, Q)> {
        let mut t: Vec<(usize, usize, Q)> = self
            .columns
            .iter()
            .enumerate()
            .flat_map(|(j, col)| col.iter().map(move |(i, x)| (*i, j, x.clone())))
            .collect();
        t.sort_by_key(|(r, c, _)| (*r, *c));
        t
    }

    pub fn apply(&self, v: &SparseVec) -> SparseVec {
        let mut acc = VecAcc::new();
        for (j, c) in v.iter() {
            acc.add_vec(&self.columns[*j], c);
        }
        acc.finish()
    }

    /// `self ∘ rhs`.
    pub fn compose(&self, rhs: &RationalMatrix) -> RationalMatrix {
        assert_eq!(self.cols, rhs.rows, "compose: inner dimensions differ");
        RationalMatrix {
            rows: self.rows,
            cols: rhs.cols,
            columns: rhs.columns.iter().map(|c| self.apply(c)).collect(),
        }
    }

    pub fn transpose(&self) -> RationalMatrix {
        let mut per_row: Vec<Vec<(usize, Q)>> = vec![Vec::new(); self.rows];
        for (j, col) in self.columns.iter().enumerate() {
            for (i, x) in col.iter() {
                per_row[*i].push((j, x.clone()));
            }
        }
        RationalMatrix {
            rows: self.cols,
            cols: self.rows,
            columns: per_row.into_iter().map(|e| SparseVec { e }).collect(),
        }
    }

    pub fn add(&self, other: &RationalMatrix) -> RationalMatrix {
        self.add_scaled(other, &q(1))
    }

    pub fn sub(&self, other: &RationalMatrix) -> RationalMatrix {
        self.add_scaled(other, &q(-1))
    }

    pub fn add_scaled(&self, other: &RationalMatrix, c: &Q) -> RationalMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            columns: self
                .columns
                .iter()
                .zip(&other.columns)
                .map(|(a, b)| a.add_scaled(b, c))
                .collect(),
        }
    }

    pub fn scaled(&self, c: &Q) -> RationalMatrix {
        RationalMatrix {
            rows: self.rows,
            cols: self.cols,
            columns: self.columns.iter().map(|x| x.scaled(c)).collect(),
        }
    }

    pub fn neg(&self) -> RationalMatrix {
        self.scaled(&q(-1))
    }

    /// Restriction to the given rows and columns, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> RationalMatrix {
        let mut pos = vec![usize::MAX; self.rows];
        for (k, r) in rows.iter().enumerate() {
            pos[*r] = k;
        }
        let columns = cols
            .iter()
            .map(|c| {
                SparseVec::from_entries(
                    self.columns[*c]
                        .iter()
                        .filter(|(i, _)| pos[*i] != usize::MAX)
                        .map(|(i, x)| (pos[*i], x.clone()))
                        .collect(),
                )
            })
            .collect();
        RationalMatrix {
            rows: rows.len(),
            cols: cols.len(),
            columns,
        }
    }

    /// Assembles a block matrix; `blocks` lists (block row, block col, matrix).
    pub fn from_blocks(
        row_sizes: &[usize],
        col_sizes: &[usize],
        blocks: &[(usize, usize, &RationalMatrix)],
    ) -> RationalMatrix {
        let roff: Vec<usize> = offsets(row_sizes);
        let coff: Vec<usize> = offsets(col_sizes);
        let rows: usize = row_sizes.iter().sum();
        let cols: usize = col_sizes.iter().sum();
        let mut t = Vec::new();
        for (bi, bj, m) in blocks {
            assert_eq!(m.rows, row_sizes[*bi], "block row size");
            assert_eq!(m.cols, col_sizes[*bj], "block col size");
            for (r, c, x) in m.triplets() {
                t.push((r + roff[*bi], c + coff[*bj], x));
            }
        }
        RationalMatrix::from_triplets(rows, cols, t).expect("blocks in range")
    }
}

fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut o = Vec::with_capacity(sizes.len());
    let mut s = 0;
    for x in sizes {
        o.push(s);
        s += x;
    }
    o
}

impl fmt::Display for RationalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|c| self.get(r, c).to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// A list of linearly independent vectors in ℚ^ambient_dim.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubspaceBasis {
    pub ambient_dim: usize,
    pub vectors: Vec<SparseVec>,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// The basis vectors as the columns of a matrix.
    pub fn as_matrix(&self) -> RationalMatrix {
        RationalMatrix::from_columns(self.ambient_dim, self.vectors.clone())
    }
}

// ---------------------------------------------------------------------------
// fraction-free integer elimination

type IntRow = Vec<(usize, BigInt)>;

fn primitive(mut row: IntRow) -> IntRow {
    let mut g = BigInt::zero();
    for (_, x) in &row {
        g = g.gcd(x);
        if g.is_one() {
            break;
        }
    }
    if !g.is_zero() && !g.is_one() {
        for (_, x) in row.iter_mut() {
            *x = &*x / &g;
        }
    }
    if row.first().is_some_and(|(_, x)| x.is_negative()) {
        for (_, x) in row.iter_mut() {
            *x = -&*x;
        }
    }
    row
}

fn to_int_row(v: &SparseVec) -> IntRow {
    let mut l = BigInt::one();
    for (_, x) in v.iter() {
        l = l.lcm(x.denom());
    }
    let row = v
        .iter()
        .map(|(i, x)| (*i, x.numer() * (&l / x.denom())))
        .collect();
    primitive(row)
}

fn bitsize(row: &IntRow) -> u64 {
    row.iter().map(|(_, x)| x.bits()).sum()
}

/// `a·r − b·p` for a shared leading index; the leading entry cancels.
fn eliminate(r: &IntRow, p: &IntRow) -> IntRow {
    let a0 = &p[0].1;
    let b0 = &r[0].1;
    let g = a0.gcd(b0);
    let a = a0 / &g;
    let b = b0 / &g;
    let mut out = Vec::with_capacity(r.len() + p.len());
    let (mut i, mut j) = (1, 1);
    while i < r.len() || j < p.len() {
        let ir = r.get(i).map(|x| x.0).unwrap_or(usize::MAX);
        let ip = p.get(j).map(|x| x.0).unwrap_or(usize::MAX);
        if ir < ip {
            out.push((ir, &a * &r[i].1));
            i += 1;
        } else if ip < ir {
            out.push((ip, -(&b * &p[j].1)));
            j += 1;
        } else {
            let s = &a * &r[i].1 - &b * &p[j].1;
            if !s.is_zero() {
                out.push((ir, s));
            }
            i += 1;
            j += 1;
        }
    }
    primitive(out)
}

/// Row echelon form of the given vectors: rows with distinct leading indices.
/// Pivot among rows sharing a leading index: smallest bit-size, then lowest index.
fn int_echelon(vectors: &[SparseVec]) -> Vec<IntRow> {
    let mut buckets: BTreeMap<usize, Vec<(usize, IntRow)>> = BTreeMap::new();
    let mut next_id = 0usize;
    for v in vectors {
        if v.is_zero() {
            continue;
        }
        let row = to_int_row(v);
        buckets.entry(row[0].0).or_default().push((next_id, row));
        next_id += 1;
    }
    let mut out = Vec::new();
    while let Some((_, mut bucket)) = buckets.pop_first() {
        let k = (0..bucket.len())
            .min_by_key(|&k| (bitsize(&bucket[k].1), bucket[k].0))
            .expect("nonempty bucket");
        let (_, pivot) = bucket.swap_remove(k);
        for (id, row) in bucket {
            let r = eliminate(&row, &pivot);
            if !r.is_empty() {
                buckets.entry(r[0].0).or_default().push((id, r));
            }
        }
        out.push(pivot);
    }
    out
}

/// Rank over ℚ.
pub fn rank(m: &RationalMatrix) -> usize {
    if m.rows == 0 || m.cols == 0 {
        return 0;
    }
    int_echelon(&m.columns).len()
}

/// Reduced row echelon form of a spanning set.
#[derive(Clone, Debug)]
pub struct Rref {
    ambient: usize,
    rows: Vec<SparseVec>,
    pivots: Vec<usize>,
    pivot_pos: HashMap<usize, usize>,
}

impl Rref {
    pub fn from_vectors(ambient: usize, vectors: &[SparseVec]) -> Rref {
        let ech = int_echelon(vectors);
        let mut rows: Vec<SparseVec> = ech
            .into_iter()
            .map(|r| {
                let lead = Q::from_integer(r[0].1.clone());
                SparseVec::from_entries(
                    r.into_iter()
                        .map(|(i, x)| (i, Q::from_integer(x) / &lead))
                        .collect(),
                )
            })
            .collect();
        let pivots: Vec<usize> = rows.iter().map(|r| r.entries()[0].0).collect();
        // back substitution, last pivot first
        for i in (0..rows.len()).rev() {
            let p = pivots[i];
            for j in 0..i {
                let c = rows[j].get(p);
                if !c.is_zero() {
                    rows[j] = rows[j].add_scaled(&rows[i], &-c);
                }
            }
        }
        let pivot_pos = pivots.iter().enumerate().map(|(k, p)| (*p, k)).collect();
        Rref {
            ambient,
            rows,
            pivots,
            pivot_pos,
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SparseVec] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    /// Remainder of `v` after subtracting its projection along pivots.
    pub fn reduce(&self, v: &SparseVec) -> SparseVec {
        let mut acc = VecAcc::new();
        acc.add_vec(v, &q(1));
        for (i, c) in v.iter() {
            if let Some(&k) = self.pivot_pos.get(i) {
                acc.add_vec(&self.rows[k], &-c.clone());
            }
        }
        acc.finish()
    }

    pub fn contains(&self, v: &SparseVec) -> bool {
        self.reduce(v).is_zero()
    }

    /// Coordinates in the row basis, if `v` lies in the span.
    pub fn coordinates(&self, v: &SparseVec) -> Option<SparseVec> {
        if !self.contains(v) {
            return None;
        }
        Some(self.coords_unchecked(v))
    }

    /// Coordinates read off at pivot positions; meaningful only inside the span.
    pub fn coords_unchecked(&self, v: &SparseVec) -> SparseVec {
        SparseVec::from_entries(
            v.iter()
                .filter_map(|(i, c)| self.pivot_pos.get(i).map(|k| (*k, c.clone())))
                .collect(),
        )
    }

    pub fn basis(&self) -> SubspaceBasis {
        SubspaceBasis {
            ambient_dim: self.ambient,
            vectors: self.rows.clone(),
        }
    }
}

/// Basis of the null space `{v : m·v = 0}`.
pub fn kernel_basis(m: &RationalMatrix) -> SubspaceBasis {
    let rref = Rref::from_vectors(m.cols, &m.transpose().columns);
    let pivot_set: HashMap<usize, usize> = rref.pivot_pos.clone();
    let mut per_free: BTreeMap<usize, Vec<(usize, Q)>> = BTreeMap::new();
    for c in 0..m.cols {
        if !pivot_set.contains_key(&c) {
            per_free.insert(c, vec![(c, q(1))]);
        }
    }
    for (k, row) in rref.rows.iter().enumerate() {
        let p = rref.pivots[k];
        for (f, x) in row.iter() {
            if *f != p {
                per_free
                    .get_mut(f)
                    .expect("non-pivot entry")
                    .push((p, -x.clone()));
            }
        }
    }
    SubspaceBasis {
        ambient_dim: m.cols,
        vectors: per_free
            .into_values()
            .map(SparseVec::from_entries)
            .collect(),
    }
}

/// Basis of the column space, in reduced echelon form.
pub fn image_basis(m: &RationalMatrix) -> SubspaceBasis {
    Rref::from_vectors(m.rows, &m.columns).basis()
}

/// Homology dimensions from degreewise dimensions and differentials `d_n: X_n → X_{n−1}`.
pub fn homology_dims(
    spaces: &BTreeMap<i64, usize>,
    diffs: &BTreeMap<i64, RationalMatrix>,
) -> Result<BTreeMap<i64, usize>> {
    let dim = |n: i64| spaces.get(&n).copied().unwrap_or(0);
    for (n, d) in diffs {
        if d.cols() != dim(*n) || d.rows() != dim(n - 1) {
            return Err(OpError::ShapeMismatch(format!(
                "d_{n} is {}×{}, expected {}×{}",
                d.rows(),
                d.cols(),
                dim(n - 1),
                dim(*n)
            )));
        }
    }
    for (n, d) in diffs {
        if let Some(up) = diffs.get(&(n + 1)) {
            if !d.compose(up).is_zero() {
                return Err(OpError::NotAComplex { degree: *n });
            }
        }
    }
    let ranks: BTreeMap<i64, usize> = diffs.iter().map(|(n, d)| (*n, rank(d))).collect();
    let r = |n: i64| ranks.get(&n).copied().unwrap_or(0);
    Ok(spaces
        .keys()
        .map(|&n| (n, dim(n) - r(n) - r(n + 1)))
        .collect())
}

/// Inverse of a square matrix by dense Gauss–Jordan; `None` if singular.
pub fn inverse(m: &RationalMatrix) -> Option<RationalMatrix> {
    let n = m.rows;
    if m.cols != n {
        return None;
    }
    let mut a: Vec<Vec<Q>> = (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j)).collect())
        .collect();
    let mut inv: Vec<Vec<Q>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Q::one() } else { Q::zero() })
                .collect()
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&r| !a[r][c].is_zero())?;
        a.swap(c, p);
        inv.swap(c, p);
        let piv = a[c][c].clone();
        for j in 0..n {
            a[c][j] /= &piv;
            inv[c][j] /= &piv;
        }
        for r in 0..n {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                for j in 0..n {
                    let (x, y) = (a[c][j].clone(), inv[c][j].clone());
                    a[r][j] -= &f * x;
                    inv[r][j] -= &f * y;
                }
            }
        }
    }
    let mut t = Vec::new();
    for (i, row) in inv.into_iter().enumerate() {
        for (j, x) in row.into_iter().enumerate() {
            if !x.is_zero() {
                t.push((i, j, x));
            }
        }
    }
    Some(RationalMatrix::from_triplets(n, n, t).expect("in range"))
}

/// A random integer matrix with entries in `−bound..=bound`, each entry
/// nonzero with probability `density`.
pub fn random_matrix<R: rand::Rng>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    density: f64,
    bound: i64,
) -> RationalMatrix {
    let mut t = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if rng.gen_bool(density) {
                let mut x = 0;
                while x == 0 {
                    x = rng.gen_range(-bound..=bound);
                }
                t.push((r, c, q(x)));
            }
        }
    }
    RationalMatrix::from_triplets(rows, cols, t).expect("in range")
}

/// A random invertible matrix: a product of unitriangular factors with a
/// random row permutation.
pub fn random_invertible<R: rand::Rng>(rng: &mut R, n: usize, bound: i64) -> RationalMatrix {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for i in 0..n {
        lower.push((i, i, q(1)));
        upper.push((i, i, q(1)));
        for j in 0..i {
            let (a, b) = (rng.gen_range(-bound..=bound), rng.gen_range(-bound..=bound));
            lower.push((i, j, q(a)));
            upper.push((j, i, q(b)));
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.gen_range(0..=i));
    }
    let p = RationalMatrix::from_triplets(
        n,
        n,
        perm.iter()
            .enumerate()
            .map(|(i, &j)| (i, j, q(1)))
            .collect(),
    )
    .expect("in range");
    let l = RationalMatrix::from_triplets(n, n, lower).expect("in range");
    let u = RationalMatrix::from_triplets(n, n, upper).expect("in range");
    p.compose(&l).compose(&u)
}

/// Coordinates with respect to a fixed linearly independent family.
#[derive(Clone, Debug)]
pub struct FixedBasis {
    rref: Rref,
    change: RationalMatrix,
}

impl FixedBasis {
    /// `None` when the vectors are linearly dependent.
    pub fn new(ambient: usize, vectors: &[SparseVec]) -> Option<Self> {
        let rref = Rref::from_vectors(ambient, vectors);
        if rref.rank() != vectors.len() {
            return None;
        }
        let k = RationalMatrix::from_columns(
            vectors.len(),
            vectors.iter().map(|v| rref.coords_unchecked(v)).collect(),
        );
        let change = inverse(&k)?;
        Some(FixedBasis { rref, change })
    }

    pub fn dim(&self) -> usize {
        self.rref.rank()
    }

    pub fn coordinates(&self, v: &SparseVec) -> Option<SparseVec> {
        self.rref.coordinates(v).map(|c| self.change.apply(&c))
    }

    pub fn coords_unchecked(&self, v: &SparseVec) -> SparseVec {
        self.change.apply(&self.rref.coords_unchecked(v))
    }
}

/// Small integer conversion used in reports; `None` when not an integer in range.
pub fn q_to_i64(x: &Q) -> Option<i64> {
    if x.is_integer() {
        x.numer().to_i64()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_fixed_basis() {
        let m = RationalMatrix::from_int_rows(&[vec![2, 1], vec![1, 1]]);
        let inv = inverse(&m).unwrap();
        assert_eq!(m.compose(&inv), RationalMatrix::identity(2));
        assert!(inverse(&RationalMatrix::from_int_rows(&[vec![1, 2], vec![2, 4]])).is_none());
        let v = [
            SparseVec::from_dense(&[q(1), q(1), q(0)]),
            SparseVec::from_dense(&[q(0), q(1), q(1)]),
        ];
        let fb = FixedBasis::new(3, &v).unwrap();
        let x = v[0].scaled(&q(3)).add_scaled(&v[1], &q(-2));
        assert_eq!(
            fb.coordinates(&x).unwrap(),
            SparseVec::from_dense(&[q(3), q(-2)])
        );
        assert!(fb.coordinates(&SparseVec::unit(0)).is_none());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&RationalMatrix::identity(2)), 2);
        assert_eq!(rank(&RationalMatrix::zeros(3, 5)), 0);
        assert_eq!(
            rank(&RationalMatrix::from_int_rows(&[vec![1, 2], vec![2, 4]])),
            1
        );
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_basis(&RationalMatrix::identity(3)).dim(), 0);
        assert_eq!(kernel_basis(&RationalMatrix::zeros(3, 3)).dim(), 3);
        let k = kernel_basis(&RationalMatrix::from_int_rows(&[vec![1, 1]]));
        assert_eq!(k.dim(), 1);
        let v = &k.vectors[0];
        assert_eq!(v.get(0), -v.get(1));
        assert!(!v.is_zero());
    }

    #[test]
    fn rational_entries_rank() {
        let m = RationalMatrix::from_triplets(
            2,
            2,
            vec![
                (0, 0, qr(1, 2)),
                (0, 1, qr(1, 3)),
                (1, 0, qr(3, 2)),
                (1, 1, q(1)),
            ],
        )
        .unwrap();
        assert_eq!(rank(&m), 1);
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(format_q(&qr(-6, 4)), "-3/2");
        assert_eq!(parse_q("-3/2"), Some(qr(-3, 2)));
        assert_eq!(parse_q("4"), Some(q(4)));
        assert_eq!(parse_q("1/0"), None);
        assert_eq!(format_q(&q(2)), "2/1");
    }

    #[test]
    fn homology_errors() {
        let mut spaces = BTreeMap::new();
        spaces.insert(0, 1);
        spaces.insert(1, 1);
        let mut diffs = BTreeMap::new();
        diffs.insert(1, RationalMatrix::zeros(2, 1));
        assert!(matches!(
            homology_dims(&spaces, &diffs),
            Err(OpError::ShapeMismatch(_))
        ));
        let mut spaces = BTreeMap::new();
        spaces.insert(0, 1);
        spaces.insert(1, 1);
        spaces.insert(2, 1);
        let mut diffs = BTreeMap::new();
        diffs.insert(1, RationalMatrix::identity(1));
        diffs.insert(2, RationalMatrix::identity(1));
        assert_eq!(
            homology_dims(&spaces, &diffs),
            Err(OpError::NotAComplex { degree: 1 })
        );
    }

    #[test]
    fn koszul_scalar_pattern() {
        // ℚ → ℚ² → ℚ with d_2 = [[1],[1]], d_1 = [[1,-1]]
        let mut spaces = BTreeMap::new();
        spaces.insert(2, 1);
        spaces.insert(1, 2);
        spaces.insert(0, 1);
        let mut diffs = BTreeMap::new();
        diffs.insert(2, RationalMatrix::from_int_rows(&[vec![1], vec![1]]));
        diffs.insert(1, RationalMatrix::from_int_rows(&[vec![1, -1]]));
        let h = homology_dims(&spaces, &diffs).unwrap();
        assert!(h.values().all(|x| *x == 0));
    }

    #[test]
    fn rref_coordinates() {
        let vs = vec![
            SparseVec::from_dense(&[q(1), q(2), q(0)]),
            SparseVec::from_dense(&[q(0), q(1), q(1)]),
        ];
        let r = Rref::from_vectors(3, &vs);
        let target = vs[0].scaled(&q(3)).add_scaled(&vs[1], &q(-2));
        let c = r.coordinates(&target).unwrap();
        let back = r.rows()[0]
            .scaled(&c.get(0))
            .add_scaled(&r.rows()[1], &c.get(1));
        assert_eq!(back, target);
        assert!(r
            .coordinates(&SparseVec::unit(2).add(&SparseVec::unit(0)))
            .is_none());
    }
}
