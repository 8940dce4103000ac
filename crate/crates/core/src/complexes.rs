//! Finite chain complexes over ℚ with homological grading (`d` has degree −1).
//!
//! Conventions: `(X[n])_i = X_{i+n}` with differential `(−1)^n d`;
//! `cone(f)_n = X_{n−1} ⊕ Y_n` with block differential `(−d^X, 0; −f, d^Y)`;
//! tensor differential `d(x⊗y) = dx⊗y + (−1)^{|x|} x⊗dy`;
//! dual differential `d^∨φ = −(−1)^{|φ|} φ∘d`.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::error::{OpError, Result};
use crate::exactla::{
    format_q, homology_dims, image_basis, inverse, kernel_basis, parse_q, q, random_invertible,
    random_matrix, rank, sign_q, RationalMatrix, Rref, SparseVec, Q,
};

/// A complex with a single flat basis; each basis element has a degree and
/// `d` maps degree `k` elements into degree `k − 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlatComplex {
    pub degrees: Vec<i64>,
    pub labels: Vec<String>,
    pub d: RationalMatrix,
}

/// Per-degree positions of a flat basis.
#[derive(Clone, Debug)]
pub struct Splitting {
    pub by_degree: BTreeMap<i64, Vec<usize>>,
    pub pos: Vec<usize>,
}

impl FlatComplex {
    pub fn dim(&self) -> usize {
        self.degrees.len()
    }

    pub fn zero() -> Self {
        FlatComplex {
            degrees: vec![],
            labels: vec![],
            d: RationalMatrix::zeros(0, 0),
        }
    }

    pub fn splitting(&self) -> Splitting {
        split_degrees(&self.degrees)
    }

    /// Checks degree homogeneity of `d` and `d² = 0`.
    pub fn validate(&self) -> Result<()> {
        for (j, col) in self.d.columns().iter().enumerate() {
            for (i, _) in col.iter() {
                if self.degrees[*i] != self.degrees[j] - 1 {
                    return Err(OpError::DegreeMismatch(format!(
                        "differential sends basis {j} (degree {}) to basis {i} (degree {})",
                        self.degrees[j], self.degrees[*i]
                    )));
                }
            }
        }
        if !self.d.compose(&self.d).is_zero() {
            let bad = self
                .d
                .compose(&self.d)
                .columns()
                .iter()
                .position(|c| !c.is_zero())
                .map(|j| self.degrees[j] - 1)
                .unwrap_or(0);
            return Err(OpError::NotAComplex { degree: bad });
        }
        Ok(())
    }

    pub fn to_complex(&self) -> ChainComplex {
        let s = self.splitting();
        let mut dims = BTreeMap::new();
        let mut labels = BTreeMap::new();
        let mut diffs = BTreeMap::new();
        for (deg, idx) in &s.by_degree {
            dims.insert(*deg, idx.len());
            labels.insert(*deg, idx.iter().map(|&i| self.labels[i].clone()).collect());
            if let Some(below) = s.by_degree.get(&(deg - 1)) {
                diffs.insert(*deg, self.d.submatrix(below, idx));
            }
        }
        ChainComplex::build(dims, diffs, Some(labels))
    }

    pub fn homology(&self) -> BTreeMap<i64, usize> {
        self.to_complex().homology()
    }

    pub fn is_acyclic(&self) -> bool {
        self.to_complex().is_acyclic()
    }

    /// Restriction to a set of basis elements spanning a subcomplex or a
    /// quotient by the complementary span (the caller guarantees one of them).
    pub fn restrict(&self, idx: &[usize]) -> FlatComplex {
        FlatComplex {
            degrees: idx.iter().map(|&i| self.degrees[i]).collect(),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            d: self.d.submatrix(idx, idx),
        }
    }
}

pub fn split_degrees(degrees: &[i64]) -> Splitting {
    let mut by_degree: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    let mut pos = vec![0; degrees.len()];
    for (i, d) in degrees.iter().enumerate() {
        let v = by_degree.entry(*d).or_default();
        pos[i] = v.len();
        v.push(i);
    }
    Splitting { by_degree, pos }
}

/// A bounded chain complex: dimensions and differentials `d_n: X_n → X_{n−1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainComplex {
    dims: BTreeMap<i64, usize>,
    diffs: BTreeMap<i64, RationalMatrix>,
    labels: BTreeMap<i64, Vec<String>>,
}

impl ChainComplex {
    /// Validated constructor: shapes must match and `d² = 0`.
    pub fn new(
        dims: BTreeMap<i64, usize>,
        diffs: BTreeMap<i64, RationalMatrix>,
        labels: Option<BTreeMap<i64, Vec<String>>>,
    ) -> Result<Self> {
        let dim = |n: i64| dims.get(&n).copied().unwrap_or(0);
        for (n, d) in &diffs {
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
        for (n, d) in &diffs {
            if let Some(up) = diffs.get(&(n + 1)) {
                if !d.compose(up).is_zero() {
                    return Err(OpError::NotAComplex { degree: *n });
                }
            }
        }
        if let Some(l) = &labels {
            for (n, v) in l {
                if v.len() != dim(*n) {
                    return Err(OpError::ShapeMismatch(format!(
                        "{} labels for degree {n} of dimension {}",
                        v.len(),
                        dim(*n)
                    )));
                }
            }
        }
        Ok(Self::build(dims, diffs, labels))
    }

    /// Drops zero spaces and zero differentials; fills default labels.
    fn build(
        dims: BTreeMap<i64, usize>,
        diffs: BTreeMap<i64, RationalMatrix>,
        labels: Option<BTreeMap<i64, Vec<String>>>,
    ) -> Self {
        let dims: BTreeMap<i64, usize> = dims.into_iter().filter(|(_, v)| *v > 0).collect();
        let diffs = diffs.into_iter().filter(|(_, m)| !m.is_zero()).collect();
        let mut labels = labels.unwrap_or_default();
        labels.retain(|n, _| dims.contains_key(n));
        for (n, k) in &dims {
            labels
                .entry(*n)
                .or_insert_with(|| (0..*k).map(|i| format!("e{n}_{i}")).collect());
        }
        ChainComplex {
            dims,
            diffs,
            labels,
        }
    }

    pub fn zero() -> Self {
        Self::build(BTreeMap::new(), BTreeMap::new(), None)
    }

    pub fn dim(&self, n: i64) -> usize {
        self.dims.get(&n).copied().unwrap_or(0)
    }

    pub fn dims(&self) -> &BTreeMap<i64, usize> {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.dims.values().sum()
    }

    /// `d_n` as a `dim(n−1) × dim(n)` matrix (zero if not stored).
    pub fn d(&self, n: i64) -> RationalMatrix {
        self.diffs
            .get(&n)
            .cloned()
            .unwrap_or_else(|| RationalMatrix::zeros(self.dim(n - 1), self.dim(n)))
    }

    pub fn diffs(&self) -> &BTreeMap<i64, RationalMatrix> {
        &self.diffs
    }

    pub fn labels(&self, n: i64) -> &[String] {
        self.labels.get(&n).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Degrees carrying a nonzero space.
    pub fn degrees(&self) -> Vec<i64> {
        self.dims.keys().copied().collect()
    }

    /// The support window `[lo, hi]`, or `None` for the zero complex.
    pub fn window(&self) -> Option<(i64, i64)> {
        Some((*self.dims.keys().next()?, *self.dims.keys().next_back()?))
    }

    pub fn homology(&self) -> BTreeMap<i64, usize> {
        homology_dims(&self.dims, &self.diffs).expect("validated complex")
    }

    pub fn is_acyclic(&self) -> bool {
        self.homology().values().all(|h| *h == 0)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.dims
            .iter()
            .map(|(n, k)| {
                if n.rem_euclid(2) == 0 {
                    *k as i64
                } else {
                    -(*k as i64)
                }
            })
            .sum()
    }

    pub fn to_flat(&self) -> FlatComplex {
        let mut degrees = Vec::new();
        let mut labels = Vec::new();
        let mut offset = BTreeMap::new();
        for (n, k) in &self.dims {
            offset.insert(*n, degrees.len());
            degrees.extend(std::iter::repeat_n(*n, *k));
            labels.extend(self.labels(*n).iter().cloned());
        }
        let total = degrees.len();
        let mut t = Vec::new();
        for (n, m) in &self.diffs {
            let (co, ro) = (offset[n], offset[&(n - 1)]);
            for (r, c, x) in m.triplets() {
                t.push((r + ro, c + co, x));
            }
        }
        FlatComplex {
            degrees,
            labels,
            d: RationalMatrix::from_triplets(total, total, t).expect("in range"),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut dims = Map::new();
        for (n, k) in &self.dims {
            dims.insert(n.to_string(), json!(k));
        }
        let mut diff = Map::new();
        for (n, m) in &self.diffs {
            let entries: Vec<Value> = m
                .triplets()
                .into_iter()
                .map(|(r, c, x)| json!([r, c, format_q(&x)]))
                .collect();
            diff.insert(n.to_string(), Value::Array(entries));
        }
        let mut labels = Map::new();
        for (n, v) in &self.labels {
            labels.insert(n.to_string(), json!(v));
        }
        json!({"dims": dims, "diff": diff, "labels": labels})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let dims_v = v
            .get("dims")
            .and_then(|d| d.as_object())
            .ok_or_else(|| OpError::parse("dims", "expected an object degree → dimension"))?;
        let mut dims = BTreeMap::new();
        for (k, x) in dims_v {
            let n: i64 = k
                .parse()
                .map_err(|_| OpError::parse(format!("dims.{k}"), "degree must be an integer"))?;
            let d = x.as_u64().ok_or_else(|| {
                OpError::parse(format!("dims.{k}"), "dimension must be a natural number")
            })?;
            dims.insert(n, d as usize);
        }
        let mut diffs = BTreeMap::new();
        if let Some(dv) = v.get("diff") {
            let obj = dv
                .as_object()
                .ok_or_else(|| OpError::parse("diff", "expected an object degree → triplets"))?;
            for (k, entries) in obj {
                let n: i64 = k.parse().map_err(|_| {
                    OpError::parse(format!("diff.{k}"), "degree must be an integer")
                })?;
                let field = format!("diff.{k}");
                let t = parse_triplets(entries, &field)?;
                let rows = dims.get(&(n - 1)).copied().unwrap_or(0);
                let cols = dims.get(&n).copied().unwrap_or(0);
                let m = RationalMatrix::from_triplets(rows, cols, t)
                    .map_err(|e| OpError::parse(field.clone(), e.to_string()))?;
                diffs.insert(n, m);
            }
        }
        let labels = match v.get("labels") {
            None | Some(Value::Null) => None,
            Some(l) => {
                let obj = l
                    .as_object()
                    .ok_or_else(|| OpError::parse("labels", "expected an object degree → list"))?;
                let mut out = BTreeMap::new();
                for (k, xs) in obj {
                    let n: i64 = k.parse().map_err(|_| {
                        OpError::parse(format!("labels.{k}"), "degree must be an integer")
                    })?;
                    let arr = xs
                        .as_array()
                        .ok_or_else(|| OpError::parse(format!("labels.{k}"), "expected a list"))?;
                    out.insert(
                        n,
                        arr.iter()
                            .map(|s| {
                                s.as_str()
                                    .map(String::from)
                                    .unwrap_or_else(|| s.to_string())
                            })
                            .collect(),
                    );
                }
                Some(out)
            }
        };
        ChainComplex::new(dims, diffs, labels)
    }
}

/// Parses `[[r, c, "p/q"], …]`.
pub fn parse_triplets(v: &Value, field: &str) -> Result<Vec<(usize, usize, Q)>> {
    let arr = v
        .as_array()
        .ok_or_else(|| OpError::parse(field, "expected a list of [row, col, \"p/q\"]"))?;
    let mut t = Vec::new();
    for (k, e) in arr.iter().enumerate() {
        let f = format!("{field}[{k}]");
        let e = e
            .as_array()
            .filter(|e| e.len() == 3)
            .ok_or_else(|| OpError::parse(&f, "expected [row, col, \"p/q\"]"))?;
        let r = e[0]
            .as_u64()
            .ok_or_else(|| OpError::parse(&f, "row must be a natural number"))?;
        let c = e[1]
            .as_u64()
            .ok_or_else(|| OpError::parse(&f, "col must be a natural number"))?;
        let x = parse_rational_value(&e[2]).ok_or_else(|| OpError::parse(&f, "bad rational"))?;
        t.push((r as usize, c as usize, x));
    }
    Ok(t)
}

pub fn parse_rational_value(v: &Value) -> Option<Q> {
    match v {
        Value::String(s) => parse_q(s),
        Value::Number(n) => n.as_i64().map(q),
        _ => None,
    }
}

/// A degree-0 chain map, stored per degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainMap {
    pub source: ChainComplex,
    pub target: ChainComplex,
    components: BTreeMap<i64, RationalMatrix>,
}

impl ChainMap {
    pub fn new(
        source: ChainComplex,
        target: ChainComplex,
        components: BTreeMap<i64, RationalMatrix>,
    ) -> Result<Self> {
        for (n, f) in &components {
            if f.cols() != source.dim(*n) || f.rows() != target.dim(*n) {
                return Err(OpError::ShapeMismatch(format!(
                    "component in degree {n} is {}×{}, expected {}×{}",
                    f.rows(),
                    f.cols(),
                    target.dim(*n),
                    source.dim(*n)
                )));
            }
        }
        let m = ChainMap {
            source,
            target,
            components: components
                .into_iter()
                .filter(|(_, f)| !f.is_zero())
                .collect(),
        };
        if !m.commutes() {
            return Err(OpError::ShapeMismatch(
                "components do not commute with the differentials".into(),
            ));
        }
        Ok(m)
    }

    /// Builds from a flat matrix between flat complexes.
    pub fn from_flat(
        source: &FlatComplex,
        target: &FlatComplex,
        f: &RationalMatrix,
    ) -> Result<Self> {
        let ss = source.splitting();
        let ts = target.splitting();
        let mut comps = BTreeMap::new();
        for (j, col) in f.columns().iter().enumerate() {
            for (i, _) in col.iter() {
                if target.degrees[*i] != source.degrees[j] {
                    return Err(OpError::DegreeMismatch(format!(
                        "map sends degree {} to degree {}",
                        source.degrees[j], target.degrees[*i]
                    )));
                }
            }
        }
        for (deg, idx) in &ss.by_degree {
            if let Some(tidx) = ts.by_degree.get(deg) {
                comps.insert(*deg, f.submatrix(tidx, idx));
            }
        }
        ChainMap::new(source.to_complex(), target.to_complex(), comps)
    }

    pub fn identity(x: &ChainComplex) -> Self {
        let comps = x
            .dims()
            .iter()
            .map(|(n, k)| (*n, RationalMatrix::identity(*k)))
            .collect();
        ChainMap {
            source: x.clone(),
            target: x.clone(),
            components: comps,
        }
    }

    pub fn zero(source: &ChainComplex, target: &ChainComplex) -> Self {
        ChainMap {
            source: source.clone(),
            target: target.clone(),
            components: BTreeMap::new(),
        }
    }

    pub fn component(&self, n: i64) -> RationalMatrix {
        self.components
            .get(&n)
            .cloned()
            .unwrap_or_else(|| RationalMatrix::zeros(self.target.dim(n), self.source.dim(n)))
    }

    pub fn commutes(&self) -> bool {
        let mut degs: Vec<i64> = self.source.degrees();
        degs.extend(self.target.degrees());
        degs.sort();
        degs.dedup();
        degs.iter().all(|&n| {
            let lhs = self.target.d(n).compose(&self.component(n));
            let rhs = self.component(n - 1).compose(&self.source.d(n));
            lhs == rhs
        })
    }

    pub fn compose(&self, rhs: &ChainMap) -> ChainMap {
        let mut comps = BTreeMap::new();
        for n in rhs.source.degrees() {
            comps.insert(n, self.component(n).compose(&rhs.component(n)));
        }
        ChainMap {
            source: rhs.source.clone(),
            target: self.target.clone(),
            components: comps.into_iter().filter(|(_, f)| !f.is_zero()).collect(),
        }
    }
}

pub fn sphere(e_dim: usize, n: i64) -> ChainComplex {
    let mut dims = BTreeMap::new();
    dims.insert(n, e_dim);
    ChainComplex::build(dims, BTreeMap::new(), None)
}

/// `D^n(E)`: `E` in degrees `n` and `n − 1` with `d_n = id`.
pub fn disk(e_dim: usize, n: i64) -> ChainComplex {
    let mut dims = BTreeMap::new();
    dims.insert(n, e_dim);
    dims.insert(n - 1, e_dim);
    let mut diffs = BTreeMap::new();
    diffs.insert(n, RationalMatrix::identity(e_dim));
    ChainComplex::build(dims, diffs, None)
}

pub fn shift(x: &ChainComplex, n: i64) -> ChainComplex {
    let dims = x.dims.iter().map(|(i, k)| (i - n, *k)).collect();
    let s = sign_q(n);
    let diffs = x.diffs.iter().map(|(i, m)| (i - n, m.scaled(&s))).collect();
    let labels = x.labels.iter().map(|(i, l)| (i - n, l.clone())).collect();
    ChainComplex::build(dims, diffs, Some(labels))
}

pub fn direct_sum(x: &ChainComplex, y: &ChainComplex) -> ChainComplex {
    let mut degs: Vec<i64> = x.degrees();
    degs.extend(y.degrees());
    degs.sort();
    degs.dedup();
    let mut dims = BTreeMap::new();
    let mut labels = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    for &n in &degs {
        dims.insert(n, x.dim(n) + y.dim(n));
        let mut l = x.labels(n).to_vec();
        l.extend(y.labels(n).iter().cloned());
        labels.insert(n, l);
        let (dx, dy) = (x.d(n), y.d(n));
        diffs.insert(
            n,
            RationalMatrix::from_blocks(
                &[x.dim(n - 1), y.dim(n - 1)],
                &[x.dim(n), y.dim(n)],
                &[(0, 0, &dx), (1, 1, &dy)],
            ),
        );
    }
    ChainComplex::build(dims, diffs, Some(labels))
}

/// Mapping cone `cone(f)_n = X_{n−1} ⊕ Y_n`, differential `(−d^X, 0; −f, d^Y)`.
pub fn cone(f: &ChainMap) -> ChainComplex {
    cone_with_source_sign(f, -1)
}

/// Cone with a configurable sign on the `d^X` block; only `−1` yields a
/// complex in general. Exposed for fault-injection checks.
#[doc(hidden)]
pub fn cone_with_source_sign(f: &ChainMap, x_sign: i64) -> ChainComplex {
    let (x, y) = (&f.source, &f.target);
    let mut degs: Vec<i64> = x.degrees().iter().map(|n| n + 1).collect();
    degs.extend(y.degrees());
    degs.sort();
    degs.dedup();
    let mut dims = BTreeMap::new();
    let mut labels = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    let xs = q(x_sign);
    for &n in &degs {
        dims.insert(n, x.dim(n - 1) + y.dim(n));
        let mut l: Vec<String> = x.labels(n - 1).iter().map(|s| format!("s({s})")).collect();
        l.extend(y.labels(n).iter().cloned());
        labels.insert(n, l);
        let dx = x.d(n - 1).scaled(&xs);
        let fx = f.component(n - 1).neg();
        let dy = y.d(n);
        diffs.insert(
            n,
            RationalMatrix::from_blocks(
                &[x.dim(n - 2), y.dim(n - 1)],
                &[x.dim(n - 1), y.dim(n)],
                &[(0, 0, &dx), (1, 0, &fx), (1, 1, &dy)],
            ),
        );
    }
    ChainComplex::build(dims, diffs, Some(labels))
}

/// `Y → cone(f)` and `cone(f) → X[−1]`.
pub fn cone_sequence(f: &ChainMap) -> (ChainMap, ChainMap) {
    let c = cone(f);
    let (x, y) = (&f.source, &f.target);
    let xs = shift(x, -1);
    let mut inj = BTreeMap::new();
    let mut proj = BTreeMap::new();
    for n in c.degrees() {
        let (a, b) = (x.dim(n - 1), y.dim(n));
        let i = RationalMatrix::from_blocks(&[a, b], &[b], &[(1, 0, &RationalMatrix::identity(b))]);
        let p = RationalMatrix::from_blocks(&[a], &[a, b], &[(0, 0, &RationalMatrix::identity(a))]);
        inj.insert(n, i);
        proj.insert(n, p);
    }
    (
        ChainMap::new(y.clone(), c.clone(), inj).expect("injection is a chain map"),
        ChainMap::new(c, xs, proj).expect("projection is a chain map"),
    )
}

/// `τ_{≥n}`: degrees above `n` unchanged, `ker d_n` in degree `n`, zero below.
pub fn truncate_ge(x: &ChainComplex, n: i64) -> ChainComplex {
    let mut dims = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    let mut labels = BTreeMap::new();
    for m in x.degrees() {
        if m > n {
            dims.insert(m, x.dim(m));
            labels.insert(m, x.labels(m).to_vec());
            if m > n + 1 {
                diffs.insert(m, x.d(m));
            }
        }
    }
    let ker = kernel_basis(&x.d(n));
    if ker.dim() > 0 {
        dims.insert(n, ker.dim());
        if ker.dim() == x.dim(n) {
            labels.insert(n, x.labels(n).to_vec());
        } else {
            labels.insert(n, (0..ker.dim()).map(|k| format!("z{n}_{k}")).collect());
        }
        let kmat = ker.as_matrix();
        let cols: Vec<SparseVec> = x
            .d(n + 1)
            .columns()
            .iter()
            .map(|c| solve_in_columns(&kmat, c))
            .collect();
        diffs.insert(n + 1, RationalMatrix::from_columns(ker.dim(), cols));
    }
    ChainComplex::build(dims, diffs, Some(labels))
}

/// Coordinates of `v` in the columns of `basis` (columns independent, `v` in span).
pub fn solve_in_columns(basis: &RationalMatrix, v: &SparseVec) -> SparseVec {
    // reduce the augmented system [basis | v] via echelon forms of the transposed problem
    let k = basis.cols();
    let n = basis.rows();
    // unknowns c with basis·c = v; rows of [basis, −v] over k+1 columns
    let mut rows: Vec<SparseVec> = (0..n).map(|_| SparseVec::zero()).collect();
    let t = basis.transpose();
    for (i, row) in rows.iter_mut().enumerate() {
        let mut e: Vec<(usize, Q)> = t.column(i).iter().cloned().collect();
        let vi = v.get(i);
        if vi != q(0) {
            e.push((k, -vi));
        }
        *row = SparseVec::from_entries(e);
    }
    let r = Rref::from_vectors(k + 1, &rows);
    let mut sol: Vec<(usize, Q)> = Vec::new();
    for (row, p) in r.rows().iter().zip(r.pivots()) {
        assert!(*p < k, "vector not in the span of the basis");
        sol.push((*p, -row.get(k)));
    }
    SparseVec::from_entries(sol)
}

/// Graded tensor product with the Koszul sign on `id ⊗ d`.
pub fn tensor(x: &ChainComplex, y: &ChainComplex) -> ChainComplex {
    tensor_with_rule(x, y, true)
}

/// Tensor product; `koszul = false` drops the sign and is kept only for
/// fault-injection checks.
#[doc(hidden)]
pub fn tensor_with_rule(x: &ChainComplex, y: &ChainComplex, koszul: bool) -> ChainComplex {
    let xd = x.degrees();
    let yd = y.degrees();
    // basis index of (i, a, j, b) inside degree i + j
    let mut index: BTreeMap<(i64, usize, i64, usize), usize> = BTreeMap::new();
    let mut dims: BTreeMap<i64, usize> = BTreeMap::new();
    let mut labels: BTreeMap<i64, Vec<String>> = BTreeMap::new();
    let mut total: Vec<i64> = xd
        .iter()
        .flat_map(|i| yd.iter().map(move |j| i + j))
        .collect();
    total.sort();
    total.dedup();
    for &n in &total {
        let mut k = 0;
        let mut l = Vec::new();
        for &i in &xd {
            let j = n - i;
            if y.dim(j) == 0 {
                continue;
            }
            for a in 0..x.dim(i) {
                for b in 0..y.dim(j) {
                    index.insert((i, a, j, b), k);
                    l.push(format!("{}⊗{}", x.labels(i)[a], y.labels(j)[b]));
                    k += 1;
                }
            }
        }
        dims.insert(n, k);
        labels.insert(n, l);
    }
    let mut diffs = BTreeMap::new();
    for &n in &total {
        let mut t = Vec::new();
        for (&(i, a, j, b), &col) in index.iter().filter(|((i, _, j, _), _)| i + j == n) {
            for (r, c) in x.d(i).column(a).iter() {
                t.push((index[&(i - 1, *r, j, b)], col, c.clone()));
            }
            let s = if koszul { sign_q(i) } else { q(1) };
            for (r, c) in y.d(j).column(b).iter() {
                t.push((index[&(i, a, j - 1, *r)], col, c * &s));
            }
        }
        let m =
            RationalMatrix::from_triplets(dims.get(&(n - 1)).copied().unwrap_or(0), dims[&n], t)
                .expect("tensor entries in range");
        diffs.insert(n, m);
    }
    ChainComplex::build(dims, diffs, Some(labels))
}

/// Linear dual: `(X^∨)_n = (X_{−n})^∨`, `d^∨_n = −(−1)^n (d_{1−n})^T`.
pub fn dual(x: &ChainComplex) -> ChainComplex {
    let dims = x.dims.iter().map(|(n, k)| (-n, *k)).collect();
    let labels = x
        .labels
        .iter()
        .map(|(n, l)| (-n, l.iter().map(|s| format!("{s}^∨")).collect()))
        .collect();
    let mut diffs = BTreeMap::new();
    for (m, d) in &x.diffs {
        // d_m: X_m → X_{m−1}; its transpose maps (X_{m−1})^∨ = (X^∨)_{1−m} to (X^∨)_{−m}
        let n = 1 - m;
        diffs.insert(n, d.transpose().scaled(&-sign_q(n)));
    }
    ChainComplex::build(dims, diffs, Some(labels))
}

/// The canonical isomorphism `X → X^∨∨`, `x ↦ (φ ↦ (−1)^{|φ||x|} φ(x))`.
pub fn double_dual_iso(x: &ChainComplex) -> ChainMap {
    let dd = dual(&dual(x));
    let comps = x
        .dims()
        .iter()
        .map(|(n, k)| (*n, RationalMatrix::identity(*k).scaled(&sign_q(n * n))))
        .collect();
    ChainMap::new(x.clone(), dd, comps).expect("double dual identification is a chain map")
}

pub fn is_quasi_iso(f: &ChainMap) -> bool {
    cone(f).is_acyclic()
}

/// Independent check: `f` induces isomorphisms on every homology group,
/// computed from cycles and boundaries directly.
pub fn induces_homology_iso(f: &ChainMap) -> bool {
    let mut degs = f.source.degrees();
    degs.extend(f.target.degrees());
    degs.sort();
    degs.dedup();
    for n in degs {
        let zx = kernel_basis(&f.source.d(n));
        let by = image_basis(&f.target.d(n + 1));
        let zy = kernel_basis(&f.target.d(n));
        let hx = zx.dim() - rank(&f.source.d(n + 1));
        let hy = zy.dim() - by.dim();
        if hx != hy {
            return false;
        }
        let fn_ = f.component(n);
        let mut span: Vec<SparseVec> = zx.vectors.iter().map(|v| fn_.apply(v)).collect();
        span.extend(by.vectors.iter().cloned());
        let r = Rref::from_vectors(f.target.dim(n), &span).rank();
        if r - by.dim() != hy {
            return false;
        }
    }
    true
}

/// Quotient of a complex by the subcomplex spanned by `sub` (vectors in the
/// flat basis). Returns the quotient and the projection matrix.
pub fn quotient_complex(x: &FlatComplex, sub: &[SparseVec]) -> (FlatComplex, RationalMatrix) {
    let r = Rref::from_vectors(x.dim(), sub);
    let pivots: std::collections::HashSet<usize> = r.pivots().iter().copied().collect();
    let keep: Vec<usize> = (0..x.dim()).filter(|i| !pivots.contains(i)).collect();
    let mut pos = vec![usize::MAX; x.dim()];
    for (k, i) in keep.iter().enumerate() {
        pos[*i] = k;
    }
    // projection: reduce modulo the subspace, read off the kept coordinates
    let proj_cols: Vec<SparseVec> = (0..x.dim())
        .map(|i| {
            let v = r.reduce(&SparseVec::unit(i));
            SparseVec::from_entries(v.iter().map(|(j, c)| (pos[*j], c.clone())).collect())
        })
        .collect();
    let proj = RationalMatrix::from_columns(keep.len(), proj_cols);
    let dq_cols: Vec<SparseVec> = keep.iter().map(|&i| proj.apply(x.d.column(i))).collect();
    let qc = FlatComplex {
        degrees: keep.iter().map(|&i| x.degrees[i]).collect(),
        labels: keep.iter().map(|&i| x.labels[i].clone()).collect(),
        d: RationalMatrix::from_columns(keep.len(), dq_cols),
    };
    (qc, proj)
}

/// A random bounded complex in degrees `lo..=hi`: a sum of at most
/// `max_pieces` spheres and disks, conjugated by a random invertible matrix
/// in each degree.
pub fn random_complex<R: rand::Rng>(
    rng: &mut R,
    lo: i64,
    hi: i64,
    max_pieces: usize,
) -> ChainComplex {
    let mut x = ChainComplex::zero();
    for _ in 0..rng.gen_range(0..=max_pieces) {
        let n = rng.gen_range(lo..=hi);
        let piece = if n > lo && rng.gen_bool(0.5) {
            disk(1, n)
        } else {
            sphere(1, n)
        };
        x = direct_sum(&x, &piece);
    }
    let changes: BTreeMap<i64, (RationalMatrix, RationalMatrix)> = x
        .degrees()
        .into_iter()
        .map(|n| {
            let p = random_invertible(rng, x.dim(n), 2);
            let pinv = inverse(&p).expect("invertible");
            (n, (p, pinv))
        })
        .collect();
    let mut diffs = BTreeMap::new();
    for (n, d) in x.diffs() {
        let (p_low, _) = &changes[&(n - 1)];
        let (_, pinv) = &changes[n];
        diffs.insert(*n, p_low.compose(d).compose(pinv));
    }
    ChainComplex::new(x.dims().clone(), diffs, None).expect("conjugate of a complex")
}

/// A random chain endomorphism `c·id + dh + hd` for a random degree-1 map `h`.
pub fn random_endomorphism<R: rand::Rng>(rng: &mut R, x: &ChainComplex) -> ChainMap {
    let c = q(rng.gen_range(-2..=2));
    let h: BTreeMap<i64, RationalMatrix> = x
        .degrees()
        .into_iter()
        .map(|n| (n, random_matrix(rng, x.dim(n + 1), x.dim(n), 0.5, 2)))
        .collect();
    let hn = |n: i64| {
        h.get(&n)
            .cloned()
            .unwrap_or_else(|| RationalMatrix::zeros(x.dim(n + 1), x.dim(n)))
    };
    let comps = x
        .degrees()
        .into_iter()
        .map(|n| {
            let m = RationalMatrix::identity(x.dim(n))
                .scaled(&c)
                .add(&x.d(n + 1).compose(&hn(n)))
                .add(&hn(n - 1).compose(&x.d(n)));
            (n, m)
        })
        .collect();
    ChainMap::new(x.clone(), x.clone(), comps).expect("chain homotopic to a scalar")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d1() -> ChainComplex {
        disk(1, 1)
    }

    #[test]
    fn sphere_and_disk() {
        assert_eq!(sphere(1, 0).dims().clone(), BTreeMap::from([(0, 1)]));
        let d = disk(2, 3);
        assert_eq!(d.dims().clone(), BTreeMap::from([(2, 2), (3, 2)]));
        assert_eq!(d.d(3), RationalMatrix::identity(2));
        assert!(d.is_acyclic());
    }

    #[test]
    fn shift_examples() {
        let s = shift(&sphere(1, 0), 1);
        assert_eq!(s.dim(-1), 1);
        assert_eq!(shift(&d1(), 0), d1());
        let sd = shift(&d1(), 1);
        assert_eq!(sd.d(0), RationalMatrix::identity(1).neg());
    }

    #[test]
    fn cone_examples() {
        let s = sphere(1, 0);
        assert!(cone(&ChainMap::identity(&s)).is_acyclic());
        let x = disk(1, 2);
        let y = sphere(2, 0);
        let c = cone(&ChainMap::zero(&x, &y));
        let hx = shift(&x, -1).homology();
        let hy = y.homology();
        for (n, h) in c.homology() {
            assert_eq!(
                h,
                hx.get(&n).copied().unwrap_or(0) + hy.get(&n).copied().unwrap_or(0)
            );
        }
        let (i, p) = cone_sequence(&ChainMap::identity(&d1()));
        assert!(i.commutes() && p.commutes());
    }

    #[test]
    fn truncation_of_disk_is_zero() {
        let t = truncate_ge(&d1(), 1);
        assert_eq!(t.total_dim(), 0);
        let s = sphere(2, 0);
        assert_eq!(truncate_ge(&s, 0), s);
    }

    #[test]
    fn tensor_examples() {
        let t = tensor(&sphere(2, 1), &sphere(3, 1));
        assert_eq!(t.dim(2), 6);
        let dd = tensor(&d1(), &d1());
        assert_eq!(dd.total_dim(), 4);
        assert!(dd.is_acyclic());
        let x = disk(2, 1);
        let u = tensor(&sphere(1, 0), &x);
        assert_eq!(u.dims(), x.dims());
        assert_eq!(u.d(1), x.d(1));
    }

    #[test]
    fn tensor_without_koszul_sign_breaks() {
        let dims = BTreeMap::from([(0, 1), (1, 1)]);
        let mut diffs = BTreeMap::new();
        diffs.insert(1, RationalMatrix::identity(1));
        let x = ChainComplex::new(dims, diffs, None).unwrap();
        let bad = tensor_with_rule(&x, &x, false);
        let flat = bad.to_flat();
        assert!(flat.validate().is_err());
    }

    #[test]
    fn dual_examples() {
        assert_eq!(
            dual(&sphere(3, 2)).dims().clone(),
            BTreeMap::from([(-2, 3)])
        );
        let x = disk(2, 1);
        assert!(double_dual_iso(&x).commutes());
    }

    #[test]
    fn quasi_iso_examples() {
        let s = sphere(1, 0);
        assert!(is_quasi_iso(&ChainMap::identity(&s)));
        assert!(is_quasi_iso(&ChainMap::zero(&ChainComplex::zero(), &d1())));
        assert!(!is_quasi_iso(&ChainMap::zero(&ChainComplex::zero(), &s)));
    }

    #[test]
    fn json_round_trip() {
        let x = disk(2, 1);
        let j = x.to_json();
        assert_eq!(ChainComplex::from_json(&j).unwrap(), x);
        let bad = serde_json::json!({"dims": {"0": 1, "1": 1, "2": 1},
            "diff": {"1": [[0,0,"1"]], "2": [[0,0,"1"]]}});
        assert_eq!(
            ChainComplex::from_json(&bad),
            Err(OpError::NotAComplex { degree: 1 })
        );
    }
}
