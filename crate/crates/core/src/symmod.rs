//! Σ-modules in chain complexes, in the species model.
//!
//! Arity `n` carries a flat dg basis and a left relabelling action `L` of
//! Σ_n given by the images of the adjacent transpositions. The right action
//! is `ρ(σ) = L(σ⁻¹)`. Composite products use normal forms:
//! a basis element of `(M∘N)(n)` is a set partition of `{0..n}` with blocks
//! listed by minimum, an outer basis element of `M(k)` and one inner basis
//! element of `N(|B_j|)` per block, whose inputs are the block's labels in
//! increasing order.

use std::collections::HashMap;
use std::sync::Arc;

use num_traits::Zero;
use serde_json::{json, Map, Value};

use crate::complexes::{parse_triplets, ChainComplex, FlatComplex};
use crate::error::{OpError, Result};
use crate::exactla::{format_q, q, qr, sign_q, RationalMatrix, Rref, SparseVec, VecAcc, Q};
use crate::perm::{self, koszul_sign, Perm};

/// One arity of a Σ-module.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymComponent {
    pub arity: usize,
    pub space: FlatComplex,
    /// `L(s_i)` for `i = 0..arity−1`, `s_i` swapping `i` and `i+1`.
    pub gens: Vec<RationalMatrix>,
    /// Weight grading (zero when not meaningful).
    pub weights: Vec<usize>,
}

impl SymComponent {
    pub fn zero(arity: usize) -> Self {
        SymComponent {
            arity,
            space: FlatComplex::zero(),
            gens: vec![RationalMatrix::zeros(0, 0); arity.saturating_sub(1)],
            weights: vec![],
        }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn degree(&self, i: usize) -> i64 {
        self.space.degrees[i]
    }

    /// `L(p)·v`.
    pub fn act(&self, p: &[usize], v: &SparseVec) -> SparseVec {
        let word = perm::reduced_word(p);
        let mut out = v.clone();
        for &i in word.iter().rev() {
            out = self.gens[i].apply(&out);
        }
        out
    }

    pub fn act_matrix(&self, p: &[usize]) -> RationalMatrix {
        let word = perm::reduced_word(p);
        let mut m = RationalMatrix::identity(self.dim());
        for &i in &word {
            m = m.compose(&self.gens[i]);
        }
        m
    }

    /// Right action `ρ(σ) = L(σ⁻¹)`.
    pub fn right_action_matrix(&self, p: &[usize]) -> RationalMatrix {
        self.act_matrix(&perm::inverse(p))
    }

    pub fn complex(&self) -> ChainComplex {
        self.space.to_complex()
    }

    /// Coxeter relations, degree preservation and compatibility with `d`.
    pub fn validate(&self) -> Result<()> {
        let n = self.arity;
        let dim = self.dim();
        if self.gens.len() != n.saturating_sub(1) {
            return Err(OpError::ShapeMismatch(format!(
                "arity {n} needs {} generators, found {}",
                n.saturating_sub(1),
                self.gens.len()
            )));
        }
        if self.weights.len() != dim {
            return Err(OpError::ShapeMismatch("weight list length".into()));
        }
        self.space.validate()?;
        let id = RationalMatrix::identity(dim);
        for (i, g) in self.gens.iter().enumerate() {
            if g.rows() != dim || g.cols() != dim {
                return Err(OpError::ShapeMismatch(format!(
                    "generator {i} has wrong shape"
                )));
            }
            for (j, col) in g.columns().iter().enumerate() {
                for (r, _) in col.iter() {
                    if self.space.degrees[*r] != self.space.degrees[j] {
                        return Err(OpError::DegreeMismatch(format!(
                            "generator {i} does not preserve degrees"
                        )));
                    }
                }
            }
            if g.compose(g) != id {
                return Err(OpError::NotEquivariant(format!("s_{i}² ≠ id in arity {n}")));
            }
            if g.compose(&self.space.d) != self.space.d.compose(g) {
                return Err(OpError::NotEquivariant(format!(
                    "s_{i} does not commute with d in arity {n}"
                )));
            }
            for (j, h) in self.gens.iter().enumerate() {
                let gh = g.compose(h);
                if j == i + 1 {
                    if gh.compose(&gh).compose(&gh) != id {
                        return Err(OpError::NotEquivariant(format!("braid relation at {i}")));
                    }
                } else if j > i + 1 && gh != h.compose(g) {
                    return Err(OpError::NotEquivariant(format!(
                        "s_{i}, s_{j} do not commute"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A Σ-module truncated at `max_arity`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymModule {
    pub name: String,
    comps: Vec<SymComponent>,
}

impl SymModule {
    pub fn new(name: impl Into<String>, comps: Vec<SymComponent>) -> Result<Self> {
        for (n, c) in comps.iter().enumerate() {
            if c.arity != n {
                return Err(OpError::ShapeMismatch(format!(
                    "component {n} has arity {}",
                    c.arity
                )));
            }
            c.validate()?;
        }
        Ok(SymModule {
            name: name.into(),
            comps,
        })
    }

    /// Construction without validation, for builders whose output is
    /// correct by construction (validated in tests).
    pub(crate) fn new_unchecked(name: impl Into<String>, comps: Vec<SymComponent>) -> Self {
        SymModule {
            name: name.into(),
            comps,
        }
    }

    pub fn max_arity(&self) -> usize {
        self.comps.len() - 1
    }

    pub fn comp(&self, n: usize) -> &SymComponent {
        &self.comps[n]
    }

    pub fn comps(&self) -> &[SymComponent] {
        &self.comps
    }

    pub fn dim(&self, n: usize) -> usize {
        self.comps.get(n).map_or(0, |c| c.dim())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.comps.iter().map(|c| c.dim()).collect()
    }

    pub fn is_reduced(&self) -> bool {
        self.dim(0) == 0
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.comps {
            c.validate()?;
        }
        Ok(())
    }

    pub fn truncated(&self, max_arity: usize) -> SymModule {
        let mut comps: Vec<SymComponent> = self.comps.iter().take(max_arity + 1).cloned().collect();
        while comps.len() < max_arity + 1 {
            comps.push(SymComponent::zero(comps.len()));
        }
        SymModule {
            name: self.name.clone(),
            comps,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Replaces every differential (same basis and action).
    pub fn with_differentials(&self, ds: Vec<RationalMatrix>) -> SymModule {
        let comps = self
            .comps
            .iter()
            .zip(ds)
            .map(|(c, d)| {
                let mut c = c.clone();
                c.space.d = d;
                c
            })
            .collect();
        SymModule {
            name: self.name.clone(),
            comps,
        }
    }

    /// The sub-Σ-module on the given basis indices per arity; the span must
    /// be stable under the action and the differential.
    pub fn restrict(&self, keep: &[Vec<usize>]) -> SymModule {
        let comps = self
            .comps
            .iter()
            .zip(keep)
            .map(|(c, idx)| SymComponent {
                arity: c.arity,
                space: c.space.restrict(idx),
                gens: c.gens.iter().map(|g| g.submatrix(idx, idx)).collect(),
                weights: idx.iter().map(|&i| c.weights[i]).collect(),
            })
            .collect();
        SymModule {
            name: self.name.clone(),
            comps,
        }
    }

    pub fn to_json(&self) -> Value {
        let mut arities = Map::new();
        for c in &self.comps {
            let cc = c.space.to_complex();
            let mut v = cc.to_json();
            // generators act on the degree-sorted basis of the complex
            let order = degree_sorted_order(&c.space.degrees);
            let gens: Vec<Value> = c
                .gens
                .iter()
                .map(|g| {
                    let m = g.submatrix(&order, &order);
                    Value::Array(
                        m.triplets()
                            .into_iter()
                            .map(|(r, col, x)| json!([r, col, format_q(&x)]))
                            .collect(),
                    )
                })
                .collect();
            v["generators"] = Value::Array(gens);
            arities.insert(c.arity.to_string(), v);
        }
        json!({"name": self.name, "max_arity": self.max_arity(), "arities": arities})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let max = v
            .get("max_arity")
            .and_then(|x| x.as_u64())
            .ok_or_else(|| OpError::parse("max_arity", "expected a natural number"))?
            as usize;
        let name = v
            .get("name")
            .and_then(|x| x.as_str())
            .unwrap_or("M")
            .to_string();
        let ar = v
            .get("arities")
            .and_then(|x| x.as_object())
            .ok_or_else(|| OpError::parse("arities", "expected an object arity → component"))?;
        let mut comps = Vec::new();
        for n in 0..=max {
            match ar.get(&n.to_string()) {
                None => comps.push(SymComponent::zero(n)),
                Some(cv) => {
                    let cc = ChainComplex::from_json(cv)?;
                    let space = cc.to_flat();
                    let dim = space.dim();
                    let gv = cv
                        .get("generators")
                        .and_then(|g| g.as_array())
                        .cloned()
                        .unwrap_or_default();
                    if gv.len() != n.saturating_sub(1) {
                        return Err(OpError::parse(
                            format!("arities.{n}.generators"),
                            format!("expected {} generator matrices", n.saturating_sub(1)),
                        ));
                    }
                    let mut gens = Vec::new();
                    for (i, g) in gv.iter().enumerate() {
                        let f = format!("arities.{n}.generators[{i}]");
                        let t = parse_triplets(g, &f)?;
                        gens.push(
                            RationalMatrix::from_triplets(dim, dim, t)
                                .map_err(|e| OpError::parse(&f, e.to_string()))?,
                        );
                    }
                    let c = SymComponent {
                        arity: n,
                        space,
                        gens,
                        weights: vec![0; dim],
                    };
                    c.validate()
                        .map_err(|e| OpError::parse(format!("arities.{n}"), e.to_string()))?;
                    comps.push(c);
                }
            }
        }
        SymModule::new(name, comps)
    }
}

fn degree_sorted_order(degrees: &[i64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..degrees.len()).collect();
    idx.sort_by_key(|&i| (degrees[i], i));
    idx
}

// ---------------------------------------------------------------------------
// elementary Σ-modules

/// The unit Σ-module: ℚ in arity 1.
pub fn unit_module(max_arity: usize) -> SymModule {
    let comps = (0..=max_arity)
        .map(|n| {
            if n == 1 {
                one_dim(1, 0, "id", 1, 0)
            } else {
                SymComponent::zero(n)
            }
        })
        .collect();
    SymModule::new_unchecked("I", comps)
}

pub fn zero_module(max_arity: usize) -> SymModule {
    SymModule::new_unchecked("0", (0..=max_arity).map(SymComponent::zero).collect())
}

/// A one-dimensional component on which each `s_i` acts by `gen_sign`.
pub fn one_dim(
    arity: usize,
    degree: i64,
    label: &str,
    gen_sign: i64,
    weight: usize,
) -> SymComponent {
    SymComponent {
        arity,
        space: FlatComplex {
            degrees: vec![degree],
            labels: vec![label.to_string()],
            d: RationalMatrix::zeros(1, 1),
        },
        gens: (0..arity.saturating_sub(1))
            .map(|_| RationalMatrix::identity(1).scaled(&q(gen_sign)))
            .collect(),
        weights: vec![weight],
    }
}

/// The regular representation ℚ[Σ_n]: basis = words (one-line notation of
/// permutations), `L(g)` relabels letters.
pub fn regular_component(n: usize, weight: usize) -> SymComponent {
    let perms = perm::all_perms(n);
    let index: HashMap<Perm, usize> = perms
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, p)| (p, i))
        .collect();
    let gens = (0..n.saturating_sub(1))
        .map(|i| {
            let s = perm::adjacent(n, i);
            let cols = perms
                .iter()
                .map(|w| SparseVec::unit(index[&perm::compose(&s, w)]))
                .collect();
            RationalMatrix::from_columns(perms.len(), cols)
        })
        .collect();
    SymComponent {
        arity: n,
        space: FlatComplex {
            degrees: vec![0; perms.len()],
            labels: perms.iter().map(|w| word_label(w)).collect(),
            d: RationalMatrix::zeros(perms.len(), perms.len()),
        },
        gens,
        weights: vec![weight; perms.len()],
    }
}

pub fn word_label(w: &[usize]) -> String {
    w.iter()
        .map(|x| format!("x{}", x + 1))
        .collect::<Vec<_>>()
        .join("")
}

pub fn direct_sum(a: &SymModule, b: &SymModule) -> SymModule {
    let max = a.max_arity().min(b.max_arity());
    let comps = (0..=max)
        .map(|n| {
            let (x, y) = (a.comp(n), b.comp(n));
            let (dx, dy) = (x.dim(), y.dim());
            let mut degrees = x.space.degrees.clone();
            degrees.extend(&y.space.degrees);
            let mut labels = x.space.labels.clone();
            labels.extend(y.space.labels.iter().cloned());
            let mut weights = x.weights.clone();
            weights.extend(&y.weights);
            let d = RationalMatrix::from_blocks(
                &[dx, dy],
                &[dx, dy],
                &[(0, 0, &x.space.d), (1, 1, &y.space.d)],
            );
            let gens = x
                .gens
                .iter()
                .zip(&y.gens)
                .map(|(g, h)| {
                    RationalMatrix::from_blocks(&[dx, dy], &[dx, dy], &[(0, 0, g), (1, 1, h)])
                })
                .collect();
            SymComponent {
                arity: n,
                space: FlatComplex { degrees, labels, d },
                gens,
                weights,
            }
        })
        .collect();
    SymModule::new_unchecked(format!("{}⊕{}", a.name, b.name), comps)
}

// ---------------------------------------------------------------------------
// coinvariants

/// Basis of the image of a (twisted) averaging idempotent.
#[derive(Clone, Debug)]
pub struct CoinvBasis {
    pub e: RationalMatrix,
    rref: Rref,
}

impl CoinvBasis {
    pub fn dim(&self) -> usize {
        self.rref.rank()
    }

    /// Representatives inside the image of `e`.
    pub fn reps(&self) -> &[SparseVec] {
        self.rref.rows()
    }

    /// Coordinates of the class of `x`.
    pub fn coords(&self, x: &SparseVec) -> SparseVec {
        self.rref.coords_unchecked(&self.e.apply(x))
    }
}

/// `(1/m!) Σ χ(σ) L(σ)` over permutations of the consecutive positions
/// `start..start+m`, with `χ` the sign character when `signed`.
/// Permutations are enumerated in Steinhaus–Johnson–Trotter order, so each
/// step multiplies by a single generator.
pub fn run_average(comp: &SymComponent, start: usize, m: usize, signed: bool) -> RationalMatrix {
    let dim = comp.dim();
    if m <= 1 {
        return RationalMatrix::identity(dim);
    }
    let (_, swaps) = perm::sjt_perms(m);
    let mut cur = RationalMatrix::identity(dim);
    let mut acc = RationalMatrix::identity(dim);
    let mut chi = 1i64;
    for s in swaps {
        cur = cur.compose(&comp.gens[start + s]);
        if signed {
            chi = -chi;
        }
        acc = acc.add_scaled(&cur, &q(chi));
    }
    acc.scaled(&qr(1, perm::factorial(m) as i64))
}

/// Twisted averaging idempotent for a Young subgroup given by runs
/// `(start, length, signed)`.
pub fn young_idempotent(comp: &SymComponent, runs: &[(usize, usize, bool)]) -> RationalMatrix {
    let mut e = RationalMatrix::identity(comp.dim());
    for &(s, m, signed) in runs {
        if m > 1 {
            e = e.compose(&run_average(comp, s, m, signed));
        }
    }
    e
}

pub fn coinv_basis(comp: &SymComponent, runs: &[(usize, usize, bool)]) -> CoinvBasis {
    let e = young_idempotent(comp, runs);
    let rref = Rref::from_vectors(comp.dim(), e.columns());
    CoinvBasis { e, rref }
}

/// Σ_n-coinvariants of a component, realized as the image of the averaging
/// idempotent; returns the complex and the projection.
pub fn coinvariants(comp: &SymComponent) -> (FlatComplex, RationalMatrix) {
    let cb = coinv_basis(comp, &[(0, comp.arity, false)]);
    let reps = cb.reps().to_vec();
    let degrees: Vec<i64> = reps
        .iter()
        .map(|r| comp.space.degrees[r.entries()[0].0])
        .collect();
    let labels = (0..reps.len()).map(|k| format!("[{k}]")).collect();
    let d_cols = reps
        .iter()
        .map(|r| cb.coords(&comp.space.d.apply(r)))
        .collect();
    let proj_cols = (0..comp.dim())
        .map(|i| cb.coords(&SparseVec::unit(i)))
        .collect();
    (
        FlatComplex {
            degrees,
            labels,
            d: RationalMatrix::from_columns(reps.len(), d_cols),
        },
        RationalMatrix::from_columns(reps.len(), proj_cols),
    )
}

/// Oracle for the averaging idempotent: sums `L(σ)` over all permutations
/// listed explicitly.
pub fn averaging_oracle(comp: &SymComponent) -> RationalMatrix {
    let n = comp.arity;
    let mut acc = RationalMatrix::zeros(comp.dim(), comp.dim());
    for p in perm::all_perms(n) {
        acc = acc.add(&comp.act_matrix(&p));
    }
    acc.scaled(&qr(1, perm::factorial(n) as i64))
}

// ---------------------------------------------------------------------------
// composite product

/// Normal-form basis element of a composite product.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompElem {
    pub blocks: Vec<Vec<usize>>,
    pub outer: usize,
    pub inner: Vec<usize>,
}

/// `M ∘ N` with its normal-form basis, optionally restricted by a Σ- and
/// d-stable filter on basis elements.
#[derive(Clone, Debug)]
pub struct Composite {
    pub outer: Arc<SymModule>,
    pub inner: Arc<SymModule>,
    pub module: SymModule,
    elems: Vec<Vec<CompElem>>,
    index: Vec<HashMap<CompElem, usize>>,
}

pub type ElemFilter<'a> = &'a (dyn Fn(&CompElem) -> bool + Sync);

impl Composite {
    pub fn new(outer: Arc<SymModule>, inner: Arc<SymModule>, max_arity: usize) -> Result<Self> {
        Self::build(outer, inner, max_arity, None)
    }

    pub fn build(
        outer: Arc<SymModule>,
        inner: Arc<SymModule>,
        max_arity: usize,
        filter: Option<ElemFilter>,
    ) -> Result<Self> {
        if !inner.is_reduced() {
            return Err(OpError::NotReduced);
        }
        let avail = outer.max_arity().min(inner.max_arity());
        if max_arity > avail {
            return Err(OpError::ArityOverflow {
                requested: max_arity,
                available: avail,
            });
        }
        let mut elems = Vec::with_capacity(max_arity + 1);
        let mut index = Vec::with_capacity(max_arity + 1);
        for n in 0..=max_arity {
            let mut list = Vec::new();
            for blocks in perm::set_partitions(n) {
                let k = blocks.len();
                if outer.dim(k) == 0 {
                    continue;
                }
                let sizes: Vec<usize> = blocks.iter().map(|b| inner.dim(b.len())).collect();
                if sizes.contains(&0) {
                    continue;
                }
                for a in 0..outer.dim(k) {
                    for_each_tuple(&sizes, |tuple| {
                        let e = CompElem {
                            blocks: blocks.clone(),
                            outer: a,
                            inner: tuple.to_vec(),
                        };
                        if filter.is_none_or(|f| f(&e)) {
                            list.push(e);
                        }
                    });
                }
            }
            let idx: HashMap<CompElem, usize> = list
                .iter()
                .cloned()
                .enumerate()
                .map(|(i, e)| (e, i))
                .collect();
            elems.push(list);
            index.push(idx);
        }
        let mut c = Composite {
            outer: outer.clone(),
            inner: inner.clone(),
            module: zero_module(max_arity),
            elems,
            index,
        };
        let name = format!("({})∘({})", outer.name, inner.name);
        let comps: Vec<SymComponent> = {
            use rayon::prelude::*;
            (0..=max_arity)
                .into_par_iter()
                .map(|n| c.build_component(n))
                .collect()
        };
        c.module = SymModule::new_unchecked(name, comps);
        Ok(c)
    }

    fn build_component(&self, n: usize) -> SymComponent {
        let list = &self.elems[n];
        let degrees: Vec<i64> = list.iter().map(|e| self.elem_degree(e)).collect();
        let weights: Vec<usize> = list.iter().map(|e| self.elem_weight(e)).collect();
        let labels: Vec<String> = list.iter().map(|e| self.elem_label(e)).collect();
        let d_cols: Vec<SparseVec> = list.iter().map(|e| self.internal_d(n, e)).collect();
        let gens = (0..n.saturating_sub(1))
            .map(|i| {
                let cols = list
                    .iter()
                    .map(|e| self.relabel_adjacent(n, e, i))
                    .collect();
                RationalMatrix::from_columns(list.len(), cols)
            })
            .collect();
        SymComponent {
            arity: n,
            space: FlatComplex {
                degrees,
                labels,
                d: RationalMatrix::from_columns(list.len(), d_cols),
            },
            gens,
            weights,
        }
    }

    pub fn elems(&self, n: usize) -> &[CompElem] {
        &self.elems[n]
    }

    pub fn index_of(&self, n: usize, e: &CompElem) -> Option<usize> {
        self.index[n].get(e).copied()
    }

    pub fn max_arity(&self) -> usize {
        self.elems.len() - 1
    }

    pub fn elem_degree(&self, e: &CompElem) -> i64 {
        let k = e.blocks.len();
        let mut d = self.outer.comp(k).degree(e.outer);
        for (b, &x) in e.blocks.iter().zip(&e.inner) {
            d += self.inner.comp(b.len()).degree(x);
        }
        d
    }

    pub fn elem_weight(&self, e: &CompElem) -> usize {
        let k = e.blocks.len();
        let mut w = self.outer.comp(k).weights[e.outer];
        for (b, &x) in e.blocks.iter().zip(&e.inner) {
            w += self.inner.comp(b.len()).weights[x];
        }
        w
    }

    pub fn elem_label(&self, e: &CompElem) -> String {
        let k = e.blocks.len();
        let parts: Vec<String> = e
            .blocks
            .iter()
            .zip(&e.inner)
            .map(|(b, &x)| {
                let lab: Vec<String> = b.iter().map(|i| (i + 1).to_string()).collect();
                format!(
                    "{}{{{}}}",
                    self.inner.comp(b.len()).space.labels[x],
                    lab.join(",")
                )
            })
            .collect();
        format!(
            "{}({})",
            self.outer.comp(k).space.labels[e.outer],
            parts.join(", ")
        )
    }

    /// `d_M ∘ Id + Id ∘' d_N`.
    fn internal_d(&self, n: usize, e: &CompElem) -> SparseVec {
        let k = e.blocks.len();
        let oc = self.outer.comp(k);
        let mut acc = VecAcc::new();
        for (a, c) in oc.space.d.column(e.outer).iter() {
            let mut e2 = e.clone();
            e2.outer = *a;
            acc.add(self.index[n][&e2], c.clone());
        }
        let mut deg = oc.degree(e.outer);
        for j in 0..k {
            let ic = self.inner.comp(e.blocks[j].len());
            let s = sign_q(deg);
            for (b, c) in ic.space.d.column(e.inner[j]).iter() {
                let mut e2 = e.clone();
                e2.inner[j] = *b;
                if let Some(&t) = self.index[n].get(&e2) {
                    acc.add(t, c * &s);
                }
            }
            deg += ic.degree(e.inner[j]);
        }
        acc.finish()
    }

    fn relabel_adjacent(&self, n: usize, e: &CompElem, i: usize) -> SparseVec {
        let swap = |x: usize| {
            if x == i {
                i + 1
            } else if x == i + 1 {
                i
            } else {
                x
            }
        };
        let mut factors = Vec::with_capacity(e.blocks.len());
        for (b, &x) in e.blocks.iter().zip(&e.inner) {
            let ic = self.inner.comp(b.len());
            let nb: Vec<usize> = {
                let mut v: Vec<usize> = b.iter().map(|&y| swap(y)).collect();
                v.sort();
                v
            };
            let v = match (
                b.iter().position(|&y| y == i),
                b.iter().position(|&y| y == i + 1),
            ) {
                (Some(p), Some(p2)) => {
                    debug_assert_eq!(p + 1, p2);
                    ic.gens[p].apply(&SparseVec::unit(x))
                }
                _ => SparseVec::unit(x),
            };
            factors.push((nb, v));
        }
        self.normalize(n, &SparseVec::unit(e.outer), &factors)
    }

    /// Normal form of `μ ⊗ ν_1 ⊗ … ⊗ ν_k` where factor `j` (inner vector
    /// on the labels `blocks_j`, sorted) sits in outer slot `j`.
    pub fn normalize(
        &self,
        n: usize,
        outer_vec: &SparseVec,
        factors: &[(Vec<usize>, SparseVec)],
    ) -> SparseVec {
        let k = factors.len();
        if outer_vec.is_zero() || factors.iter().any(|(_, v)| v.is_zero()) {
            return SparseVec::zero();
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&j| factors[j].0[0]);
        let tau_inv = perm::inverse(&order);
        let oc = self.outer.comp(k);
        let outer_new = if order.iter().enumerate().all(|(a, &b)| a == b) {
            outer_vec.clone()
        } else {
            oc.act(&tau_inv, outer_vec)
        };
        let blocks: Vec<Vec<usize>> = order.iter().map(|&j| factors[j].0.clone()).collect();
        let sizes: Vec<usize> = factors.iter().map(|(_, v)| v.nnz()).collect();
        let mut acc = VecAcc::new();
        let mut inner = vec![0usize; k];
        let mut degrees = vec![0i64; k];
        for_each_tuple(&sizes, |tuple| {
            let mut coef = q(1);
            for j in 0..k {
                let (b, c) = &factors[j].1.entries()[tuple[j]];
                coef *= c;
                degrees[j] = self.inner.comp(factors[j].0.len()).degree(*b);
            }
            for (t, &j) in order.iter().enumerate() {
                inner[t] = factors[j].1.entries()[tuple[j]].0;
            }
            let s = koszul_sign(&degrees, &order);
            for (a, c) in outer_new.iter() {
                let e = CompElem {
                    blocks: blocks.clone(),
                    outer: *a,
                    inner: inner.clone(),
                };
                if let Some(&t) = self.index[n].get(&e) {
                    acc.add(t, c * &coef * q(s));
                }
            }
        });
        acc.finish()
    }
}

/// Calls `f` on every tuple in the product `0..sizes[0] × 0..sizes[1] × …`.
pub fn for_each_tuple(sizes: &[usize], mut f: impl FnMut(&[usize])) {
    if sizes.contains(&0) {
        return;
    }
    let mut t = vec![0usize; sizes.len()];
    loop {
        f(&t);
        let mut i = sizes.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            t[i] += 1;
            if t[i] < sizes[i] {
                break;
            }
            t[i] = 0;
        }
    }
}

pub fn composite(m: &SymModule, n: &SymModule, max_arity: usize) -> Result<Composite> {
    Composite::new(Arc::new(m.clone()), Arc::new(n.clone()), max_arity)
}

/// `M ∘ (N₁; N₂)`: the part of `M ∘ (N₁ ⊕ N₂)` with exactly one factor from `N₂`.
/// Inner basis indices `≥ dim N₁(m)` belong to `N₂`.
#[derive(Clone, Debug)]
pub struct InfComposite {
    pub comp: Composite,
    pub n1: Arc<SymModule>,
    pub n2: Arc<SymModule>,
}

impl InfComposite {
    pub fn new(m: &SymModule, n1: &SymModule, n2: &SymModule, max_arity: usize) -> Result<Self> {
        if !n2.is_reduced() || !n1.is_reduced() {
            return Err(OpError::NotReduced);
        }
        let sum = Arc::new(direct_sum(n1, n2));
        let n1a = Arc::new(n1.clone());
        let n1c = n1a.clone();
        let filter = move |e: &CompElem| {
            e.blocks
                .iter()
                .zip(&e.inner)
                .filter(|(b, &x)| x >= n1c.dim(b.len()))
                .count()
                == 1
        };
        let comp = Composite::build(Arc::new(m.clone()), sum, max_arity, Some(&filter))?;
        Ok(InfComposite {
            comp,
            n1: n1a,
            n2: Arc::new(n2.clone()),
        })
    }

    pub fn module(&self) -> &SymModule {
        &self.comp.module
    }

    /// The slot (block position) holding the `N₂` factor.
    pub fn marked_slot(&self, e: &CompElem) -> usize {
        e.blocks
            .iter()
            .zip(&e.inner)
            .position(|(b, &x)| x >= self.n1.dim(b.len()))
            .expect("exactly one marked factor")
    }

    /// Index of an `N₂` basis element inside the summed inner module.
    pub fn n2_index(&self, m: usize, x: usize) -> usize {
        self.n1.dim(m) + x
    }
}

/// `M ∘_(1) N = M ∘ (I; N)`.
pub fn inf_composite(m: &SymModule, n: &SymModule, max_arity: usize) -> Result<InfComposite> {
    InfComposite::new(m, &unit_module(n.max_arity()), n, max_arity)
}

/// `f ∘' g : M₁∘N₁ → M₂∘(N₁;N₂)`, `a⊗b_1…b_k ↦ Σ_j ± f(a) ⊗ b_1…g(b_j)…b_k`
/// with sign `(−1)^{|g|(|a| + Σ_{i<j}|b_i|)}`. `f` and `g` are given per
/// arity as matrices; `g_degree` is the degree of `g`.
pub fn inf_composite_map(
    src: &Composite,
    tgt: &InfComposite,
    f: &[RationalMatrix],
    g: &[RationalMatrix],
    g_degree: i64,
) -> Vec<RationalMatrix> {
    (0..=src.max_arity().min(tgt.comp.max_arity()))
        .map(|n| {
            let cols = src
                .elems(n)
                .iter()
                .map(|e| {
                    let k = e.blocks.len();
                    let fa = f[k].column(e.outer);
                    let mut acc = VecAcc::new();
                    let mut deg = src.outer.comp(k).degree(e.outer);
                    for j in 0..k {
                        let m = e.blocks[j].len();
                        let s = sign_q(g_degree * deg);
                        let gb = g[m].column(e.inner[j]);
                        let gb_shift = gb.reindex(|x| tgt.n2_index(m, x));
                        let factors: Vec<(Vec<usize>, SparseVec)> = (0..k)
                            .map(|i| {
                                let v = if i == j {
                                    gb_shift.clone()
                                } else {
                                    SparseVec::unit(e.inner[i])
                                };
                                (e.blocks[i].clone(), v)
                            })
                            .collect();
                        acc.add_vec(&tgt.comp.normalize(n, fa, &factors), &s);
                        deg += src.inner.comp(m).degree(e.inner[j]);
                    }
                    acc.finish()
                })
                .collect();
            RationalMatrix::from_columns(tgt.comp.module.dim(n), cols)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// tensor (Day convolution) and Hadamard products

/// `(M⊗N)(n) = ⊕_{S ⊔ T = {0..n}} M(|S|) ⊗ N(|T|)`.
pub fn tensor_sym(m: &SymModule, nmod: &SymModule, max_arity: usize) -> Result<SymModule> {
    let avail = m.max_arity().min(nmod.max_arity());
    if max_arity > avail {
        return Err(OpError::ArityOverflow {
            requested: max_arity,
            available: avail,
        });
    }
    let mut comps = Vec::new();
    for n in 0..=max_arity {
        // (subset S, a, b)
        let mut list: Vec<(Vec<usize>, usize, usize)> = Vec::new();
        for i in 0..=n {
            for s in perm::combinations(n, i) {
                for a in 0..m.dim(i) {
                    for b in 0..nmod.dim(n - i) {
                        list.push((s.clone(), a, b));
                    }
                }
            }
        }
        let index: HashMap<(Vec<usize>, usize, usize), usize> = list
            .iter()
            .cloned()
            .enumerate()
            .map(|(k, e)| (e, k))
            .collect();
        let comp_of =
            |s: &Vec<usize>| -> Vec<usize> { (0..n).filter(|x| !s.contains(x)).collect() };
        let mut degrees = Vec::new();
        let mut labels = Vec::new();
        let mut weights = Vec::new();
        let mut d_cols = Vec::new();
        for (s, a, b) in &list {
            let (mc, nc) = (m.comp(s.len()), nmod.comp(n - s.len()));
            degrees.push(mc.degree(*a) + nc.degree(*b));
            weights.push(mc.weights[*a] + nc.weights[*b]);
            let sl: Vec<String> = s.iter().map(|x| (x + 1).to_string()).collect();
            let tl: Vec<String> = comp_of(s).iter().map(|x| (x + 1).to_string()).collect();
            labels.push(format!(
                "{}{{{}}}⊗{}{{{}}}",
                mc.space.labels[*a],
                sl.join(","),
                nc.space.labels[*b],
                tl.join(",")
            ));
            let mut acc = VecAcc::new();
            for (a2, c) in mc.space.d.column(*a).iter() {
                acc.add(index[&(s.clone(), *a2, *b)], c.clone());
            }
            let sg = sign_q(mc.degree(*a));
            for (b2, c) in nc.space.d.column(*b).iter() {
                acc.add(index[&(s.clone(), *a, *b2)], c * &sg);
            }
            d_cols.push(acc.finish());
        }
        let gens = (0..n.saturating_sub(1))
            .map(|i| {
                let cols = list
                    .iter()
                    .map(|(s, a, b)| {
                        let t = comp_of(s);
                        let in_s = (s.contains(&i), s.contains(&(i + 1)));
                        let (va, vb) = match in_s {
                            (true, true) => {
                                let p = s.iter().position(|&x| x == i).unwrap();
                                (
                                    m.comp(s.len()).gens[p].apply(&SparseVec::unit(*a)),
                                    SparseVec::unit(*b),
                                )
                            }
                            (false, false) => {
                                let p = t.iter().position(|&x| x == i).unwrap();
                                (
                                    SparseVec::unit(*a),
                                    nmod.comp(t.len()).gens[p].apply(&SparseVec::unit(*b)),
                                )
                            }
                            _ => (SparseVec::unit(*a), SparseVec::unit(*b)),
                        };
                        let mut s2: Vec<usize> = s
                            .iter()
                            .map(|&x| {
                                if x == i {
                                    i + 1
                                } else if x == i + 1 {
                                    i
                                } else {
                                    x
                                }
                            })
                            .collect();
                        s2.sort();
                        let mut acc = VecAcc::new();
                        for (a2, c1) in va.iter() {
                            for (b2, c2) in vb.iter() {
                                acc.add(index[&(s2.clone(), *a2, *b2)], c1 * c2);
                            }
                        }
                        acc.finish()
                    })
                    .collect();
                RationalMatrix::from_columns(list.len(), cols)
            })
            .collect();
        let dim = list.len();
        comps.push(SymComponent {
            arity: n,
            space: FlatComplex {
                degrees,
                labels,
                d: RationalMatrix::from_columns(dim, d_cols),
            },
            gens,
            weights,
        });
    }
    Ok(SymModule::new_unchecked(
        format!("{}⊗{}", m.name, nmod.name),
        comps,
    ))
}

/// Kronecker product of matrices, basis `(a, b) ↦ a·dim_b + b`.
pub fn kron(a: &RationalMatrix, b: &RationalMatrix) -> RationalMatrix {
    let mut cols = Vec::with_capacity(a.cols() * b.cols());
    for ca in a.columns() {
        for cb in b.columns() {
            let mut e = Vec::with_capacity(ca.nnz() * cb.nnz());
            for (i, x) in ca.iter() {
                for (j, y) in cb.iter() {
                    e.push((i * b.rows() + j, x * y));
                }
            }
            cols.push(SparseVec::from_entries(e));
        }
    }
    RationalMatrix::from_columns(a.rows() * b.rows(), cols)
}

/// `(M ⊗_H N)(n) = M(n) ⊗ N(n)` with the diagonal action; basis `(a, b)` at `a·dim N(n) + b`.
pub fn hadamard(m: &SymModule, nmod: &SymModule) -> SymModule {
    let max = m.max_arity().min(nmod.max_arity());
    let comps = (0..=max)
        .map(|n| {
            let (x, y) = (m.comp(n), nmod.comp(n));
            let mut degrees = Vec::new();
            let mut labels = Vec::new();
            let mut weights = Vec::new();
            for a in 0..x.dim() {
                for b in 0..y.dim() {
                    degrees.push(x.degree(a) + y.degree(b));
                    labels.push(format!("{}⊗{}", x.space.labels[a], y.space.labels[b]));
                    weights.push(x.weights[a] + y.weights[b]);
                }
            }
            // d(a⊗b) = da⊗b + (−1)^{|a|} a⊗db
            let parity = RationalMatrix::from_columns(
                x.dim(),
                (0..x.dim())
                    .map(|a| SparseVec::single(a, sign_q(x.degree(a))))
                    .collect(),
            );
            let d = kron(&x.space.d, &RationalMatrix::identity(y.dim()))
                .add(&kron(&parity, &y.space.d));
            let gens = x
                .gens
                .iter()
                .zip(&y.gens)
                .map(|(g, h)| kron(g, h))
                .collect();
            SymComponent {
                arity: n,
                space: FlatComplex { degrees, labels, d },
                gens,
                weights,
            }
        })
        .collect();
    SymModule::new_unchecked(format!("{}⊗_H{}", m.name, nmod.name), comps)
}

// ---------------------------------------------------------------------------
// Schur functor

/// A weight piece of `M(V)`: basis = (sorted word of V-basis letters,
/// coinvariant basis index).
#[derive(Clone, Debug)]
pub struct SchurPiece {
    pub space: FlatComplex,
    pub elems: Vec<(Vec<usize>, usize)>,
    /// Extra grading: sum of letter weights.
    pub letter_weights: Vec<usize>,
    index: HashMap<Vec<usize>, (usize, Arc<CoinvBasis>)>,
}

impl SchurPiece {
    pub fn dim(&self) -> usize {
        self.elems.len()
    }
}

/// `M(V) = ⊕_w M(w) ⊗_{Σ_w} V^{⊗w}` truncated at `max_weight`, weights ≥ 1.
#[derive(Clone, Debug)]
pub struct Schur {
    pub m: Arc<SymModule>,
    pub v: FlatComplex,
    pub v_weights: Vec<usize>,
    pub pieces: Vec<SchurPiece>,
}

impl Schur {
    pub fn new(
        m: Arc<SymModule>,
        v: &FlatComplex,
        v_weights: &[usize],
        max_weight: usize,
    ) -> Result<Self> {
        if max_weight > m.max_arity() {
            return Err(OpError::ArityOverflow {
                requested: max_weight,
                available: m.max_arity(),
            });
        }
        let mut s = Schur {
            m,
            v: v.clone(),
            v_weights: v_weights.to_vec(),
            pieces: Vec::new(),
        };
        for w in 0..=max_weight {
            let piece = s.build_piece(w);
            s.pieces.push(piece);
        }
        Ok(s)
    }

    pub fn max_weight(&self) -> usize {
        self.pieces.len() - 1
    }

    fn runs(&self, word: &[usize]) -> Vec<(usize, usize, bool)> {
        let mut runs = Vec::new();
        let mut s = 0;
        while s < word.len() {
            let mut e = s;
            while e < word.len() && word[e] == word[s] {
                e += 1;
            }
            runs.push((s, e - s, self.v.degrees[word[s]].rem_euclid(2) == 1));
            s = e;
        }
        runs
    }

    fn build_piece(&self, w: usize) -> SchurPiece {
        let comp = self.m.comp(w);
        let mut elems = Vec::new();
        let mut index = HashMap::new();
        let mut cache: HashMap<Vec<(usize, usize, bool)>, Arc<CoinvBasis>> = HashMap::new();
        if comp.dim() > 0 {
            for word in multisets(self.v.dim(), w) {
                let runs = self.runs(&word);
                let cb = cache
                    .entry(runs.clone())
                    .or_insert_with(|| Arc::new(coinv_basis(comp, &runs)))
                    .clone();
                if cb.dim() == 0 {
                    continue;
                }
                index.insert(word.clone(), (elems.len(), cb.clone()));
                for r in 0..cb.dim() {
                    elems.push((word.clone(), r));
                }
            }
        }
        let mut piece = SchurPiece {
            space: FlatComplex::zero(),
            elems,
            letter_weights: vec![],
            index,
        };
        let degrees: Vec<i64> = piece
            .elems
            .iter()
            .map(|(word, r)| {
                let cb = &piece.index[word].1;
                let lead = cb.reps()[*r].entries()[0].0;
                comp.degree(lead) + word.iter().map(|&x| self.v.degrees[x]).sum::<i64>()
            })
            .collect();
        let labels = piece
            .elems
            .iter()
            .map(|(word, r)| {
                let letters: Vec<&str> = word.iter().map(|&x| self.v.labels[x].as_str()).collect();
                if piece.index[word].1.dim() == 1 {
                    format!("{}({})", self.m.name, letters.join(","))
                } else {
                    format!("{}#{}({})", self.m.name, r, letters.join(","))
                }
            })
            .collect();
        piece.letter_weights = piece
            .elems
            .iter()
            .map(|(word, _)| {
                word.iter()
                    .map(|&x| self.v_weights.get(x).copied().unwrap_or(1))
                    .sum()
            })
            .collect();
        let n = piece.elems.len();
        piece.space = FlatComplex {
            degrees,
            labels,
            d: RationalMatrix::zeros(n, n),
        };
        let d_cols: Vec<SparseVec> = (0..n).map(|i| self.internal_d_of(&piece, w, i)).collect();
        piece.space.d = RationalMatrix::from_columns(n, d_cols);
        piece
    }

    fn internal_d_of(&self, piece: &SchurPiece, w: usize, i: usize) -> SparseVec {
        let (word, r) = &piece.elems[i];
        let cb = &piece.index[word].1;
        let rep = &cb.reps()[*r];
        let comp = self.m.comp(w);
        let mut acc = VecAcc::new();
        // d_M on the operation
        let dm = comp.space.d.apply(rep);
        acc.add_vec(&self.normalize_in(piece, w, &dm, word), &q(1));
        // d_V on each letter
        for (a, c) in rep.iter() {
            let mut deg = comp.degree(*a);
            for j in 0..w {
                let s = sign_q(deg);
                for (y, cy) in self.v.d.column(word[j]).iter() {
                    let mut word2 = word.clone();
                    word2[j] = *y;
                    let t = self.normalize_in(piece, w, &SparseVec::single(*a, c * cy), &word2);
                    acc.add_vec(&t, &s);
                }
                deg += self.v.degrees[word[j]];
            }
        }
        acc.finish()
    }

    /// Representative of basis element `i` of weight `w`: an operation vector and a sorted word.
    pub fn rep(&self, w: usize, i: usize) -> (SparseVec, Vec<usize>) {
        let piece = &self.pieces[w];
        let (word, r) = &piece.elems[i];
        (piece.index[word].1.reps()[*r].clone(), word.clone())
    }

    /// Normal form of `μ ⊗ v_{word[0]} ⊗ … ⊗ v_{word[w−1]}`.
    pub fn normalize(&self, w: usize, mvec: &SparseVec, word: &[usize]) -> SparseVec {
        self.normalize_in(&self.pieces[w], w, mvec, word)
    }

    fn normalize_in(
        &self,
        piece: &SchurPiece,
        w: usize,
        mvec: &SparseVec,
        word: &[usize],
    ) -> SparseVec {
        if mvec.is_zero() {
            return SparseVec::zero();
        }
        let mut order: Vec<usize> = (0..w).collect();
        order.sort_by_key(|&j| (word[j], j));
        let sorted: Vec<usize> = order.iter().map(|&j| word[j]).collect();
        let Some((start, cb)) = piece.index.get(&sorted) else {
            return SparseVec::zero();
        };
        let degrees: Vec<i64> = word.iter().map(|&x| self.v.degrees[x]).collect();
        let s = koszul_sign(&degrees, &order);
        let tau_inv = perm::inverse(&order);
        let moved = self.m.comp(w).act(&tau_inv, mvec);
        let c = cb.coords(&moved);
        c.reindex(|r| start + r).scaled(&q(s))
    }

    /// All weights assembled into one flat complex (weight recorded in labels).
    pub fn total(&self) -> (FlatComplex, Vec<usize>) {
        let mut degrees = Vec::new();
        let mut labels = Vec::new();
        let mut weights = Vec::new();
        let mut offs = Vec::new();
        for (w, p) in self.pieces.iter().enumerate() {
            offs.push(degrees.len());
            degrees.extend(&p.space.degrees);
            labels.extend(p.space.labels.iter().cloned());
            weights.extend(std::iter::repeat_n(w, p.dim()));
        }
        let n = degrees.len();
        let mut t = Vec::new();
        for (w, p) in self.pieces.iter().enumerate() {
            for (r, c, x) in p.space.d.triplets() {
                t.push((r + offs[w], c + offs[w], x));
            }
        }
        (
            FlatComplex {
                degrees,
                labels,
                d: RationalMatrix::from_triplets(n, n, t).expect("in range"),
            },
            weights,
        )
    }
}

/// Sorted words of length `w` over an alphabet of size `d`.
pub fn multisets(d: usize, w: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(w);
    fn rec(start: usize, d: usize, w: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == w {
            out.push(cur.clone());
            return;
        }
        for x in start..d {
            cur.push(x);
            rec(x, d, w, cur, out);
            cur.pop();
        }
    }
    rec(0, d, w, &mut cur, &mut out);
    out
}

/// `schur(M, V)` with weights `1..=max_weight` (weight 0 included when `M(0) ≠ 0`).
pub fn schur(m: &SymModule, v: &ChainComplex, max_weight: usize) -> Result<Schur> {
    let flat = v.to_flat();
    let ws = vec![1; flat.dim()];
    Schur::new(Arc::new(m.clone()), &flat, &ws, max_weight)
}

#[doc(hidden)]
pub fn is_zero_q(x: &Q) -> bool {
    x.is_zero()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn com(max: usize, degree: i64) -> SymModule {
        let comps = (0..=max)
            .map(|n| {
                if n == 0 {
                    SymComponent::zero(0)
                } else {
                    one_dim(n, degree, "c", 1, n - 1)
                }
            })
            .collect();
        SymModule::new("Com", comps).unwrap()
    }

    fn ass(max: usize) -> SymModule {
        let comps = (0..=max)
            .map(|n| {
                if n == 0 {
                    SymComponent::zero(0)
                } else {
                    regular_component(n, n - 1)
                }
            })
            .collect();
        SymModule::new("Ass", comps).unwrap()
    }

    #[test]
    fn composite_of_commutative_counts_partitions() {
        let c = com(4, 0);
        let cc = composite(&c, &c, 4).unwrap();
        cc.module.validate().unwrap();
        // Σ_k S(n,k): ordered set partitions of partitions = Bell-type numbers
        assert_eq!(cc.module.dims(), vec![0, 1, 2, 5, 15]);
    }

    #[test]
    fn composite_of_regular_matches_egf() {
        // egf of Ass∘Ass is x/(1−2x): n!·2^{n−1}
        let a = ass(4);
        let aa = composite(&a, &a, 4).unwrap();
        aa.module.validate().unwrap();
        assert_eq!(aa.module.dims(), vec![0, 1, 4, 24, 192]);
    }

    #[test]
    fn infinitesimal_composite_of_commutative() {
        let c = com(3, 0);
        let ic = inf_composite(&c, &c, 3).unwrap();
        ic.module().validate().unwrap();
        assert_eq!(ic.module().dim(2), 3);
    }

    #[test]
    fn composite_action_is_relabelling() {
        let a = ass(3);
        let c = com(3, 1);
        let m = hadamard(&a, &c);
        let mm = composite(&m, &m, 3).unwrap();
        mm.module.validate().unwrap();
        let n = 3;
        for (i, e) in mm.elems(n).iter().enumerate() {
            for p in perm::all_perms(n) {
                let via_gens = mm.module.comp(n).act(&p, &SparseVec::unit(i));
                // relabel every block directly, acting inside blocks by the induced permutation
                let factors: Vec<(Vec<usize>, SparseVec)> = e
                    .blocks
                    .iter()
                    .zip(&e.inner)
                    .map(|(b, &x)| {
                        let img: Vec<usize> = b.iter().map(|&y| p[y]).collect();
                        let mut sorted = img.clone();
                        sorted.sort();
                        let local: Vec<usize> = img
                            .iter()
                            .map(|y| sorted.iter().position(|z| z == y).unwrap())
                            .collect();
                        (
                            sorted,
                            mm.inner.comp(b.len()).act(&local, &SparseVec::unit(x)),
                        )
                    })
                    .collect();
                let direct = mm.normalize(n, &SparseVec::unit(e.outer), &factors);
                assert_eq!(via_gens, direct);
            }
        }
    }

    #[test]
    fn averaging_matches_oracle() {
        let a = ass(4);
        for n in 1..=4 {
            let c = a.comp(n);
            assert_eq!(run_average(c, 0, n, false), averaging_oracle(c));
            let (coinv, proj) = coinvariants(c);
            assert_eq!(coinv.dim(), 1);
            assert_eq!(proj.rows(), 1);
        }
    }

    #[test]
    fn tensor_and_hadamard_dimensions() {
        let a = ass(4);
        let c = com(4, 0);
        let t = tensor_sym(&a, &c, 4).unwrap();
        t.validate().unwrap();
        for n in 0..=4 {
            let expect: usize = (0..=n)
                .map(|i| perm::binomial(n, i) * a.dim(i) * c.dim(n - i))
                .sum();
            assert_eq!(t.dim(n), expect);
        }
        let h = hadamard(&a, &com(4, 1));
        h.validate().unwrap();
        assert_eq!(h.dims(), a.dims());
    }

    #[test]
    fn schur_functor_examples() {
        let v0 = crate::complexes::sphere(1, 0);
        let v1 = crate::complexes::sphere(1, 1);
        let c = com(4, 0);
        let s0 = schur(&c, &v0, 4).unwrap();
        let s1 = schur(&c, &v1, 4).unwrap();
        for w in 1..=4 {
            assert_eq!(s0.pieces[w].dim(), 1);
            assert_eq!(s1.pieces[w].dim(), usize::from(w == 1));
        }
        // tensor algebra on two letters
        let v = crate::complexes::sphere(2, 0);
        let t = schur(&ass(3), &v, 3).unwrap();
        assert_eq!(t.pieces[3].dim(), 8);
        // symmetric algebra on two letters of degree 0 and 1
        let mixed = crate::complexes::direct_sum(&v0, &v1);
        let s = schur(&c, &mixed, 3).unwrap();
        assert_eq!(s.pieces[3].dim(), 2);
    }

    #[test]
    fn schur_differential_squares_to_zero() {
        let d = crate::complexes::disk(1, 1);
        let s = schur(&ass(3), &d, 3).unwrap();
        for p in &s.pieces {
            p.space.validate().unwrap();
            assert!(p.space.is_acyclic() || p.dim() == 0);
        }
    }

    #[test]
    fn json_roundtrip() {
        let m = hadamard(&ass(3), &com(3, 1));
        let back = SymModule::from_json(&m.to_json()).unwrap();
        assert_eq!(back.dims(), m.dims());
        for n in 0..=3 {
            assert_eq!(back.comp(n).complex(), m.comp(n).complex());
        }
    }
}
