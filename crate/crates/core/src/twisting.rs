//! The convolution pre-Lie algebra `Hom_Σ(C, P)`, twisting morphisms and
//! the twisted composite products built from them.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::complexes::{ChainComplex, ChainMap, FlatComplex};
use crate::error::{OpError, Result};
use crate::exactla::{q, sign_q, RationalMatrix, SparseVec, VecAcc};
use crate::opcoop::{
    lie_operad, shifted_cocomm, square_zero_operad, tensor_algebra, Cooperad, Operad,
};
use crate::perm::{self, koszul_sign};
use crate::symmod::{CompElem, Composite, SymModule};

/// A homogeneous map `C → P` of Σ-modules; `comps[n]` is `dim P(n) × dim C(n)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvolutionElement {
    pub degree: i64,
    pub comps: Vec<RationalMatrix>,
}

impl ConvolutionElement {
    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|m| m.is_zero())
    }

    pub fn add(&self, other: &ConvolutionElement) -> ConvolutionElement {
        ConvolutionElement {
            degree: self.degree,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.add(b))
                .collect(),
        }
    }

    /// Number of nonzero entries per arity.
    pub fn support(&self) -> Vec<usize> {
        self.comps.iter().map(|m| m.nnz()).collect()
    }
}

/// `Hom_Σ(C, P)` truncated at `max_arity`.
#[derive(Clone, Debug)]
pub struct Convolution {
    pub source: Arc<Cooperad>,
    pub target: Arc<Operad>,
    pub max_arity: usize,
}

/// The blocks of `C(k') ∘_(1) C` around a marked block `g ⊆ 0..n`:
/// singletons and `g`, listed by minimum.
pub fn slots(n: usize, g: &[usize]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0..n).filter(|x| !g.contains(x)).map(|x| vec![x]).collect();
    out.push(g.to_vec());
    out.sort_by_key(|b| b[0]);
    out
}

/// Positions of the elements of `sub` inside the sorted list `within`.
fn local_block(sub: &[usize], within: &[usize]) -> Vec<usize> {
    sub.iter()
        .map(|x| within.binary_search(x).expect("subset"))
        .collect()
}

impl Convolution {
    pub fn new(source: Arc<Cooperad>, target: Arc<Operad>, max_arity: usize) -> Result<Self> {
        let avail = source.max_arity().min(target.max_arity());
        if max_arity > avail {
            return Err(OpError::ArityOverflow {
                requested: max_arity,
                available: avail,
            });
        }
        Ok(Convolution {
            source,
            target,
            max_arity,
        })
    }

    pub fn zero(&self, degree: i64) -> ConvolutionElement {
        ConvolutionElement {
            degree,
            comps: (0..=self.max_arity)
                .map(|n| RationalMatrix::zeros(self.target.dim(n), self.source.dim(n)))
                .collect(),
        }
    }

    /// Shapes, homogeneity and Σ-equivariance.
    pub fn check(&self, f: &ConvolutionElement) -> Result<()> {
        if f.comps.len() != self.max_arity + 1 {
            return Err(OpError::ShapeMismatch(format!(
                "expected {} arity components, found {}",
                self.max_arity + 1,
                f.comps.len()
            )));
        }
        for n in 0..=self.max_arity {
            let (cc, pc) = (self.source.comp(n), self.target.comp(n));
            let m = &f.comps[n];
            if m.rows() != pc.dim() || m.cols() != cc.dim() {
                return Err(OpError::ShapeMismatch(format!("arity {n}")));
            }
            for (r, c, _) in m.triplets() {
                if pc.degree(r) != cc.degree(c) + f.degree {
                    return Err(OpError::DegreeMismatch(format!(
                        "arity {n}: entry ({r},{c}) is not of degree {}",
                        f.degree
                    )));
                }
            }
            for (gc, gp) in cc.gens.iter().zip(&pc.gens) {
                if m.compose(gc) != gp.compose(m) {
                    return Err(OpError::NotEquivariant(format!("arity {n}")));
                }
            }
        }
        Ok(())
    }

    /// `f ⋆ g = γ_(1) (f ∘_(1) g) Δ_(1)`.
    pub fn star(&self, f: &ConvolutionElement, g: &ConvolutionElement) -> ConvolutionElement {
        let (c, p) = (&*self.source, &*self.target);
        let comps = (0..=self.max_arity)
            .into_par_iter()
            .map(|nn| {
                let cols = (0..c.dim(nn))
                    .map(|e| {
                        let mut acc = VecAcc::new();
                        for t in c.delta1(nn, e) {
                            let k = nn + 1 - t.block.len();
                            let fv = f.comps[k].column(t.outer);
                            let gv = g.comps[t.block.len()].column(t.inner);
                            if fv.is_zero() || gv.is_zero() {
                                continue;
                            }
                            let factors: Vec<(Vec<usize>, SparseVec)> = slots(nn, &t.block)
                                .into_iter()
                                .map(|b| {
                                    let v = if b == t.block {
                                        gv.clone()
                                    } else {
                                        p.unit_vec()
                                    };
                                    (b, v)
                                })
                                .collect();
                            let s = sign_q(g.degree * c.degree(k, t.outer));
                            acc.add_vec(&p.compose_species(fv, &factors), &(&t.coef * s));
                        }
                        acc.finish()
                    })
                    .collect();
                RationalMatrix::from_columns(p.dim(nn), cols)
            })
            .collect();
        ConvolutionElement {
            degree: f.degree + g.degree,
            comps,
        }
    }

    /// `∂f = d_P f − (−1)^{|f|} f d_C`.
    pub fn differential(&self, f: &ConvolutionElement) -> ConvolutionElement {
        let comps = (0..=self.max_arity)
            .map(|n| {
                let dp = &self.target.comp(n).space.d;
                let dc = &self.source.comp(n).space.d;
                dp.compose(&f.comps[n])
                    .sub(&f.comps[n].compose(dc).scaled(&sign_q(f.degree)))
            })
            .collect();
        ConvolutionElement {
            degree: f.degree - 1,
            comps,
        }
    }

    /// `∂α + α ⋆ α`.
    pub fn mc_residual(&self, alpha: &ConvolutionElement) -> ConvolutionElement {
        self.differential(alpha).add(&self.star(alpha, alpha))
    }

    pub fn twisting_report(&self, alpha: &ConvolutionElement) -> TwistingReport {
        let mut problems = Vec::new();
        if alpha.degree != -1 {
            problems.push(format!("degree is {}, expected -1", alpha.degree));
        }
        let residual = match self.check(alpha) {
            Err(e) => {
                problems.push(e.to_string());
                vec![]
            }
            Ok(()) => self.mc_residual(alpha).support(),
        };
        if self.max_arity >= 1 && alpha.comps.len() > 1 {
            let c1 = &alpha.comps[1];
            if !c1.column(self.source.counit).is_zero() {
                problems.push("nonzero on the counit".into());
            }
            if (0..c1.cols()).any(|j| c1.column(j).get(self.target.unit) != q(0)) {
                problems.push("hits the unit".into());
            }
        }
        let first_failure = residual.iter().position(|&r| r > 0);
        TwistingReport {
            residual_support: residual,
            first_failure,
            problems,
        }
    }

    /// Random equivariant homogeneous map; `skip_counit` keeps it zero on `C(1)`'s counit.
    pub fn random_element<R: Rng>(
        &self,
        degree: i64,
        rng: &mut R,
        skip_counit: bool,
    ) -> ConvolutionElement {
        let comps = (0..=self.max_arity)
            .map(|n| {
                let (cc, pc) = (self.source.comp(n), self.target.comp(n));
                let mut t = Vec::new();
                for col in 0..cc.dim() {
                    if skip_counit && n == 1 && col == self.source.counit {
                        continue;
                    }
                    for row in 0..pc.dim() {
                        if pc.degree(row) == cc.degree(col) + degree {
                            let x: i64 = rng.gen_range(-3..=3);
                            if x != 0 {
                                t.push((row, col, q(x)));
                            }
                        }
                    }
                }
                let r = RationalMatrix::from_triplets(pc.dim(), cc.dim(), t).expect("in range");
                // average over Σ_n: L_P(σ) r L_C(σ)^{-1}
                let perms = perm::all_perms(n);
                let mut acc = RationalMatrix::zeros(pc.dim(), cc.dim());
                for s in &perms {
                    let lp = pc.act_matrix(s);
                    let lc = cc.act_matrix(&perm::inverse(s));
                    acc = acc.add(&lp.compose(&r).compose(&lc));
                }
                acc.scaled(&crate::exactla::qr(1, perms.len() as i64))
            })
            .collect();
        ConvolutionElement { degree, comps }
    }
}

/// Outcome of a Maurer–Cartan check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TwistingReport {
    /// Nonzero entries of `∂α + α⋆α` per arity.
    pub residual_support: Vec<usize>,
    pub first_failure: Option<usize>,
    /// Structural problems (degree, equivariance, augmentation).
    pub problems: Vec<String>,
}

impl TwistingReport {
    pub fn is_twisting(&self) -> bool {
        self.problems.is_empty()
            && self.first_failure.is_none()
            && !self.residual_support.is_empty()
    }
}

/// A twisting morphism together with its convolution algebra.
#[derive(Clone, Debug)]
pub struct Twisting {
    pub conv: Convolution,
    pub alpha: ConvolutionElement,
}

impl Twisting {
    pub fn new(conv: Convolution, alpha: ConvolutionElement) -> Result<Self> {
        conv.check(&alpha)?;
        Ok(Twisting { conv, alpha })
    }

    pub fn report(&self) -> TwistingReport {
        self.conv.twisting_report(&self.alpha)
    }

    pub fn require_twisting(&self) -> Result<()> {
        let r = self.report();
        if let Some(a) = r.first_failure {
            return Err(OpError::NotTwisting { arity: a });
        }
        if !r.problems.is_empty() {
            return Err(OpError::AlgebraAxiom(r.problems.join("; ")));
        }
        Ok(())
    }
}

impl Twisting {
    fn checked<T>(
        &self,
        build: impl FnOnce() -> Result<T>,
        modules: impl Fn(&T) -> Vec<&SymModule>,
    ) -> Result<T> {
        self.require_twisting()?;
        let x = build()?;
        for m in modules(&x) {
            if !squares_to_zero(m) {
                return Err(OpError::NotAComplex { degree: 0 });
            }
        }
        Ok(x)
    }

    /// `P ∘_α C`; refuses a map that fails Maurer–Cartan.
    pub fn twisted_left(&self) -> Result<Composite> {
        self.checked(|| self.conv.left_twisted(&self.alpha), |c| vec![&c.module])
    }

    /// `C ∘_α P`.
    pub fn twisted_right(&self) -> Result<Composite> {
        self.checked(|| self.conv.right_twisted(&self.alpha), |c| vec![&c.module])
    }

    /// `P ∘_α C ∘_α P`.
    pub fn twisted_two_sided(&self) -> Result<TwoSided> {
        self.checked(
            || self.conv.two_sided(&self.alpha),
            |t| vec![&t.inner.module, &t.outer.module],
        )
    }
}

/// `κ : 𝔖^c ⊗_H coComm^nu → Lie`, the arity-2 generator sent to the bracket.
pub fn kappa(max_arity: usize) -> Twisting {
    kappa_from(Arc::new(shifted_cocomm(max_arity)), max_arity)
}

/// `κ` on a supplied source (used with deliberately broken cooperads).
pub fn kappa_from(source: Arc<Cooperad>, max_arity: usize) -> Twisting {
    let conv = Convolution::new(source, Arc::new(lie_operad(max_arity)), max_arity)
        .expect("arity in range");
    let mut alpha = conv.zero(-1);
    if max_arity >= 2 {
        alpha.comps[2] = RationalMatrix::from_triplets(1, 1, vec![(0, 0, q(1))]).expect("1×1");
    }
    Twisting { conv, alpha }
}

/// `α : ℚ ⊕ sV → T(V)`, `sv ↦ v`. The cooperad is `ℚ ⊕ sV` with
/// `sV` primitive; `V` must carry zero differential.
pub fn free_cofree_twist(v: &ChainComplex, max_weight: usize) -> Result<Twisting> {
    let flat = v.to_flat();
    let p = tensor_algebra(v, max_weight)?;
    let degs: Vec<i64> = flat.degrees.iter().map(|d| -(d + 1)).collect();
    let labels: Vec<String> = flat.labels.iter().map(|l| format!("s{l}")).collect();
    let c = Cooperad::dual_of(&square_zero_operad("sV*", &degs, &labels), "Q+sV")?;
    let conv = Convolution::new(Arc::new(c), Arc::new(p), 1)?;
    let mut alpha = conv.zero(-1);
    let t = (0..flat.dim()).map(|i| (1 + i, 1 + i, q(1))).collect();
    alpha.comps[1] = RationalMatrix::from_triplets(conv.target.dim(1), conv.source.dim(1), t)?;
    Twisting::new(conv, alpha)
}

/// The same assignment `sv ↦ v` on the full tensor coalgebra `T^c(sV)`
/// (truncated at `max_weight`). Not a twisting morphism once words of
/// length two are present.
pub fn tensor_coalgebra_twist(v: &ChainComplex, max_weight: usize) -> Result<Twisting> {
    let flat = v.to_flat();
    let p = tensor_algebra(v, max_weight)?;
    let dual_letters = FlatComplex {
        degrees: flat.degrees.iter().map(|d| -(d + 1)).collect(),
        labels: flat.labels.iter().map(|l| format!("s{l}")).collect(),
        d: RationalMatrix::zeros(flat.dim(), flat.dim()),
    }
    .to_complex();
    let c = Cooperad::dual_of(&tensor_algebra(&dual_letters, max_weight)?, "T^c(sV)")?;
    let conv = Convolution::new(Arc::new(c), Arc::new(p), 1)?;
    let mut alpha = conv.zero(-1);
    // letters are reordered by degree inside both algebras; match them by label
    let pos = |labels: &[String], l: &str| labels.iter().position(|x| x == l).expect("letter");
    let (pl, cl) = (
        &conv.target.comp(1).space.labels,
        &conv.source.comp(1).space.labels,
    );
    let t = flat
        .labels
        .iter()
        .map(|l| (pos(pl, l), pos(cl, &format!("s{l}*")), q(1)))
        .collect();
    alpha.comps[1] = RationalMatrix::from_triplets(conv.target.dim(1), conv.source.dim(1), t)?;
    Twisting::new(conv, alpha)
}

// ---------------------------------------------------------------------------
// twisted composite products

impl Convolution {
    /// `P ∘ C` (no twisting yet).
    pub fn left_composite(&self) -> Result<Composite> {
        Composite::new(
            Arc::new(self.target.module.truncated(self.max_arity)),
            Arc::new(self.source.module.truncated(self.max_arity)),
            self.max_arity,
        )
    }

    /// `C ∘ P`.
    pub fn right_composite(&self) -> Result<Composite> {
        Composite::new(
            Arc::new(self.source.module.truncated(self.max_arity)),
            Arc::new(self.target.module.truncated(self.max_arity)),
            self.max_arity,
        )
    }

    /// The left derivation induced by `f` on `P ∘ C`: split one factor at
    /// its root, apply `f` to the root and compose it into the operad
    /// element, with an overall sign `−1`. With this orientation the left
    /// twisted differential is `d_{P∘C} + d^l_α` and squares to `d^l_{∂α+α⋆α}`.
    pub fn left_derivation(&self, pc: &Composite, f: &ConvolutionElement) -> Vec<RationalMatrix> {
        (0..=pc.max_arity())
            .into_par_iter()
            .map(|n| {
                let cols = pc
                    .elems(n)
                    .iter()
                    .map(|e| self.left_column(pc, n, e, f))
                    .collect();
                RationalMatrix::from_columns(pc.elems(n).len(), cols)
            })
            .collect()
    }

    fn left_column(
        &self,
        pc: &Composite,
        n: usize,
        e: &CompElem,
        f: &ConvolutionElement,
    ) -> SparseVec {
        let (c, p) = (&*self.source, &*self.target);
        let k = e.blocks.len();
        let dp = p.degree(k, e.outer);
        let mut acc = VecAcc::new();
        let mut before = 0i64;
        for j in 0..k {
            let bj = &e.blocks[j];
            let m = bj.len();
            let cj = e.inner[j];
            for t in c.root_decomps(m, cj) {
                let kk = t.blocks.len();
                let fc = f.comps[kk].column(t.outer);
                if fc.is_zero() {
                    continue;
                }
                let dfc = c.degree(kk, t.outer) + f.degree;
                let s = sign_q(f.degree * (dp + before) + dfc * before);
                let outer = p.partial_vec(k, kk, j, &SparseVec::unit(e.outer), fc);
                if outer.is_zero() {
                    continue;
                }
                let mut factors = Vec::with_capacity(k + kk - 1);
                for i in 0..j {
                    factors.push((e.blocks[i].clone(), SparseVec::unit(e.inner[i])));
                }
                for (d, &b) in t.blocks.iter().zip(&t.inner) {
                    let global: Vec<usize> = d.iter().map(|&x| bj[x]).collect();
                    factors.push((global, SparseVec::unit(b)));
                }
                for i in j + 1..k {
                    factors.push((e.blocks[i].clone(), SparseVec::unit(e.inner[i])));
                }
                acc.add_vec(&pc.normalize(n, &outer, &factors), &-(&t.coef * s));
            }
            before += c.degree(m, cj);
        }
        acc.finish()
    }

    /// `d^r_f` on `C ∘ P`: decompose the cooperad element, apply `f` to the
    /// inner part and compose it with the operad elements below it.
    pub fn right_derivation(&self, cp: &Composite, f: &ConvolutionElement) -> Vec<RationalMatrix> {
        (0..=cp.max_arity())
            .into_par_iter()
            .map(|n| {
                let cols = cp
                    .elems(n)
                    .iter()
                    .map(|e| self.right_column(cp, n, e, f))
                    .collect();
                RationalMatrix::from_columns(cp.elems(n).len(), cols)
            })
            .collect()
    }

    fn right_column(
        &self,
        cp: &Composite,
        n: usize,
        e: &CompElem,
        f: &ConvolutionElement,
    ) -> SparseVec {
        let (c, p) = (&*self.source, &*self.target);
        let k = e.blocks.len();
        let mut acc = VecAcc::new();
        for t in c.delta1(k, e.outer) {
            let g = &t.block;
            let kk = k + 1 - g.len();
            let fc = f.comps[g.len()].column(t.inner);
            if fc.is_zero() {
                continue;
            }
            let dfc = c.degree(g.len(), t.inner) + f.degree;
            let s1 = f.degree * c.degree(kk, t.outer);
            let mut degs = vec![dfc];
            degs.extend(
                e.blocks
                    .iter()
                    .zip(&e.inner)
                    .map(|(b, &x)| p.degree(b.len(), x)),
            );
            let mut order = Vec::with_capacity(k + 1);
            let mut factors = Vec::with_capacity(kk);
            for slot in slots(k, g) {
                if slot == *g {
                    order.push(0);
                    order.extend(g.iter().map(|x| x + 1));
                    let mut union: Vec<usize> = g
                        .iter()
                        .flat_map(|&i| e.blocks[i].iter().copied())
                        .collect();
                    union.sort();
                    let locals: Vec<(Vec<usize>, SparseVec)> = g
                        .iter()
                        .map(|&i| {
                            (
                                local_block(&e.blocks[i], &union),
                                SparseVec::unit(e.inner[i]),
                            )
                        })
                        .collect();
                    factors.push((union, p.compose_species(fc, &locals)));
                } else {
                    let i = slot[0];
                    order.push(i + 1);
                    factors.push((e.blocks[i].clone(), SparseVec::unit(e.inner[i])));
                }
            }
            let s = sign_q(s1) * q(koszul_sign(&degs, &order));
            acc.add_vec(
                &cp.normalize(n, &SparseVec::unit(t.outer), &factors),
                &(&t.coef * s),
            );
        }
        acc.finish()
    }

    /// `P ∘_α C` with `d = d_{P∘C} + d^l_α`.
    pub fn left_twisted(&self, alpha: &ConvolutionElement) -> Result<Composite> {
        let mut pc = self.left_composite()?;
        let dl = self.left_derivation(&pc, alpha);
        let ds = add_to_differentials(&pc.module, &dl, &q(1));
        pc.module = pc.module.with_differentials(ds);
        Ok(pc)
    }

    /// `C ∘_α P` with `d = d_{C∘P} + d^r_α`.
    pub fn right_twisted(&self, alpha: &ConvolutionElement) -> Result<Composite> {
        let mut cp = self.right_composite()?;
        let dr = self.right_derivation(&cp, alpha);
        let ds = add_to_differentials(&cp.module, &dr, &q(1));
        cp.module = cp.module.with_differentials(ds);
        Ok(cp)
    }

    /// `P ∘_α C ∘_α P`, realized as `P ∘ (C ∘_α P)` with
    /// `d = d_{P∘C∘P} + Id ∘' d^r_α − d^l_α ∘ Id`, where `d^l_α ∘ Id` is the
    /// root-splitting map with its natural Koszul sign.
    pub fn two_sided(&self, alpha: &ConvolutionElement) -> Result<TwoSided> {
        let inner = self.right_twisted(alpha)?;
        let mut outer = Composite::new(
            Arc::new(self.target.module.truncated(self.max_arity)),
            Arc::new(inner.module.clone()),
            self.max_arity,
        )?;
        let dl: Vec<RationalMatrix> = (0..=self.max_arity)
            .into_par_iter()
            .map(|n| {
                let cols = outer
                    .elems(n)
                    .iter()
                    .map(|e| self.two_sided_left_column(&inner, &outer, n, e, alpha))
                    .collect();
                RationalMatrix::from_columns(outer.elems(n).len(), cols)
            })
            .collect();
        let ds = add_to_differentials(&outer.module, &dl, &q(-1));
        outer.module = outer.module.with_differentials(ds);
        Ok(TwoSided { inner, outer })
    }

    fn two_sided_left_column(
        &self,
        cp: &Composite,
        outer_comp: &Composite,
        n: usize,
        e: &CompElem,
        f: &ConvolutionElement,
    ) -> SparseVec {
        let (c, p) = (&*self.source, &*self.target);
        let k = e.blocks.len();
        let dp = p.degree(k, e.outer);
        let mut acc = VecAcc::new();
        let mut before = 0i64;
        for j in 0..k {
            let bj = &e.blocks[j];
            let y = &cp.elems(bj.len())[e.inner[j]];
            let mj = y.blocks.len();
            for t in c.root_decomps(mj, y.outer) {
                let kk = t.blocks.len();
                let fc = f.comps[kk].column(t.outer);
                if fc.is_zero() {
                    continue;
                }
                let dfc = c.degree(kk, t.outer) + f.degree;
                let s = f.degree * (dp + before) + dfc * before;
                let outer = p.partial_vec(k, kk, j, &SparseVec::unit(e.outer), fc);
                if outer.is_zero() {
                    continue;
                }
                // regroup [b_1 … b_kk, p's of y] block by block
                let mut degs: Vec<i64> = t
                    .blocks
                    .iter()
                    .zip(&t.inner)
                    .map(|(d, &b)| c.degree(d.len(), b))
                    .collect();
                degs.extend(
                    y.blocks
                        .iter()
                        .zip(&y.inner)
                        .map(|(b, &x)| p.degree(b.len(), x)),
                );
                let mut order = Vec::with_capacity(degs.len());
                let mut new_factors = Vec::with_capacity(kk);
                for (si, (slot, &b)) in t.blocks.iter().zip(&t.inner).enumerate() {
                    order.push(si);
                    order.extend(slot.iter().map(|i| kk + i));
                    let mut labels: Vec<usize> = slot
                        .iter()
                        .flat_map(|&i| y.blocks[i].iter().copied())
                        .collect();
                    labels.sort();
                    let locals: Vec<(Vec<usize>, SparseVec)> = slot
                        .iter()
                        .map(|&i| {
                            (
                                local_block(&y.blocks[i], &labels),
                                SparseVec::unit(y.inner[i]),
                            )
                        })
                        .collect();
                    let yv = cp.normalize(labels.len(), &SparseVec::unit(b), &locals);
                    let global: Vec<usize> = labels.iter().map(|&x| bj[x]).collect();
                    new_factors.push((global, yv));
                }
                let ks = koszul_sign(&degs, &order);
                let mut factors = Vec::with_capacity(k + kk - 1);
                for i in 0..j {
                    factors.push((e.blocks[i].clone(), SparseVec::unit(e.inner[i])));
                }
                factors.extend(new_factors);
                for i in j + 1..k {
                    factors.push((e.blocks[i].clone(), SparseVec::unit(e.inner[i])));
                }
                let coef = &t.coef * sign_q(s) * q(ks);
                acc.add_vec(&outer_comp.normalize(n, &outer, &factors), &coef);
            }
            before += cp.elem_degree(y);
        }
        acc.finish()
    }
}

fn add_to_differentials(
    m: &SymModule,
    extra: &[RationalMatrix],
    c: &crate::exactla::Q,
) -> Vec<RationalMatrix> {
    m.comps()
        .iter()
        .zip(extra)
        .map(|(comp, x)| comp.space.d.add_scaled(x, c))
        .collect()
}

/// `P ∘ (C ∘_α P)` with its total differential.
#[derive(Clone, Debug)]
pub struct TwoSided {
    pub inner: Composite,
    pub outer: Composite,
}

// ---------------------------------------------------------------------------
// Koszul criterion

/// How the twisted complexes are split before testing acyclicity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Grading {
    /// One complex per arity.
    Arity,
    /// One complex per arity and weight `≤ max_weight`.
    Weight { max_weight: usize },
}

/// Acyclicity verdicts for the three twisted complexes in one arity and weight.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KoszulPiece {
    pub arity: usize,
    pub weight: Option<usize>,
    /// `C ∘_α P → I` is a quasi-isomorphism.
    pub right: bool,
    /// `I → P ∘_α C` is a quasi-isomorphism.
    pub left: bool,
    /// `P ∘_α C ∘_α P → P` is a quasi-isomorphism.
    pub two_sided: bool,
    pub dims: [usize; 3],
    pub homology: [BTreeMap<i64, usize>; 3],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KoszulReport {
    pub pieces: Vec<KoszulPiece>,
    /// Problems found before testing acyclicity (not twisting, `d² ≠ 0`, …).
    pub problems: Vec<String>,
}

impl KoszulReport {
    pub fn right(&self) -> bool {
        self.problems.is_empty() && self.pieces.iter().all(|p| p.right)
    }

    pub fn left(&self) -> bool {
        self.problems.is_empty() && self.pieces.iter().all(|p| p.left)
    }

    pub fn two_sided(&self) -> bool {
        self.problems.is_empty() && self.pieces.iter().all(|p| p.two_sided)
    }

    pub fn all(&self) -> bool {
        self.right() && self.left() && self.two_sided()
    }
}

fn unit_line(weight_ok: bool) -> FlatComplex {
    if weight_ok {
        FlatComplex {
            degrees: vec![0],
            labels: vec!["1".into()],
            d: RationalMatrix::zeros(1, 1),
        }
    } else {
        FlatComplex::zero()
    }
}

fn squares_to_zero(m: &SymModule) -> bool {
    m.comps()
        .iter()
        .all(|c| c.space.d.compose(&c.space.d).is_zero())
}

/// Builds the map on a restricted piece and tests the cone for acyclicity.
fn quasi_iso_on(
    src: &FlatComplex,
    keep_src: &[usize],
    tgt: &FlatComplex,
    keep_tgt: &[usize],
    f: &RationalMatrix,
) -> std::result::Result<bool, String> {
    let s = src.restrict(keep_src);
    let t = tgt.restrict(keep_tgt);
    let fr = f.submatrix(keep_tgt, keep_src);
    let map = ChainMap::from_flat(&s, &t, &fr).map_err(|e| e.to_string())?;
    Ok(crate::complexes::is_quasi_iso(&map))
}

impl Twisting {
    /// Tests the three twisted complexes for acyclicity, arity by arity.
    pub fn koszul_check(&self, grading: Grading) -> Result<KoszulReport> {
        let conv = &self.conv;
        let (c, p) = (&*conv.source, &*conv.target);
        let mut problems = Vec::new();
        if !self.report().is_twisting() {
            problems.push("the map is not a twisting morphism".into());
            return Ok(KoszulReport {
                pieces: vec![],
                problems,
            });
        }
        let cp = conv.right_twisted(&self.alpha)?;
        let pc = conv.left_twisted(&self.alpha)?;
        let ts = conv.two_sided(&self.alpha)?;
        for (name, m) in [
            ("C∘P", &cp.module),
            ("P∘C", &pc.module),
            ("P∘C∘P", &ts.outer.module),
        ] {
            if !squares_to_zero(m) {
                problems.push(format!(
                    "twisted differential on {name} does not square to zero"
                ));
            }
        }
        if !problems.is_empty() {
            return Ok(KoszulReport {
                pieces: vec![],
                problems,
            });
        }
        let mut pieces = Vec::new();
        for n in 1..=conv.max_arity {
            let (cpc, pcc, tsc, pn) = (
                cp.module.comp(n),
                pc.module.comp(n),
                ts.outer.module.comp(n),
                p.comp(n),
            );
            // C∘P → I
            let eps_r = RationalMatrix::from_columns(
                usize::from(n == 1),
                cp.elems(n)
                    .iter()
                    .map(|e| {
                        if n == 1 && e.outer == c.counit && e.inner[0] == p.unit {
                            SparseVec::unit(0)
                        } else {
                            SparseVec::zero()
                        }
                    })
                    .collect(),
            );
            // I → P∘C
            let eta_l = RationalMatrix::from_columns(
                pc.elems(n).len(),
                if n == 1 {
                    let e = CompElem {
                        blocks: vec![vec![0]],
                        outer: p.unit,
                        inner: vec![c.counit],
                    };
                    vec![SparseVec::unit(pc.index_of(1, &e).expect("unit element"))]
                } else {
                    vec![]
                },
            );
            // P∘C∘P → P
            let eps_ts = RationalMatrix::from_columns(
                pn.dim(),
                ts.outer
                    .elems(n)
                    .iter()
                    .map(|e| self.collapse(&ts.inner, e))
                    .collect(),
            );
            let weights: Vec<Option<usize>> = match grading {
                Grading::Arity => vec![None],
                Grading::Weight { max_weight } => (0..=max_weight).map(Some).collect(),
            };
            for w in weights {
                let sel = |ws: &[usize], dim: usize| -> Vec<usize> {
                    (0..dim)
                        .filter(|&i| w.is_none_or(|w| ws[i] == w))
                        .collect()
                };
                let k_cp = sel(&cpc.weights, cpc.dim());
                let k_pc = sel(&pcc.weights, pcc.dim());
                let k_ts = sel(&tsc.weights, tsc.dim());
                let k_p = sel(&pn.weights, pn.dim());
                let unit_ok = n == 1 && w.is_none_or(|w| w == 0);
                let line = unit_line(n == 1);
                let k_line: Vec<usize> = if unit_ok { vec![0] } else { vec![] };
                let verdict =
                    |r: std::result::Result<bool, String>, problems: &mut Vec<String>| match r {
                        Ok(b) => b,
                        Err(e) => {
                            problems.push(format!("arity {n}: {e}"));
                            false
                        }
                    };
                let right = verdict(
                    quasi_iso_on(&cpc.space, &k_cp, &line, &k_line, &eps_r),
                    &mut problems,
                );
                let left = verdict(
                    quasi_iso_on(&line, &k_line, &pcc.space, &k_pc, &eta_l),
                    &mut problems,
                );
                let two = verdict(
                    quasi_iso_on(&tsc.space, &k_ts, &pn.space, &k_p, &eps_ts),
                    &mut problems,
                );
                let hom = |x: &FlatComplex, k: &[usize]| {
                    x.restrict(k)
                        .homology()
                        .into_iter()
                        .filter(|(_, d)| *d > 0)
                        .collect()
                };
                pieces.push(KoszulPiece {
                    arity: n,
                    weight: w,
                    right,
                    left,
                    two_sided: two,
                    dims: [k_cp.len(), k_pc.len(), k_ts.len()],
                    homology: [
                        hom(&cpc.space, &k_cp),
                        hom(&pcc.space, &k_pc),
                        hom(&tsc.space, &k_ts),
                    ],
                });
            }
        }
        Ok(KoszulReport { pieces, problems })
    }

    /// `P ∘ (C ∘ P) → P`: nonzero only when every cooperad factor is the counit.
    fn collapse(&self, cp: &Composite, e: &CompElem) -> SparseVec {
        let (c, p) = (&*self.conv.source, &*self.conv.target);
        let mut factors = Vec::with_capacity(e.blocks.len());
        for (b, &x) in e.blocks.iter().zip(&e.inner) {
            let y = &cp.elems(b.len())[x];
            if y.blocks.len() != 1 || y.outer != c.counit {
                return SparseVec::zero();
            }
            factors.push((b.clone(), SparseVec::unit(y.inner[0])));
        }
        p.compose_species(&SparseVec::unit(e.outer), &factors)
    }
}

/// `d_α²` on `P ∘ C` next to `d^l_{∂α+α⋆α}`; the two agree for every α.
pub fn left_twisted_square_defect(
    conv: &Convolution,
    alpha: &ConvolutionElement,
) -> Result<(Vec<RationalMatrix>, Vec<RationalMatrix>)> {
    let pc = conv.left_twisted(alpha)?;
    let sq: Vec<RationalMatrix> = pc
        .module
        .comps()
        .iter()
        .map(|c| c.space.d.compose(&c.space.d))
        .collect();
    let base = conv.left_composite()?;
    let predicted = conv.left_derivation(&base, &conv.mc_residual(alpha));
    Ok((sq, predicted))
}

/// `d_α²` on `C ∘ P` next to `d^r_{∂α+α⋆α}`.
pub fn right_twisted_square_defect(
    conv: &Convolution,
    alpha: &ConvolutionElement,
) -> Result<(Vec<RationalMatrix>, Vec<RationalMatrix>)> {
    let cp = conv.right_twisted(alpha)?;
    let sq: Vec<RationalMatrix> = cp
        .module
        .comps()
        .iter()
        .map(|c| c.space.d.compose(&c.space.d))
        .collect();
    let base = conv.right_composite()?;
    let predicted = conv.right_derivation(&base, &conv.mc_residual(alpha));
    Ok((sq, predicted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexes::{direct_sum, disk, sphere};
    use crate::opcoop::{ass_nu_operad, desuspension_operad, end_operad, hadamard_operad};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn shifted_coass(max: usize) -> Arc<Cooperad> {
        let op = hadamard_operad(&desuspension_operad(max), &ass_nu_operad(max));
        Arc::new(Cooperad::dual_of(&op, "S^c⊗coAss").unwrap())
    }

    #[test]
    fn kappa_satisfies_maurer_cartan() {
        let k = kappa(5);
        let r = k.report();
        assert!(r.is_twisting(), "{r:?}");
        assert_eq!(r.residual_support, vec![0; 6]);
        // κ⋆κ is not trivially zero termwise: the arity-3 sum cancels
        let star = k.conv.star(&k.alpha, &k.alpha);
        assert!(star.is_zero());
    }

    #[test]
    fn sign_fault_breaks_kappa_in_arity_three() {
        let broken = Arc::new(shifted_cocomm(4).with_sign_fault(3));
        let r = kappa_from(broken, 4).report();
        assert!(!r.is_twisting());
        assert_eq!(r.first_failure, Some(3));
    }

    #[test]
    fn free_cofree_pair() {
        for v in [
            sphere(1, 0),
            sphere(2, 0),
            direct_sum(&sphere(1, 0), &sphere(1, 1)),
        ] {
            let t = free_cofree_twist(&v, 4).unwrap();
            assert!(t.report().is_twisting());
            let full = tensor_coalgebra_twist(&v, 4).unwrap();
            let r = full.report();
            assert_eq!(r.first_failure, Some(1));
        }
    }

    fn assert_square_identity(conv: &Convolution, alpha: &ConvolutionElement) {
        let (sq, pred) = left_twisted_square_defect(conv, alpha).unwrap();
        assert_eq!(sq, pred, "left");
        let (sq, pred) = right_twisted_square_defect(conv, alpha).unwrap();
        assert_eq!(sq, pred, "right");
    }

    #[test]
    fn twisted_square_is_derivation_of_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let conv = Convolution::new(shifted_coass(4), Arc::new(ass_nu_operad(4)), 4).unwrap();
        for _ in 0..3 {
            let a = conv.random_element(-1, &mut rng, true);
            conv.check(&a).unwrap();
            assert!(!conv.mc_residual(&a).is_zero());
            assert_square_identity(&conv, &a);
        }
    }

    #[test]
    fn twisted_square_with_differentials() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = direct_sum(&disk(1, 1), &sphere(1, 0));
        let p = hadamard_operad(&ass_nu_operad(3), &end_operad(&x, 3));
        let conv = Convolution::new(shifted_coass(3), Arc::new(p), 3).unwrap();
        for skip in [true, false] {
            let a = conv.random_element(-1, &mut rng, skip);
            conv.check(&a).unwrap();
            assert!(!conv.differential(&a).is_zero());
            assert_square_identity(&conv, &a);
        }
    }

    #[test]
    fn convolution_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let conv = Convolution::new(shifted_coass(4), Arc::new(ass_nu_operad(4)), 4).unwrap();
        let f = conv.random_element(-1, &mut rng, true);
        let g = conv.random_element(-1, &mut rng, true);
        let h = conv.random_element(-1, &mut rng, true);
        assert!(conv.star(&f, &conv.zero(0)).is_zero());
        // right pre-Lie: the associator is graded symmetric in the last two slots
        let assoc = |a: &ConvolutionElement, b: &ConvolutionElement, c: &ConvolutionElement| {
            let l = conv.star(&conv.star(a, b), c);
            let r = conv.star(a, &conv.star(b, c));
            l.comps
                .iter()
                .zip(&r.comps)
                .map(|(x, y)| x.sub(y))
                .collect::<Vec<_>>()
        };
        let s = sign_q(g.degree * h.degree);
        let lhs = assoc(&f, &g, &h);
        let rhs: Vec<RationalMatrix> = assoc(&f, &h, &g).iter().map(|m| m.scaled(&s)).collect();
        assert_eq!(lhs, rhs);
        assert!(lhs.iter().any(|m| !m.is_zero()), "associative by accident");

        let x = direct_sum(&disk(1, 1), &sphere(1, 0));
        let p = hadamard_operad(&ass_nu_operad(3), &end_operad(&x, 3));
        let conv = Convolution::new(shifted_coass(3), Arc::new(p), 3).unwrap();
        let f = conv.random_element(0, &mut rng, false);
        let g = conv.random_element(-1, &mut rng, false);
        assert!(conv.differential(&conv.differential(&f)).is_zero());
        assert!(!conv.differential(&f).is_zero());
        // ∂(f⋆g) = ∂f⋆g + (−1)^{|f|} f⋆∂g
        let lhs = conv.differential(&conv.star(&f, &g));
        let rhs = conv
            .star(&conv.differential(&f), &g)
            .add(&conv.star(&f, &conv.differential(&g)));
        assert_eq!(lhs.comps, rhs.comps);
    }

    #[test]
    fn twisted_products_refuse_non_twisting_maps() {
        let broken = kappa_from(Arc::new(shifted_cocomm(3).with_sign_fault(3)), 3);
        assert_eq!(
            broken.twisted_left().unwrap_err(),
            OpError::NotTwisting { arity: 3 }
        );
        let k = kappa(3);
        let pc = k.twisted_left().unwrap();
        assert_eq!(pc.module.dim(1), 1);
        assert_eq!(pc.module.comp(1).space.degrees, vec![0]);
        k.twisted_right().unwrap();
        k.twisted_two_sided().unwrap();
        let zero = free_cofree_twist(&ChainComplex::zero(), 3).unwrap();
        assert!(zero.alpha.is_zero());
        assert!(zero
            .koszul_check(Grading::Weight { max_weight: 3 })
            .unwrap()
            .all());
    }

    #[test]
    fn kappa_is_koszul() {
        let rep = kappa(5).koszul_check(Grading::Arity).unwrap();
        assert!(rep.problems.is_empty(), "{:?}", rep.problems);
        assert!(rep.all(), "{:?}", rep.pieces);
    }

    #[test]
    fn free_cofree_is_koszul() {
        for v in [sphere(1, 0), sphere(2, 0)] {
            let t = free_cofree_twist(&v, 4).unwrap();
            let rep = t.koszul_check(Grading::Weight { max_weight: 4 }).unwrap();
            assert!(rep.all(), "{:?}", rep);
        }
    }

    #[test]
    fn zero_map_is_not_koszul() {
        let k = kappa(3);
        let zero = Twisting {
            alpha: k.conv.zero(-1),
            conv: k.conv,
        };
        let rep = zero.koszul_check(Grading::Arity).unwrap();
        assert!(!rep.right() && !rep.left() && !rep.two_sided());
    }
}
