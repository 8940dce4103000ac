//! Operads via partial compositions, cooperads as their arity-wise duals,
//! the standard library and algebras over operads.
//!
//! Partial compositions follow the species convention: in `μ ∘_i ν`
//! (`μ ∈ P(m)`, `ν ∈ P(n)`, `i` zero-based) the inputs of `ν` become
//! `i..i+n`, inputs of `μ` after `i` move up by `n − 1`.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde_json::Value;

use crate::complexes::{ChainComplex, FlatComplex};
use crate::error::{OpError, Result};
use crate::exactla::{q, sign_q, FixedBasis, RationalMatrix, SparseVec, VecAcc, Q};
use crate::perm::{self, koszul_sign};
use crate::symmod::{hadamard, one_dim, regular_component, InfComposite, SymComponent, SymModule};

/// An operad truncated at `max_arity`, stored through its partial compositions.
#[derive(Clone, Debug)]
pub struct Operad {
    pub name: String,
    pub module: SymModule,
    /// Basis index of the unit in arity 1.
    pub unit: usize,
    /// `comps[m][n][i]`: columns indexed by `a·dim P(n) + b`.
    comps: Vec<Vec<Vec<RationalMatrix>>>,
}

impl Operad {
    /// Tabulates `∘_i` from a function on basis elements.
    pub fn from_partial<F>(name: impl Into<String>, module: SymModule, unit: usize, f: F) -> Operad
    where
        F: Fn(usize, usize, usize, usize, usize) -> SparseVec + Sync,
    {
        let max = module.max_arity();
        let comps = (0..=max)
            .map(|m| {
                (0..=max)
                    .map(|n| {
                        if m == 0 || m + n > max + 1 {
                            return Vec::new();
                        }
                        (0..m)
                            .into_par_iter()
                            .map(|i| {
                                let (dm, dn) = (module.dim(m), module.dim(n));
                                let cols = (0..dm * dn)
                                    .map(|ab| f(m, n, i, ab / dn, ab % dn))
                                    .collect();
                                RationalMatrix::from_columns(module.dim(m + n - 1), cols)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Operad {
            name: name.into(),
            module,
            unit,
            comps,
        }
    }

    pub fn max_arity(&self) -> usize {
        self.module.max_arity()
    }

    pub fn dim(&self, n: usize) -> usize {
        self.module.dim(n)
    }

    pub fn comp(&self, n: usize) -> &SymComponent {
        self.module.comp(n)
    }

    pub fn degree(&self, n: usize, a: usize) -> i64 {
        self.module.comp(n).degree(a)
    }

    pub fn unit_vec(&self) -> SparseVec {
        SparseVec::unit(self.unit)
    }

    /// `a ∘_i b` on basis elements.
    pub fn partial(&self, m: usize, n: usize, i: usize, a: usize, b: usize) -> &SparseVec {
        self.comps[m][n][i].column(a * self.dim(n) + b)
    }

    pub fn partial_matrix(&self, m: usize, n: usize, i: usize) -> &RationalMatrix {
        &self.comps[m][n][i]
    }

    pub fn partial_vec(
        &self,
        m: usize,
        n: usize,
        i: usize,
        x: &SparseVec,
        y: &SparseVec,
    ) -> SparseVec {
        let mut acc = VecAcc::new();
        for (a, ca) in x.iter() {
            for (b, cb) in y.iter() {
                acc.add_vec(self.partial(m, n, i, *a, *b), &(ca * cb));
            }
        }
        acc.finish()
    }

    /// `γ(μ; ν_1, …, ν_k)` where `ν_j` is placed on the sorted labels `B_j`
    /// (a partition of `0..N`); the result lives in `P(N)`.
    pub fn compose_species(
        &self,
        mu: &SparseVec,
        factors: &[(Vec<usize>, SparseVec)],
    ) -> SparseVec {
        let k = factors.len();
        let mut x = mu.clone();
        let mut arity = k;
        let mut offset = 0;
        for (block, v) in factors {
            let n = block.len();
            x = self.partial_vec(arity, n, offset, &x, v);
            arity += n;
            arity -= 1;
            offset += n;
            if x.is_zero() {
                return x;
            }
        }
        let pi: Vec<usize> = factors
            .iter()
            .flat_map(|(b, _)| b.iter().copied())
            .collect();
        if pi.iter().enumerate().all(|(a, &b)| a == b) {
            x
        } else {
            self.comp(arity).act(&pi, &x)
        }
    }

    /// `γ_(1)` on `P ∘_(1) P` (built with `inf_composite(P, P)`), per arity.
    pub fn gamma1(&self, inf: &InfComposite) -> Vec<RationalMatrix> {
        (0..=inf.comp.max_arity())
            .map(|n| {
                let cols = inf
                    .comp
                    .elems(n)
                    .iter()
                    .map(|e| {
                        let j = inf.marked_slot(e);
                        let factors: Vec<(Vec<usize>, SparseVec)> = e
                            .blocks
                            .iter()
                            .zip(&e.inner)
                            .enumerate()
                            .map(|(t, (b, &x))| {
                                let v = if t == j {
                                    SparseVec::unit(x - inf.n1.dim(b.len()))
                                } else {
                                    self.unit_vec()
                                };
                                (b.clone(), v)
                            })
                            .collect();
                        self.compose_species(&SparseVec::unit(e.outer), &factors)
                    })
                    .collect();
                RationalMatrix::from_columns(self.dim(n), cols)
            })
            .collect()
    }

    /// The same operad in a new basis of arity 1 (columns in old
    /// coordinates, each homogeneous); `unit` indexes the new unit and
    /// `label` names the replaced first vector.
    pub fn rebase_arity_one(&self, basis: Vec<SparseVec>, unit: usize, label: &str) -> Operad {
        let d1 = self.dim(1);
        let t = RationalMatrix::from_columns(d1, basis);
        let tinv = crate::exactla::inverse(&t).expect("basis of arity 1");
        let old = self.comp(1);
        let degrees = (0..d1)
            .map(|j| {
                t.column(j)
                    .entries()
                    .first()
                    .map_or(0, |(i, _)| old.degree(*i))
            })
            .collect();
        let mut labels = old.space.labels.clone();
        labels[0] = label.to_string();
        let weights = (0..d1)
            .map(|j| {
                t.column(j)
                    .entries()
                    .first()
                    .map_or(0, |(i, _)| old.weights[*i])
            })
            .collect();
        let comp1 = SymComponent {
            arity: 1,
            space: FlatComplex {
                degrees,
                labels,
                d: tinv.compose(&old.space.d).compose(&t),
            },
            gens: vec![],
            weights,
        };
        let mut comps = self.module.comps().to_vec();
        comps[1] = comp1;
        let module = SymModule::new_unchecked(self.module.name.clone(), comps);
        let lift = |n: usize, a: usize| {
            if n == 1 {
                t.column(a).clone()
            } else {
                SparseVec::unit(a)
            }
        };
        Operad::from_partial(self.name.clone(), module, unit, |m, n, i, a, b| {
            let v = self.partial_vec(m, n, i, &lift(m, a), &lift(n, b));
            if m + n - 1 == 1 {
                tinv.apply(&v)
            } else {
                v
            }
        })
    }

    /// Unit, associativity (sequential and parallel) and equivariance of
    /// the partial compositions, up to the truncation.
    pub fn validate(&self) -> Result<()> {
        self.module.validate()?;
        let max = self.max_arity();
        let fail = |s: String| Err(OpError::AlgebraAxiom(format!("{}: {s}", self.name)));
        if max >= 1 && (self.unit >= self.dim(1) || self.degree(1, self.unit) != 0) {
            return fail("unit is not a degree-0 element of arity 1".into());
        }
        let u = self.unit_vec();
        for m in 1..=max {
            for a in 0..self.dim(m) {
                let x = SparseVec::unit(a);
                if self.partial_vec(1, m, 0, &u, &x) != x {
                    return fail(format!("left unit fails in arity {m}"));
                }
                for i in 0..m {
                    if self.partial_vec(m, 1, i, &x, &u) != x {
                        return fail(format!("right unit fails in arity {m}"));
                    }
                }
            }
        }
        // associativity on basis triples
        for l in 1..=max {
            for m in 0..=max {
                for n in 0..=max {
                    if l + m > max + 1 {
                        continue;
                    }
                    for a in 0..self.dim(l) {
                        for b in 0..self.dim(m) {
                            for c in 0..self.dim(n) {
                                self.check_assoc(l, m, n, a, b, c).or_else(&fail)?;
                            }
                        }
                    }
                }
            }
        }
        // d is a derivation of every ∘_i
        for m in 1..=max {
            for n in 0..=max {
                if m + n > max + 1 {
                    continue;
                }
                let (dm, dn, dt) = (
                    &self.comp(m).space.d,
                    &self.comp(n).space.d,
                    &self.comp(m + n - 1).space.d,
                );
                if dm.is_zero() && dn.is_zero() && dt.is_zero() {
                    continue;
                }
                for i in 0..m {
                    for a in 0..self.dim(m) {
                        for b in 0..self.dim(n) {
                            let lhs = dt.apply(self.partial(m, n, i, a, b));
                            let rhs = self
                                .partial_vec(m, n, i, dm.column(a), &SparseVec::unit(b))
                                .add(
                                    &self
                                        .partial_vec(m, n, i, &SparseVec::unit(a), dn.column(b))
                                        .scaled(&sign_q(self.degree(m, a))),
                                );
                            if lhs != rhs {
                                return fail(format!(
                                    "d is not a derivation of ∘_{i} in arities ({m},{n})"
                                ));
                            }
                        }
                    }
                }
            }
        }
        // equivariance under generators
        for m in 1..=max {
            for n in 0..=max {
                if m + n > max + 1 {
                    continue;
                }
                let big = self.comp(m + n - 1);
                for i in 0..m {
                    for a in 0..self.dim(m) {
                        for b in 0..self.dim(n) {
                            let base = self.partial(m, n, i, a, b);
                            for g in 0..m.saturating_sub(1) {
                                let s = perm::adjacent(m, g);
                                let lhs = self.partial_vec(
                                    m,
                                    n,
                                    s[i],
                                    &self.comp(m).gens[g].column(a).clone(),
                                    &SparseVec::unit(b),
                                );
                                let rho = outer_relabel(m, n, i, &s);
                                if lhs != big.act(&rho, base) {
                                    return fail(format!("outer equivariance at ({m},{n},{i})"));
                                }
                            }
                            for g in 0..n.saturating_sub(1) {
                                let lhs = self.partial_vec(
                                    m,
                                    n,
                                    i,
                                    &SparseVec::unit(a),
                                    &self.comp(n).gens[g].column(b).clone(),
                                );
                                let mut rho = perm::identity(m + n - 1);
                                rho.swap(i + g, i + g + 1);
                                if lhs != big.act(&rho, base) {
                                    return fail(format!("inner equivariance at ({m},{n},{i})"));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn check_assoc(
        &self,
        l: usize,
        m: usize,
        n: usize,
        a: usize,
        b: usize,
        c: usize,
    ) -> std::result::Result<(), String> {
        let max = self.max_arity();
        let ok = |p: usize, r: usize| p >= 1 && p + r <= max + 1;
        let (x, y, z) = (SparseVec::unit(a), SparseVec::unit(b), SparseVec::unit(c));
        let lm = l + m - 1;
        for i in 0..l {
            let xy = self.partial_vec(l, m, i, &x, &y);
            // sequential
            if ok(lm, n) && ok(m, n) {
                for j in 0..m {
                    let lhs = self.partial_vec(lm, n, i + j, &xy, &z);
                    let yz = self.partial_vec(m, n, j, &y, &z);
                    let rhs = self.partial_vec(l, m + n - 1, i, &x, &yz);
                    if lhs != rhs {
                        return Err(format!("sequential associativity ({l},{m},{n},{i},{j})"));
                    }
                }
            }
            // parallel: k > i
            if ok(lm, n) && ok(l, n) && ok(l + n - 1, m) {
                for k in i + 1..l {
                    let lhs = self.partial_vec(lm, n, k + m - 1, &xy, &z);
                    let xz = self.partial_vec(l, n, k, &x, &z);
                    let rhs = self
                        .partial_vec(l + n - 1, m, i, &xz, &y)
                        .scaled(&sign_q(self.degree(m, b) * self.degree(n, c)));
                    if lhs != rhs {
                        return Err(format!("parallel associativity ({l},{m},{n},{i},{k})"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Positions of `λ ∘_i μ` after relabelling `λ` by `σ`: the induced
/// permutation `ρ` with `L(σ)λ ∘_{σ(i)} μ = L(ρ)(λ ∘_i μ)`.
fn outer_relabel(m: usize, n: usize, i: usize, sigma: &[usize]) -> Vec<usize> {
    let l = sigma[i];
    let new_pos = |j: usize| {
        if sigma[j] < l {
            sigma[j]
        } else {
            sigma[j] + n - 1
        }
    };
    let mut rho = vec![0; m + n - 1];
    for p in 0..m + n - 1 {
        rho[p] = if p < i {
            new_pos(p)
        } else if p < i + n {
            l + (p - i)
        } else {
            new_pos(p - n + 1)
        };
    }
    rho
}

// ---------------------------------------------------------------------------
// library operads

fn ass_words(n: usize) -> (Vec<Vec<usize>>, HashMap<Vec<usize>, usize>) {
    let words = perm::all_perms(n);
    let idx = words
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, w)| (w, i))
        .collect();
    (words, idx)
}

fn substitute_word(u: &[usize], i: usize, v: &[usize]) -> Vec<usize> {
    let n = v.len();
    let mut out = Vec::with_capacity(u.len() + n - 1);
    for &x in u {
        if x == i {
            out.extend(v.iter().map(|y| y + i));
        } else if x > i {
            out.push(x + n - 1);
        } else {
            out.push(x);
        }
    }
    out
}

/// Associative operad; `unital` adds the empty word in arity 0.
fn ass_impl(max_arity: usize, unital: bool) -> Operad {
    let comps = (0..=max_arity)
        .map(|n| {
            if n == 0 && !unital {
                SymComponent::zero(0)
            } else {
                regular_component(n, n.saturating_sub(1))
            }
        })
        .collect();
    let module = SymModule::new_unchecked(if unital { "Ass" } else { "Ass^nu" }, comps);
    let tables: Vec<_> = (0..=max_arity).map(ass_words).collect();
    Operad::from_partial(module.name.clone(), module, 0, |m, n, i, a, b| {
        if n == 0 && !unital {
            return SparseVec::zero();
        }
        let w = substitute_word(&tables[m].0[a], i, &tables[n].0[b]);
        SparseVec::unit(tables[m + n - 1].1[&w])
    })
}

pub fn ass_operad(max_arity: usize) -> Operad {
    ass_impl(max_arity, true)
}

pub fn ass_nu_operad(max_arity: usize) -> Operad {
    ass_impl(max_arity, false)
}

fn comm_impl(max_arity: usize, unital: bool) -> Operad {
    let comps = (0..=max_arity)
        .map(|n| {
            if n == 0 && !unital {
                SymComponent::zero(0)
            } else {
                one_dim(n, 0, &format!("c{n}"), 1, n.saturating_sub(1))
            }
        })
        .collect();
    let module = SymModule::new_unchecked(if unital { "Comm" } else { "Comm^nu" }, comps);
    Operad::from_partial(module.name.clone(), module, 0, |_, n, _, _, _| {
        if n == 0 && !unital {
            SparseVec::zero()
        } else {
            SparseVec::unit(0)
        }
    })
}

pub fn comm_operad(max_arity: usize) -> Operad {
    comm_impl(max_arity, true)
}

pub fn comm_nu_operad(max_arity: usize) -> Operad {
    comm_impl(max_arity, false)
}

/// Words `(0, w_1, …, w_{n−1})` indexing the left-normed Dynkin basis of Lie(n).
pub fn dynkin_words(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return Vec::new();
    }
    perm::all_perms(n - 1)
        .into_iter()
        .map(|p| {
            std::iter::once(0)
                .chain(p.into_iter().map(|x| x + 1))
                .collect()
        })
        .collect()
}

/// `[[…[x_{w_0}, x_{w_1}], …], x_{w_{n−1}}]` expanded in Ass(n).
pub fn dynkin_vector(word: &[usize], index: &HashMap<Vec<usize>, usize>) -> SparseVec {
    let mut terms: Vec<(Vec<usize>, i64)> = vec![(vec![word[0]], 1)];
    for &y in &word[1..] {
        let mut next = Vec::with_capacity(terms.len() * 2);
        for (m, c) in &terms {
            let mut left = m.clone();
            left.push(y);
            next.push((left, *c));
            let mut right = vec![y];
            right.extend(m);
            next.push((right, -c));
        }
        terms = next;
    }
    SparseVec::from_entries(terms.into_iter().map(|(m, c)| (index[&m], q(c))).collect())
}

/// A sub-operad of `ambient` spanned arity-wise by the given vectors (used
/// as the basis); closure under the action and compositions is verified.
pub fn sub_operad(
    ambient: &Operad,
    name: &str,
    spans: Vec<Vec<SparseVec>>,
    labels: Vec<Vec<String>>,
    unit: usize,
) -> Result<Operad> {
    let max = ambient.max_arity();
    let mut bases = Vec::new();
    let mut comps = Vec::new();
    for n in 0..=max {
        let ac = ambient.comp(n);
        let fb = FixedBasis::new(ac.dim(), &spans[n]).ok_or_else(|| {
            OpError::AlgebraAxiom(format!("{name}: dependent spanning set in arity {n}"))
        })?;
        let coords = |v: &SparseVec| {
            fb.coordinates(v)
                .ok_or_else(|| OpError::AlgebraAxiom(format!("{name}: not closed in arity {n}")))
        };
        let gens = ac
            .gens
            .iter()
            .map(|g| {
                let cols = spans[n]
                    .iter()
                    .map(|v| coords(&g.apply(v)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(RationalMatrix::from_columns(spans[n].len(), cols))
            })
            .collect::<Result<Vec<_>>>()?;
        let d_cols = spans[n]
            .iter()
            .map(|v| coords(&ac.space.d.apply(v)))
            .collect::<Result<Vec<_>>>()?;
        let lead = |v: &SparseVec| v.entries()[0].0;
        comps.push(SymComponent {
            arity: n,
            space: FlatComplex {
                degrees: spans[n].iter().map(|v| ac.degree(lead(v))).collect(),
                labels: labels[n].clone(),
                d: RationalMatrix::from_columns(spans[n].len(), d_cols),
            },
            gens,
            weights: spans[n].iter().map(|v| ac.weights[lead(v)]).collect(),
        });
        bases.push(fb);
    }
    let module = SymModule::new(name, comps)?;
    // closure under compositions
    for m in 1..=max {
        for n in 0..=max - m + 1 {
            if m + n > max + 1 {
                continue;
            }
            for i in 0..m {
                for x in &spans[m] {
                    for y in &spans[n] {
                        let v = ambient.partial_vec(m, n, i, x, y);
                        if bases[m + n - 1].coordinates(&v).is_none() {
                            return Err(OpError::AlgebraAxiom(format!(
                                "{name}: not closed under ∘_{i} at ({m},{n})"
                            )));
                        }
                    }
                }
            }
        }
    }
    let spans_ref = &spans;
    let bases_ref = &bases;
    Ok(Operad::from_partial(name, module, unit, |m, n, i, a, b| {
        let v = ambient.partial_vec(m, n, i, &spans_ref[m][a], &spans_ref[n][b]);
        bases_ref[m + n - 1].coords_unchecked(&v)
    }))
}

/// Lie operad: left-normed Dynkin brackets inside Ass^nu.
pub fn lie_operad(max_arity: usize) -> Operad {
    let ass = ass_nu_operad(max_arity);
    let mut spans = Vec::new();
    let mut labels = Vec::new();
    for n in 0..=max_arity {
        let (_, idx) = ass_words(n);
        let words = dynkin_words(n);
        spans.push(words.iter().map(|w| dynkin_vector(w, &idx)).collect());
        labels.push(words.iter().map(|w| bracket_label(w)).collect());
    }
    sub_operad(&ass, "Lie", spans, labels, 0).expect("Dynkin span is a sub-operad")
}

fn bracket_label(w: &[usize]) -> String {
    let mut s = format!("x{}", w[0] + 1);
    for &y in &w[1..] {
        s = format!("[{s},x{}]", y + 1);
    }
    s
}

/// `End_{k[s]}` for the line `k[s]` whose generator has degree `gen_degree`:
/// `f_n` of degree `(1−n)·gen_degree`, `f_m ∘_i f_n = (−1)^{|f_n|·i·gen_degree} f_{m+n−1}`.
pub fn end_line_operad(max_arity: usize, gen_degree: i64, name: &str) -> Operad {
    let deg = |n: usize| (1 - n as i64) * gen_degree;
    let comps = (0..=max_arity)
        .map(|n| {
            if n == 0 {
                SymComponent::zero(0)
            } else {
                one_dim(
                    n,
                    deg(n),
                    &format!("f{n}"),
                    if gen_degree % 2 == 0 { 1 } else { -1 },
                    0,
                )
            }
        })
        .collect();
    let module = SymModule::new_unchecked(name, comps);
    Operad::from_partial(name, module, 0, |_, n, i, _, _| {
        if n == 0 {
            return SparseVec::zero();
        }
        SparseVec::single(0, sign_q(deg(n) * i as i64 * gen_degree))
    })
}

/// The shifting operad 𝔖 = End_{k[1]} (arity n in degree n − 1).
pub fn suspension_operad(max_arity: usize) -> Operad {
    end_line_operad(max_arity, -1, "S")
}

/// End_{k[−1]} (arity n in degree 1 − n), whose dual is the shifting cooperad.
pub fn desuspension_operad(max_arity: usize) -> Operad {
    end_line_operad(max_arity, 1, "S^-")
}

/// `End_X(n) = Hom(X^{⊗n}, X)` for `n ≥ 1`, on elementary maps `E[y; u]`
/// sending the word `u` to the basis vector `y`.
pub fn end_operad(x: &ChainComplex, max_arity: usize) -> Operad {
    let flat = x.to_flat();
    let dx = flat.dim();
    let xdeg = flat.degrees.clone();
    let words: Vec<Vec<Vec<usize>>> = (0..=max_arity)
        .map(|n| {
            let mut out = Vec::new();
            crate::symmod::for_each_tuple(&vec![dx; n], |t| out.push(t.to_vec()));
            if n == 0 {
                out.clear();
            }
            out
        })
        .collect();
    let encode = |u: &[usize]| u.iter().fold(0usize, |acc, &x| acc * dx + x);
    let wdeg = |u: &[usize]| u.iter().map(|&x| xdeg[x]).sum::<i64>();
    let comps = (0..=max_arity)
        .map(|n| {
            let ws = &words[n];
            let dim = dx * ws.len();
            let mut degrees = Vec::with_capacity(dim);
            let mut labels = Vec::with_capacity(dim);
            for y in 0..dx {
                for u in ws {
                    degrees.push(xdeg[y] - wdeg(u));
                    let us: Vec<&str> = u.iter().map(|&t| flat.labels[t].as_str()).collect();
                    labels.push(format!("[{}<-{}]", flat.labels[y], us.join(",")));
                }
            }
            let idx = |y: usize, u: &[usize]| y * ws.len() + encode(u);
            let mut d = Vec::with_capacity(dim);
            for y in 0..dx {
                for u in ws {
                    let deg = xdeg[y] - wdeg(u);
                    let mut acc = VecAcc::new();
                    for (y2, c) in flat.d.column(y).iter() {
                        acc.add(idx(*y2, u), c.clone());
                    }
                    // − (−1)^{|E|} E ∘ d
                    let mut pre = 0i64;
                    for l in 0..n {
                        for x0 in 0..dx {
                            let c = flat.d.get(u[l], x0);
                            if c != q(0) {
                                let mut v = u.clone();
                                v[l] = x0;
                                acc.add(idx(y, &v), -c * sign_q(deg + pre));
                            }
                        }
                        pre += xdeg[u[l]];
                    }
                    d.push(acc.finish());
                }
            }
            let gens = (0..n.saturating_sub(1))
                .map(|i| {
                    let cols = (0..dim)
                        .map(|e| {
                            let (y, u) = (e / ws.len(), &ws[e % ws.len()]);
                            let mut v = u.clone();
                            v.swap(i, i + 1);
                            SparseVec::single(idx(y, &v), sign_q(xdeg[u[i]] * xdeg[u[i + 1]]))
                        })
                        .collect();
                    RationalMatrix::from_columns(dim, cols)
                })
                .collect();
            SymComponent {
                arity: n,
                space: FlatComplex {
                    degrees,
                    labels,
                    d: RationalMatrix::from_columns(dim, d),
                },
                gens,
                weights: vec![0; dim],
            }
        })
        .collect();
    let module = SymModule::new_unchecked("End", comps);
    let words2 = words.clone();
    let raw = Operad::from_partial("End", module, 0, move |m, n, i, a, b| {
        if n == 0 {
            return SparseVec::zero();
        }
        let (wm, wn) = (&words2[m], &words2[n]);
        let (y, u) = (a / wm.len(), &wm[a % wm.len()]);
        let (z, w) = (b / wn.len(), &wn[b % wn.len()]);
        if u[i] != z {
            return SparseVec::zero();
        }
        let g = xdeg[z] - w.iter().map(|&t| xdeg[t]).sum::<i64>();
        let pre: i64 = u[..i].iter().map(|&t| xdeg[t]).sum();
        let mut v = u[..i].to_vec();
        v.extend(w);
        v.extend(&u[i + 1..]);
        SparseVec::single(y * dx.pow((m + n - 1) as u32) + encode(&v), sign_q(g * pre))
    });
    if max_arity == 0 || dx == 0 {
        return raw;
    }
    // arity 1: replace E[0;0] by the identity Σ_y E[y;y]
    let id = SparseVec::from_entries((0..dx).map(|y| (y * dx + y, q(1))).collect());
    let mut basis: Vec<SparseVec> = (0..dx * dx).map(SparseVec::unit).collect();
    basis[0] = id;
    raw.rebase_arity_one(basis, 0, "id")
}

pub fn hadamard_operad(p: &Operad, r: &Operad) -> Operad {
    let module = hadamard(&p.module, &r.module);
    let unit = p.unit * r.dim(1) + r.unit;
    let name = format!("{}⊗_H{}", p.name, r.name);
    Operad::from_partial(name, module, unit, |m, n, i, a, b| {
        let (dm, dn) = (r.dim(m), r.dim(n));
        let (a1, a2, b1, b2) = (a / dm, a % dm, b / dn, b % dn);
        let s = sign_q(r.degree(m, a2) * p.degree(n, b1));
        let x = p.partial(m, n, i, a1, b1);
        let y = r.partial(m, n, i, a2, b2);
        let dt = r.dim(m + n - 1);
        let mut e = Vec::new();
        for (u, cu) in x.iter() {
            for (v, cv) in y.iter() {
                e.push((u * dt + v, cu * cv * &s));
            }
        }
        SparseVec::from_entries(e)
    })
}

/// An operad concentrated in arity 1 from a unital algebra table:
/// `product[a][b] = a·b` (which is `a ∘_0 b`).
pub fn arity_one_operad(
    name: &str,
    space: FlatComplex,
    weights: Vec<usize>,
    unit: usize,
    product: Vec<Vec<SparseVec>>,
) -> Operad {
    let comp1 = SymComponent {
        arity: 1,
        space,
        gens: vec![],
        weights,
    };
    let module = SymModule::new_unchecked(name, vec![SymComponent::zero(0), comp1]);
    Operad::from_partial(name, module, unit, move |_, _, _, a, b| {
        product[a][b].clone()
    })
}

/// Words of length `≤ max_weight` over `d` letters, shortlex order.
pub fn words_upto(d: usize, max_weight: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..max_weight {
        let mut next = Vec::new();
        for w in &layer {
            for x in 0..d {
                let mut v: Vec<usize> = w.clone();
                v.push(x);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// T(V) truncated at `max_weight`, as an arity-1 operad (concatenation).
pub fn tensor_algebra(v: &ChainComplex, max_weight: usize) -> Result<Operad> {
    let flat = v.to_flat();
    if !flat.d.is_zero() {
        return Err(OpError::ArityViolation(
            "tensor algebra generators must carry zero differential".into(),
        ));
    }
    let words = words_upto(flat.dim(), max_weight);
    let index: HashMap<Vec<usize>, usize> = words
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, w)| (w, i))
        .collect();
    let degrees = words
        .iter()
        .map(|w| w.iter().map(|&x| flat.degrees[x]).sum())
        .collect();
    let labels = words
        .iter()
        .map(|w| {
            if w.is_empty() {
                "1".to_string()
            } else {
                w.iter()
                    .map(|&x| flat.labels[x].clone())
                    .collect::<Vec<_>>()
                    .join("")
            }
        })
        .collect();
    let weights = words.iter().map(|w| w.len()).collect();
    let product = words
        .iter()
        .map(|a| {
            words
                .iter()
                .map(|b| {
                    let mut w = a.clone();
                    w.extend(b);
                    index
                        .get(&w)
                        .map_or(SparseVec::zero(), |&i| SparseVec::unit(i))
                })
                .collect()
        })
        .collect();
    let n = words.len();
    Ok(arity_one_operad(
        "T(V)",
        FlatComplex {
            degrees,
            labels,
            d: RationalMatrix::zeros(n, n),
        },
        weights,
        0,
        product,
    ))
}

/// ℚ ⊕ W with `W·W = 0`, as an arity-1 operad; `W` sits in weight 1.
pub fn square_zero_operad(name: &str, w_degrees: &[i64], w_labels: &[String]) -> Operad {
    let n = w_degrees.len() + 1;
    let mut degrees = vec![0];
    degrees.extend(w_degrees);
    let mut labels = vec!["1".to_string()];
    labels.extend(w_labels.iter().cloned());
    let mut weights = vec![0];
    weights.extend(std::iter::repeat_n(1, n - 1));
    let product = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| match (a, b) {
                    (0, b) => SparseVec::unit(b),
                    (a, 0) => SparseVec::unit(a),
                    _ => SparseVec::zero(),
                })
                .collect()
        })
        .collect();
    arity_one_operad(
        name,
        FlatComplex {
            degrees,
            labels,
            d: RationalMatrix::zeros(n, n),
        },
        weights,
        0,
        product,
    )
}

// ---------------------------------------------------------------------------
// cooperads

/// One term `(φ_a ; G, φ_b)` of an infinitesimal decomposition: outer
/// element of `C(N − |G| + 1)`, inner element of `C(|G|)` on the labels `G`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decomp {
    pub outer: usize,
    pub block: Vec<usize>,
    pub inner: usize,
    pub coef: Q,
}

/// A cooperad realized as the arity-wise dual of a finite-dimensional operad.
#[derive(Clone, Debug)]
pub struct Cooperad {
    pub name: String,
    pub module: SymModule,
    pub counit: usize,
    pub dual_of: Arc<Operad>,
    decomps: Vec<Vec<Vec<Decomp>>>,
    roots: Vec<OnceLock<Vec<Vec<RootDecomp>>>>,
}

/// One term `(φ_a; B_1, φ_{b_1}, …, B_k, φ_{b_k})` of the full decomposition:
/// the root vertex and everything below it, blocks listed by minimum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RootDecomp {
    pub outer: usize,
    pub blocks: Vec<Vec<usize>>,
    pub inner: Vec<usize>,
    pub coef: Q,
}

/// The arity-wise dual Σ-module: degrees negated, contragredient action,
/// dual differential `d^∨φ = −(−1)^{|φ|} φ∘d`.
pub fn dual_module(m: &SymModule, name: &str) -> SymModule {
    let comps = m
        .comps()
        .iter()
        .map(|c| {
            let degrees: Vec<i64> = c.space.degrees.iter().map(|d| -d).collect();
            let dt = c.space.d.transpose();
            let d = RationalMatrix::from_columns(
                c.dim(),
                (0..c.dim())
                    .map(|e| dt.column(e).scaled(&-sign_q(degrees[e])))
                    .collect(),
            );
            SymComponent {
                arity: c.arity,
                space: FlatComplex {
                    degrees,
                    labels: c.space.labels.iter().map(|l| format!("{l}*")).collect(),
                    d,
                },
                gens: c.gens.iter().map(|g| g.transpose()).collect(),
                weights: c.weights.clone(),
            }
        })
        .collect();
    SymModule::new_unchecked(name, comps)
}

impl Cooperad {
    pub fn dual_of(op: &Operad, name: &str) -> Result<Cooperad> {
        if !op.module.is_reduced() {
            return Err(OpError::NotReduced);
        }
        let module = dual_module(&op.module, name);
        let max = op.max_arity();
        let decomps: Vec<Vec<Vec<Decomp>>> = (0..=max)
            .into_par_iter()
            .map(|nn| {
                let mut lists = vec![Vec::new(); op.dim(nn)];
                for n in 1..=nn {
                    let k = nn + 1 - n;
                    for g in perm::combinations(nn, n) {
                        let rest: Vec<usize> = (0..nn).filter(|x| !g.contains(x)).collect();
                        let j = rest.iter().filter(|&&x| x < g[0]).count();
                        let mut pi: Vec<usize> = rest[..j].to_vec();
                        pi.extend(&g);
                        pi.extend(&rest[j..]);
                        for a in 0..op.dim(k) {
                            for b in 0..op.dim(n) {
                                let v = op.partial(k, n, j, a, b);
                                if v.is_zero() {
                                    continue;
                                }
                                let v = op.comp(nn).act(&pi, v);
                                let s = sign_q(op.degree(k, a) * op.degree(n, b));
                                for (e, c) in v.iter() {
                                    lists[*e].push(Decomp {
                                        outer: a,
                                        block: g.clone(),
                                        inner: b,
                                        coef: c * &s,
                                    });
                                }
                            }
                        }
                    }
                }
                lists
            })
            .collect();
        Ok(Cooperad {
            name: name.to_string(),
            module,
            counit: op.unit,
            dual_of: Arc::new(op.clone()),
            decomps,
            roots: (0..=max).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn max_arity(&self) -> usize {
        self.module.max_arity()
    }

    pub fn dim(&self, n: usize) -> usize {
        self.module.dim(n)
    }

    pub fn comp(&self, n: usize) -> &SymComponent {
        self.module.comp(n)
    }

    pub fn degree(&self, n: usize, e: usize) -> i64 {
        self.module.comp(n).degree(e)
    }

    pub fn weight(&self, n: usize, e: usize) -> usize {
        self.module.comp(n).weights[e]
    }

    /// `Δ_(1)(φ_e)` for `e ∈ C(n)`.
    pub fn delta1(&self, n: usize, e: usize) -> &[Decomp] {
        &self.decomps[n][e]
    }

    /// `Δ_(1)` as matrices into `C ∘_(1) C` (built with `inf_composite(C, C)`).
    pub fn delta1_matrices(&self, inf: &InfComposite) -> Vec<RationalMatrix> {
        (0..=inf.comp.max_arity())
            .map(|nn| {
                let cols = (0..self.dim(nn))
                    .map(|e| {
                        let mut acc = VecAcc::new();
                        for t in self.delta1(nn, e) {
                            let elem = inf_elem(inf, nn, t);
                            if let Some(i) = inf.comp.index_of(nn, &elem) {
                                acc.add(i, t.coef.clone());
                            }
                        }
                        acc.finish()
                    })
                    .collect();
                RationalMatrix::from_columns(inf.module().dim(nn), cols)
            })
            .collect()
    }

    /// Full decomposition of `φ_e ∈ C(n)` split at the root, with the
    /// pairing sign `(−1)^{Σ_i |b_i|(|a| + Σ_{l<i}|b_l|)}`. Computed on first use.
    pub fn root_decomps(&self, n: usize, e: usize) -> &[RootDecomp] {
        &self.roots[n].get_or_init(|| self.compute_roots(n))[e]
    }

    fn compute_roots(&self, nn: usize) -> Vec<Vec<RootDecomp>> {
        let op = &self.dual_of;
        let mut lists = vec![Vec::new(); op.dim(nn)];
        for blocks in perm::set_partitions(nn) {
            let k = blocks.len();
            let sizes: Vec<usize> = blocks.iter().map(|b| op.dim(b.len())).collect();
            for a in 0..op.dim(k) {
                let da = op.degree(k, a);
                crate::symmod::for_each_tuple(&sizes, |tuple| {
                    let factors: Vec<(Vec<usize>, SparseVec)> = blocks
                        .iter()
                        .zip(tuple)
                        .map(|(b, &x)| (b.clone(), SparseVec::unit(x)))
                        .collect();
                    let v = op.compose_species(&SparseVec::unit(a), &factors);
                    if v.is_zero() {
                        return;
                    }
                    let mut s = 0i64;
                    let mut acc = da;
                    for (b, &x) in blocks.iter().zip(tuple) {
                        let db = op.degree(b.len(), x);
                        s += db * acc;
                        acc += db;
                    }
                    for (e, c) in v.iter() {
                        lists[*e].push(RootDecomp {
                            outer: a,
                            blocks: blocks.clone(),
                            inner: tuple.to_vec(),
                            coef: c * sign_q(s),
                        });
                    }
                });
            }
        }
        lists
    }

    /// A deliberately broken copy: in arity `n`, terms whose inner block
    /// avoids label 0 change sign. Used to exercise the twisting checks.
    #[doc(hidden)]
    pub fn with_sign_fault(&self, n: usize) -> Cooperad {
        let mut c = self.clone();
        if n < c.decomps.len() {
            for list in &mut c.decomps[n] {
                for t in list.iter_mut() {
                    if t.block[0] > 0 {
                        t.coef = -t.coef.clone();
                    }
                }
            }
        }
        c
    }

    /// Components of the full decomposition with root arity 2:
    /// `(φ_a; B_1, φ_{b_1}, B_2, φ_{b_2}, coef)` with `0 ∈ B_1`.
    pub fn delta_root2(
        &self,
        nn: usize,
        e: usize,
    ) -> Vec<(usize, Vec<usize>, usize, Vec<usize>, usize, Q)> {
        let op = &self.dual_of;
        let mut out = Vec::new();
        if op.max_arity() < 2 {
            return out;
        }
        for size1 in 1..nn {
            for rest in perm::combinations(nn - 1, size1 - 1) {
                let mut b1 = vec![0];
                b1.extend(rest.iter().map(|x| x + 1));
                let b2: Vec<usize> = (0..nn).filter(|x| !b1.contains(x)).collect();
                for a in 0..op.dim(2) {
                    for x1 in 0..op.dim(b1.len()) {
                        for x2 in 0..op.dim(b2.len()) {
                            let v = op.compose_species(
                                &SparseVec::unit(a),
                                &[
                                    (b1.clone(), SparseVec::unit(x1)),
                                    (b2.clone(), SparseVec::unit(x2)),
                                ],
                            );
                            let c = v.get(e);
                            if c == q(0) {
                                continue;
                            }
                            let (da, d1, d2) = (
                                op.degree(2, a),
                                op.degree(b1.len(), x1),
                                op.degree(b2.len(), x2),
                            );
                            let s = sign_q(d1 * da + d2 * (da + d1));
                            out.push((a, b1.clone(), x1, b2.clone(), x2, c * s));
                        }
                    }
                }
            }
        }
        out
    }
}

/// The element of `C ∘_(1) C` named by a decomposition term.
pub fn inf_elem(inf: &InfComposite, nn: usize, t: &Decomp) -> crate::symmod::CompElem {
    let rest: Vec<usize> = (0..nn).filter(|x| !t.block.contains(x)).collect();
    let mut blocks: Vec<Vec<usize>> = rest.iter().map(|&x| vec![x]).collect();
    blocks.push(t.block.clone());
    blocks.sort_by_key(|b| b[0]);
    let inner = blocks
        .iter()
        .map(|b| {
            if *b == t.block {
                inf.n2_index(b.len(), t.inner)
            } else {
                0
            }
        })
        .collect();
    crate::symmod::CompElem {
        blocks,
        outer: t.outer,
        inner,
    }
}

pub fn cocomm_nu_cooperad(max_arity: usize) -> Cooperad {
    Cooperad::dual_of(&comm_nu_operad(max_arity), "coComm^nu").expect("reduced")
}

pub fn coass_cooperad(max_arity: usize) -> Cooperad {
    Cooperad::dual_of(&ass_nu_operad(max_arity), "coAss").expect("reduced")
}

/// The shifting cooperad 𝔖^c, arity n in degree n − 1.
pub fn suspension_cooperad(max_arity: usize) -> Cooperad {
    Cooperad::dual_of(&desuspension_operad(max_arity), "S^c").expect("reduced")
}

/// 𝔖^c ⊗_H coComm^nu, the source of κ.
pub fn shifted_cocomm(max_arity: usize) -> Cooperad {
    let op = hadamard_operad(&desuspension_operad(max_arity), &comm_nu_operad(max_arity));
    Cooperad::dual_of(&op, "S^c⊗_H coComm^nu").expect("reduced")
}

/// Checks `P(V)[n] ≅ (End_{k[n]} ⊗_H P)(V[n])` weight by weight for
/// `n = ±1`. Both sides are built independently; the comparison map is
/// `(f_w⊗μ)⊗(sv_1…sv_w) ↦ ε·s⊗μ(v_1…v_w)` with `ε` the Koszul sign of
/// moving `μ` and the suspensions into place. It must be well defined on
/// coinvariants, bijective, of degree `−n` and commute with the
/// differentials (the shift contributes `(−1)^n`).
pub fn suspension_iso_check_shift(
    p: &Operad,
    v: &ChainComplex,
    max_weight: usize,
    n: i64,
) -> Result<bool> {
    use crate::complexes::shift;
    use crate::symmod::schur;
    let g = -n;
    let line = end_line_operad(p.max_arity(), g, "End");
    let sp = hadamard_operad(&line, p);
    let lhs = schur(&p.module, v, max_weight)?;
    let rhs = schur(&sp.module, &shift(v, n), max_weight)?;
    let degrees = v.to_flat().degrees;
    // image of an arbitrary (μ; word) pair, normalized on the right
    let phi = |w: usize, mvec: &SparseVec, word: &[usize]| {
        let mut inner = 0i64;
        for j in 0..w {
            inner += word[..j].iter().map(|&x| degrees[x]).sum::<i64>();
        }
        let mut acc = VecAcc::new();
        for (mu, c) in mvec.iter() {
            // f_w ⊗ μ sits at index μ in the Hadamard basis (End is one-dimensional)
            acc.add(*mu, c * sign_q(g * (p.degree(w, *mu) * w as i64 + inner)));
        }
        rhs.normalize(w, &acc.finish(), word)
    };
    for w in 1..=max_weight {
        let (lp, rp) = (&lhs.pieces[w], &rhs.pieces[w]);
        if lp.dim() != rp.dim() {
            return Ok(false);
        }
        let dim = lp.dim();
        let mut cols = Vec::with_capacity(dim);
        for i in 0..dim {
            let (mvec, word) = lhs.rep(w, i);
            let image = phi(w, &mvec, &word);
            // compatibility with the coinvariant relations
            let wdeg: Vec<i64> = word.iter().map(|&x| degrees[x]).collect();
            for t in 0..w.saturating_sub(1) {
                let swapped = p.comp(w).gens[t].apply(&mvec);
                let mut word2 = word.clone();
                word2.swap(t, t + 1);
                let eps = sign_q(wdeg[t] * wdeg[t + 1]);
                if phi(w, &swapped, &word2).scaled(&eps) != image {
                    return Ok(false);
                }
            }
            for (r, _) in image.iter() {
                if rp.space.degrees[*r] != lp.space.degrees[i] + g {
                    return Ok(false);
                }
            }
            cols.push(image);
        }
        let f = RationalMatrix::from_columns(dim, cols);
        if crate::exactla::rank(&f) != dim {
            return Ok(false);
        }
        if rp.space.d.compose(&f) != f.compose(&lp.space.d).scaled(&sign_q(n)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The suspension isomorphism in both directions,
/// `P(V)[−1] ≅ (End_{k[−1]}⊗_H P)(V[−1])` and `P(V)[1] ≅ (𝔖⊗_H P)(V[1])`.
pub fn suspension_iso_check(p: &Operad, v: &ChainComplex, max_weight: usize) -> Result<bool> {
    Ok(suspension_iso_check_shift(p, v, max_weight, -1)?
        && suspension_iso_check_shift(p, v, max_weight, 1)?)
}

// ---------------------------------------------------------------------------
// algebras

/// Structure maps of an algebra over Lie or Comm^nu, given by a binary table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlgebraKind {
    Lie,
    Comm,
}

/// A finite-dimensional algebra over the Lie or the non-unital commutative
/// operad, encoded by its binary operation; `act` evaluates any operation.
#[derive(Clone, Debug)]
pub struct OperadAlgebra {
    pub name: String,
    pub kind: AlgebraKind,
    pub operad: Arc<Operad>,
    pub carrier: FlatComplex,
    /// Extra grading (e.g. word length for free algebras); zero otherwise.
    pub weights: Vec<usize>,
    /// `table[x][y]` = `[x, y]` or `x·y`.
    pub table: Vec<Vec<SparseVec>>,
}

impl OperadAlgebra {
    pub fn dim(&self) -> usize {
        self.carrier.dim()
    }

    pub fn degree(&self, x: usize) -> i64 {
        self.carrier.degrees[x]
    }

    pub fn binary(&self, x: &SparseVec, y: &SparseVec) -> SparseVec {
        let mut acc = VecAcc::new();
        for (a, ca) in x.iter() {
            for (b, cb) in y.iter() {
                acc.add_vec(&self.table[*a][*b], &(ca * cb));
            }
        }
        acc.finish()
    }

    /// `γ_A(μ; a_0, …, a_{n−1})` for a basis operation `μ ∈ P(n)`.
    pub fn act(&self, n: usize, mu: usize, args: &[usize]) -> SparseVec {
        match self.kind {
            AlgebraKind::Lie => {
                let w = &dynkin_words(n)[mu];
                let degs: Vec<i64> = args.iter().map(|&a| self.degree(a)).collect();
                let s = koszul_sign(&degs, w);
                let mut x = SparseVec::unit(args[w[0]]);
                for &j in &w[1..] {
                    x = self.binary(&x, &SparseVec::unit(args[j]));
                    if x.is_zero() {
                        return x;
                    }
                }
                x.scaled(&q(s))
            }
            AlgebraKind::Comm => {
                let mut x = SparseVec::unit(args[0]);
                for &a in &args[1..] {
                    x = self.binary(&x, &SparseVec::unit(a));
                    if x.is_zero() {
                        return x;
                    }
                }
                x
            }
        }
    }

    pub fn act_vec(&self, n: usize, mu: &SparseVec, args: &[usize]) -> SparseVec {
        let mut acc = VecAcc::new();
        for (m, c) in mu.iter() {
            acc.add_vec(&self.act(n, *m, args), c);
        }
        acc.finish()
    }

    /// Axioms of the binary operation: graded (anti)symmetry, Jacobi or
    /// associativity, and `d` a derivation.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let d = &self.carrier.d;
        self.carrier.validate()?;
        let sym = if self.kind == AlgebraKind::Lie { -1 } else { 1 };
        for x in 0..n {
            for y in 0..n {
                let xy = &self.table[x][y];
                let dx = self.degree(x);
                let dy = self.degree(y);
                for (k, _) in xy.iter() {
                    if self.degree(*k) != dx + dy {
                        return Err(OpError::DegreeMismatch(format!("operation on ({x}, {y})")));
                    }
                }
                let yx = self.table[y][x].scaled(&(sign_q(dx * dy) * q(sym)));
                if *xy != yx {
                    return Err(match self.kind {
                        AlgebraKind::Lie => OpError::AntisymmetryFailure(x, y),
                        AlgebraKind::Comm => {
                            OpError::AlgebraAxiom(format!("commutativity on ({x}, {y})"))
                        }
                    });
                }
                // d(xy) = dx·y + (−1)^{|x|} x·dy
                let lhs = d.apply(xy);
                let rhs = self.binary(d.column(x), &SparseVec::unit(y)).add(
                    &self
                        .binary(&SparseVec::unit(x), d.column(y))
                        .scaled(&sign_q(dx)),
                );
                if lhs != rhs {
                    return Err(OpError::LeibnizFailure(x, y));
                }
            }
        }
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    let (ux, uy, uz) = (SparseVec::unit(x), SparseVec::unit(y), SparseVec::unit(z));
                    match self.kind {
                        AlgebraKind::Lie => {
                            // [x,[y,z]] = [[x,y],z] + (−1)^{|x||y|}[y,[x,z]]
                            let lhs = self.binary(&ux, &self.table[y][z]);
                            let rhs = self.binary(&self.table[x][y], &uz).add(
                                &self
                                    .binary(&uy, &self.table[x][z])
                                    .scaled(&sign_q(self.degree(x) * self.degree(y))),
                            );
                            if lhs != rhs {
                                return Err(OpError::JacobiFailure(x, y, z));
                            }
                        }
                        AlgebraKind::Comm => {
                            if self.binary(&ux, &self.table[y][z])
                                != self.binary(&self.table[x][y], &uz)
                            {
                                return Err(OpError::AlgebraAxiom(format!(
                                    "associativity on ({x}, {y}, {z})"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// JSON: the ChainComplex schema plus `"bracket"` (or `"product"`) as
    /// `[[i, j, [[k, "p/q"], …]], …]` over the degree-sorted global basis.
    /// Missing mirrored entries are filled by graded (anti)symmetry.
    pub fn from_json(v: &Value, kind: AlgebraKind, max_arity: usize) -> Result<Self> {
        let cc = ChainComplex::from_json(v)?;
        let carrier = cc.to_flat();
        let key = match kind {
            AlgebraKind::Lie => "bracket",
            AlgebraKind::Comm => "product",
        };
        let n = carrier.dim();
        let mut given: HashMap<(usize, usize), SparseVec> = HashMap::new();
        if let Some(list) = v.get(key) {
            let list = list
                .as_array()
                .ok_or_else(|| OpError::parse(key, "expected a list of [i, j, [[k, value], …]]"))?;
            for (t, entry) in list.iter().enumerate() {
                let f = format!("{key}[{t}]");
                let arr = entry
                    .as_array()
                    .filter(|a| a.len() == 3)
                    .ok_or_else(|| OpError::parse(&f, "expected [i, j, terms]"))?;
                let idx = |x: &Value, what: &str| {
                    x.as_u64()
                        .map(|u| u as usize)
                        .filter(|&u| u < n)
                        .ok_or_else(|| {
                            OpError::parse(
                                format!("{f}.{what}"),
                                format!("expected an index below {n}"),
                            )
                        })
                };
                let (i, j) = (idx(&arr[0], "i")?, idx(&arr[1], "j")?);
                let terms = arr[2]
                    .as_array()
                    .ok_or_else(|| OpError::parse(&f, "terms must be a list"))?;
                let mut e = Vec::new();
                for term in terms {
                    let pair = term
                        .as_array()
                        .filter(|a| a.len() == 2)
                        .ok_or_else(|| OpError::parse(&f, "term must be [k, value]"))?;
                    let k = idx(&pair[0], "k")?;
                    let c = crate::complexes::parse_rational_value(&pair[1]).ok_or_else(|| {
                        OpError::parse(&f, "value must be a rational \"p/q\" or an integer")
                    })?;
                    e.push((k, c));
                }
                given.insert((i, j), SparseVec::from_entries(e));
            }
        }
        let sym = if kind == AlgebraKind::Lie { -1 } else { 1 };
        let mut table = vec![vec![SparseVec::zero(); n]; n];
        for x in 0..n {
            for y in 0..n {
                table[x][y] = match (given.get(&(x, y)), given.get(&(y, x))) {
                    (Some(v), _) => v.clone(),
                    (None, Some(v)) => {
                        v.scaled(&(sign_q(carrier.degrees[x] * carrier.degrees[y]) * q(sym)))
                    }
                    (None, None) => SparseVec::zero(),
                };
            }
        }
        let name = v
            .get("name")
            .and_then(|x| x.as_str())
            .unwrap_or("A")
            .to_string();
        let operad = match kind {
            AlgebraKind::Lie => lie_operad(max_arity),
            AlgebraKind::Comm => comm_nu_operad(max_arity),
        };
        let alg = OperadAlgebra {
            name,
            kind,
            operad: Arc::new(operad),
            weights: vec![0; n],
            carrier,
            table,
        };
        alg.validate()?;
        Ok(alg)
    }
}

/// Lie algebra from structure constants `bracket[x][y]`, validated.
pub fn lie_algebra_from_constants(
    name: &str,
    carrier: FlatComplex,
    bracket: Vec<Vec<SparseVec>>,
    max_arity: usize,
) -> Result<OperadAlgebra> {
    let n = carrier.dim();
    if bracket.len() != n || bracket.iter().any(|r| r.len() != n) {
        return Err(OpError::ShapeMismatch(
            "bracket table must be dim × dim".into(),
        ));
    }
    let alg = OperadAlgebra {
        name: name.to_string(),
        kind: AlgebraKind::Lie,
        operad: Arc::new(lie_operad(max_arity)),
        weights: vec![0; n],
        carrier,
        table: bracket,
    };
    alg.validate()?;
    Ok(alg)
}

fn degree_zero_space(labels: &[&str]) -> FlatComplex {
    let n = labels.len();
    FlatComplex {
        degrees: vec![0; n],
        labels: labels.iter().map(|s| s.to_string()).collect(),
        d: RationalMatrix::zeros(n, n),
    }
}

fn table_from(n: usize, entries: &[(usize, usize, &[(usize, i64)])]) -> Vec<Vec<SparseVec>> {
    let mut t = vec![vec![SparseVec::zero(); n]; n];
    for (i, j, terms) in entries {
        let v = SparseVec::from_entries(terms.iter().map(|(k, c)| (*k, q(*c))).collect());
        t[*j][*i] = v.neg();
        t[*i][*j] = v;
    }
    t
}

/// sl₂ on (e, f, h): `[e,f] = h`, `[h,e] = 2e`, `[h,f] = −2f`.
pub fn sl2(max_arity: usize) -> OperadAlgebra {
    let t = table_from(
        3,
        &[(0, 1, &[(2, 1)]), (2, 0, &[(0, 2)]), (2, 1, &[(1, -2)])],
    );
    lie_algebra_from_constants("sl2", degree_zero_space(&["e", "f", "h"]), t, max_arity)
        .expect("valid")
}

/// Heisenberg algebra on (x, y, z): `[x,y] = z`.
pub fn heisenberg3(max_arity: usize) -> OperadAlgebra {
    let t = table_from(3, &[(0, 1, &[(2, 1)])]);
    lie_algebra_from_constants(
        "heisenberg3",
        degree_zero_space(&["x", "y", "z"]),
        t,
        max_arity,
    )
    .expect("valid")
}

pub fn abelian(n: usize, max_arity: usize) -> OperadAlgebra {
    let labels: Vec<String> = (0..n).map(|i| format!("a{}", i + 1)).collect();
    let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
    let t = vec![vec![SparseVec::zero(); n]; n];
    lie_algebra_from_constants(
        &format!("abelian:{n}"),
        degree_zero_space(&refs),
        t,
        max_arity,
    )
    .expect("valid")
}

/// A one-dimensional abelian Lie algebra concentrated in the given degree.
pub fn abelian_line(degree: i64, max_arity: usize) -> OperadAlgebra {
    let carrier = FlatComplex {
        degrees: vec![degree],
        labels: vec!["x".into()],
        d: RationalMatrix::zeros(1, 1),
    };
    lie_algebra_from_constants("line", carrier, vec![vec![SparseVec::zero()]], max_arity)
        .expect("valid")
}

/// The free Lie algebra on `V`, truncated at word length `max_weight`
/// (the free nilpotent quotient). Basis = Schur normal forms of Lie(V).
pub fn free_lie_algebra(
    v: &ChainComplex,
    max_weight: usize,
) -> Result<(OperadAlgebra, crate::symmod::Schur)> {
    use crate::symmod::Schur;
    let lie = Arc::new(lie_operad(max_weight.max(2)));
    let flat = v.to_flat();
    let schur = Schur::new(
        Arc::new(lie.module.clone()),
        &flat,
        &vec![1; flat.dim()],
        max_weight,
    )?;
    let (total, weights) = schur.total();
    let mut offs = Vec::new();
    let mut o = 0;
    for p in &schur.pieces {
        offs.push(o);
        o += p.dim();
    }
    let n = total.dim();
    let mut table = vec![vec![SparseVec::zero(); n]; n];
    let loc = |g: usize| (weights[g], g - offs[weights[g]]);
    for x in 0..n {
        for y in 0..n {
            let ((wx, ix), (wy, iy)) = (loc(x), loc(y));
            if wx + wy > max_weight {
                continue;
            }
            let (mx, ux) = schur.rep(wx, ix);
            let (my, uy) = schur.rep(wy, iy);
            // γ(bracket; μ_x, μ_y) with the letters of x then y
            let b1: Vec<usize> = (0..wx).collect();
            let b2: Vec<usize> = (wx..wx + wy).collect();
            let comp = lie.compose_species(&SparseVec::unit(0), &[(b1, mx), (b2, my)]);
            // moving μ_y past the letters of x: |μ_y| = 0 for Lie
            let mut word = ux.clone();
            word.extend(&uy);
            let v = schur.normalize(wx + wy, &comp, &word);
            table[x][y] = v.reindex(|i| i + offs[wx + wy]);
        }
    }
    let alg = OperadAlgebra {
        name: "FreeLie".into(),
        kind: AlgebraKind::Lie,
        operad: lie,
        weights,
        carrier: total,
        table,
    };
    Ok((alg, schur))
}

/// Parses a builtin name (`sl2`, `heisenberg3`, `abelian:n`).
pub fn builtin_lie(name: &str, max_arity: usize) -> Option<OperadAlgebra> {
    match name {
        "sl2" => Some(sl2(max_arity)),
        "heisenberg3" | "h3" => Some(heisenberg3(max_arity)),
        _ => {
            let n: usize = name.strip_prefix("abelian:")?.parse().ok()?;
            Some(abelian(n, max_arity))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complexes::{direct_sum, disk, sphere};
    use crate::exactla::rank;
    use crate::symmod::{composite, inf_composite};

    #[test]
    fn library_operads_satisfy_axioms() {
        for op in [
            ass_operad(4),
            ass_nu_operad(4),
            comm_operad(4),
            comm_nu_operad(4),
            lie_operad(4),
            suspension_operad(4),
            desuspension_operad(4),
            hadamard_operad(&suspension_operad(4), &lie_operad(4)),
            tensor_algebra(&sphere(2, 0), 3).unwrap(),
        ] {
            op.validate().unwrap_or_else(|e| panic!("{}: {e}", op.name));
        }
    }

    #[test]
    fn lie_dimensions_and_jacobi() {
        let lie = lie_operad(5);
        assert_eq!(lie.module.dims(), vec![0, 1, 1, 2, 6, 24]);
        // rank of the Dynkin span inside ℚ[Σ_n]
        for n in 1..=4 {
            let (_, idx) = ass_words(n);
            let vs: Vec<SparseVec> = dynkin_words(n)
                .iter()
                .map(|w| dynkin_vector(w, &idx))
                .collect();
            assert_eq!(
                rank(&RationalMatrix::from_columns(perm::factorial(n), vs)),
                perm::factorial(n - 1)
            );
        }
        // [[x1,x2],x3] + [[x2,x3],x1] + [[x3,x1],x2] = 0, built from ∘_i of the bracket
        let b = SparseVec::unit(0);
        let c = lie.partial_vec(2, 2, 0, &b, &b);
        let mut acc = c.clone();
        let cyc = vec![1, 2, 0];
        acc = acc.add(&lie.comp(3).act(&cyc, &c));
        acc = acc.add(&lie.comp(3).act(&perm::compose(&cyc, &cyc), &c));
        assert!(acc.is_zero());
    }

    #[test]
    fn lie_composite_dimensions() {
        // egf −log(1 + log(1 − x)): coefficients 1, 2, 7, 35
        let lie = lie_operad(4);
        let ll = composite(&lie.module, &lie.module, 4).unwrap();
        assert_eq!(ll.module.dims(), vec![0, 1, 2, 7, 35]);
        let cn = comm_nu_operad(3);
        let inf = inf_composite(&cn.module, &cn.module, 3).unwrap();
        assert_eq!(inf.module().dim(2), 3);
    }

    #[test]
    fn gamma1_ranks() {
        let lie = lie_operad(3);
        let inf = inf_composite(&lie.module, &lie.module, 3).unwrap();
        let g = lie.gamma1(&inf);
        assert_eq!(rank(&g[3]), 2);
        let comm = comm_nu_operad(3);
        let inf = inf_composite(&comm.module, &comm.module, 3).unwrap();
        assert_eq!(rank(&comm.gamma1(&inf)[3]), 1);
    }

    #[test]
    fn decomposition_is_transpose_of_composition() {
        for op in [
            comm_nu_operad(4),
            lie_operad(4),
            hadamard_operad(&desuspension_operad(4), &comm_nu_operad(4)),
        ] {
            let co = Cooperad::dual_of(&op, "dual").unwrap();
            let inf_p = inf_composite(&op.module, &op.module, 4).unwrap();
            let inf_c = inf_composite(&co.module, &co.module, 4).unwrap();
            let g = op.gamma1(&inf_p);
            let d = co.delta1_matrices(&inf_c);
            for n in 0..=4 {
                assert_eq!(inf_p.comp.elems(n), inf_c.comp.elems(n));
                // pairing signs (−1)^{|φ_b||a|} on each basis element
                let signed = RationalMatrix::from_columns(
                    g[n].rows(),
                    inf_p
                        .comp
                        .elems(n)
                        .iter()
                        .enumerate()
                        .map(|(i, e)| {
                            let j = inf_p.marked_slot(e);
                            let b = &e.blocks[j];
                            let bi = e.inner[j] - inf_p.n1.dim(b.len());
                            let s = op.degree(b.len(), bi) * op.degree(e.blocks.len(), e.outer);
                            g[n].column(i).scaled(&sign_q(s))
                        })
                        .collect(),
                );
                assert_eq!(d[n], signed.transpose(), "{} arity {n}", op.name);
            }
        }
    }

    #[test]
    fn shifting_operad() {
        let s = suspension_operad(3);
        assert_eq!(s.degree(1, 0), 0);
        assert_eq!(s.degree(2, 0), 1);
        assert_eq!(s.degree(3, 0), 2);
        assert_eq!(s.comp(2).gens[0].get(0, 0), q(-1));
        let sc = shifted_cocomm(3);
        assert_eq!(sc.degree(2, 0), 1);
        assert_eq!(sc.degree(3, 0), 2);
    }

    #[test]
    fn suspension_isomorphism() {
        let v2 = sphere(2, 0);
        for op in [comm_nu_operad(3), lie_operad(3)] {
            assert!(suspension_iso_check(&op, &v2, 3).unwrap(), "{}", op.name);
            assert!(suspension_iso_check(&op, &sphere(1, 0), 3).unwrap());
            assert!(suspension_iso_check(&op, &direct_sum(&disk(1, 1), &sphere(1, 2)), 3).unwrap());
        }
        let i = crate::symmod::unit_module(3);
        let unit_op = Operad::from_partial("I", i, 0, |_, _, _, _, _| SparseVec::unit(0));
        assert!(suspension_iso_check(&unit_op, &v2, 1).unwrap());
    }

    #[test]
    fn lie_algebra_validation() {
        sl2(3).validate().unwrap();
        heisenberg3(3).validate().unwrap();
        abelian(4, 3).validate().unwrap();
        let space = FlatComplex {
            degrees: vec![0],
            labels: vec!["x".into()],
            d: RationalMatrix::zeros(1, 1),
        };
        let err = lie_algebra_from_constants("bad", space, vec![vec![SparseVec::unit(0)]], 3)
            .unwrap_err();
        assert_eq!(err, OpError::AntisymmetryFailure(0, 0));
        // [x,y] = z, [y,z] = y fails Jacobi on (x, y, z)
        let t = table_from(3, &[(0, 1, &[(2, 1)]), (1, 2, &[(1, 1)])]);
        let err = lie_algebra_from_constants("bad", degree_zero_space(&["x", "y", "z"]), t, 3)
            .unwrap_err();
        assert!(matches!(err, OpError::JacobiFailure(..)));
    }

    #[test]
    fn lie_json_ingestion() {
        let v: Value = serde_json::json!({
            "dims": {"0": 3},
            "bracket": [[0, 1, [[2, "1"]]], [2, 0, [[0, "2"]]], [2, 1, [[1, "-2"]]]]
        });
        let a = OperadAlgebra::from_json(&v, AlgebraKind::Lie, 3).unwrap();
        assert_eq!(a.table, sl2(3).table);
        let bad: Value = serde_json::json!({"dims": {"0": 1}, "bracket": [[0, 0, [[0, "1"]]]]});
        assert!(OperadAlgebra::from_json(&bad, AlgebraKind::Lie, 3).is_err());
    }

    #[test]
    fn free_lie_algebra_is_lie() {
        let (f, s) = free_lie_algebra(&sphere(2, 0), 4).unwrap();
        let dims: Vec<usize> = s.pieces.iter().map(|p| p.dim()).collect();
        assert_eq!(dims, vec![0, 2, 1, 2, 3]);
        f.validate().unwrap();
        // operations through act agree with iterated brackets
        let x = f.act(3, 0, &[0, 1, 0]);
        let expect = f.binary(&f.table[0][1], &SparseVec::unit(0));
        assert_eq!(x, expect);
    }

    #[test]
    fn endomorphism_operad_of_a_disk() {
        let x = direct_sum(&disk(1, 1), &sphere(1, 0));
        let e = end_operad(&x, 3);
        assert_eq!(e.module.dims(), vec![0, 9, 27, 81]);
        e.validate().unwrap();
        assert_eq!(e.comp(1).space.labels[e.unit], "id");
        let h = hadamard_operad(&ass_nu_operad(3), &e);
        h.validate().unwrap();
        // a broken differential is caught by the Leibniz check
        let mut bad = e.module.comps().to_vec();
        bad[2].space.d = RationalMatrix::zeros(27, 27);
        let mut corrupt = e.clone();
        corrupt.module = SymModule::new_unchecked("End", bad);
        assert!(corrupt.validate().is_err());
    }

    #[test]
    fn tensor_algebra_dimensions() {
        let t = tensor_algebra(&sphere(2, 0), 4).unwrap();
        let mut by_weight = [0usize; 5];
        for w in &t.comp(1).weights {
            by_weight[*w] += 1;
        }
        assert_eq!(by_weight, [1, 2, 4, 8, 16]);
        let t1 = tensor_algebra(&sphere(1, 0), 3).unwrap();
        assert_eq!(t1.dim(1), 4);
    }
}
