//! The release gate: eleven property checks at desk-scale truncations, each
//! reporting pass or fail, with optional planted faults.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::barcobar::{
    bar, bar_of_free_check, ce_algebra, cobar, counit_graded_check, CooperadCoalgebra,
};
use crate::complexes::{
    cone, cone_with_source_sign, direct_sum, disk, random_complex, random_endomorphism, sphere,
    tensor, tensor_with_rule, ChainComplex, FlatComplex,
};
use crate::exactla::{
    inverse, kernel_basis, random_invertible, random_matrix, rank, RationalMatrix, SparseVec,
    VecAcc,
};
use crate::opcoop::{
    abelian, ass_nu_operad, comm_nu_operad, desuspension_operad, end_operad, hadamard_operad,
    heisenberg3, lie_algebra_from_constants, lie_operad, shifted_cocomm, sl2, suspension_iso_check,
    Cooperad, OperadAlgebra,
};
use crate::perm::{binomial, combinations};
use crate::symmod::SymModule;
use crate::tangent::{cotangent_fiber, dk_unit_check, free_algebra};
use crate::twisting::{
    free_cofree_twist, kappa, kappa_from, left_twisted_square_defect, right_twisted_square_defect,
    Convolution, Grading, Twisting,
};

/// A deliberately planted error, used to show that the checks catch it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Fault {
    /// One decomposition sign of `𝔖^c ⊗_H coComm^nu` in arity 3 is flipped.
    KappaSignFlip,
    /// The `d^X` block of the mapping cone gets the wrong sign.
    ConeSign,
    /// The tensor differential loses its Koszul sign.
    TensorSign,
}

impl Fault {
    pub const NAMES: [&'static str; 3] = ["kappa-sign-flip", "cone-sign", "tensor-sign"];
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "kappa-sign-flip" => Ok(Fault::KappaSignFlip),
            "cone-sign" => Ok(Fault::ConeSign),
            "tensor-sign" => Ok(Fault::TensorSign),
            _ => Err(format!(
                "unknown fault '{s}'; expected one of {}",
                Fault::NAMES.join(", ")
            )),
        }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Fault::KappaSignFlip => "kappa-sign-flip",
            Fault::ConeSign => "cone-sign",
            Fault::TensorSign => "tensor-sign",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SelftestReport {
    pub version: String,
    pub fault: Option<String>,
    pub criteria: Vec<CriterionResult>,
}

impl SelftestReport {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

pub const CRITERIA: [&str; 11] = [
    "structural d² = 0 over a random corpus",
    "Maurer–Cartan for κ and the sign-flipped mutant",
    "d_α² = d_{∂α+α⋆α} for random α",
    "Koszulity of κ, three criteria agreeing",
    "Koszulity of the free/cofree morphism",
    "Chevalley–Eilenberg Betti numbers",
    "bar construction of free Lie algebras",
    "graded counit",
    "suspension isomorphism",
    "cotangent fiber and the Koszul-duality unit",
    "linear-algebra identities",
];

const STRUCTURAL_BUDGET: Duration = Duration::from_secs(60);
const KOSZUL_BUDGET: Duration = Duration::from_secs(300);

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Runs every criterion (in parallel) and collects the results in order.
pub fn selftest(fault: Option<Fault>) -> SelftestReport {
    let criteria = (1..=CRITERIA.len())
        .into_par_iter()
        .map(|id| run_criterion(id, fault))
        .collect();
    SelftestReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        fault: fault.map(|f| f.to_string()),
        criteria,
    }
}

pub fn run_criterion(id: usize, fault: Option<Fault>) -> CriterionResult {
    let out = match id {
        1 => structural(fault),
        2 => maurer_cartan(fault),
        3 => lemma_fidelity(),
        4 => koszul_kappa(fault),
        5 => koszul_free(),
        6 => ce_betti(),
        7 => bar_of_free(),
        8 => graded_counit(),
        9 => suspension(),
        10 => unit_roundtrip(),
        11 => linear_algebra(),
        _ => Err(format!("no criterion {id}")),
    };
    let (pass, detail) = match out {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    CriterionResult {
        id,
        name: CRITERIA
            .get(id.wrapping_sub(1))
            .unwrap_or(&"unknown")
            .to_string(),
        pass,
        detail,
    }
}

fn kappa_for(fault: Option<Fault>, max_arity: usize) -> Twisting {
    if fault == Some(Fault::KappaSignFlip) {
        kappa_from(
            Arc::new(shifted_cocomm(max_arity).with_sign_fault(3)),
            max_arity,
        )
    } else {
        kappa(max_arity)
    }
}

fn squares_to_zero(m: &SymModule) -> bool {
    m.comps()
        .iter()
        .all(|c| c.space.d.compose(&c.space.d).is_zero())
}

fn is_complex(x: &ChainComplex) -> bool {
    x.to_flat().validate().is_ok()
}

/// The same Lie algebra in a random basis of its (degree-0) carrier.
pub fn random_basis_change<R: Rng>(rng: &mut R, g: &OperadAlgebra) -> OperadAlgebra {
    let n = g.dim();
    let p = random_invertible(rng, n, 2);
    let pinv = inverse(&p).expect("invertible");
    let table = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let mut acc = VecAcc::new();
                    for (a, ca) in p.column(i).iter() {
                        for (b, cb) in p.column(j).iter() {
                            acc.add_vec(&g.table[*a][*b], &(ca * cb));
                        }
                    }
                    pinv.apply(&acc.finish())
                })
                .collect()
        })
        .collect();
    lie_algebra_from_constants(
        &format!("{}'", g.name),
        g.carrier.clone(),
        table,
        g.operad.max_arity(),
    )
    .expect("a basis change preserves the Lie axioms")
}

/// Betti numbers of `Λ^•𝔤` with the classical boundary
/// `∂(x_1∧…∧x_k) = Σ_{i<j} (−1)^{i+j} [x_i,x_j]∧x_1…x̂_i…x̂_j…x_k`,
/// for a Lie algebra concentrated in degree 0.
pub fn exterior_betti(g: &OperadAlgebra) -> Vec<usize> {
    let n = g.dim();
    let subsets: Vec<Vec<Vec<usize>>> = (0..=n).map(|k| combinations(n, k)).collect();
    let index = |s: &[usize]| {
        subsets[s.len()]
            .binary_search_by(|t| t.as_slice().cmp(s))
            .expect("sorted subset")
    };
    let mut ranks = vec![0; n + 2];
    for k in 2..=n {
        let cols = subsets[k]
            .iter()
            .map(|s| {
                let mut acc = VecAcc::new();
                for i in 0..k {
                    for j in i + 1..k {
                        let rest: Vec<usize> = s
                            .iter()
                            .enumerate()
                            .filter(|(p, _)| *p != i && *p != j)
                            .map(|(_, &x)| x)
                            .collect();
                        let sg = if (i + j) % 2 == 0 { 1 } else { -1 };
                        for (a, ca) in g.table[s[i]][s[j]].iter() {
                            if rest.contains(a) {
                                continue;
                            }
                            let pos = rest.iter().filter(|&&x| x < *a).count();
                            let mut t = rest.clone();
                            t.insert(pos, *a);
                            let w = if pos % 2 == 0 { sg } else { -sg };
                            acc.add(index(&t), ca * crate::exactla::q(w));
                        }
                    }
                }
                acc.finish()
            })
            .collect();
        ranks[k] = rank(&RationalMatrix::from_columns(subsets[k - 1].len(), cols));
    }
    (0..=n)
        .map(|k| binomial(n, k) - ranks[k] - ranks[k + 1])
        .collect()
}

fn betti_from(h: &std::collections::BTreeMap<i64, usize>, top: usize) -> Vec<usize> {
    (0..=top as i64)
        .map(|k| h.get(&k).copied().unwrap_or(0))
        .collect()
}

// 1 ---------------------------------------------------------------------------

const CORPUS: usize = 50;

fn structural(fault: Option<Fault>) -> Check {
    let start = Instant::now();
    let k4 = kappa_for(fault, 4);
    // κ composites once; they do not depend on the random input
    if k4.report().is_twisting() {
        let conv = &k4.conv;
        let left = conv.left_twisted(&k4.alpha).map_err(err)?;
        let right = conv.right_twisted(&k4.alpha).map_err(err)?;
        let two = conv.two_sided(&k4.alpha).map_err(err)?;
        ensure(
            squares_to_zero(&left.module)
                && squares_to_zero(&right.module)
                && squares_to_zero(&two.inner.module)
                && squares_to_zero(&two.outer.module),
            || "d² ≠ 0 on a κ-twisted composite".into(),
        )?;
    }
    let k3 = kappa(3);
    let pool = [sl2(3), heisenberg3(3), abelian(2, 3), abelian(3, 3)];
    let failures: Vec<String> = (0..CORPUS)
        .into_par_iter()
        .filter_map(|i| structural_case(i as u64, fault, &k3, &pool[i % pool.len()]).err())
        .collect();
    let elapsed = start.elapsed();
    if let Some(f) = failures.first() {
        return Err(format!(
            "{} of {CORPUS} inputs fail; first: {f}",
            failures.len()
        ));
    }
    ensure(elapsed <= STRUCTURAL_BUDGET, || {
        format!("all d² = 0 but the run took {:.1}s", elapsed.as_secs_f64())
    })?;
    Ok(format!(
        "{CORPUS} random inputs: cone, tensor, twisted composites, bar, cobar and CE all square to zero"
    ))
}

fn structural_case(
    seed: u64,
    fault: Option<Fault>,
    k3: &Twisting,
    lie: &OperadAlgebra,
) -> std::result::Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let x = random_complex(&mut rng, -1, 2, 4);
    let y = random_complex(&mut rng, -1, 1, 3);
    let f = random_endomorphism(&mut rng, &x);
    let c = if fault == Some(Fault::ConeSign) {
        cone_with_source_sign(&f, 1)
    } else {
        cone(&f)
    };
    let tens = |a: &ChainComplex, b: &ChainComplex| {
        tensor_with_rule(a, b, fault != Some(Fault::TensorSign))
    };
    ensure(is_complex(&tens(&x, &y)), || {
        format!("input {seed}: tensor d² ≠ 0")
    })?;
    ensure(is_complex(&tens(&c, &y)), || {
        format!("input {seed}: tensor with a cone, d² ≠ 0")
    })?;
    ensure(is_complex(&c), || format!("input {seed}: cone d² ≠ 0"))?;

    // free/cofree composites on a small graded space
    let mut v = ChainComplex::zero();
    for _ in 0..rng.gen_range(1..=2) {
        v = direct_sum(&v, &sphere(1, rng.gen_range(-1..=1)));
    }
    let t = free_cofree_twist(&v, 3).map_err(err)?;
    let left = t.conv.left_twisted(&t.alpha).map_err(err)?;
    let right = t.conv.right_twisted(&t.alpha).map_err(err)?;
    let two = t.conv.two_sided(&t.alpha).map_err(err)?;
    ensure(
        squares_to_zero(&left.module)
            && squares_to_zero(&right.module)
            && squares_to_zero(&two.inner.module)
            && squares_to_zero(&two.outer.module),
        || format!("input {seed}: d² ≠ 0 on a free/cofree composite"),
    )?;

    // bar, cobar, CE of a Lie algebra in a random basis
    let g = random_basis_change(&mut rng, lie);
    let b = bar(&g, k3, 3).map_err(|e| format!("input {seed}: bar: {e}"))?;
    ensure(b.total().validate().is_ok(), || {
        format!("input {seed}: bar d² ≠ 0")
    })?;
    let coalg = CooperadCoalgebra::from_bar(&b).map_err(|e| format!("input {seed}: {e}"))?;
    let om = cobar(&coalg, k3, 3).map_err(|e| format!("input {seed}: cobar: {e}"))?;
    ensure(om.total().validate().is_ok(), || {
        format!("input {seed}: cobar d² ≠ 0")
    })?;
    let ce = ce_algebra(&g, 3).map_err(|e| format!("input {seed}: CE: {e}"))?;
    ensure(ce.algebra.carrier.validate().is_ok(), || {
        format!("input {seed}: CE d² ≠ 0")
    })?;

    // bar of an abelian dg Lie algebra on the random complex
    let xf = x.to_flat();
    let n = xf.dim();
    if n <= 6 {
        let ab = lie_algebra_from_constants("ab", xf, vec![vec![SparseVec::zero(); n]; n], 3)
            .map_err(err)?;
        let b = bar(&ab, k3, 3).map_err(|e| format!("input {seed}: bar: {e}"))?;
        ensure(b.total().validate().is_ok(), || {
            format!("input {seed}: dg bar d² ≠ 0")
        })?;
    }

    // cobar of a dual commutative coalgebra
    if seed.is_multiple_of(5) {
        let degs: Vec<i64> = (0..rng.gen_range(1..=2))
            .map(|_| rng.gen_range(-1..=0) * 2)
            .collect();
        let a = free_algebra(&degs, 3);
        let weights: Vec<usize> = (0..a.dim())
            .filter(|&i| i != a.unit)
            .map(|i| word_len(&a.carrier, i))
            .collect();
        let coalg = CooperadCoalgebra::dual_of_comm(&a, &weights, 3)
            .map_err(|e| format!("input {seed}: {e}"))?;
        let om = cobar(&coalg, k3, 3).map_err(|e| format!("input {seed}: cobar: {e}"))?;
        ensure(om.total().validate().is_ok(), || {
            format!("input {seed}: cobar d² ≠ 0")
        })?;
    }
    Ok(())
}

/// Word length of a free-algebra monomial from its label (`x1·x2` has two).
fn word_len(c: &FlatComplex, i: usize) -> usize {
    c.labels[i].split('·').count()
}

// 2 ---------------------------------------------------------------------------

fn maurer_cartan(fault: Option<Fault>) -> Check {
    let k = kappa_for(fault, 6);
    let r = k.report();
    ensure(r.is_twisting(), || {
        format!(
            "κ fails Maurer–Cartan: first nonzero residual in arity {}",
            r.first_failure.map_or("?".into(), |a| a.to_string())
        )
    })?;
    let mutant = kappa_from(Arc::new(shifted_cocomm(6).with_sign_fault(3)), 6).report();
    ensure(mutant.first_failure == Some(3), || {
        format!(
            "the sign-flipped mutant was not caught in arity 3 ({:?})",
            mutant.first_failure
        )
    })?;
    Ok("κ: residual zero in arities ≤ 6; mutant fails in arity 3".into())
}

// 3 ---------------------------------------------------------------------------

fn shifted_coass(max: usize) -> Arc<Cooperad> {
    let op = hadamard_operad(&desuspension_operad(max), &ass_nu_operad(max));
    Arc::new(Cooperad::dual_of(&op, "S^c⊗coAss").expect("reduced"))
}

fn lemma_fidelity() -> Check {
    let x = direct_sum(&disk(1, 1), &sphere(1, 0));
    let settings: Vec<(Convolution, usize)> = vec![
        // with target Lie every degree −1 map is a multiple of κ, so the Lie case uses End_X
        (
            Convolution::new(
                Arc::new(shifted_cocomm(3)),
                Arc::new(hadamard_operad(&lie_operad(3), &end_operad(&x, 3))),
                3,
            )
            .map_err(err)?,
            8,
        ),
        (
            Convolution::new(shifted_coass(4), Arc::new(ass_nu_operad(4)), 4).map_err(err)?,
            8,
        ),
        (
            Convolution::new(
                shifted_coass(3),
                Arc::new(hadamard_operad(&ass_nu_operad(3), &end_operad(&x, 3))),
                3,
            )
            .map_err(err)?,
            4,
        ),
    ];
    let jobs: Vec<(usize, u64)> = settings
        .iter()
        .enumerate()
        .flat_map(|(s, (_, k))| (0..*k as u64).map(move |i| (s, i)))
        .collect();
    let results: Vec<std::result::Result<(), String>> = jobs
        .par_iter()
        .map(|&(s, i)| {
            let conv = &settings[s].0;
            let mut rng = ChaCha8Rng::seed_from_u64(77 + 100 * s as u64 + i);
            // redraw the rare samples that happen to satisfy Maurer–Cartan
            let a = (0..32)
                .map(|_| conv.random_element(-1, &mut rng, i % 2 == 0))
                .find(|a| !conv.mc_residual(a).is_zero())
                .ok_or_else(|| format!("setting {s} produced only Maurer–Cartan samples"))?;
            let (sq, pred) = left_twisted_square_defect(conv, &a).map_err(err)?;
            for (n, (a, b)) in sq.iter().zip(&pred).enumerate() {
                ensure(a == b, || format!("left, arity {n}, sample {s}/{i}"))?;
            }
            let (sq, pred) = right_twisted_square_defect(conv, &a).map_err(err)?;
            for (n, (a, b)) in sq.iter().zip(&pred).enumerate() {
                ensure(a == b, || format!("right, arity {n}, sample {s}/{i}"))?;
            }
            Ok(())
        })
        .collect();
    if let Some(Err(e)) = results.iter().find(|r| r.is_err()) {
        return Err(format!(
            "d_α² differs from the derivation of the residual: {e}"
        ));
    }
    Ok(format!(
        "{} random non-MC α over three convolution algebras, left and right",
        jobs.len()
    ))
}

// 4, 5 -------------------------------------------------------------------------

fn koszul_kappa(fault: Option<Fault>) -> Check {
    let start = Instant::now();
    let k = kappa_for(fault, 5);
    let rep = k.koszul_check(Grading::Arity).map_err(err)?;
    ensure(rep.problems.is_empty(), || rep.problems.join("; "))?;
    let arities: Vec<usize> = rep.pieces.iter().map(|p| p.arity).collect();
    ensure((2..=5).all(|n| arities.contains(&n)), || {
        format!("arities checked: {arities:?}")
    })?;
    for p in &rep.pieces {
        ensure(p.right && p.left && p.two_sided, || {
            format!(
                "arity {}: right {}, left {}, two-sided {}",
                p.arity, p.right, p.left, p.two_sided
            )
        })?;
    }
    // the verdicts also agree on a non-Koszul map
    let zero = Twisting {
        alpha: k.conv.zero(-1),
        conv: k.conv.clone(),
    };
    let z = zero.koszul_check(Grading::Arity).map_err(err)?;
    ensure(!z.right() && !z.left() && !z.two_sided(), || {
        "the three criteria disagree on α = 0".into()
    })?;
    ensure(start.elapsed() <= KOSZUL_BUDGET, || {
        format!("took {:.1}s", start.elapsed().as_secs_f64())
    })?;
    Ok("arities 2–5: all three twisted complexes acyclic; all three reject α = 0".into())
}

fn koszul_free() -> Check {
    for (name, v) in [("ℚ", sphere(1, 0)), ("ℚ²", sphere(2, 0))] {
        let t = free_cofree_twist(&v, 4).map_err(err)?;
        let rep = t
            .koszul_check(Grading::Weight { max_weight: 4 })
            .map_err(err)?;
        ensure(rep.all(), || {
            format!("V = {name}: some weight ≤ 4 is not acyclic")
        })?;
    }
    Ok("V = ℚ, ℚ²: every weight ≤ 4 acyclic".into())
}

// 6, 7, 8 ----------------------------------------------------------------------

fn ce_betti() -> Check {
    let mut cases: Vec<(OperadAlgebra, Option<Vec<usize>>)> = vec![
        (sl2(3), Some(vec![1, 0, 0, 1])),
        (heisenberg3(3), Some(vec![1, 2, 2, 1])),
    ];
    for n in 1..=5 {
        cases.push((
            abelian(n, n.max(2)),
            Some((0..=n).map(|k| binomial(n, k)).collect()),
        ));
    }
    let mut lines = Vec::new();
    for (g, expected) in cases {
        let n = g.dim();
        let b = bar(&g, &kappa(n.max(2)), n).map_err(err)?;
        let got = betti_from(&b.ce_view().homology(), n);
        let oracle = exterior_betti(&g);
        ensure(got == oracle, || {
            format!("{}: {got:?} vs exterior complex {oracle:?}", g.name)
        })?;
        if let Some(e) = expected {
            ensure(got == e, || {
                format!("{}: {got:?} vs expected {e:?}", g.name)
            })?;
        }
        lines.push(format!("{} {got:?}", g.name));
    }
    Ok(lines.join("; "))
}

fn bar_of_free() -> Check {
    let tw = kappa(4);
    for (name, v) in [
        ("0", ChainComplex::zero()),
        ("ℚ", sphere(1, 0)),
        ("ℚ[1]", sphere(1, 1)),
        ("ℚ²", sphere(2, 0)),
        ("ℚ⊕ℚ[1]", direct_sum(&sphere(1, 0), &sphere(1, 1))),
    ] {
        let r = bar_of_free_check(&v, &tw, 4).map_err(err)?;
        if let Some(p) = r.pieces.iter().find(|p| !p.ok) {
            return Err(format!("V = {name}: weight {} fails", p.weight));
        }
    }
    Ok("dim V ≤ 2: homology is V in weight 1 and zero in weights 2–4".into())
}

fn graded_counit() -> Check {
    let tw = kappa(3);
    for g in [abelian(1, 3), sl2(3)] {
        let r = counit_graded_check(&g, &tw, 3).map_err(err)?;
        if let Some(p) = r.pieces.iter().find(|p| !p.ok) {
            return Err(format!("{}: weight {} fails", g.name, p.weight));
        }
    }
    Ok("abelian ℚ and sl2: weight 1 quasi-isomorphic, weights 2–3 acyclic".into())
}

// 9, 10 ------------------------------------------------------------------------

fn suspension() -> Check {
    let spaces = [
        ("ℚ", sphere(1, 0)),
        ("ℚ[1]", sphere(1, 1)),
        ("ℚ²", sphere(2, 0)),
        ("ℚ⊕ℚ[1]", direct_sum(&sphere(1, 0), &sphere(1, 1))),
        ("D¹", disk(1, 1)),
    ];
    for (pname, p) in [("Comm^nu", comm_nu_operad(3)), ("Lie", lie_operad(3))] {
        for (vname, v) in &spaces {
            ensure(suspension_iso_check(&p, v, 3).map_err(err)?, || {
                format!("{pname} on {vname} fails")
            })?;
        }
    }
    Ok("Comm^nu and Lie, dim V ≤ 2, weights ≤ 3".into())
}

fn unit_roundtrip() -> Check {
    let mut quasi_free = vec![
        free_algebra(&[0, 0], 3),
        free_algebra(&[1, -1], 3),
        free_algebra(&[-2], 4),
    ];
    for g in [sl2(3), heisenberg3(3), abelian(2, 3)] {
        quasi_free.push(ce_algebra(&g, 3).map_err(err)?.algebra);
    }
    for a in &quasi_free {
        let l = cotangent_fiber(a).map_err(err)?;
        ensure(l.matches_generators, || {
            format!("{}: L_0 differs from (generators, d_lin)", a.name)
        })?;
    }
    let mut algs = vec![sl2(3), heisenberg3(3)];
    algs.extend((1..=4).map(|n| abelian(n, n.max(2))));
    for g in &algs {
        let c = dk_unit_check(g).map_err(err)?;
        ensure(c.unit_iso, || {
            format!("{}: the unit is not an isomorphism", g.name)
        })?;
    }
    Ok(format!(
        "{} quasi-free algebras match; unit iso for sl2, h3, abelian 1–4",
        quasi_free.len()
    ))
}

// 11 ---------------------------------------------------------------------------

fn linear_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..120 {
        let (r, c) = (rng.gen_range(0..=8), rng.gen_range(0..=8));
        let density = rng.gen_range(0.1..0.7);
        let m = random_matrix(&mut rng, r, c, density, 3);
        let rk = rank(&m);
        ensure(rk + kernel_basis(&m).dim() == c, || {
            format!("matrix {i}: rank–nullity")
        })?;
        ensure(rk == rank(&m.transpose()), || {
            format!("matrix {i}: transpose rank")
        })?;
    }
    for i in 0..60 {
        let x = random_complex(&mut rng, -2, 2, 5);
        let y = random_complex(&mut rng, -1, 1, 3);
        for (name, z) in [("X", &x), ("Y", &y)] {
            let chi: i64 = z
                .homology()
                .iter()
                .map(|(n, k)| {
                    if n.rem_euclid(2) == 0 {
                        *k as i64
                    } else {
                        -(*k as i64)
                    }
                })
                .sum();
            ensure(chi == z.euler_characteristic(), || {
                format!("complex {i}{name}: Euler characteristic")
            })?;
        }
        let hx = x.homology();
        let hy = y.homology();
        let mut want = std::collections::BTreeMap::new();
        for (a, ka) in &hx {
            for (b, kb) in &hy {
                *want.entry(a + b).or_insert(0) += ka * kb;
            }
        }
        want.retain(|_, k| *k > 0);
        let mut got = tensor(&x, &y).homology();
        got.retain(|_, k| *k > 0);
        ensure(got == want, || format!("pair {i}: Künneth"))?;
    }
    Ok("120 random matrices; 120 random complexes in 60 Künneth pairs".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fault_names_round_trip() {
        for n in Fault::NAMES {
            assert_eq!(n.parse::<Fault>().unwrap().to_string(), n);
        }
        assert!("nope".parse::<Fault>().is_err());
    }

    #[test]
    fn basis_changes_keep_the_betti_numbers() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = random_basis_change(&mut rng, &sl2(3));
        assert_ne!(g.table, sl2(3).table);
        assert_eq!(exterior_betti(&g), vec![1, 0, 0, 1]);
    }

    #[test]
    fn planted_faults_are_caught() {
        assert!(!run_criterion(2, Some(Fault::KappaSignFlip)).pass);
        let c = run_criterion(1, Some(Fault::ConeSign));
        assert!(!c.pass);
        assert!(c.detail.contains("tensor"), "{}", c.detail);
        let c = run_criterion(1, Some(Fault::TensorSign));
        assert!(!c.pass);
    }
}
