use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use opforge::barcobar::{bar, bar_map, ce_algebra, counit_graded_check};
use opforge::complexes::{
    cone, direct_sum, disk, induces_homology_iso, is_quasi_iso, random_complex,
    random_endomorphism, shift, sphere, tensor, ChainComplex, ChainMap,
};
use opforge::exactla::{kernel_basis, q, rank, RationalMatrix};
use opforge::opcoop::{
    abelian, ass_nu_operad, comm_nu_operad, heisenberg3, lie_algebra_from_constants, lie_operad,
    shifted_cocomm, sl2,
};
use opforge::selftest::{exterior_betti, random_basis_change};
use opforge::symmod::{composite, run_average, schur, tensor_sym, unit_module, Schur, SymModule};
use opforge::tangent::dk_unit_check;
use opforge::twisting::kappa;

fn small_complex(seed: u64) -> ChainComplex {
    random_complex(&mut ChaCha8Rng::seed_from_u64(seed), -1, 2, 4)
}

fn relabeled(x: &ChainComplex, prefix: &str) -> ChainComplex {
    let labels: BTreeMap<i64, Vec<String>> = x
        .degrees()
        .into_iter()
        .map(|n| {
            (
                n,
                (0..x.dim(n)).map(|i| format!("{prefix}{n}.{i}")).collect(),
            )
        })
        .collect();
    ChainComplex::new(x.dims().clone(), x.diffs().clone(), Some(labels)).unwrap()
}

fn nonzero(m: BTreeMap<i64, usize>) -> BTreeMap<i64, usize> {
    m.into_iter().filter(|(_, k)| *k > 0).collect()
}

/// Poincaré polynomial of each Schur piece, grouped by letter weight.
fn schur_series(s: &Schur, max: usize) -> Vec<BTreeMap<i64, usize>> {
    let mut out = vec![BTreeMap::new(); max + 1];
    for p in &s.pieces {
        for (i, &w) in p.letter_weights.iter().enumerate() {
            if w <= max {
                *out[w].entry(p.space.degrees[i]).or_insert(0) += 1;
            }
        }
    }
    out
}

/// Block matrix of a chain map in the basis order of `to_flat`.
fn flatten(f: &ChainMap) -> RationalMatrix {
    let x = &f.source;
    let mut off = 0;
    let mut t = Vec::new();
    for n in x.degrees() {
        for (r, c, v) in f.component(n).triplets() {
            t.push((r + off, c + off, v));
        }
        off += x.dim(n);
    }
    RationalMatrix::from_triplets(off, off, t).unwrap()
}

fn library_module(i: usize) -> SymModule {
    match i % 4 {
        0 => ass_nu_operad(4).module,
        1 => comm_nu_operad(4).module,
        2 => lie_operad(4).module,
        _ => shifted_cocomm(4).module,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, .. ProptestConfig::default() })]

    #[test]
    fn rank_identities(rows in 0usize..7, cols in 0usize..7, entries in prop::collection::vec(-3i64..=3, 49)) {
        let t = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| (r, c)))
            .filter_map(|(r, c)| {
                let x = entries[r * 7 + c];
                (x != 0).then(|| (r, c, q(x)))
            })
            .collect();
        let m = RationalMatrix::from_triplets(rows, cols, t).unwrap();
        prop_assert_eq!(rank(&m), rank(&m.transpose()));
        prop_assert_eq!(rank(&m) + kernel_basis(&m).dim(), cols);
    }

    #[test]
    fn euler_characteristic_and_shifts(seed in any::<u64>(), a in -3i64..=3, b in -3i64..=3) {
        let x = small_complex(seed);
        let chi_h: i64 = x.homology().iter().map(|(n, k)| if n.rem_euclid(2) == 0 { *k as i64 } else { -(*k as i64) }).sum();
        prop_assert_eq!(chi_h, x.euler_characteristic());
        prop_assert_eq!(shift(&shift(&x, a), b), shift(&x, a + b));
        let h = x.homology();
        let hs = shift(&x, 1).homology();
        for (n, k) in &h {
            prop_assert_eq!(hs.get(&(n - 1)).copied().unwrap_or(0), *k);
        }
    }

    #[test]
    fn acyclic_complexes(seed in any::<u64>(), n in -2i64..=2) {
        let x = small_complex(seed);
        prop_assert!(cone(&ChainMap::identity(&x)).is_acyclic());
        prop_assert!(disk(2, n).is_acyclic());
    }

    #[test]
    fn kunneth(s1 in any::<u64>(), s2 in any::<u64>()) {
        let (x, y) = (small_complex(s1), small_complex(s2));
        let mut want = BTreeMap::new();
        for (i, a) in x.homology() {
            for (j, b) in y.homology() {
                *want.entry(i + j).or_insert(0) += a * b;
            }
        }
        prop_assert_eq!(nonzero(tensor(&x, &y).homology()), nonzero(want));
    }

    #[test]
    fn tensor_is_associative_and_unital(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let x = relabeled(&random_complex(&mut ChaCha8Rng::seed_from_u64(s1), -1, 1, 2), "x");
        let y = relabeled(&random_complex(&mut ChaCha8Rng::seed_from_u64(s2), -1, 1, 2), "y");
        let z = relabeled(&random_complex(&mut ChaCha8Rng::seed_from_u64(s3), 0, 1, 2), "z");
        let l = tensor(&tensor(&x, &y), &z);
        let r = tensor(&x, &tensor(&y, &z));
        prop_assert_eq!(l.dims(), r.dims());
        // the same labels name the same basis elements; compare d after reordering
        for n in l.degrees() {
            let pos = |m: i64| -> Vec<usize> {
                l.labels(m).iter().map(|s| r.labels(m).iter().position(|t| t == s).unwrap()).collect()
            };
            let (src, tgt) = (pos(n), pos(n - 1));
            let ld = l.d(n);
            let rd = r.d(n);
            for c in 0..ld.cols() {
                for row in 0..ld.rows() {
                    prop_assert_eq!(ld.get(row, c), rd.get(tgt[row], src[c]));
                }
            }
        }
        let unit = tensor(&x, &sphere(1, 0));
        prop_assert_eq!(unit.dims(), x.dims());
        prop_assert_eq!(unit.diffs(), x.diffs());
    }

    #[test]
    fn quasi_iso_agrees_with_induced_maps(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_complex(&mut rng, -1, 2, 4);
        let f = random_endomorphism(&mut rng, &x);
        prop_assert_eq!(is_quasi_iso(&f), induces_homology_iso(&f));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, .. ProptestConfig::default() })]

    #[test]
    fn composite_unit_and_associativity(i in 0usize..4, j in 0usize..4, k in 0usize..4) {
        let (m, n, p) = (library_module(i), library_module(j), library_module(k));
        let unit = unit_module(4);
        prop_assert_eq!(composite(&unit, &n, 4).unwrap().module.dims(), n.dims());
        prop_assert_eq!(composite(&n, &unit, 4).unwrap().module.dims(), n.dims());
        let mn = composite(&m, &n, 4).unwrap().module;
        let np = composite(&n, &p, 4).unwrap().module;
        let l = composite(&mn, &p, 4).unwrap().module;
        let r = composite(&m, &np, 4).unwrap().module;
        for a in 0..=4 {
            prop_assert_eq!(nonzero(l.comp(a).complex().dims().clone()), nonzero(r.comp(a).complex().dims().clone()));
        }
    }

    #[test]
    fn schur_is_monoidal_and_compatible_with_composition(i in 0usize..4, j in 0usize..4, seed in 0u64..6) {
        let (m, n) = (library_module(i), library_module(j));
        let v = match seed % 3 {
            0 => sphere(1, 0),
            1 => direct_sum(&sphere(1, 0), &sphere(1, 1)),
            _ => disk(1, 1),
        };
        let sm = schur_series(&schur(&m, &v, 4).unwrap(), 4);
        let sn = schur_series(&schur(&n, &v, 4).unwrap(), 4);
        let st = schur_series(&schur(&tensor_sym(&m, &n, 4).unwrap(), &v, 4).unwrap(), 4);
        for w in 0..=4 {
            let mut want = BTreeMap::new();
            for a in 0..=w {
                for (d1, k1) in &sm[a] {
                    for (d2, k2) in &sn[w - a] {
                        *want.entry(d1 + d2).or_insert(0) += k1 * k2;
                    }
                }
            }
            prop_assert_eq!(&nonzero(st[w].clone()), &nonzero(want), "tensor, weight {}", w);
        }
        // M(N(V)) = (M∘N)(V)
        let inner = schur(&n, &v, 4).unwrap();
        let (nv, weights) = inner.total();
        let keep: Vec<usize> = (0..nv.dim()).filter(|&e| weights[e] >= 1).collect();
        let nv1 = nv.restrict(&keep);
        let w1: Vec<usize> = keep.iter().map(|&e| weights[e]).collect();
        let outer = schur_series(&Schur::new(Arc::new(m.clone()), &nv1, &w1, 4).unwrap(), 4);
        let direct = schur_series(&schur(&composite(&m, &n, 4).unwrap().module, &v, 4).unwrap(), 4);
        for w in 1..=4 {
            prop_assert_eq!(&nonzero(outer[w].clone()), &nonzero(direct[w].clone()), "composition, weight {}", w);
        }
    }

    #[test]
    fn averaging_is_idempotent(i in 0usize..4, n in 1usize..=4, signed in any::<bool>()) {
        let m = library_module(i);
        let comp = m.comp(n);
        let e = run_average(comp, 0, n, signed);
        prop_assert_eq!(e.compose(&e), e);
    }

    #[test]
    fn lie_algebras_in_random_bases(seed in any::<u64>(), which in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = [sl2(3), heisenberg3(3), abelian(3, 3)][which].clone();
        let g = random_basis_change(&mut rng, &base);
        let b = bar(&g, &kappa(3), 3).unwrap();
        b.complex.validate().unwrap();
        let h = b.ce_view().homology();
        let betti: Vec<usize> = (0..=3).map(|k| h.get(&k).copied().unwrap_or(0)).collect();
        prop_assert_eq!(&betti, &exterior_betti(&base));
        let ce = ce_algebra(&g, 3).unwrap();
        let ch = ce.algebra.carrier.homology();
        for k in 0..=3i64 {
            prop_assert_eq!(ch.get(&-k).copied().unwrap_or(0), h.get(&k).copied().unwrap_or(0));
        }
        prop_assert!(dk_unit_check(&g).unwrap().unit_iso);
        prop_assert!(counit_graded_check(&g, &kappa(3), 3).unwrap().ok());
    }

    #[test]
    fn bar_of_abelian_dg_algebras(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_complex(&mut rng, 0, 1, 3);
        let flat = x.to_flat();
        let n = flat.dim();
        let a = lie_algebra_from_constants("A", flat, vec![vec![Default::default(); n]; n], 3).unwrap();
        let b = bar(&a, &kappa(3), 3).unwrap();
        b.complex.validate().unwrap();
        // gr has the homology of the Schur functor on H(A)
        let mut hx = ChainComplex::zero();
        for (d, k) in x.homology() {
            hx = direct_sum(&hx, &sphere(k, d));
        }
        let want = schur_series(&schur(&shifted_cocomm(3).module, &hx, 3).unwrap(), 3);
        for w in 1..=3 {
            prop_assert_eq!(&nonzero(b.complex.pieces[w].homology()), &nonzero(want[w].clone()), "weight {}", w);
        }
        // a quasi-isomorphism c·id + dh + hd (c ≠ 0) induces quasi-isomorphisms on gr
        let mut f = random_endomorphism(&mut rng, &x);
        while !is_quasi_iso(&f) {
            f = random_endomorphism(&mut rng, &x);
        }
        let fm = flatten(&f);
        let bf = bar_map(&fm, &b, &b).unwrap();
        let offs = b.complex.offsets();
        for w in 1..=3 {
            let idx: Vec<usize> = (offs[w]..offs[w] + b.complex.pieces[w].dim()).collect();
            let piece = &b.complex.pieces[w];
            let m = ChainMap::from_flat(piece, piece, &bf.submatrix(&idx, &idx)).unwrap();
            prop_assert!(is_quasi_iso(&m), "weight {}", w);
        }
    }
}
