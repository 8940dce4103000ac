//! Permutations, Koszul signs, set partitions.
//!
//! A permutation of `{0..n}` is stored in one-line notation: `p[i]` is the
//! image of `i`. Composition is `(s∘t)(i) = s(t(i))`.

pub type Perm = Vec<usize>;

pub fn identity(n: usize) -> Perm {
    (0..n).collect()
}

/// The adjacent transposition swapping `i` and `i + 1`.
pub fn adjacent(n: usize, i: usize) -> Perm {
    let mut p = identity(n);
    p.swap(i, i + 1);
    p
}

pub fn compose(s: &[usize], t: &[usize]) -> Perm {
    t.iter().map(|&x| s[x]).collect()
}

pub fn inverse(p: &[usize]) -> Perm {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

pub fn is_perm(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    for &x in p {
        if x >= p.len() || seen[x] {
            return false;
        }
        seen[x] = true;
    }
    true
}

pub fn inversions(p: &[usize]) -> usize {
    let mut c = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                c += 1;
            }
        }
    }
    c
}

pub fn sign(p: &[usize]) -> i64 {
    if inversions(p).is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// All permutations of `n` letters in lexicographic order.
pub fn all_perms(n: usize) -> Vec<Perm> {
    let mut out = Vec::new();
    let mut p = identity(n);
    loop {
        out.push(p.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else {
            break;
        };
        let j = (i..n)
            .rev()
            .find(|&j| p[j] > p[i - 1])
            .expect("successor exists");
        p.swap(i - 1, j);
        p[i..].reverse();
    }
    out
}

/// All permutations in Steinhaus–Johnson–Trotter order: consecutive
/// entries differ by one adjacent transposition. Returns the permutations
/// and, for each step, the position swapped.
pub fn sjt_perms(n: usize) -> (Vec<Perm>, Vec<usize>) {
    let mut p = identity(n);
    // direction: true = pointing left
    let mut left = vec![true; n];
    let mut out = vec![p.clone()];
    let mut swaps = Vec::new();
    loop {
        let mut best: Option<usize> = None;
        for i in 0..n {
            let j = if left[p[i]] {
                i.checked_sub(1)
            } else {
                (i + 1 < n).then_some(i + 1)
            };
            if let Some(j) = j {
                if p[j] < p[i] && best.is_none_or(|b| p[i] > p[b]) {
                    best = Some(i);
                }
            }
        }
        let Some(i) = best else { break };
        let v = p[i];
        let j = if left[v] { i - 1 } else { i + 1 };
        p.swap(i, j);
        swaps.push(i.min(j));
        for w in v + 1..n {
            left[w] = !left[w];
        }
        out.push(p.clone());
    }
    (out, swaps)
}

/// Adjacent transpositions `w` with `p = s_{w[0]} ∘ s_{w[1]} ∘ … ∘ s_{w[k−1]}`
/// where `s_i = adjacent(n, i)`. The word is reduced (length = inversions).
pub fn reduced_word(p: &[usize]) -> Vec<usize> {
    let mut q = p.to_vec();
    let mut swaps = Vec::new();
    // bubble sort on one-line notation; each swap is q ← q ∘ s_i
    loop {
        let mut done = true;
        for i in 0..q.len().saturating_sub(1) {
            if q[i] > q[i + 1] {
                q.swap(i, i + 1);
                swaps.push(i);
                done = false;
            }
        }
        if done {
            break;
        }
    }
    swaps.reverse();
    swaps
}

/// Koszul sign of rearranging a word of homogeneous factors with the given
/// degrees into the order `order` (the new word is `F[order[0]], F[order[1]], …`).
pub fn koszul_sign(degrees: &[i64], order: &[usize]) -> i64 {
    let mut odd = 0usize;
    for a in 0..order.len() {
        for b in a + 1..order.len() {
            // order[a] now precedes order[b]
            if order[a] > order[b]
                && degrees[order[a]].rem_euclid(2) == 1
                && degrees[order[b]].rem_euclid(2) == 1
            {
                odd += 1;
            }
        }
    }
    if odd.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// All set partitions of `{0..n}`; blocks are sorted and listed by minimum.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut rgs = vec![0usize; n];
    fn rec(i: usize, maxb: usize, rgs: &mut Vec<usize>, out: &mut Vec<Vec<Vec<usize>>>) {
        let n = rgs.len();
        if i == n {
            let k = rgs.iter().max().map_or(0, |m| m + 1);
            let mut blocks = vec![Vec::new(); k];
            for (e, &b) in rgs.iter().enumerate() {
                blocks[b].push(e);
            }
            out.push(blocks);
            return;
        }
        for b in 0..=maxb + 1 {
            rgs[i] = b;
            rec(i + 1, maxb.max(b), rgs, out);
        }
    }
    rec(1, 0, &mut rgs, &mut out);
    out
}

/// Set partitions of `{0..n}` into exactly `k` blocks.
pub fn set_partitions_k(n: usize, k: usize) -> Vec<Vec<Vec<usize>>> {
    set_partitions(n)
        .into_iter()
        .filter(|p| p.len() == k)
        .collect()
}

/// All `k`-element subsets of `{0..n}` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in start..n {
            if n - x < k - cur.len() {
                break;
            }
            cur.push(x);
            rec(x + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r: usize = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduced_word_reconstructs() {
        for p in all_perms(4) {
            let w = reduced_word(&p);
            assert_eq!(w.len(), inversions(&p));
            let mut acc = identity(4);
            for &i in &w {
                acc = compose(&acc, &adjacent(4, i));
            }
            assert_eq!(acc, p);
        }
    }

    #[test]
    fn sjt_covers_everything() {
        let (ps, swaps) = sjt_perms(4);
        assert_eq!(ps.len(), 24);
        assert_eq!(swaps.len(), 23);
        let mut sorted = ps.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 24);
        for (k, s) in swaps.iter().enumerate() {
            let mut q = ps[k].clone();
            q.swap(*s, s + 1);
            assert_eq!(q, ps[k + 1]);
        }
    }

    #[test]
    fn partition_counts() {
        let bell = [1, 1, 2, 5, 15, 52, 203];
        for (n, b) in bell.iter().enumerate() {
            assert_eq!(set_partitions(n).len(), *b);
        }
        assert_eq!(set_partitions_k(4, 2).len(), 7);
        assert_eq!(combinations(5, 2).len(), 10);
    }

    #[test]
    fn koszul_sign_examples() {
        assert_eq!(koszul_sign(&[1, 1], &[1, 0]), -1);
        assert_eq!(koszul_sign(&[1, 2], &[1, 0]), 1);
        assert_eq!(koszul_sign(&[1, 1, 1], &[2, 0, 1]), 1);
        assert_eq!(koszul_sign(&[1, 1, 1], &[1, 0, 2]), -1);
    }

    #[test]
    fn sign_is_multiplicative() {
        for p in all_perms(4) {
            for t in all_perms(4) {
                assert_eq!(sign(&compose(&p, &t)), sign(&p) * sign(&t));
            }
        }
    }
}
