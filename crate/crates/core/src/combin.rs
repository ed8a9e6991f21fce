//! Binomial coefficients and colexicographic ranking of k-subsets.
//!
//! All vertex-space ranking in this crate is built on `colex_rank` /
//! `colex_unrank`: a subset `{a_1 < a_2 < ... < a_k}` of `[0, n)` has rank
//! `sum_i C(a_i, i)` with `i` running from 1 to `k`. Ranks are dense in
//! `[0, C(n, k))` and independent of `n`.

/// C(n, k) in u128, saturating at u128::MAX (callers cap sizes well below).
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Colex rank of a strictly increasing subset of [0, n).
pub fn colex_rank(set: &[u32]) -> u128 {
    let mut r: u128 = 0;
    for (i, &a) in set.iter().enumerate() {
        r += binomial(a as u64, i as u64 + 1);
    }
    r
}

/// Inverse of `colex_rank` for subsets of size `k` (ambient size irrelevant).
pub fn colex_unrank(mut rank: u128, k: usize) -> Vec<u32> {
    let mut out = vec![0u32; k];
    for i in (1..=k).rev() {
        // largest a with C(a, i) <= rank
        let mut a = i as u64 - 1;
        loop {
            if binomial(a + 1, i as u64) > rank {
                break;
            }
            a += 1;
        }
        out[i - 1] = a as u32;
        rank -= binomial(a, i as u64);
    }
    out
}

/// Iterate all k-subsets of [0, n) in colex order, calling `f` on each.
pub fn for_each_subset<F: FnMut(&[u32])>(n: usize, k: usize, mut f: F) {
    if k > n {
        return;
    }
    let mut cur: Vec<u32> = (0..k as u32).collect();
    loop {
        f(&cur);
        // colex successor
        let mut i = 0;
        while i + 1 < k && cur[i] + 1 == cur[i + 1] {
            i += 1;
        }
        if k == 0 {
            return;
        }
        if cur[i] as usize + 1 >= n && i + 1 == k {
            return;
        }
        cur[i] += 1;
        for j in 0..i {
            cur[j] = j as u32;
        }
        if cur[k - 1] as usize >= n {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_small_table() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(10, 0), 1);
        assert_eq!(binomial(10, 10), 1);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(52, 5), 2_598_960);
    }

    #[test]
    fn colex_roundtrip_all() {
        for n in 1..=9usize {
            for k in 1..=n {
                let total = binomial(n as u64, k as u64);
                let mut seen = 0u128;
                for_each_subset(n, k, |s| {
                    let r = colex_rank(s);
                    assert_eq!(r, seen, "colex order must be dense and increasing");
                    assert_eq!(colex_unrank(r, k), s);
                    seen += 1;
                });
                assert_eq!(seen, total);
            }
        }
    }

    #[test]
    fn empty_subset_rank() {
        assert_eq!(colex_rank(&[]), 0);
        assert_eq!(colex_unrank(0, 0), Vec::<u32>::new());
    }
}
