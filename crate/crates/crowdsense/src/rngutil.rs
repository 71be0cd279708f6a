//! Hand-rolled sampling helpers with a fixed draw protocol.
//!
//! The whole crate funnels its randomness through these two functions so that
//! the exact sequence of `random_range` draws is documented and stable: a
//! reference step-through of a run can reproduce every choice from the same
//! seeded generator.

use rand::Rng;

/// In-place Fisher-Yates shuffle. Consumes exactly `len - 1` draws
/// (`random_range(0..=i)` for `i = len-1 .. 1`).
pub(crate) fn shuffle<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// `k` distinct indices drawn uniformly from `0..n`, in draw order.
/// Partial Fisher-Yates: consumes exactly `k` draws (`random_range(i..n)`).
pub(crate) fn sample_distinct<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(k <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sample_distinct_is_distinct_and_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.random_range(1..20);
            let k = rng.random_range(0..=n);
            let picked = sample_distinct(n, k, &mut rng);
            assert_eq!(picked.len(), k);
            let mut sorted = picked.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), k);
            assert!(picked.iter().all(|&i| i < n));
        }
    }

    #[test]
    fn shuffle_is_a_permutation_and_deterministic() {
        let mut a: Vec<usize> = (0..10).collect();
        let mut b: Vec<usize> = (0..10).collect();
        shuffle(&mut a, &mut ChaCha8Rng::seed_from_u64(11));
        shuffle(&mut b, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }
}
