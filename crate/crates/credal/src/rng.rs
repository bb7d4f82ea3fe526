//! Seed plumbing and random model generators for sweeps.
//!
//! Every randomized routine in this crate takes an explicit `u64` seed and
//! derives per-item streams through [`split_seed`], so results are
//! reproducible regardless of iteration order or thread count.

use rand::Rng;

use crate::model::{CredalSet, FiniteSpace, RandomVar};

/// Derives a child seed from a master seed and an item index. SplitMix64
/// finalization keeps nearby indices uncorrelated.
pub fn split_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A fresh outcome space with labels `w0..w{size-1}`.
pub fn plain_space(size: usize) -> FiniteSpace {
    FiniteSpace::new((0..size).map(|i| format!("w{i}")).collect())
        .expect("generated labels are distinct and nonempty")
}

/// A credal set with the given number of vertices, drawn uniformly from the
/// probability simplex. The last weight is set to the exact complement so
/// every row passes strict normalization.
pub fn random_credal(rng: &mut impl Rng, space: &FiniteSpace, vertices: usize) -> CredalSet {
    let m = space.size();
    let rows = (0..vertices)
        .map(|_| {
            let exps: Vec<f64> = (0..m).map(|_| -rng.gen::<f64>().ln().max(1e-300)).collect();
            let exps: Vec<f64> = exps.into_iter().map(|e| e.max(1e-12)).collect();
            let total: f64 = exps.iter().sum();
            let mut row: Vec<f64> = exps[..m - 1].iter().map(|e| e / total).collect();
            let head: f64 = row.iter().sum();
            row.push((1.0 - head).max(0.0));
            row
        })
        .collect();
    CredalSet::from_weight_rows(space, rows).expect("generated rows are normalized")
}

/// A value map with entries drawn uniformly from `[lo, hi]`.
pub fn random_var(rng: &mut impl Rng, space: &FiniteSpace, lo: f64, hi: f64) -> RandomVar {
    let values = (0..space.size()).map(|_| rng.gen_range(lo..=hi)).collect();
    RandomVar::new(space, values).expect("generated values are finite")
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn split_seed_is_deterministic_and_spread() {
        assert_eq!(split_seed(42, 7), split_seed(42, 7));
        assert_ne!(split_seed(42, 7), split_seed(42, 8));
        assert_ne!(split_seed(42, 7), split_seed(43, 7));
        // Consecutive indices should not produce consecutive seeds.
        let a = split_seed(0, 0);
        let b = split_seed(0, 1);
        assert!(a.wrapping_sub(b) > 1000 && b.wrapping_sub(a) > 1000);
    }

    #[test]
    fn generated_credal_sets_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for size in 2..=5 {
            let space = plain_space(size);
            for verts in 1..=4 {
                let p = random_credal(&mut rng, &space, verts);
                assert_eq!(p.len(), verts);
                for q in p.vertices() {
                    let total: f64 = q.weights().iter().sum();
                    assert!((total - 1.0).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn generated_vars_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let space = plain_space(4);
        let x = random_var(&mut rng, &space, -2.0, 3.0);
        assert!(x.values().iter().all(|&v| (-2.0..=3.0).contains(&v)));
    }
}
