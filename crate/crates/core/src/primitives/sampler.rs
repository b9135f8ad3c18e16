//! Averaging sampler with distinct samples.
//!
//! The seed keys a ChaCha20 stream that drives a partial Fisher–Yates
//! shuffle of `0..n`. The first `k` positions form a uniform draw without
//! replacement, so by Hoeffding's bound for sampling without replacement the
//! sample mean of any `f: [n] -> [0, 1]` falls below `mean - theta` with
//! probability at most `exp(-2 k theta^2)`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SamplerError {
    #[error("cannot draw {k} distinct indices from {n}")]
    TooMany { k: u64, n: u64 },
}

/// 256-bit sampler seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SamplerKey(pub [u8; 32]);

impl SamplerKey {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill(&mut seed);
        SamplerKey(seed)
    }
}

/// Distinct 0-based positions in `0..n`, in draw order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    n: u64,
    indices: Vec<u64>,
}

impl IndexSet {
    /// Builds a set after checking range and distinctness.
    pub fn new(n: u64, indices: Vec<u64>) -> Option<Self> {
        let mut seen = std::collections::HashSet::with_capacity(indices.len());
        if indices.iter().all(|&i| i < n && seen.insert(i)) {
            Some(IndexSet { n, indices })
        } else {
            None
        }
    }

    /// The first `k` positions.
    pub fn prefix(n: u64, k: u64) -> Option<Self> {
        (k <= n).then(|| IndexSet {
            n,
            indices: (0..k).collect(),
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.indices.iter().copied()
    }
}

/// `k` distinct positions of `0..n` determined by `key`.
pub fn sample_indices(key: &SamplerKey, n: u64, k: u64) -> Result<IndexSet, SamplerError> {
    if k > n {
        return Err(SamplerError::TooMany { k, n });
    }
    let mut rng = ChaCha20Rng::from_seed(key.0);
    let indices = if n <= 4 * k {
        let mut perm: Vec<u64> = (0..n).collect();
        for i in 0..k as usize {
            let j = rng.random_range(i as u64..n) as usize;
            perm.swap(i, j);
        }
        perm.truncate(k as usize);
        perm
    } else {
        // Same shuffle with only the displaced entries stored.
        let mut moved: HashMap<u64, u64> = HashMap::with_capacity(2 * k as usize);
        let mut out = Vec::with_capacity(k as usize);
        for i in 0..k {
            let j = rng.random_range(i..n);
            let vi = *moved.get(&i).unwrap_or(&i);
            let vj = *moved.get(&j).unwrap_or(&j);
            moved.insert(j, vi);
            out.push(vj);
        }
        out
    };
    Ok(IndexSet { n, indices })
}

/// Failure probability `exp(-2 k theta^2)` certified for this sampler.
pub fn sampler_guarantee(k: u64, theta: f64) -> f64 {
    (-2.0 * k as f64 * theta * theta).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_draw_is_permutation() {
        let key = SamplerKey([7; 32]);
        let s = sample_indices(&key, 50, 50).unwrap();
        let mut v = s.as_slice().to_vec();
        v.sort_unstable();
        assert_eq!(v, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn distinct_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let key = SamplerKey::random(&mut rng);
            let s = sample_indices(&key, 64, 32).unwrap();
            assert!(IndexSet::new(64, s.as_slice().to_vec()).is_some());
            assert_eq!(s, sample_indices(&key, 64, 32).unwrap());
        }
    }

    #[test]
    fn sparse_path_matches_dense_path() {
        // Both branches run the same shuffle, so they agree on any input.
        let key = SamplerKey([3; 32]);
        let sparse = sample_indices(&key, 1000, 10).unwrap();
        let mut rng = ChaCha20Rng::from_seed(key.0);
        let mut perm: Vec<u64> = (0..1000).collect();
        for i in 0..10usize {
            let j = rng.random_range(i as u64..1000) as usize;
            perm.swap(i, j);
        }
        assert_eq!(sparse.as_slice(), &perm[..10]);
    }

    #[test]
    fn too_many_rejected() {
        assert!(sample_indices(&SamplerKey([0; 32]), 3, 4).is_err());
    }

    #[test]
    fn guarantee_arithmetic() {
        assert!((sampler_guarantee(1000, 0.05) - (-5f64).exp()).abs() < 1e-15);
        let g = sampler_guarantee(10, 0.1);
        assert!((sampler_guarantee(20, 0.1) - g * g).abs() < 1e-15);
        assert_eq!(sampler_guarantee(10, 0.0), 1.0);
    }
}
