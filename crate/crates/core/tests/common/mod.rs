//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

use dbv_core::primitives::mac::{mac_sign, MacKey};
use dbv_core::Bits;

/// Best forgery success at s = 8 over all 2^16 keys: for each observed tag
/// on `m`, the largest fraction of consistent keys that also map `m2` to a
/// single tag.
pub fn best_forgery_s8(m: &Bits, m2: &Bits) -> f64 {
    let mut joint = vec![[0u32; 256]; 256];
    for a in 0..256u64 {
        for b in 0..256u64 {
            let key = MacKey::new(8, a, b).unwrap();
            let t = mac_sign(&key, m).unwrap().value as usize;
            let t2 = mac_sign(&key, m2).unwrap().value as usize;
            joint[t][t2] += 1;
        }
    }
    joint
        .iter()
        .map(|row| {
            let total: u32 = row.iter().sum();
            *row.iter().max().unwrap() as f64 / total as f64
        })
        .fold(0.0, f64::max)
}

/// All `r`-subsets of `0..n` as bit masks.
fn subsets(n: u32, r: u32) -> Vec<u32> {
    (0u32..1 << n).filter(|m| m.count_ones() == r).collect()
}

/// Exhaustive `E_{y,S} max_m Pr(d_H(O_S, m) <= t | y)` for a uniform
/// `n`-bit source seen through a BSC(`p`), with `S` a uniform `k`-subset.
pub fn small_source_guess_probability(n: u32, k: u32, p: f64, t: i64) -> f64 {
    if t < 0 {
        return 0.0;
    }
    // Error pattern distribution e = O xor y, independent of y.
    let pe: Vec<f64> = (0u32..1 << n)
        .map(|e| p.powi(e.count_ones() as i32) * (1.0 - p).powi((n - e.count_ones()) as i32))
        .collect();
    let sets = subsets(n, k);
    let gather = |x: u32, set: u32| -> u32 {
        let mut out = 0;
        let mut j = 0;
        for i in 0..n {
            if set >> i & 1 == 1 {
                out |= (x >> i & 1) << j;
                j += 1;
            }
        }
        out
    };
    let mut total = 0.0;
    for &set in &sets {
        // Marginal of e on the subset.
        let mut marg = vec![0.0f64; 1 << k];
        for (e, &w) in pe.iter().enumerate() {
            marg[gather(e as u32, set) as usize] += w;
        }
        for y in 0u32..1 << n {
            let ys = gather(y, set);
            let best = (0u32..1 << k)
                .map(|m| {
                    (0u32..1 << k)
                        .filter(|&es| ((ys ^ es) ^ m).count_ones() as i64 <= t)
                        .map(|es| marg[es as usize])
                        .sum::<f64>()
                })
                .fold(0.0, f64::max);
            total += best * 2f64.powi(-(n as i32));
        }
    }
    total / sets.len() as f64
}
