//! Library results checked against independent reference computations.

use dbv_core::bounds::{
    binomial_split, brm_exponent_general, challenge_length_dfa, sampler_close_security,
    CloseSecurity, DbvSpec,
};
use dbv_core::channel::{bit_error_prob, erfc, BerPair, ChannelParams};
use dbv_core::optimizer::{optimize_brm, optimize_dfa, BrmMode};
use dbv_core::primitives::mac::{block_count, mac_sign, MacKey};
use dbv_core::primitives::sampler::sampler_guarantee;
use dbv_core::Bits;

mod common;
use common::{best_forgery_s8, small_source_guess_probability};

/// `erfc(x)` by composite Simpson quadrature of `2/sqrt(pi) exp(-t^2)` over
/// `[x, x + 12]`.
fn erfc_quadrature(x: f64) -> f64 {
    let (a, b, n) = (x, x + 12.0, 200_000);
    let h = (b - a) / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0 * 2.0 / std::f64::consts::PI.sqrt()
}

#[test]
fn erfc_matches_quadrature() {
    let mut x = 0.0;
    while x <= 6.0 {
        let q = erfc_quadrature(x);
        assert!(
            ((erfc(x) - q) / q).abs() < 1e-9,
            "x={x}: {} vs {q}",
            erfc(x)
        );
        x += 0.05;
    }
}

#[test]
fn bit_error_reference_values() {
    // Frozen from the quadrature oracle above.
    let cases = [
        (1.0, 0.07864960352514258),
        (0.125, 0.3085375387259869),
        (4.0, 0.002338867490523633),
        (0.25, 0.23975006109347674),
    ];
    for (snr, want) in cases {
        let got = bit_error_prob(snr).unwrap();
        assert!(((got - want) / want).abs() < 1e-12, "snr={snr}: {got}");
        assert!(((erfc_quadrature(snr.sqrt()) / 2.0 - want) / want).abs() < 1e-9);
    }
}

/// `Pr(X <= cut)` for `X ~ Bin(k, p)` by direct summation of the pmf.
fn direct_lower(k: u64, cut: u64, p: f64) -> f64 {
    let mut coef = 1.0f64;
    let mut total = 0.0;
    for i in 0..=cut {
        if i > 0 {
            coef *= (k - i + 1) as f64 / i as f64;
        }
        total += coef * p.powi(i as i32) * (1.0 - p).powi((k - i) as i32);
    }
    total
}

#[test]
fn binomial_split_matches_direct_sum() {
    for k in [1u64, 5, 17, 40, 60] {
        for p in [0.01, 0.1, 0.3, 0.5, 0.77] {
            for cut in 0..k {
                let (lo, hi) = binomial_split(k, cut, p);
                let want = direct_lower(k, cut, p);
                assert!((lo - want).abs() < 1e-12, "k={k} p={p} cut={cut}");
                assert!((lo + hi - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn dfa_optimum_matches_reference_grid() {
    // Reference: bracketed root-finding on the threshold, a 4001-point
    // power grid and bounded scalar minimisation, computed separately.
    let reference = [
        (1.1, [3334u64, 5001, 6668, 8335], 1485.7103),
        (1.3, [497, 745, 993, 1241], 1754.4905),
        (1.5, [233, 350, 466, 583], 1996.1225),
        (2.0, [103, 154, 205, 257], 2482.3489),
        (3.0, [60, 90, 120, 149], 3137.4427),
    ];
    let ch = ChannelParams::default();
    for (psi, ks, e0) in reference {
        for (eps, want) in [1e-2, 1e-3, 1e-4, 1e-5].into_iter().zip(ks) {
            let o = optimize_dfa(&DbvSpec::new(psi, eps, eps).unwrap(), &ch).unwrap();
            assert_eq!(o.k_star, want, "psi={psi} eps={eps}");
            assert!(
                ((o.e0_star - e0) / e0).abs() < 1e-4,
                "psi={psi}: {}",
                o.e0_star
            );
        }
    }
}

#[test]
fn sampling_optimum_matches_reference() {
    // Same reference method; θ = γ = 0, ε = 1e-3.
    let reference = [
        (2.0, 0.3, 238u64, 794u64),
        (1.5, 0.2, 496, 2480),
        (3.0, 0.5, 189, 378),
    ];
    let ch = ChannelParams::default();
    let spec = |psi| DbvSpec::new(psi, 1e-3, 1e-3).unwrap();
    for (psi, lambda, k, n) in reference {
        let o = optimize_brm(&spec(psi), &ch, lambda, BrmMode::Sampling, 0.0, 0.0).unwrap();
        assert_eq!((o.k_star, o.n_star), (k, n), "psi={psi} lambda={lambda}");
    }
}

#[test]
fn dfa_length_reference_point() {
    // (p_i, p_b, β) = (0.01, 0.2, 0.05) at ε = 1e-3:
    // max(0.06/0.0016, 0.4/0.0225) ln 1000 = 37.5 * 6.9078 = 259.04
    let spec = DbvSpec::new(2.0, 1e-3, 1e-3).unwrap();
    let k = challenge_length_dfa(&BerPair::from_probs(0.01, 0.2), 0.05, &spec).unwrap();
    assert_eq!(k, 260);
}

#[test]
fn mac_forgery_bound_exhaustive_s8() {
    let m: Bits = "1011001110001111010101".parse().unwrap();
    let mut flipped = m.clone();
    flipped.flip(3);
    let longer: Bits = format!("{m}0").parse().unwrap();
    let other: Bits = "0000".parse().unwrap();
    for m2 in [flipped, longer, other, Bits::default()] {
        let l = block_count(m.len().max(m2.len()), 8);
        let p = best_forgery_s8(&m, &m2);
        assert!(p <= l as f64 / 256.0, "m2={m2}: {p} > {l}/256");
    }
}

#[test]
fn mac_random_tag_rate_s8() {
    // For a fixed message every tag value is hit by exactly 256 of the 2^16
    // keys, so a random tag verifies with probability exactly 2^-8.
    let m: Bits = "110010".parse().unwrap();
    let mut counts = [0u32; 256];
    for a in 0..256u64 {
        for b in 0..256u64 {
            counts[mac_sign(&MacKey::new(8, a, b).unwrap(), &m).unwrap().value as usize] += 1;
        }
    }
    assert!(counts.iter().all(|&c| c == 256));
}

#[test]
fn guessing_bound_exhaustive_small_source() {
    let (n, k, p) = (12u32, 4u32, 0.3);
    for (mu, theta) in [
        (0.0, 0.0),
        (0.1, 0.05),
        (0.2, 0.1),
        (0.25, 0.25),
        (0.29, 0.04),
    ] {
        let delta = brm_exponent_general(p, mu, 0.0).unwrap().delta2;
        let gamma = sampler_guarantee(k as u64, theta);
        let t = ((mu - theta) * k as f64 + 1e-12).floor() as i64;
        let guess = small_source_guess_probability(n, k, p, t);
        let bound = (gamma + 2f64.powf(-delta * n as f64)).min(1.0);
        assert!(
            guess <= bound + 1e-12,
            "mu={mu} theta={theta}: {guess} > {bound}"
        );
        // Closed form: the best guess is y_S, leaving a Bin(k, p) error count.
        let closed: f64 = (0..=t.max(-1))
            .map(|i| {
                let c = (0..i).fold(1.0, |c, j| c * (k as i64 - j) as f64 / (j + 1) as f64);
                c * p.powi(i as i32) * (1.0 - p).powi(k as i32 - i as i32)
            })
            .sum();
        assert!(
            (guess - closed).abs() < 1e-9,
            "mu={mu} theta={theta} t={t}: {guess} vs {closed}"
        );
        let cs = CloseSecurity {
            mu,
            delta,
            n: n as u64,
        };
        if let Ok(out) = sampler_close_security(cs, k as u64, theta, gamma) {
            assert!(
                (2f64.powf(-out.delta * k as f64) - (gamma + 2f64.powf(-delta * n as f64))).abs()
                    < 1e-12
            );
        }
    }
}
