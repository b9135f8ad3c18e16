//! Property tests for the invariants of the bounds, optimiser, primitives and
//! protocol engine.

use proptest::prelude::*;

use dbv_core::bounds::{
    challenge_length_brm_general, challenge_length_brm_sampling, challenge_length_dfa,
    chernoff_false_accept, chernoff_false_reject, error_budget, exact_binomial_tail_lower,
    exact_binomial_tail_upper, BrmSpec, DbvSpec,
};
use dbv_core::channel::{bit_error_prob, BerPair, ChannelParams};
use dbv_core::optimizer::{optimize_dfa, optimize_dfa_with, solve_threshold, OptimizerOptions};
use dbv_core::primitives::mac::{mac_sign, mac_verify, MacKey};
use dbv_core::primitives::sampler::{sample_indices, IndexSet, SamplerKey};
use dbv_core::protocol::{verify_response, Verdict};
use dbv_core::{Bits, SoundnessModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SLACK: f64 = 1.0 + 1e-9;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn chernoff_dominates_exact_tails(
        k in 1u64..=10_000,
        p in 1e-4f64..0.5,
        frac in 0.01f64..0.99,
    ) {
        // Completeness side: p_i = p < beta.
        let beta_hi = p + frac * (1.0 - p);
        let exact = exact_binomial_tail_upper(k, beta_hi, p);
        prop_assert!(chernoff_false_reject(k, beta_hi, p).unwrap() >= exact);
        // Soundness side: beta < p_b = p.
        let beta_lo = frac * p;
        let exact = exact_binomial_tail_lower(k, beta_lo, p);
        prop_assert!(chernoff_false_accept(k, beta_lo, p).unwrap() >= exact);
    }

    #[test]
    fn exact_tails_partition(k in 1u64..5000, beta in 0.0f64..1.0, p in 0.0f64..=1.0) {
        let hi = exact_binomial_tail_upper(k, beta, p);
        let lo = exact_binomial_tail_lower(k, beta, p);
        prop_assert!((0.0..=1.0).contains(&hi) && (0.0..=1.0).contains(&lo));
        prop_assert!((hi + lo - 1.0).abs() < 1e-12);
    }
}

fn eps() -> impl Strategy<Value = f64> {
    (-5.0f64..-1.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #[test]
    fn dfa_length_inverts(
        p_i in 1e-4f64..0.2,
        gap in 0.02f64..0.3,
        pos in 0.05f64..0.95,
        eps_fa in eps(),
        eps_fr in eps(),
    ) {
        let p_b = p_i + gap;
        let beta = p_i + pos * gap;
        let spec = DbvSpec::new(2.0, eps_fa, eps_fr).unwrap();
        let k = challenge_length_dfa(&BerPair::from_probs(p_i, p_b), beta, &spec).unwrap();
        prop_assert!(chernoff_false_reject(k, beta, p_i).unwrap() <= eps_fr * SLACK);
        prop_assert!(chernoff_false_accept(k, beta, p_b).unwrap() <= eps_fa * SLACK);
    }

    #[test]
    fn brm_lengths_invert(
        p_i in 1e-4f64..0.05,
        p_b in 0.2f64..0.45,
        lambda in 0.001f64..0.02,
        pos in 0.1f64..0.9,
        eps_fa in eps(),
        eps_fr in eps(),
    ) {
        let spec = DbvSpec::new(2.0, eps_fa, eps_fr).unwrap();
        let ber = BerPair::from_probs(p_i, p_b);
        let gamma = eps_fa / 100.0;
        let target = eps_fa - gamma;
        let brm = BrmSpec::new(lambda, 0.0, gamma).unwrap();

        let lim = SoundnessModel::BrmGeneral { lambda, theta: 0.0 }.beta_limit(p_b);
        if p_i < lim {
            let beta = p_i + pos * (lim - p_i);
            let len = challenge_length_brm_general(&ber, beta, &brm, &spec).unwrap();
            prop_assert!(chernoff_false_reject(len.k, beta, p_i).unwrap() <= eps_fr * SLACK);
            let n = len.k as f64 / lambda;
            let rate = ((p_b - beta).powi(2) - 2.0 * std::f64::consts::LN_2 * p_b * lambda) / (2.0 * p_b);
            prop_assert!((-n * rate).exp() <= target * SLACK);
            prop_assert!(len.n as f64 >= n - 1e-6);
        }

        let lim = (1.0 - lambda) * p_b;
        let beta = p_i + pos * (lim - p_i);
        let len = challenge_length_brm_sampling(&ber, beta, &brm, &spec).unwrap();
        prop_assert!(chernoff_false_reject(len.k, beta, p_i).unwrap() <= eps_fr * SLACK);
        let q = (1.0 - lambda) * p_b;
        prop_assert!((-(len.k as f64) * (q - beta).powi(2) / (2.0 * q)).exp() <= target * SLACK);
    }

    #[test]
    fn lengths_non_increasing_in_p_b(
        p_i in 1e-4f64..0.05,
        beta_gap in 0.005f64..0.05,
        p_b in 0.15f64..0.4,
        step in 0.001f64..0.05,
    ) {
        let beta = p_i + beta_gap;
        let spec = DbvSpec::new(2.0, 1e-4, 1e-4).unwrap();
        let k1 = challenge_length_dfa(&BerPair::from_probs(p_i, p_b), beta, &spec).unwrap();
        let k2 = challenge_length_dfa(&BerPair::from_probs(p_i, p_b + step), beta, &spec).unwrap();
        prop_assert!(k2 <= k1);
        let brm = BrmSpec::new(0.1, 0.0, 0.0).unwrap();
        let s1 = challenge_length_brm_sampling(&BerPair::from_probs(p_i, p_b), beta, &brm, &spec).unwrap();
        let s2 = challenge_length_brm_sampling(&BerPair::from_probs(p_i, p_b + step), beta, &brm, &spec).unwrap();
        prop_assert!(s2.n <= s1.n);
    }

    #[test]
    fn bit_error_decreasing(a in 0.0f64..20.0, b in 0.0f64..20.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(bit_error_prob(hi).unwrap() <= bit_error_prob(lo).unwrap());
        prop_assert!(bit_error_prob(lo).unwrap() <= 0.5);
    }

    #[test]
    fn threshold_balances_terms(p_i in 1e-6f64..0.3, gap in 1e-3f64..0.2) {
        let ber = BerPair::from_probs(p_i, p_i + gap);
        let s = solve_threshold(&ber, &SoundnessModel::Dfa, 1.0, 1.0).unwrap();
        prop_assert!(ber.p_i < s.beta && s.beta < ber.p_b);
        prop_assert!(((s.term1 - s.term2) / s.term1).abs() < 1e-9);
    }

    #[test]
    fn sampler_distinct_and_deterministic(seed in any::<[u8; 32]>(), n in 1u64..2000, frac in 0.0f64..=1.0) {
        let k = (frac * n as f64) as u64;
        let key = SamplerKey(seed);
        let s = sample_indices(&key, n, k).unwrap();
        prop_assert_eq!(s.len() as u64, k);
        prop_assert!(IndexSet::new(n, s.as_slice().to_vec()).is_some());
        prop_assert_eq!(s, sample_indices(&key, n, k).unwrap());
    }

    #[test]
    fn mac_round_trip(bits in prop::sample::select(vec![8u32, 16, 32, 64]), seed in any::<u64>(), len in 0usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let key = MacKey::random(bits, &mut rng).unwrap();
        let m = Bits::random(len, &mut rng);
        let t = mac_sign(&key, &m).unwrap();
        prop_assert!(mac_verify(&key, &m, &t));
    }

    #[test]
    fn threshold_rule(k in 1u64..500, beta in 0.001f64..0.999, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Bits::random(k as usize, &mut rng);
        let budget = error_budget(k, beta) as usize;
        let mut at = m.clone();
        for i in 0..budget {
            at.flip(i);
        }
        prop_assert_eq!(verify_response(&m, &at, beta, k).unwrap(), Verdict::Acc);
        if budget < k as usize {
            at.flip(budget);
            prop_assert_eq!(verify_response(&m, &at, beta, k).unwrap(), Verdict::Rej);
        }
    }

    #[test]
    fn bits_text_round_trip(v in prop::collection::vec(any::<bool>(), 0..300)) {
        let b = Bits::new(v);
        prop_assert_eq!(b.to_string().parse::<Bits>().unwrap(), b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimizer_respects_constraints(psi in 1.02f64..4.0, eps_fa in eps(), eps_fr in eps()) {
        let ch = ChannelParams::default();
        let spec = DbvSpec::new(psi, eps_fa, eps_fr).unwrap();
        let o = optimize_dfa(&spec, &ch).unwrap();
        prop_assert!(o.e0_star <= ch.e_max);
        prop_assert!(o.p_i < o.beta_star && o.beta_star < o.p_b);
        let k = challenge_length_dfa(&BerPair::from_probs(o.p_i, o.p_b), o.beta_star, &spec).unwrap();
        prop_assert_eq!(k, o.k_star);
        prop_assert_eq!(o, optimize_dfa(&spec, &ch).unwrap());
    }

    #[test]
    fn grid_refinement_moves_k_by_at_most_one(psi in 1.02f64..4.0, eps in eps()) {
        let ch = ChannelParams::default();
        let spec = DbvSpec::new(psi, eps, eps).unwrap();
        let coarse = optimize_dfa_with(&spec, &ch, OptimizerOptions::default()).unwrap();
        let fine = optimize_dfa_with(
            &spec,
            &ch,
            OptimizerOptions { grid_points: 3999, ..OptimizerOptions::default() },
        )
        .unwrap();
        prop_assert!((coarse.k_star as i64 - fine.k_star as i64).abs() <= 1);
    }
}

#[test]
fn sweep_trends_in_psi() {
    let ch = ChannelParams::default();
    let mut prev: Option<(u64, f64)> = None;
    let mut psi = 1.02;
    while psi <= 3.0 {
        let o = optimize_dfa(&DbvSpec::new(psi, 1e-4, 1e-4).unwrap(), &ch).unwrap();
        if let Some((k, e0)) = prev {
            assert!(o.k_star <= k, "k* rose at psi={psi}");
            assert!(o.e0_star >= e0 * (1.0 - 1e-6), "E0* fell at psi={psi}");
        }
        prev = Some((o.k_star, o.e0_star));
        psi += 0.02;
    }
}
