//! Monte Carlo estimation of acceptance rates.
//!
//! Trial `i` draws all of its randomness (keys, challenge, noise, attacker
//! coins) from a ChaCha20 generator seeded by [`trial_seed`]`(master, i)`, so
//! results do not depend on the number of worker threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::adversary::{
    attack_dfa, attack_impersonation, attack_mfa, attack_tfa_general, attack_tfa_relay,
    attack_tfa_sampling, AttackError, GeneralStrategy, IndexChoice, LeakedView, MfaStrategy,
};
use crate::bounds::{exact_binomial_tail_lower, exact_binomial_tail_upper, DbvSpec};
use crate::channel::{bit_error_prob, snr_at_distance, transmit_power_for_claim, ChannelParams};
use crate::protocol::{
    run, Claim, PartyPlacement, ProtocolConfig, ProtocolError, ProtocolKind, SessionKeys,
    Transcript, TranscriptRecord,
};

/// Two-sided confidence level of the reported intervals.
pub const CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("trials must be at least 1")]
    NoTrials,
    #[error(transparent)]
    Attack(#[from] AttackError),
}

impl From<ProtocolError> for HarnessError {
    fn from(e: ProtocolError) -> Self {
        HarnessError::Attack(e.into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    Honest,
    Dfa,
    Mfa { strategy: MfaStrategy },
    Impersonation { leak_sampler_key: bool },
    TfaRelay,
    TfaSampling { index_choice: IndexChoice },
    TfaGeneral { strategy: GeneralStrategy },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Honest => "honest",
            Scenario::Dfa => "dfa",
            Scenario::Mfa { .. } => "mfa",
            Scenario::Impersonation { .. } => "impersonation",
            Scenario::TfaRelay => "tfa-relay",
            Scenario::TfaSampling { .. } => "tfa-sampling",
            Scenario::TfaGeneral { .. } => "tfa-general",
        }
    }
}

/// Distances for a scenario.
///
/// `d_claim` is the claim the verifier sees (the forged one for mafia
/// fraud). `d_real` is where the responding prover (or the impersonator)
/// sits. `intruder_d = None` places the intruder next to the verifier with
/// error-free reception.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub d_claim: f64,
    pub d_real: f64,
    pub intruder_d: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// The acceptance rate must not exceed the bound.
    Soundness,
    /// The rejection rate must not exceed the bound.
    Completeness,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Acc,
    Rej,
    /// Stopped by the retrieval audit; counts as a rejection.
    Blocked,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub scenario: Scenario,
    pub protocol: ProtocolKind,
    pub trials: u64,
    pub accepts: u64,
    pub blocked: u64,
    /// Acceptance rate.
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound_kind: Option<BoundKind>,
    /// `eps_fa` for attacks, `eps_fr` for honest runs.
    pub analytic_bound: Option<f64>,
    /// Exact acceptance probability when it has a closed form.
    pub exact_accept_probability: Option<f64>,
    pub bound_satisfied: Option<bool>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub passed: bool,
    pub kind: BoundKind,
    pub bound: f64,
    /// Bound minus the relevant CI end; negative on failure.
    pub slack: f64,
    /// `|rate - exact| / sigma` when an exact probability is known.
    pub z_vs_exact: Option<f64>,
}

/// Seed of trial `index` under `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut r = ChaCha20Rng::seed_from_u64(master);
    r.set_stream(index);
    r.next_u64()
}

pub fn trial_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Runs one trial and returns its transcript, or `None` when the retrieval
/// audit stopped it.
pub fn run_trial(
    scenario: &Scenario,
    cfg: &ProtocolConfig,
    setup: &Setup,
    ch: &ChannelParams,
    seed: u64,
) -> Result<Option<Transcript>, HarnessError> {
    let rng = &mut trial_rng(seed);
    let keys = SessionKeys::fresh(cfg, rng)?;
    let (dc, dr, di) = (setup.d_claim, setup.d_real, setup.intruder_d);
    let result = match *scenario {
        Scenario::Honest => run(
            cfg,
            &Claim::new(dc, ch)?,
            &PartyPlacement::new(dr),
            ch,
            rng,
            &keys,
        )
        .map_err(AttackError::from),
        Scenario::Dfa => attack_dfa(cfg, dc, dr, ch, rng, &keys),
        Scenario::Mfa { strategy } => attack_mfa(cfg, dr, dc, di, ch, rng, &keys, strategy),
        Scenario::Impersonation { leak_sampler_key } => attack_impersonation(
            cfg,
            dc,
            dr,
            ch,
            rng,
            &keys,
            LeakedView {
                sampler_key: leak_sampler_key,
            },
        ),
        Scenario::TfaRelay => attack_tfa_relay(cfg, dc, dr, di, ch, rng, &keys),
        Scenario::TfaSampling { index_choice } => {
            attack_tfa_sampling(cfg, dc, dr, di, ch, rng, &keys, index_choice)
        }
        Scenario::TfaGeneral { strategy } => {
            attack_tfa_general(cfg, dc, dr, ch, rng, &keys, strategy)
        }
    };
    match result {
        Ok(t) => Ok(Some(t)),
        Err(e) if e.is_retrieval_blocked() => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Clopper–Pearson interval for `x` successes in `n` trials.
pub fn clopper_pearson(x: u64, n: u64, confidence: f64) -> (f64, f64) {
    assert!(n > 0 && x <= n);
    let alpha = 1.0 - confidence;
    let (xf, nf) = (x as f64, n as f64);
    let lo = if x == 0 {
        0.0
    } else {
        invert_beta_reg(xf, nf - xf + 1.0, alpha / 2.0)
    };
    let hi = if x == n {
        1.0
    } else {
        invert_beta_reg(xf + 1.0, nf - xf, 1.0 - alpha / 2.0)
    };
    (lo, hi)
}

/// `p` with `I_p(a, b) = target`, by bisection.
fn invert_beta_reg(a: f64, b: f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Analytic reference for a scenario: which bound applies, its value, the
/// exact acceptance probability when known, and any caveats.
fn reference(
    scenario: &Scenario,
    cfg: &ProtocolConfig,
    spec: &DbvSpec,
    setup: &Setup,
    ch: &ChannelParams,
) -> (Option<(BoundKind, f64)>, Option<f64>, Vec<String>) {
    let mut warnings = Vec::new();
    // Per-bit error probability of whoever demodulates at d_real.
    let p_at_real = || -> Option<f64> {
        if ch.noiseless {
            return Some(0.0);
        }
        let e = transmit_power_for_claim(setup.d_claim, cfg.e0, ch).ok()?;
        bit_error_prob(snr_at_distance(e, setup.d_real, ch).ok()?).ok()
    };
    let soundness = Some((BoundKind::Soundness, spec.eps_fa));
    match (scenario, cfg.protocol) {
        (Scenario::Honest, _) => {
            let exact = p_at_real().map(|p| 1.0 - exact_binomial_tail_upper(cfg.k, cfg.beta, p));
            (
                Some((BoundKind::Completeness, spec.eps_fr)),
                exact,
                warnings,
            )
        }
        (Scenario::Dfa, _) | (Scenario::Impersonation { .. }, ProtocolKind::Pi1) => {
            let exact = p_at_real().map(|p| exact_binomial_tail_lower(cfg.k, cfg.beta, p));
            (soundness, exact, warnings)
        }
        (Scenario::Mfa { .. }, ProtocolKind::Pi1) => {
            warnings.push("pi1 makes no mafia-fraud claim; rate shown without a bound".into());
            (None, None, warnings)
        }
        (Scenario::TfaRelay, ProtocolKind::Pi1 | ProtocolKind::Pi2) => {
            warnings.push(format!(
                "{} makes no terrorist-fraud claim; the relay is expected to succeed",
                cfg.protocol
            ));
            (None, None, warnings)
        }
        (
            Scenario::TfaSampling { .. } | Scenario::TfaGeneral { .. },
            ProtocolKind::Pi1 | ProtocolKind::Pi2,
        ) => {
            warnings.push(format!("{} applies to pi3 only", scenario.name()));
            (None, None, warnings)
        }
        _ => {
            if cfg.protocol == ProtocolKind::Pi3 && !cfg.uses_mac() {
                warnings
                    .push("pi3 without a tag makes no mafia-fraud or impersonation claim".into());
            }
            (soundness, None, warnings)
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EstimateOptions {
    /// Keep a [`TranscriptRecord`] per completed trial.
    pub collect_records: bool,
}

/// Runs `trials` independent trials and summarises the acceptance rate.
pub fn estimate_rates(
    scenario: &Scenario,
    cfg: &ProtocolConfig,
    spec: &DbvSpec,
    setup: &Setup,
    ch: &ChannelParams,
    trials: u64,
    master_seed: u64,
) -> Result<TrialSummary, HarnessError> {
    estimate_rates_with(
        scenario,
        cfg,
        spec,
        setup,
        ch,
        trials,
        master_seed,
        EstimateOptions::default(),
    )
    .map(|(s, _)| s)
}

#[allow(clippy::too_many_arguments)]
pub fn estimate_rates_with(
    scenario: &Scenario,
    cfg: &ProtocolConfig,
    spec: &DbvSpec,
    setup: &Setup,
    ch: &ChannelParams,
    trials: u64,
    master_seed: u64,
    opts: EstimateOptions,
) -> Result<(TrialSummary, Vec<TranscriptRecord>), HarnessError> {
    if trials == 0 {
        return Err(HarnessError::NoTrials);
    }
    let results: Vec<(Outcome, Option<TranscriptRecord>)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(master_seed, i);
            let t = run_trial(scenario, cfg, setup, ch, seed)?;
            Ok(match t {
                None => (Outcome::Blocked, None),
                Some(t) => {
                    let o = if t.verdict().accepted() {
                        Outcome::Acc
                    } else {
                        Outcome::Rej
                    };
                    (o, opts.collect_records.then(|| t.record(seed)))
                }
            })
        })
        .collect::<Result<_, HarnessError>>()?;
    let accepts = results.iter().filter(|r| r.0 == Outcome::Acc).count() as u64;
    let blocked = results.iter().filter(|r| r.0 == Outcome::Blocked).count() as u64;
    let records = results.into_iter().filter_map(|r| r.1).collect();
    let (ci_low, ci_high) = clopper_pearson(accepts, trials, CONFIDENCE);
    let (bound, exact, mut warnings) = reference(scenario, cfg, spec, setup, ch);
    if let Some((_, b)) = bound {
        if (trials as f64) < 10.0 / b {
            warnings.push(format!(
                "{trials} trials cannot resolve a rate of {b}; use at least {}",
                (10.0 / b).ceil()
            ));
        }
    }
    let mut summary = TrialSummary {
        scenario: *scenario,
        protocol: cfg.protocol,
        trials,
        accepts,
        blocked,
        rate: accepts as f64 / trials as f64,
        ci_low,
        ci_high,
        bound_kind: bound.map(|b| b.0),
        analytic_bound: bound.map(|b| b.1),
        exact_accept_probability: exact,
        bound_satisfied: None,
        warnings,
    };
    summary.bound_satisfied = compare_to_bound(&summary).map(|c| c.passed);
    Ok((summary, records))
}

/// Checks the interval against the bound: soundness passes when `ci_low` is
/// at most the bound, completeness when `1 - ci_high` is.
pub fn compare_to_bound(summary: &TrialSummary) -> Option<BoundCheck> {
    let kind = summary.bound_kind?;
    let bound = summary.analytic_bound?;
    let slack = match kind {
        BoundKind::Soundness => bound - summary.ci_low,
        BoundKind::Completeness => bound - (1.0 - summary.ci_high),
    };
    let z_vs_exact = summary.exact_accept_probability.map(|p| {
        let sd = (p * (1.0 - p) / summary.trials as f64).sqrt();
        let diff = (summary.rate - p).abs();
        if sd == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / sd
        }
    });
    Some(BoundCheck {
        passed: slack >= 0.0,
        kind,
        bound,
        slack,
        z_vs_exact,
    })
}

pub const SUMMARY_CSV_HEADER: &str =
    "scenario,protocol,trials,accepts,blocked,rate,ci_low,ci_high,analytic_bound,bound_satisfied";

impl TrialSummary {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.9e}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{:.9e},{:.9e},{:.9e},{},{}",
            self.scenario.name(),
            self.protocol,
            self.trials,
            self.accepts,
            self.blocked,
            self.rate,
            self.ci_low,
            self.ci_high,
            opt(self.analytic_bound),
            self.bound_satisfied
                .map(|b| b.to_string())
                .unwrap_or_default()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::BrmParams;

    fn summary(accepts: u64, trials: u64, kind: BoundKind, bound: f64) -> TrialSummary {
        let (ci_low, ci_high) = clopper_pearson(accepts, trials, CONFIDENCE);
        TrialSummary {
            scenario: Scenario::Dfa,
            protocol: ProtocolKind::Pi1,
            trials,
            accepts,
            blocked: 0,
            rate: accepts as f64 / trials as f64,
            ci_low,
            ci_high,
            bound_kind: Some(kind),
            analytic_bound: Some(bound),
            exact_accept_probability: None,
            bound_satisfied: None,
            warnings: vec![],
        }
    }

    #[test]
    fn clopper_pearson_reference_values() {
        // Zero successes: upper = 1 - (alpha/2)^(1/n).
        let (lo, hi) = clopper_pearson(0, 100, 0.95);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.025f64.powf(0.01))).abs() < 1e-12);
        let (lo, hi) = clopper_pearson(100, 100, 0.95);
        assert!((lo - 0.025f64.powf(0.01)).abs() < 1e-12);
        assert_eq!(hi, 1.0);
        let (lo, hi) = clopper_pearson(5, 10, 0.95);
        assert!((lo - 0.187086).abs() < 1e-5 && (hi - 0.812914).abs() < 1e-5);
    }

    #[test]
    fn compare_fixtures() {
        assert!(
            compare_to_bound(&summary(0, 1000, BoundKind::Soundness, 1e-3))
                .unwrap()
                .passed
        );
        let bad = compare_to_bound(&summary(500, 1000, BoundKind::Soundness, 0.01)).unwrap();
        assert!(!bad.passed && bad.slack < 0.0);
        assert!(
            compare_to_bound(&summary(995, 1000, BoundKind::Completeness, 0.01))
                .unwrap()
                .passed
        );
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
        assert_ne!(trial_seed(7, 3), trial_seed(7, 4));
        assert_ne!(trial_seed(7, 3), trial_seed(8, 3));
    }

    #[test]
    fn noiseless_honest_always_accepts() {
        let ch = ChannelParams::default().noiseless();
        let cfg = ProtocolConfig::new(ProtocolKind::Pi2, 1.0, 64, 0.1);
        let spec = DbvSpec::new(1.1, 0.01, 0.01).unwrap();
        let setup = Setup {
            d_claim: 100.0,
            d_real: 100.0,
            intruder_d: None,
        };
        let s = estimate_rates(&Scenario::Honest, &cfg, &spec, &setup, &ch, 200, 1).unwrap();
        assert_eq!(s.rate, 1.0);
        assert_eq!(s.ci_high, 1.0);
        assert_eq!(s.bound_satisfied, Some(true));
        assert!(!s.warnings.is_empty());
    }

    #[test]
    fn relay_against_pi3_is_blocked() {
        let ch = ChannelParams::default();
        let cfg = ProtocolConfig::pi3(
            1.0,
            0.1,
            BrmParams {
                lambda: 0.5,
                n: 64,
                theta: 0.0,
                gamma: 0.0,
            },
        );
        let spec = DbvSpec::new(2.0, 0.01, 0.01).unwrap();
        let setup = Setup {
            d_claim: 100.0,
            d_real: 300.0,
            intruder_d: None,
        };
        let s = estimate_rates(&Scenario::TfaRelay, &cfg, &spec, &setup, &ch, 50, 2).unwrap();
        assert_eq!(s.rate, 0.0);
        assert_eq!(s.blocked, 50);
    }

    #[test]
    fn identical_inputs_identical_summary() {
        let ch = ChannelParams::default();
        let cfg = ProtocolConfig::new(ProtocolKind::Pi1, 1e-3, 100, 0.2);
        let spec = DbvSpec::new(1.5, 0.05, 0.05).unwrap();
        let setup = Setup {
            d_claim: 5e4,
            d_real: 7.5e4,
            intruder_d: None,
        };
        let a = estimate_rates(&Scenario::Dfa, &cfg, &spec, &setup, &ch, 500, 9).unwrap();
        let b = estimate_rates(&Scenario::Dfa, &cfg, &spec, &setup, &ch, 500, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.exact_accept_probability.is_some());
    }
}
