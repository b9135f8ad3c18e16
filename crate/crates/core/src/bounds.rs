//! Analytical security bounds.
//!
//! Chernoff tail bounds on the challenge-response error count, the challenge
//! lengths they imply for each protocol, exact binomial tails used as the
//! reference they must dominate, and the closely-secure source arithmetic
//! (leakage and sampling) behind the bounded-retrieval protocol.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::channel::BerPair;

/// Largest challenge length reported as a finite number.
pub const DEFAULT_LENGTH_CAP: u64 = 1_000_000_000_000_000;

/// Absolute guard applied when turning a real threshold `beta * k` into an
/// integer error budget, so that products like `0.25 * 4` never land just
/// below the integer they represent.
pub const THRESHOLD_GUARD: f64 = 1e-12;

pub const DFA_CONDITION: &str = "p_i < β < p_b";
pub const GENERAL_CONDITION: &str = "p_i < p_b − √(2ln2·p_b·λ)";
pub const SAMPLING_CONDITION: &str = "p_i < (1−λ)·p_b";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("infeasible threshold: {condition} violated (p_i={p_i}, β={beta}, p_b={p_b})")]
    InfeasibleThreshold {
        condition: &'static str,
        p_i: f64,
        beta: f64,
        p_b: f64,
    },
    #[error("general intruder infeasible: {condition} violated (μ={mu}, p_b={p_b}, λ={lambda})")]
    GeneralIntruderInfeasible {
        condition: &'static str,
        mu: f64,
        p_b: f64,
        lambda: f64,
    },
    #[error("sampling intruder infeasible: {condition} violated (μ={mu}, p_b={p_b}, λ={lambda})")]
    SamplingIntruderInfeasible {
        condition: &'static str,
        mu: f64,
        p_b: f64,
        lambda: f64,
    },
    #[error("sampler failure probability γ={gamma} must be below ε_FA={eps_fa}")]
    SamplerFailureTooLarge { gamma: f64, eps_fa: f64 },
    #[error("no security remains: γ + 2^(−δn) = {total} ≥ 1")]
    NoSecurityRemains { total: f64 },
    #[error("required length {required} exceeds the cap {cap}")]
    ExceedsCap { required: f64, cap: u64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl BoundsError {
    /// The violated feasibility condition, when the error is an infeasibility.
    pub fn condition(&self) -> Option<&'static str> {
        match self {
            BoundsError::InfeasibleThreshold { condition, .. }
            | BoundsError::GeneralIntruderInfeasible { condition, .. }
            | BoundsError::SamplingIntruderInfeasible { condition, .. } => Some(condition),
            BoundsError::SamplerFailureTooLarge { .. } => Some("γ < ε_FA"),
            BoundsError::NoSecurityRemains { .. } => Some("γ + 2^(−δn) < 1"),
            _ => None,
        }
    }
}

/// Security target: DBV ratio plus false-accept and false-reject rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DbvSpec {
    pub psi: f64,
    pub eps_fa: f64,
    pub eps_fr: f64,
}

impl DbvSpec {
    pub fn new(psi: f64, eps_fa: f64, eps_fr: f64) -> Result<Self, BoundsError> {
        let spec = DbvSpec {
            psi,
            eps_fa,
            eps_fr,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        let mut problems = Vec::new();
        if !(self.psi > 1.0 && self.psi.is_finite()) {
            problems.push(format!("psi must exceed 1 (got {})", self.psi));
        }
        if !(self.eps_fa > 0.0 && self.eps_fa < 1.0) {
            problems.push(format!("eps_fa must be in (0,1) (got {})", self.eps_fa));
        }
        if !(self.eps_fr > 0.0 && self.eps_fr < 1.0) {
            problems.push(format!("eps_fr must be in (0,1) (got {})", self.eps_fr));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(BoundsError::InvalidArgument(problems.join("; ")))
        }
    }
}

/// A source that is `(mu, delta)`-closely-secure over `n` bits: every guess
/// lands within Hamming radius `mu * n` with probability at most
/// `2^(-delta * n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloseSecurity {
    pub mu: f64,
    pub delta: f64,
    pub n: u64,
}

impl CloseSecurity {
    /// The probability bound `2^(-delta * n)`.
    pub fn guess_probability(&self) -> f64 {
        (-self.delta * self.n as f64).exp2()
    }
}

/// Bounded-retrieval parameters: retrieval rate, sampler slack and the
/// sampler's failure probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrmSpec {
    pub lambda: f64,
    pub theta: f64,
    pub gamma: f64,
}

impl BrmSpec {
    pub fn new(lambda: f64, theta: f64, gamma: f64) -> Result<Self, BoundsError> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(BoundsError::InvalidArgument(format!(
                "lambda must be in (0,1) (got {lambda})"
            )));
        }
        if !(theta >= 0.0) {
            return Err(BoundsError::InvalidArgument(format!(
                "theta must be non-negative (got {theta})"
            )));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(BoundsError::InvalidArgument(format!(
                "gamma must be in [0,1) (got {gamma})"
            )));
        }
        Ok(BrmSpec {
            lambda,
            theta,
            gamma,
        })
    }

    /// Effective closeness radius `beta + theta`.
    pub fn mu(&self, beta: f64) -> f64 {
        beta + self.theta
    }
}

/// Which soundness requirement the challenge length must meet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SoundnessModel {
    /// Lone dishonest prover.
    Dfa,
    /// Bounded retrieval, intruder may compute any `lambda * n`-bit function.
    BrmGeneral { lambda: f64, theta: f64 },
    /// Bounded retrieval, intruder samples individual positions.
    BrmSampling { lambda: f64, theta: f64 },
}

impl SoundnessModel {
    pub fn lambda(&self) -> Option<f64> {
        match *self {
            SoundnessModel::Dfa => None,
            SoundnessModel::BrmGeneral { lambda, .. }
            | SoundnessModel::BrmSampling { lambda, .. } => Some(lambda),
        }
    }

    pub fn theta(&self) -> f64 {
        match *self {
            SoundnessModel::Dfa => 0.0,
            SoundnessModel::BrmGeneral { theta, .. }
            | SoundnessModel::BrmSampling { theta, .. } => theta,
        }
    }

    pub fn condition(&self) -> &'static str {
        match self {
            SoundnessModel::Dfa => DFA_CONDITION,
            SoundnessModel::BrmGeneral { .. } => GENERAL_CONDITION,
            SoundnessModel::BrmSampling { .. } => SAMPLING_CONDITION,
        }
    }

    /// Supremum of the admissible closeness radius for a given `p_b`.
    pub fn mu_limit(&self, p_b: f64) -> f64 {
        match *self {
            SoundnessModel::Dfa => p_b,
            SoundnessModel::BrmGeneral { lambda, .. } => p_b - (2.0 * LN_2 * p_b * lambda).sqrt(),
            SoundnessModel::BrmSampling { lambda, .. } => (1.0 - lambda) * p_b,
        }
    }

    /// Supremum of the admissible threshold `beta`.
    pub fn beta_limit(&self, p_b: f64) -> f64 {
        self.mu_limit(p_b) - self.theta()
    }

    /// Second (false-accept) term of the challenge-length bound, per unit of
    /// `ln(1/eps)`. Infinite outside the admissible range.
    pub fn accept_term(&self, p_b: f64, beta: f64) -> f64 {
        let mu = beta + self.theta();
        if !(mu < self.mu_limit(p_b)) {
            return f64::INFINITY;
        }
        match *self {
            SoundnessModel::Dfa => accept_term_dfa(p_b, beta),
            SoundnessModel::BrmGeneral { lambda, .. } => accept_term_general(p_b, mu, lambda),
            SoundnessModel::BrmSampling { lambda, .. } => accept_term_sampling(p_b, mu, lambda),
        }
    }
}

/// `(p_i + beta) / (beta - p_i)^2`, the completeness term.
pub fn reject_term(p_i: f64, beta: f64) -> f64 {
    (p_i + beta) / ((beta - p_i) * (beta - p_i))
}

/// `2 p_b / (p_b - beta)^2`.
pub fn accept_term_dfa(p_b: f64, beta: f64) -> f64 {
    2.0 * p_b / ((p_b - beta) * (p_b - beta))
}

/// `2 p_b λ / ((p_b - μ)^2 - 2 ln2 p_b λ)`.
pub fn accept_term_general(p_b: f64, mu: f64, lambda: f64) -> f64 {
    2.0 * p_b * lambda / ((p_b - mu) * (p_b - mu) - 2.0 * LN_2 * p_b * lambda)
}

/// `2 (1-λ) p_b / ((1-λ) p_b - μ)^2`.
pub fn accept_term_sampling(p_b: f64, mu: f64, lambda: f64) -> f64 {
    let q = (1.0 - lambda) * p_b;
    2.0 * q / ((q - mu) * (q - mu))
}

/// Integer error budget `floor(beta * k)` with [`THRESHOLD_GUARD`].
pub fn error_budget(k: u64, beta: f64) -> u64 {
    let t = (beta * k as f64 + THRESHOLD_GUARD).floor();
    if t < 0.0 {
        0
    } else {
        (t as u64).min(k)
    }
}

/// Chernoff bound on `Pr(Bin(k, p_i) > beta k)`:
/// `exp(-(beta - p_i)^2 k / (beta + p_i))`.
pub fn chernoff_false_reject(k: u64, beta: f64, p_i: f64) -> Result<f64, BoundsError> {
    if !(p_i < beta) {
        return Err(BoundsError::InfeasibleThreshold {
            condition: "p_i < β",
            p_i,
            beta,
            p_b: f64::NAN,
        });
    }
    let d = beta - p_i;
    Ok((-d * d * k as f64 / (beta + p_i)).exp())
}

/// Chernoff bound on `Pr(Bin(k, p_b) <= beta k)`:
/// `exp(-(p_b - beta)^2 k / (2 p_b))`.
pub fn chernoff_false_accept(k: u64, beta: f64, p_b: f64) -> Result<f64, BoundsError> {
    if !(beta < p_b) {
        return Err(BoundsError::InfeasibleThreshold {
            condition: "β < p_b",
            p_i: f64::NAN,
            beta,
            p_b,
        });
    }
    let d = p_b - beta;
    Ok((-d * d * k as f64 / (2.0 * p_b)).exp())
}

/// `Pr(Bin(k, p) > beta k)`.
pub fn exact_binomial_tail_upper(k: u64, beta: f64, p: f64) -> f64 {
    binomial_split(k, error_budget(k, beta), p).1
}

/// `Pr(Bin(k, p) <= beta k)`.
pub fn exact_binomial_tail_lower(k: u64, beta: f64, p: f64) -> f64 {
    binomial_split(k, error_budget(k, beta), p).0
}

/// `(Pr(X <= cut), Pr(X > cut))` for `X ~ Bin(k, p)`.
///
/// The smaller tail is summed in log space (sorted, compensated) and the
/// other is its complement, so the pair always sums to one.
pub fn binomial_split(k: u64, cut: u64, p: f64) -> (f64, f64) {
    assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    if cut >= k {
        return (1.0, 0.0);
    }
    if p == 0.0 {
        return (1.0, 0.0);
    }
    if p == 1.0 {
        return (0.0, 1.0);
    }
    let mean = k as f64 * p;
    if (cut as f64) < mean {
        let lower = log_space_sum(k, p, 0..=cut);
        (lower, 1.0 - lower)
    } else {
        let upper = log_space_sum(k, p, cut + 1..=k);
        (1.0 - upper, upper)
    }
}

fn log_pmf(k: u64, i: u64, lp: f64, lq: f64, lgk: f64) -> f64 {
    lgk - ln_gamma(i as f64 + 1.0) - ln_gamma((k - i) as f64 + 1.0)
        + i as f64 * lp
        + (k - i) as f64 * lq
}

fn log_space_sum(k: u64, p: f64, range: std::ops::RangeInclusive<u64>) -> f64 {
    let lp = p.ln();
    let lq = (-p).ln_1p();
    let lgk = ln_gamma(k as f64 + 1.0);
    let logs: Vec<f64> = range.map(|i| log_pmf(k, i, lp, lq, lgk)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return 0.0;
    }
    let mut terms: Vec<f64> = logs
        .into_iter()
        .map(|l| l - max)
        .filter(|&l| l > -745.0)
        .map(f64::exp)
        .collect();
    terms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sum = 0.0;
    let mut comp = 0.0;
    for t in terms {
        let y = t - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
    (max + sum.ln()).exp().min(1.0)
}

fn check_cap(required: f64, cap: u64) -> Result<u64, BoundsError> {
    if !required.is_finite() || required > cap as f64 {
        return Err(BoundsError::ExceedsCap { required, cap });
    }
    Ok(required.ceil().max(1.0) as u64)
}

/// Challenge length for the plain and MAC-protected protocols.
pub fn challenge_length_dfa(ber: &BerPair, beta: f64, spec: &DbvSpec) -> Result<u64, BoundsError> {
    challenge_length_dfa_capped(ber, beta, spec, DEFAULT_LENGTH_CAP)
}

pub fn challenge_length_dfa_capped(
    ber: &BerPair,
    beta: f64,
    spec: &DbvSpec,
    cap: u64,
) -> Result<u64, BoundsError> {
    if !(ber.p_i < beta && beta < ber.p_b) {
        return Err(BoundsError::InfeasibleThreshold {
            condition: DFA_CONDITION,
            p_i: ber.p_i,
            beta,
            p_b: ber.p_b,
        });
    }
    let t1 = reject_term(ber.p_i, beta) * (1.0 / spec.eps_fr).ln();
    let t2 = accept_term_dfa(ber.p_b, beta) * (1.0 / spec.eps_fa).ln();
    check_cap(t1.max(t2), cap)
}

/// Sampled-bit count `k` and source length `n = ceil(k / lambda)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrmLength {
    pub k: u64,
    pub n: u64,
}

impl BrmLength {
    pub fn from_k(k: u64, lambda: f64) -> Self {
        BrmLength {
            k,
            n: (k as f64 / lambda - THRESHOLD_GUARD).ceil() as u64,
        }
    }
}

fn brm_preconditions(
    ber: &BerPair,
    beta: f64,
    brm: &BrmSpec,
    spec: &DbvSpec,
) -> Result<(), BoundsError> {
    if !(ber.p_i < beta) {
        return Err(BoundsError::InfeasibleThreshold {
            condition: "p_i < β",
            p_i: ber.p_i,
            beta,
            p_b: ber.p_b,
        });
    }
    if !(brm.gamma < spec.eps_fa) {
        return Err(BoundsError::SamplerFailureTooLarge {
            gamma: brm.gamma,
            eps_fa: spec.eps_fa,
        });
    }
    Ok(())
}

/// Lengths for the bounded-retrieval protocol against a general intruder.
pub fn challenge_length_brm_general(
    ber: &BerPair,
    beta: f64,
    brm: &BrmSpec,
    spec: &DbvSpec,
) -> Result<BrmLength, BoundsError> {
    challenge_length_brm_general_capped(ber, beta, brm, spec, DEFAULT_LENGTH_CAP)
}

pub fn challenge_length_brm_general_capped(
    ber: &BerPair,
    beta: f64,
    brm: &BrmSpec,
    spec: &DbvSpec,
    cap: u64,
) -> Result<BrmLength, BoundsError> {
    brm_preconditions(ber, beta, brm, spec)?;
    let mu = brm.mu(beta);
    let model = SoundnessModel::BrmGeneral {
        lambda: brm.lambda,
        theta: brm.theta,
    };
    if !(mu < model.mu_limit(ber.p_b)) {
        return Err(BoundsError::GeneralIntruderInfeasible {
            condition: GENERAL_CONDITION,
            mu,
            p_b: ber.p_b,
            lambda: brm.lambda,
        });
    }
    let t1 = reject_term(ber.p_i, beta) * (1.0 / spec.eps_fr).ln();
    let t2 = accept_term_general(ber.p_b, mu, brm.lambda) * (1.0 / (spec.eps_fa - brm.gamma)).ln();
    let k = check_cap(t1.max(t2), cap)?;
    Ok(BrmLength::from_k(k, brm.lambda))
}

/// Lengths for the bounded-retrieval protocol against a sampling intruder.
pub fn challenge_length_brm_sampling(
    ber: &BerPair,
    beta: f64,
    brm: &BrmSpec,
    spec: &DbvSpec,
) -> Result<BrmLength, BoundsError> {
    challenge_length_brm_sampling_capped(ber, beta, brm, spec, DEFAULT_LENGTH_CAP)
}

pub fn challenge_length_brm_sampling_capped(
    ber: &BerPair,
    beta: f64,
    brm: &BrmSpec,
    spec: &DbvSpec,
    cap: u64,
) -> Result<BrmLength, BoundsError> {
    brm_preconditions(ber, beta, brm, spec)?;
    let mu = brm.mu(beta);
    if !(mu < (1.0 - brm.lambda) * ber.p_b) {
        return Err(BoundsError::SamplingIntruderInfeasible {
            condition: SAMPLING_CONDITION,
            mu,
            p_b: ber.p_b,
            lambda: brm.lambda,
        });
    }
    let t1 = reject_term(ber.p_i, beta) * (1.0 / spec.eps_fr).ln();
    let t2 = accept_term_sampling(ber.p_b, mu, brm.lambda) * (1.0 / (spec.eps_fa - brm.gamma)).ln();
    let k = check_cap(t1.max(t2), cap)?;
    Ok(BrmLength::from_k(k, brm.lambda))
}

/// Effect of leaking `leak_log2` bits (support size `2^leak_log2`): the
/// exponent drops by `leak_log2 / n`. The result may be non-positive.
pub fn leakage_degradation(cs: CloseSecurity, leak_log2: f64) -> CloseSecurity {
    CloseSecurity {
        delta: cs.delta - leak_log2 / cs.n as f64,
        ..cs
    }
}

/// Close-security of `k` positions drawn by a `(mu, theta, gamma)` averaging
/// sampler from a `(mu, delta)`-closely-secure source.
///
/// The exponent is chosen so that `2^(-delta' k) = gamma + 2^(-delta n)`.
pub fn sampler_close_security(
    cs: CloseSecurity,
    k: u64,
    theta: f64,
    gamma: f64,
) -> Result<CloseSecurity, BoundsError> {
    if !(theta >= 0.0 && theta <= cs.mu) {
        return Err(BoundsError::InvalidArgument(format!(
            "theta must lie in [0, mu={}] (got {theta})",
            cs.mu
        )));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(BoundsError::InvalidArgument(format!(
            "gamma must be in [0,1) (got {gamma})"
        )));
    }
    if k == 0 {
        return Err(BoundsError::InvalidArgument("k must be positive".into()));
    }
    let total = gamma + cs.guess_probability();
    if !(total < 1.0) {
        return Err(BoundsError::NoSecurityRemains { total });
    }
    Ok(CloseSecurity {
        mu: cs.mu - theta,
        delta: -total.log2() / k as f64,
        n: k,
    })
}

/// Exponents for the general-intruder analysis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralExponent {
    /// `(p_b - mu)^2 / (2 ln2 p_b)`, security given the prover's reception.
    pub delta1: f64,
    /// `delta1 - lambda`, after the intruder's digest.
    pub delta2: f64,
}

impl GeneralExponent {
    pub fn is_positive(&self) -> bool {
        self.delta2 > 0.0
    }
}

pub fn brm_exponent_general(
    p_b: f64,
    mu: f64,
    lambda: f64,
) -> Result<GeneralExponent, BoundsError> {
    if !(mu < p_b) {
        return Err(BoundsError::GeneralIntruderInfeasible {
            condition: "μ < p_b",
            mu,
            p_b,
            lambda,
        });
    }
    let delta1 = (p_b - mu).powi(2) / (2.0 * LN_2 * p_b);
    Ok(GeneralExponent {
        delta1,
        delta2: delta1 - lambda,
    })
}

/// `((1-λ)p_b - μ)^2 / (2 ln2 (1-λ) p_b)`.
pub fn brm_exponent_sampling(p_b: f64, mu: f64, lambda: f64) -> Result<f64, BoundsError> {
    let q = (1.0 - lambda) * p_b;
    if !(mu < q) {
        return Err(BoundsError::SamplingIntruderInfeasible {
            condition: "μ < (1−λ)·p_b",
            mu,
            p_b,
            lambda,
        });
    }
    Ok((q - mu).powi(2) / (2.0 * LN_2 * q))
}
