//! The three verification protocols over the simulated channel.
//!
//! * `Pi1`: the verifier sends a random challenge at power `(d_c/d0)^alpha E0`
//!   and accepts iff the echoed bits are within Hamming distance `beta k`.
//! * `Pi2`: `Pi1` plus a one-time MAC over the response and the claim.
//! * `Pi3`: a bounded-retrieval source broadcasts `n` random bits; verifier
//!   and prover each read the `k` positions picked by a shared sampler key.
//!
//! The prover-to-verifier leg is an error-free bit pipe.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::channel::{
    bpsk_demodulate, bpsk_modulate, propagate, transmit_power_for_claim, AnalogSignal,
    ChannelError, ChannelParams,
};
use crate::optimizer::{OptimalBrmConfig, OptimalDfaConfig};
use crate::primitives::mac::{self, encode_claim, mac_sign, mac_verify, MacError, MacKey, Tag};
use crate::primitives::sampler::{sample_indices, IndexSet, SamplerError, SamplerKey};

/// Absolute slack on `beta * k` so that an exact boundary is not lost to
/// rounding.
pub const BOUNDARY_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Pi1,
    Pi2,
    Pi3,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Pi1 => "pi1",
            ProtocolKind::Pi2 => "pi2",
            ProtocolKind::Pi3 => "pi3",
        })
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pi1" => Ok(ProtocolKind::Pi1),
            "pi2" => Ok(ProtocolKind::Pi2),
            "pi3" => Ok(ProtocolKind::Pi3),
            other => Err(format!("unknown protocol {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Verifier,
    Prover,
    Intruder,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Verifier => "verifier",
            Party::Prover => "prover",
            Party::Intruder => "intruder",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("invalid protocol configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("{0} is required for this protocol but missing")]
    MissingKey(&'static str),
    #[error(
        "{party} tried to retrieve {requested} bits but the cap is {cap} (already used {used})"
    )]
    RetrievalCap {
        party: Party,
        requested: u64,
        used: u64,
        cap: u64,
    },
    #[error("operation needs protocol {expected}, got {got}")]
    WrongProtocol {
        expected: ProtocolKind,
        got: ProtocolKind,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Bounded-retrieval parameters for `Pi3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrmParams {
    pub lambda: f64,
    pub n: u64,
    pub theta: f64,
    pub gamma: f64,
}

impl BrmParams {
    /// Most bits any party may retrieve from the source, `floor(lambda n)`.
    pub fn retrieval_cap(&self) -> u64 {
        (self.lambda * self.n as f64 + 1e-9).floor() as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub protocol: ProtocolKind,
    /// Base power in watts.
    pub e0: f64,
    /// Challenge (or sampled) length.
    pub k: u64,
    pub beta: f64,
    /// Tag size `s`.
    pub mac_bits: u32,
    /// Whether `Pi3` carries a tag; ignored for `Pi1` and `Pi2`.
    pub mac_enabled: bool,
    pub brm: Option<BrmParams>,
}

impl ProtocolConfig {
    pub fn new(protocol: ProtocolKind, e0: f64, k: u64, beta: f64) -> Self {
        ProtocolConfig {
            protocol,
            e0,
            k,
            beta,
            mac_bits: mac::DEFAULT_MAC_BITS,
            mac_enabled: true,
            brm: None,
        }
    }

    /// `Pi3` with `k` set to the retrieval cap of `brm`.
    pub fn pi3(e0: f64, beta: f64, brm: BrmParams) -> Self {
        ProtocolConfig {
            brm: Some(brm),
            ..ProtocolConfig::new(ProtocolKind::Pi3, e0, brm.retrieval_cap(), beta)
        }
    }

    pub fn from_dfa(opt: &OptimalDfaConfig, protocol: ProtocolKind) -> Self {
        ProtocolConfig::new(protocol, opt.e0_star, opt.k_star, opt.beta_star)
    }

    pub fn from_brm(opt: &OptimalBrmConfig) -> Self {
        ProtocolConfig::pi3(
            opt.e0_star,
            opt.beta_star,
            BrmParams {
                lambda: opt.lambda,
                n: opt.n_star,
                theta: opt.theta,
                gamma: opt.gamma,
            },
        )
    }

    pub fn uses_mac(&self) -> bool {
        match self.protocol {
            ProtocolKind::Pi1 => false,
            ProtocolKind::Pi2 => true,
            ProtocolKind::Pi3 => self.mac_enabled,
        }
    }

    /// Reports every problem at once.
    pub fn validate(&self, ch: &ChannelParams) -> Result<(), ProtocolError> {
        let mut errs = Vec::new();
        if !(self.e0 > 0.0 && self.e0 <= ch.e_max) {
            errs.push(format!(
                "e0 must lie in (0, {}] W (got {})",
                ch.e_max, self.e0
            ));
        }
        if self.k == 0 {
            errs.push("k must be at least 1".into());
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            errs.push(format!("beta must lie in (0, 1) (got {})", self.beta));
        }
        if self.uses_mac() && !mac::FIELD_SIZES.contains(&self.mac_bits) {
            errs.push(format!("unsupported mac_bits {}", self.mac_bits));
        }
        if self.protocol == ProtocolKind::Pi3 {
            match self.brm {
                None => errs.push("pi3 needs bounded-retrieval parameters".into()),
                Some(b) => {
                    if !(b.lambda > 0.0 && b.lambda <= 1.0) {
                        errs.push(format!("lambda must lie in (0, 1] (got {})", b.lambda));
                    }
                    if b.n == 0 {
                        errs.push("source length n must be at least 1".into());
                    }
                    if b.retrieval_cap() != self.k {
                        errs.push(format!(
                            "k = {} does not match the retrieval cap floor(lambda n) = {}",
                            self.k,
                            b.retrieval_cap()
                        ));
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ProtocolError::Config(errs))
        }
    }

    /// Forgery probability `L / 2^s` of the tag over a `k`-bit response.
    pub fn mac_forgery_bound(&self) -> f64 {
        mac::forgery_bound(self.k as usize + 64, self.mac_bits)
    }

    /// Requires the tag forgery probability not to exceed `eps_fa`.
    pub fn check_mac_security(&self, eps_fa: f64) -> Result<(), ProtocolError> {
        if self.uses_mac() && self.mac_forgery_bound() > eps_fa {
            return Err(ProtocolError::Config(vec![format!(
                "MAC forgery bound {} exceeds eps_fa {}",
                self.mac_forgery_bound(),
                eps_fa
            )]));
        }
        Ok(())
    }

    fn expect(&self, expected: ProtocolKind) -> Result<(), ProtocolError> {
        if self.protocol == expected {
            Ok(())
        } else {
            Err(ProtocolError::WrongProtocol {
                expected,
                got: self.protocol,
            })
        }
    }

    fn brm_params(&self) -> Result<BrmParams, ProtocolError> {
        self.brm.ok_or_else(|| {
            ProtocolError::Config(vec!["pi3 needs bounded-retrieval parameters".into()])
        })
    }
}

/// Distance claimed by the prover.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub d_c: f64,
}

impl Claim {
    pub fn new(d_c: f64, ch: &ChannelParams) -> Result<Self, ProtocolError> {
        if !(d_c > 0.0 && d_c <= ch.d0) {
            return Err(ChannelError::ClaimOutOfRange { d_c, d0: ch.d0 }.into());
        }
        Ok(Claim { d_c })
    }
}

/// True positions of the prover and, when present, the intruder.
/// `intruder_d = None` means the intruder receives without error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartyPlacement {
    pub d_r: f64,
    pub intruder_d: Option<f64>,
}

impl PartyPlacement {
    pub fn new(d_r: f64) -> Self {
        PartyPlacement {
            d_r,
            intruder_d: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Acc,
    Rej,
}

impl Verdict {
    pub fn accepted(self) -> bool {
        self == Verdict::Acc
    }
}

/// Fresh per-run keys.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionKeys {
    pub mac: Option<MacKey>,
    pub sampler: Option<SamplerKey>,
}

impl SessionKeys {
    /// Keys the configured protocol needs, drawn from `rng`.
    pub fn fresh<R: Rng + ?Sized>(
        cfg: &ProtocolConfig,
        rng: &mut R,
    ) -> Result<Self, ProtocolError> {
        let mac = if cfg.uses_mac() {
            Some(MacKey::random(cfg.mac_bits, rng)?)
        } else {
            None
        };
        let sampler = (cfg.protocol == ProtocolKind::Pi3).then(|| SamplerKey::random(rng));
        Ok(SessionKeys { mac, sampler })
    }

    fn mac_key(&self) -> Result<&MacKey, ProtocolError> {
        self.mac
            .as_ref()
            .ok_or(ProtocolError::MissingKey("MAC key"))
    }

    fn sampler_key(&self) -> Result<&SamplerKey, ProtocolError> {
        self.sampler
            .as_ref()
            .ok_or(ProtocolError::MissingKey("sampler key"))
    }
}

/// What the prover side sends back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub bits: Bits,
    pub tag: Option<Tag>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Judgement {
    pub hamming: usize,
    pub threshold_ok: bool,
    pub mac_ok: Option<bool>,
    pub verdict: Verdict,
}

/// Per-party retrieval counts for one `Pi3` run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalAudit {
    pub cap: u64,
    pub verifier: u64,
    pub prover: u64,
    pub intruder: u64,
}

impl RetrievalAudit {
    fn used(&self, party: Party) -> u64 {
        match party {
            Party::Verifier => self.verifier,
            Party::Prover => self.prover,
            Party::Intruder => self.intruder,
        }
    }

    /// Charges `bits` to `party`, refusing anything past the cap.
    pub fn charge(&mut self, party: Party, bits: u64) -> Result<(), ProtocolError> {
        let used = self.used(party);
        if used.saturating_add(bits) > self.cap {
            return Err(ProtocolError::RetrievalCap {
                party,
                requested: bits,
                used,
                cap: self.cap,
            });
        }
        match party {
            Party::Verifier => self.verifier += bits,
            Party::Prover => self.prover += bits,
            Party::Intruder => self.intruder += bits,
        }
        Ok(())
    }

    pub fn within_cap(&self) -> bool {
        [self.verifier, self.prover, self.intruder]
            .iter()
            .all(|&u| u <= self.cap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub protocol: ProtocolKind,
    pub claim: Claim,
    pub d_real: f64,
    /// Power the verifier (or source) transmitted at, in watts.
    pub tx_power: f64,
    /// `M`: the challenge, or the verifier's sampled source bits under `Pi3`.
    pub challenge: Bits,
    /// `X` for `Pi1`/`Pi2`; not kept for the `Pi3` source.
    pub transmitted: Option<AnalogSignal>,
    /// What the prover read: `Y`, or the sampled part of `Y_O`.
    pub received: Option<AnalogSignal>,
    pub response: Bits,
    pub tag: Option<Tag>,
    pub judgement: Judgement,
    pub source_len: Option<u64>,
    pub sampled: Option<IndexSet>,
    pub audit: Option<RetrievalAudit>,
}

impl Transcript {
    pub fn verdict(&self) -> Verdict {
        self.judgement.verdict
    }

    pub fn record(&self, seed: u64) -> TranscriptRecord {
        TranscriptRecord {
            claim_m: self.claim.d_c,
            d_real_m: self.d_real,
            challenge_hex: self.challenge.to_hex(),
            response_hex: self.response.to_hex(),
            hamming: self.judgement.hamming,
            verdict: self.judgement.verdict,
            seed,
        }
    }
}

/// Flat transcript summary with stable field names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub claim_m: f64,
    pub d_real_m: f64,
    pub challenge_hex: String,
    pub response_hex: String,
    pub hamming: usize,
    pub verdict: Verdict,
    pub seed: u64,
}

/// Accepts iff `d_H(m, m_hat) <= beta k`.
pub fn verify_response(
    m: &Bits,
    m_hat: &Bits,
    beta: f64,
    k: u64,
) -> Result<Verdict, ProtocolError> {
    if m.len() as u64 != k || m_hat.len() as u64 != k {
        return Err(ProtocolError::InvalidArgument(format!(
            "expected two {k}-bit strings, got {} and {}",
            m.len(),
            m_hat.len()
        )));
    }
    let d = m.hamming(m_hat).expect("equal lengths");
    Ok(if within_threshold(d, beta, k) {
        Verdict::Acc
    } else {
        Verdict::Rej
    })
}

fn within_threshold(d: usize, beta: f64, k: u64) -> bool {
    d as f64 <= beta * k as f64 + BOUNDARY_GUARD
}

/// Tag the prover attaches to `m_hat` for claim `d_c`, if the protocol uses one.
pub fn prover_tag(
    cfg: &ProtocolConfig,
    keys: &SessionKeys,
    m_hat: &Bits,
    d_c: f64,
) -> Result<Option<Tag>, ProtocolError> {
    if !cfg.uses_mac() {
        return Ok(None);
    }
    Ok(Some(mac_sign(keys.mac_key()?, &encode_claim(m_hat, d_c)?)?))
}

/// Verifier decision on `response` against its own `m` and claim.
pub fn judge(
    cfg: &ProtocolConfig,
    keys: &SessionKeys,
    claim: &Claim,
    m: &Bits,
    response: &Response,
) -> Result<Judgement, ProtocolError> {
    if m.len() != response.bits.len() {
        return Err(ProtocolError::InvalidArgument(format!(
            "response has {} bits, expected {}",
            response.bits.len(),
            m.len()
        )));
    }
    let hamming = m.hamming(&response.bits).expect("equal lengths");
    let threshold_ok = within_threshold(hamming, cfg.beta, m.len() as u64);
    let mac_ok = if cfg.uses_mac() {
        let key = keys.mac_key()?;
        let msg = encode_claim(&response.bits, claim.d_c)?;
        Some(response.tag.is_some_and(|t| mac_verify(key, &msg, &t)))
    } else {
        None
    };
    let verdict = if threshold_ok && mac_ok.unwrap_or(true) {
        Verdict::Acc
    } else {
        Verdict::Rej
    };
    Ok(Judgement {
        hamming,
        threshold_ok,
        mac_ok,
        verdict,
    })
}

/// Verifier's first move in `Pi1`/`Pi2`.
#[derive(Clone, Debug, PartialEq)]
pub struct Challenge {
    pub bits: Bits,
    pub power: f64,
    pub signal: AnalogSignal,
}

pub fn issue_challenge<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    claim: &Claim,
    ch: &ChannelParams,
    rng: &mut R,
) -> Result<Challenge, ProtocolError> {
    let power = transmit_power_for_claim(claim.d_c, cfg.e0, ch)?;
    let bits = Bits::random(cfg.k as usize, rng);
    let signal = bpsk_modulate(&bits, power)?;
    Ok(Challenge {
        bits,
        power,
        signal,
    })
}

/// Assembles a `Pi1`/`Pi2` transcript from its parts.
pub fn challenge_transcript(
    cfg: &ProtocolConfig,
    keys: &SessionKeys,
    claim: Claim,
    d_real: f64,
    challenge: Challenge,
    received: Option<AnalogSignal>,
    response: Response,
) -> Result<Transcript, ProtocolError> {
    let judgement = judge(cfg, keys, &claim, &challenge.bits, &response)?;
    Ok(Transcript {
        protocol: cfg.protocol,
        claim,
        d_real,
        tx_power: challenge.power,
        challenge: challenge.bits,
        transmitted: Some(challenge.signal),
        received,
        response: response.bits,
        tag: response.tag,
        judgement,
        source_len: None,
        sampled: None,
        audit: None,
    })
}

fn run_challenge_response<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    claim: &Claim,
    placement: &PartyPlacement,
    ch: &ChannelParams,
    rng: &mut R,
    keys: &SessionKeys,
) -> Result<Transcript, ProtocolError> {
    cfg.validate(ch)?;
    let challenge = issue_challenge(cfg, claim, ch, rng)?;
    let y = propagate(&challenge.signal, placement.d_r, ch, rng)?;
    let m_hat = bpsk_demodulate(&y)?;
    let tag = prover_tag(cfg, keys, &m_hat, claim.d_c)?;
    challenge_transcript(
        cfg,
        keys,
        *claim,
        placement.d_r,
        challenge,
        Some(y),
        Response { bits: m_hat, tag },
    )
}

/// Plain challenge-response.
pub fn run_pi1<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    claim: &Claim,
    placement: &PartyPlacement,
    ch: &ChannelParams,
    rng: &mut R,
) -> Result<Transcript, ProtocolError> {
    cfg.expect(ProtocolKind::Pi1)?;
    run_challenge_response(cfg, claim, placement, ch, rng, &SessionKeys::default())
}

/// Challenge-response with an authenticated reply.
pub fn run_pi2<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    claim: &Claim,
    placement: &PartyPlacement,
    ch: &ChannelParams,
    rng: &mut R,
    keys: &SessionKeys,
) -> Result<Transcript, ProtocolError> {
    cfg.expect(ProtocolKind::Pi2)?;
    run_challenge_response(cfg, claim, placement, ch, rng, keys)
}

/// `O` uniform on `n` bits and its modulation at power `e`.
pub fn brm_source_emit<R: Rng + ?Sized>(
    e: f64,
    n: u64,
    ch: &ChannelParams,
    rng: &mut R,
) -> Result<(Bits, AnalogSignal), ProtocolError> {
    if e > ch.e_max {
        return Err(ChannelError::PowerExceeded { e, e_max: ch.e_max }.into());
    }
    if n == 0 {
        return Err(ProtocolError::InvalidArgument(
            "source length must be positive".into(),
        ));
    }
    let o = Bits::random(n as usize, rng);
    let x = bpsk_modulate(&o, e)?;
    Ok((o, x))
}

/// State of one `Pi3` run after the source broadcast and the verifier's read.
///
/// All access to the source goes through this type so the retrieval audit
/// sees every read.
#[derive(Clone, Debug)]
pub struct BrmRound {
    source: Bits,
    signal: AnalogSignal,
    pub power: f64,
    pub indices: IndexSet,
    /// The verifier's sampled bits `M`.
    pub m: Bits,
    audit: RetrievalAudit,
}

impl BrmRound {
    /// Emits the source, derives the sampled positions and lets the verifier
    /// read its bits.
    pub fn start<R: Rng + ?Sized>(
        cfg: &ProtocolConfig,
        claim: &Claim,
        keys: &SessionKeys,
        ch: &ChannelParams,
        rng: &mut R,
    ) -> Result<Self, ProtocolError> {
        cfg.expect(ProtocolKind::Pi3)?;
        cfg.validate(ch)?;
        let brm = cfg.brm_params()?;
        let power = transmit_power_for_claim(claim.d_c, cfg.e0, ch)?;
        let (source, signal) = brm_source_emit(power, brm.n, ch, rng)?;
        let indices = sample_indices(keys.sampler_key()?, brm.n, cfg.k)?;
        let mut round = BrmRound {
            source,
            signal,
            power,
            indices,
            m: Bits::default(),
            audit: RetrievalAudit {
                cap: brm.retrieval_cap(),
                ..Default::default()
            },
        };
        let idx = round.indices.clone();
        round.m = round.read_exact(Party::Verifier, &idx)?;
        Ok(round)
    }

    pub fn n(&self) -> u64 {
        self.source.len() as u64
    }

    pub fn cap(&self) -> u64 {
        self.audit.cap
    }

    pub fn audit(&self) -> RetrievalAudit {
        self.audit
    }

    /// Error-free read of source bits at `indices`.
    pub fn read_exact(&mut self, party: Party, indices: &IndexSet) -> Result<Bits, ProtocolError> {
        self.check_range(indices)?;
        self.audit.charge(party, indices.len() as u64)?;
        Ok(indices
            .iter()
            .map(|i| self.source.get(i as usize).expect("in range"))
            .collect())
    }

    /// Noisy samples of `X_O` at `indices`, as received at distance `d`.
    pub fn read_samples<R: Rng + ?Sized>(
        &mut self,
        party: Party,
        indices: &IndexSet,
        d: f64,
        ch: &ChannelParams,
        rng: &mut R,
    ) -> Result<AnalogSignal, ProtocolError> {
        self.check_range(indices)?;
        self.audit.charge(party, indices.len() as u64)?;
        let picked = AnalogSignal::new(indices.iter().map(|i| self.signal[i as usize]).collect())?;
        Ok(propagate(&picked, d, ch, rng)?)
    }

    /// Lets `party` compute any function of the whole source, keeping only
    /// its output. The output length is charged against the cap; `f` is not
    /// run when `out_len` already exceeds it.
    pub fn digest(
        &mut self,
        party: Party,
        out_len: u64,
        f: impl FnOnce(&Bits) -> Bits,
    ) -> Result<Bits, ProtocolError> {
        self.audit.charge(party, out_len)?;
        let out = f(&self.source);
        if out.len() as u64 != out_len {
            return Err(ProtocolError::InvalidArgument(format!(
                "digest produced {} bits, declared {out_len}",
                out.len()
            )));
        }
        Ok(out)
    }

    fn check_range(&self, indices: &IndexSet) -> Result<(), ProtocolError> {
        if indices.n() != self.n() {
            return Err(ProtocolError::InvalidArgument(format!(
                "index set over {} positions, source has {}",
                indices.n(),
                self.n()
            )));
        }
        Ok(())
    }

    /// Judges `response` and assembles the transcript.
    pub fn finish(
        self,
        cfg: &ProtocolConfig,
        keys: &SessionKeys,
        claim: Claim,
        d_real: f64,
        received: Option<AnalogSignal>,
        response: Response,
    ) -> Result<Transcript, ProtocolError> {
        let judgement = judge(cfg, keys, &claim, &self.m, &response)?;
        debug_assert!(self.audit.within_cap());
        Ok(Transcript {
            protocol: cfg.protocol,
            claim,
            d_real,
            tx_power: self.power,
            challenge: self.m,
            transmitted: None,
            received,
            response: response.bits,
            tag: response.tag,
            judgement,
            source_len: Some(self.source.len() as u64),
            sampled: Some(self.indices),
            audit: Some(self.audit),
        })
    }
}

/// Bounded-retrieval protocol with an honest prover at `placement.d_r`.
pub fn run_pi3<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    claim: &Claim,
    placement: &PartyPlacement,
    ch: &ChannelParams,
    rng: &mut R,
    keys: &SessionKeys,
) -> Result<Transcript, ProtocolError> {
    let mut round = BrmRound::start(cfg, claim, keys, ch, rng)?;
    let prover_idx = sample_indices(keys.sampler_key()?, round.n(), cfg.k)?;
    let y = round.read_samples(Party::Prover, &prover_idx, placement.d_r, ch, rng)?;
    let m_hat = bpsk_demodulate(&y)?;
    let tag = prover_tag(cfg, keys, &m_hat, claim.d_c)?;
    round.finish(
        cfg,
        keys,
        *claim,
        placement.d_r,
        Some(y),
        Response { bits: m_hat, tag },
    )
}

/// Runs whichever protocol `cfg` names with an honest prover.
pub fn run<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    claim: &Claim,
    placement: &PartyPlacement,
    ch: &ChannelParams,
    rng: &mut R,
    keys: &SessionKeys,
) -> Result<Transcript, ProtocolError> {
    match cfg.protocol {
        ProtocolKind::Pi1 => run_pi1(cfg, claim, placement, ch, rng),
        ProtocolKind::Pi2 => run_pi2(cfg, claim, placement, ch, rng, keys),
        ProtocolKind::Pi3 => run_pi3(cfg, claim, placement, ch, rng, keys),
    }
}
