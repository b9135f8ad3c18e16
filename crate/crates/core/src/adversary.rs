//! Attacks against the three protocols.
//!
//! Every attack returns an ordinary [`Transcript`], so the verdict is decided
//! by the same verifier code as an honest run. Source access under `Pi3`
//! always goes through [`BrmRound`], so a strategy that reads too much fails
//! with [`ProtocolError::RetrievalCap`] instead of silently succeeding.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::channel::{bpsk_demodulate, propagate, AnalogSignal, ChannelParams};
use crate::primitives::mac::Tag;
use crate::primitives::sampler::{sample_indices, IndexSet, SamplerKey};
use crate::protocol::{
    challenge_transcript, issue_challenge, prover_tag, run, BrmRound, Claim, Party, PartyPlacement,
    ProtocolConfig, ProtocolError, ProtocolKind, Response, SessionKeys, Transcript,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttackError {
    #[error("{attack} does not apply to {protocol}")]
    NotApplicable {
        attack: &'static str,
        protocol: ProtocolKind,
    },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

impl From<crate::channel::ChannelError> for AttackError {
    fn from(e: crate::channel::ChannelError) -> Self {
        AttackError::Protocol(e.into())
    }
}

impl AttackError {
    /// True when the attack was stopped by the bounded-retrieval audit.
    pub fn is_retrieval_blocked(&self) -> bool {
        matches!(
            self,
            AttackError::Protocol(ProtocolError::RetrievalCap { .. })
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MfaStrategy {
    /// Forward the honest response and tag unchanged.
    Replay,
    /// Forward the honest response with a fresh random tag.
    RandomTag,
    /// Answer with the intruder's own reception and a random tag.
    BestGuess,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexChoice {
    /// The first `floor(lambda n)` positions.
    First,
    /// A uniform set drawn independently of the sampler key.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneralStrategy {
    /// Exact source bits at random positions.
    Sampling,
    /// XOR of each block of a fixed partition.
    ParitySketch,
    /// Majority of each block of a fixed partition.
    BlockMajority,
}

/// Information an impersonator holds beyond the public transcript.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakedView {
    /// Knows the `Pi3` sampler key (never the MAC key).
    pub sampler_key: bool,
}

fn claim(d_c: f64, ch: &ChannelParams) -> Result<Claim, AttackError> {
    Ok(Claim::new(d_c, ch)?)
}

fn random_tag<R: Rng + ?Sized>(cfg: &ProtocolConfig, rng: &mut R) -> Option<Tag> {
    cfg.uses_mac().then(|| Tag::random(cfg.mac_bits, rng))
}

/// Reception of `x` by a party at `d`, or the exact bits when `d` is `None`.
fn listen<R: Rng + ?Sized>(
    x: &AnalogSignal,
    exact: &Bits,
    d: Option<f64>,
    ch: &ChannelParams,
    rng: &mut R,
) -> Result<Bits, AttackError> {
    match d {
        None => Ok(exact.clone()),
        Some(d) => Ok(bpsk_demodulate(&propagate(x, d, ch, rng)?)?),
    }
}

/// Distance fraud: a prover at `d_r` claims `d_c` and echoes what it hears.
pub fn attack_dfa<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    d_c: f64,
    d_r: f64,
    ch: &ChannelParams,
    rng: &mut R,
    keys: &SessionKeys,
) -> Result<Transcript, AttackError> {
    Ok(run(
        cfg,
        &claim(d_c, ch)?,
        &PartyPlacement::new(d_r),
        ch,
        rng,
        keys,
    )?)
}

/// Mafia fraud: an honest prover at `honest_d_r` claims its true distance and
/// a keyless intruder rewrites the claim to `forged_d_c`.
#[allow(clippy::too_many_arguments)]
pub fn attack_mfa<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    honest_d_r: f64,
    forged_d_c: f64,
    intruder_d: Option<f64>,
    ch: &ChannelParams,
    rng: &mut R,
    keys: &SessionKeys,
    strategy: MfaStrategy,
) -> Result<Transcript, AttackError> {
    let forged = claim(forged_d_c, ch)?;
    match cfg.protocol {
        ProtocolKind::Pi1 | ProtocolKind::Pi2 => {
            cfg.validate(ch).map_err(AttackError::from)?;
            let c = issue_challenge(cfg, &forged, ch, rng)?;
            let (bits, tag, received) = match strategy {
                MfaStrategy::Replay | MfaStrategy::RandomTag => {
                    let y = propagate(&c.signal, honest_d_r, ch, rng)?;
                    let m_hat = bpsk_demodulate(&y)?;
                    let tag = if strategy == MfaStrategy::Replay {
                        prover_tag(cfg, keys, &m_hat, honest_d_r)?
                    } else {
                        random_tag(cfg, rng)
                    };
                    (m_hat, tag, Some(y))
                }
                MfaStrategy::BestGuess => {
                    let bits = listen(&c.signal, &c.bits, intruder_d, ch, rng)?;
                    (bits, random_tag(cfg, rng), None)
                }
            };
            Ok(challenge_transcript(
                cfg,
                keys,
                forged,
                honest_d_r,
                c,
                received,
                Response { bits, tag },
            )?)
        }
        ProtocolKind::Pi3 => {
            let mut round = BrmRound::start(cfg, &forged, keys, ch, rng)?;
            let (bits, tag, received) = match strategy {
                MfaStrategy::Replay | MfaStrategy::RandomTag => {
                    let idx = round.indices.clone();
                    let y = round.read_samples(Party::Prover, &idx, honest_d_r, ch, rng)?;
                    let m_hat = bpsk_demodulate(&y)?;
                    let tag = if strategy == MfaStrategy::Replay {
                        prover_tag(cfg, keys, &m_hat, honest_d_r)?
                    } else {
                        random_tag(cfg, rng)
                    };
                    (m_hat, tag, Some(y))
                }
                // Without the sampler key the positions are unknown.
                MfaStrategy::BestGuess => (
                    Bits::random(cfg.k as usize, rng),
                    random_tag(cfg, rng),
                    None,
                ),
            };
            Ok(round.finish(
                cfg,
                keys,
                forged,
                honest_d_r,
                received,
                Response { bits, tag },
            )?)
        }
    }
}

/// Impersonation: a keyless adversary at `d_adv` runs the protocol on its own
/// behalf with claim `d_c`.
pub fn attack_impersonation<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    d_c: f64,
    d_adv: f64,
    ch: &ChannelParams,
    rng: &mut R,
    keys: &SessionKeys,
    leaked: LeakedView,
) -> Result<Transcript, AttackError> {
    let cl = claim(d_c, ch)?;
    match cfg.protocol {
        ProtocolKind::Pi1 | ProtocolKind::Pi2 => {
            cfg.validate(ch).map_err(AttackError::from)?;
            let c = issue_challenge(cfg, &cl, ch, rng)?;
            let y = propagate(&c.signal, d_adv, ch, rng)?;
            let bits = bpsk_demodulate(&y)?;
            let tag = random_tag(cfg, rng);
            Ok(challenge_transcript(
                cfg,
                keys,
                cl,
                d_adv,
                c,
                Some(y),
                Response { bits, tag },
            )?)
        }
        ProtocolKind::Pi3 => {
            let mut round = BrmRound::start(cfg, &cl, keys, ch, rng)?;
            let idx = if leaked.sampler_key {
                round.indices.clone()
            } else {
                IndexSet::prefix(round.n(), cfg.k).expect("k <= n")
            };
            let y = round.read_samples(Party::Intruder, &idx, d_adv, ch, rng)?;
            let bits = bpsk_demodulate(&y)?;
            let tag = random_tag(cfg, rng);
            Ok(round.finish(cfg, keys, cl, d_adv, Some(y), Response { bits, tag })?)
        }
    }
}

/// Terrorist fraud by relay: an intruder next to the verifier forwards the
/// whole challenge to a colluding prover at `d_r`, who answers with its keys.
/// Under `Pi3` the intruder would have to retrieve the whole source, which the
/// retrieval audit refuses.
pub fn attack_tfa_relay<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    d_c: f64,
    d_r: f64,
    intruder_d: Option<f64>,
    ch: &ChannelParams,
    rng: &mut R,
    keys: &SessionKeys,
) -> Result<Transcript, AttackError> {
    let cl = claim(d_c, ch)?;
    match cfg.protocol {
        ProtocolKind::Pi1 | ProtocolKind::Pi2 => {
            cfg.validate(ch).map_err(AttackError::from)?;
            let c = issue_challenge(cfg, &cl, ch, rng)?;
            let bits = listen(&c.signal, &c.bits, intruder_d, ch, rng)?;
            let tag = prover_tag(cfg, keys, &bits, d_c)?;
            Ok(challenge_transcript(
                cfg,
                keys,
                cl,
                d_r,
                c,
                None,
                Response { bits, tag },
            )?)
        }
        ProtocolKind::Pi3 => {
            let mut round = BrmRound::start(cfg, &cl, keys, ch, rng)?;
            let everything = IndexSet::prefix(round.n(), round.n()).expect("n <= n");
            round.read_exact(Party::Intruder, &everything)?;
            unreachable!("a full read never fits under a cap below n")
        }
    }
}

/// Intruder's retrieval for the sampling strategies.
fn intruder_positions<R: Rng + ?Sized>(
    round: &BrmRound,
    choice: IndexChoice,
    rng: &mut R,
) -> Result<IndexSet, AttackError> {
    let (n, cap) = (round.n(), round.cap());
    Ok(match choice {
        IndexChoice::First => IndexSet::prefix(n, cap).expect("cap <= n"),
        IndexChoice::Random => {
            sample_indices(&SamplerKey::random(rng), n, cap).map_err(ProtocolError::from)?
        }
    })
}

fn expect_pi3(cfg: &ProtocolConfig, attack: &'static str) -> Result<(), AttackError> {
    if cfg.protocol == ProtocolKind::Pi3 {
        Ok(())
    } else {
        Err(AttackError::NotApplicable {
            attack,
            protocol: cfg.protocol,
        })
    }
}

/// Terrorist fraud against `Pi3` with a sampling intruder: the intruder
/// stores source bits at positions chosen without the sampler key, and the
/// prover at `d_r` uses them wherever they cover a sampled position.
#[allow(clippy::too_many_arguments)]
pub fn attack_tfa_sampling<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    d_c: f64,
    d_r: f64,
    intruder_d: Option<f64>,
    ch: &ChannelParams,
    rng: &mut R,
    keys: &SessionKeys,
    choice: IndexChoice,
) -> Result<Transcript, AttackError> {
    expect_pi3(cfg, "tfa-sampling")?;
    let cl = claim(d_c, ch)?;
    let mut round = BrmRound::start(cfg, &cl, keys, ch, rng)?;
    let stored = intruder_positions(&round, choice, rng)?;
    let stored_bits = match intruder_d {
        None => round.read_exact(Party::Intruder, &stored)?,
        Some(d) => {
            let y = round.read_samples(Party::Intruder, &stored, d, ch, rng)?;
            bpsk_demodulate(&y)?
        }
    };
    let known: HashMap<u64, bool> = stored.iter().zip(stored_bits.iter()).collect();
    let idx = round.indices.clone();
    let y = round.read_samples(Party::Prover, &idx, d_r, ch, rng)?;
    let own = bpsk_demodulate(&y)?;
    let bits: Bits = idx
        .iter()
        .zip(own.iter())
        .map(|(i, b)| known.get(&i).copied().unwrap_or(b))
        .collect();
    let tag = prover_tag(cfg, keys, &bits, d_c)?;
    Ok(round.finish(cfg, keys, cl, d_r, Some(y), Response { bits, tag })?)
}

/// Block digest over a fixed partition of the source into `ceil(n / w)`
/// blocks of width `w`, chosen so the digest fits under the cap.
#[derive(Clone, Copy, Debug)]
struct BlockDigest {
    width: u64,
    n: u64,
    majority: bool,
}

impl BlockDigest {
    fn new(n: u64, cap: u64, majority: bool) -> Self {
        BlockDigest {
            width: n.div_ceil(cap.max(1)),
            n,
            majority,
        }
    }

    fn blocks(&self) -> u64 {
        self.n.div_ceil(self.width)
    }

    fn block_range(&self, b: u64) -> std::ops::Range<u64> {
        b * self.width..((b + 1) * self.width).min(self.n)
    }

    /// Digest bit for a block of size `size` holding `ones` ones.
    fn value(&self, ones: usize, size: usize) -> bool {
        if self.majority {
            2 * ones > size
        } else {
            ones % 2 == 1
        }
    }

    fn compute(&self, o: &Bits) -> Bits {
        (0..self.blocks())
            .map(|b| {
                let r = self.block_range(b);
                let size = (r.end - r.start) as usize;
                let ones = r.filter(|&i| o.get(i as usize) == Some(true)).count();
                self.value(ones, size)
            })
            .collect()
    }
}

/// Per-bit maximum-likelihood decode of sampled bits given a block digest and
/// the prover's own soft readings. Unread positions are uniform. Ties go to
/// the demodulated bit.
fn decode_with_digest(
    digest: &BlockDigest,
    digest_bits: &Bits,
    idx: &IndexSet,
    y: &AnalogSignal,
    llr_scale: f64,
) -> Bits {
    let own = bpsk_demodulate(y).expect("finite samples");
    let llr: HashMap<u64, f64> = idx.iter().zip(y.iter().map(|&v| llr_scale * v)).collect();
    let p_one = |j: u64| llr.get(&j).map_or(0.5, |&l| 1.0 / (1.0 + (-l).exp()));
    idx.iter()
        .zip(own.iter())
        .map(|(i, demod)| {
            let b = i / digest.width;
            let range = digest.block_range(b);
            let size = (range.end - range.start) as usize;
            // Distribution of the number of ones among the other positions.
            let mut dist = vec![1.0f64];
            for j in range.filter(|&j| j != i) {
                let p = p_one(j);
                let mut next = vec![0.0; dist.len() + 1];
                for (c, &q) in dist.iter().enumerate() {
                    next[c] += q * (1.0 - p);
                    next[c + 1] += q * p;
                }
                dist = next;
            }
            let g = digest_bits.get(b as usize).expect("digest covers block");
            let likelihood = |bit: usize| -> f64 {
                dist.iter()
                    .enumerate()
                    .filter(|&(c, _)| digest.value(c + bit, size) == g)
                    .map(|(_, &q)| q)
                    .sum()
            };
            let (l1, l0) = (likelihood(1), likelihood(0));
            let own_llr = llr[&i];
            let total = if l1 == 0.0 && l0 == 0.0 {
                own_llr
            } else {
                own_llr + (l1 / l0).ln()
            };
            if total > 0.0 {
                true
            } else if total < 0.0 {
                false
            } else {
                demod
            }
        })
        .collect()
}

/// Terrorist fraud against `Pi3` with a general intruder drawn from a small
/// strategy library. The intruder sees the whole source error-free but keeps
/// at most `floor(lambda n)` bits.
pub fn attack_tfa_general<R: Rng + ?Sized>(
    cfg: &ProtocolConfig,
    d_c: f64,
    d_r: f64,
    ch: &ChannelParams,
    rng: &mut R,
    keys: &SessionKeys,
    strategy: GeneralStrategy,
) -> Result<Transcript, AttackError> {
    expect_pi3(cfg, "tfa-general")?;
    let majority = match strategy {
        GeneralStrategy::Sampling => {
            return attack_tfa_sampling(cfg, d_c, d_r, None, ch, rng, keys, IndexChoice::Random)
        }
        GeneralStrategy::ParitySketch => false,
        GeneralStrategy::BlockMajority => true,
    };
    let cl = claim(d_c, ch)?;
    let mut round = BrmRound::start(cfg, &cl, keys, ch, rng)?;
    let digest = BlockDigest::new(round.n(), round.cap(), majority);
    let digest_bits = round.digest(Party::Intruder, digest.blocks(), |o| digest.compute(o))?;
    let idx = round.indices.clone();
    let y = round.read_samples(Party::Prover, &idx, d_r, ch, rng)?;
    let bits = if ch.noiseless {
        bpsk_demodulate(&y)?
    } else {
        let amp = round.power.sqrt() * ch.amplitude_gain(d_r);
        decode_with_digest(
            &digest,
            &digest_bits,
            &idx,
            &y,
            2.0 * amp / ch.noise_variance(),
        )
    };
    let tag = prover_tag(cfg, keys, &bits, d_c)?;
    Ok(round.finish(cfg, keys, cl, d_r, Some(y), Response { bits, tag })?)
}
