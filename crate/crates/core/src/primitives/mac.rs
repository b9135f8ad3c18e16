//! Polynomial-evaluation one-time MAC over GF(2^s).
//!
//! A message is split into s-bit blocks `m_1..m_L`, where `m_1` holds the
//! bit length and the rest carry the zero-padded message. The tag is
//! `b + sum m_i a^i` for a key `(a, b)`. Two distinct messages give distinct
//! polynomials of degree at most `L` with no constant term, so a forger
//! succeeds with probability at most `L / 2^s`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;

/// Supported tag sizes.
pub const FIELD_SIZES: [u32; 4] = [8, 16, 32, 64];

/// Default tag size for protocol runs.
pub const DEFAULT_MAC_BITS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MacError {
    #[error("unsupported field size {0}; expected one of 8, 16, 32, 64")]
    UnsupportedField(u32),
    #[error("key element {0:#x} does not fit in {1} bits")]
    KeyOutOfRange(u64, u32),
    #[error("message of {len} bits is too long for a {bits}-bit length block")]
    MessageTooLong { len: usize, bits: u32 },
    #[error("claimed distance {0} m cannot be encoded")]
    BadDistance(f64),
}

/// Low bits of the reduction polynomial `x^s + ...`.
fn reduction(bits: u32) -> Result<u64, MacError> {
    match bits {
        8 => Ok(0x1B),
        16 => Ok(0x2B),
        32 => Ok(0x8D),
        64 => Ok(0x1B),
        other => Err(MacError::UnsupportedField(other)),
    }
}

fn mask(bits: u32) -> u64 {
    if bits == 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Multiplication in GF(2^bits).
pub fn gf_mul(mut a: u64, mut b: u64, bits: u32) -> u64 {
    let poly = reduction(bits).expect("supported field");
    let top = 1u64 << (bits - 1);
    let m = mask(bits);
    let mut r = 0u64;
    while b != 0 {
        if b & 1 == 1 {
            r ^= a;
        }
        b >>= 1;
        let carry = a & top != 0;
        a = (a << 1) & m;
        if carry {
            a ^= poly;
        }
    }
    r
}

/// One-time key `(a, b)` for an `s`-bit tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MacKey {
    field_bits: u32,
    a: u64,
    b: u64,
}

impl MacKey {
    pub fn new(field_bits: u32, a: u64, b: u64) -> Result<Self, MacError> {
        reduction(field_bits)?;
        for v in [a, b] {
            if v & !mask(field_bits) != 0 {
                return Err(MacError::KeyOutOfRange(v, field_bits));
            }
        }
        Ok(MacKey { field_bits, a, b })
    }

    pub fn random<R: Rng + ?Sized>(field_bits: u32, rng: &mut R) -> Result<Self, MacError> {
        reduction(field_bits)?;
        let m = mask(field_bits);
        Ok(MacKey {
            field_bits,
            a: rng.random::<u64>() & m,
            b: rng.random::<u64>() & m,
        })
    }

    pub fn field_bits(&self) -> u32 {
        self.field_bits
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tag {
    pub bits: u32,
    pub value: u64,
}

impl Tag {
    pub fn random<R: Rng + ?Sized>(bits: u32, rng: &mut R) -> Self {
        Tag {
            bits,
            value: rng.random::<u64>() & mask(bits),
        }
    }

    pub fn to_bits(&self) -> Bits {
        let mut b = Bits::default();
        b.extend_u64(self.value, self.bits);
        b
    }
}

/// Number of field blocks `L` (length block included) for a message.
pub fn block_count(message_len: usize, field_bits: u32) -> usize {
    1 + message_len.div_ceil(field_bits as usize)
}

/// Forgery bound `L / 2^s`.
pub fn forgery_bound(message_len: usize, field_bits: u32) -> f64 {
    block_count(message_len, field_bits) as f64 / 2f64.powi(field_bits as i32)
}

fn blocks(message: &Bits, field_bits: u32) -> Result<Vec<u64>, MacError> {
    let s = field_bits as usize;
    if field_bits < 64 && (message.len() as u64) >> field_bits != 0 {
        return Err(MacError::MessageTooLong {
            len: message.len(),
            bits: field_bits,
        });
    }
    let mut out = Vec::with_capacity(block_count(message.len(), field_bits));
    out.push(message.len() as u64);
    for chunk in message.as_slice().chunks(s) {
        let mut v = 0u64;
        for i in 0..s {
            v = (v << 1) | chunk.get(i).copied().unwrap_or(false) as u64;
        }
        out.push(v);
    }
    Ok(out)
}

/// Tag for `message` under `key`.
pub fn mac_sign(key: &MacKey, message: &Bits) -> Result<Tag, MacError> {
    let s = key.field_bits;
    let mut acc = 0u64;
    for m in blocks(message, s)?.into_iter().rev() {
        acc = gf_mul(acc ^ m, key.a, s);
    }
    Ok(Tag {
        bits: s,
        value: acc ^ key.b,
    })
}

/// True iff `tag` equals the tag of `message`.
pub fn mac_verify(key: &MacKey, message: &Bits, tag: &Tag) -> bool {
    if tag.bits != key.field_bits {
        return false;
    }
    matches!(mac_sign(key, message), Ok(t) if t.value == tag.value)
}

/// MAC input for a response and a claimed distance: the response bits
/// followed by the distance as unsigned 48.16 fixed-point meters.
pub fn encode_claim(response: &Bits, d_c: f64) -> Result<Bits, MacError> {
    let fixed = d_c * 65536.0;
    if !(fixed >= 0.0 && fixed < 2f64.powi(64)) {
        return Err(MacError::BadDistance(d_c));
    }
    let mut out = response.clone();
    out.extend_u64(fixed.round() as u64, 64);
    Ok(out)
}
