//! Plain bit strings.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// A string of bits, one `bool` per position.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn new(bits: Vec<bool>) -> Self {
        Bits(bits)
    }

    pub fn zeros(len: usize) -> Self {
        Bits(vec![false; len])
    }

    /// Uniformly random bit string of the given length.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut out = Vec::with_capacity(len);
        while out.len() < len {
            let word: u64 = rng.random();
            let take = (len - out.len()).min(64);
            out.extend((0..take).map(|i| (word >> i) & 1 == 1));
        }
        Bits(out)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Hamming distance; `None` when the lengths differ.
    pub fn hamming(&self, other: &Bits) -> Option<usize> {
        if self.len() != other.len() {
            return None;
        }
        Some(
            self.iter()
                .zip(other.iter())
                .filter(|(a, b)| a != b)
                .count(),
        )
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn extend_u64(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.0.push((value >> i) & 1 == 1);
        }
    }

    pub fn extend_from(&mut self, other: &Bits) {
        self.0.extend_from_slice(&other.0);
    }

    /// Packs bits MSB-first into bytes, zero-padding the last byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)))
            })
            .collect()
    }

    /// Lowercase hex of [`Bits::to_bytes`].
    pub fn to_hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl From<Vec<bool>> for Bits {
    fn from(v: Vec<bool>) -> Self {
        Bits(v)
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Bits(iter.into_iter().collect())
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseBitsError(pub char);

impl fmt::Display for ParseBitsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid bit character {:?}", self.0)
    }
}

impl std::error::Error for ParseBitsError {}

impl FromStr for Bits {
    type Err = ParseBitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(ParseBitsError(other)),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_and_display() {
        let b: Bits = "1011".parse().unwrap();
        assert_eq!(b.to_string(), "1011");
        assert!("10x".parse::<Bits>().is_err());
    }

    #[test]
    fn hex_packs_msb_first() {
        let b: Bits = "101".parse().unwrap();
        assert_eq!(b.to_hex(), "a0");
        let b: Bits = "111100001".parse().unwrap();
        assert_eq!(b.to_hex(), "f080");
    }

    #[test]
    fn hamming_distance() {
        let a: Bits = "1100".parse().unwrap();
        let b: Bits = "1010".parse().unwrap();
        assert_eq!(a.hamming(&b), Some(2));
        assert_eq!(a.hamming(&"1".parse().unwrap()), None);
    }

    #[test]
    fn random_has_requested_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for len in [0, 1, 63, 64, 65, 1000] {
            assert_eq!(Bits::random(len, &mut rng).len(), len);
        }
    }

    #[test]
    fn extend_u64_width() {
        let mut b = Bits::default();
        b.extend_u64(0b101, 4);
        assert_eq!(b.to_string(), "0101");
    }
}
