//! Bit strings, the universal payload of the lab.
//!
//! Keys, basis choices, ciphertexts, tags and transcript payloads are all
//! [`BitString`]s. The representation is one `bool` per bit; helpers convert
//! to and from packed little-endian bytes and 64-bit words where speed or a
//! wire format needs them (bit `i` of a word or byte is bit `i & 7` counted
//! from the least significant end).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Errors from bitwise operations on mismatched operands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BitsError {
    /// Binary operation over operands of different lengths.
    LengthMismatch { left: usize, right: usize },
    /// A string passed to [`BitString::from_str01`] held a non-`0`/`1` byte.
    BadDigit { position: usize },
}

impl fmt::Display for BitsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BitsError::LengthMismatch { left, right } => {
                write!(f, "bit string length mismatch: {left} vs {right}")
            }
            BitsError::BadDigit { position } => {
                write!(f, "expected '0' or '1' at position {position}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for BitsError {}

/// A finite string of bits.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    /// The empty bit string.
    pub fn new() -> Self {
        BitString { bits: Vec::new() }
    }

    /// All-zero string of length `len`.
    pub fn zeros(len: usize) -> Self {
        BitString { bits: vec![false; len] }
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    /// Parse from a string of `'0'` and `'1'` characters.
    pub fn from_str01(s: &str) -> Result<Self, BitsError> {
        let mut bits = Vec::with_capacity(s.len());
        for (position, b) in s.bytes().enumerate() {
            match b {
                b'0' => bits.push(false),
                b'1' => bits.push(true),
                _ => return Err(BitsError::BadDigit { position }),
            }
        }
        Ok(BitString { bits })
    }

    /// The low `len` bits of `value`, least significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_u64 takes at most 64 bits");
        BitString {
            bits: (0..len).map(|i| (value >> i) & 1 == 1).collect(),
        }
    }

    /// Reassemble a value encoded by [`BitString::from_u64`]. Panics over 64 bits.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len() <= 64, "to_u64 takes at most 64 bits");
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, index: usize) -> bool {
        self.bits[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }

    pub fn flip(&mut self, index: usize) {
        self.bits[index] = !self.bits[index];
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn extend(&mut self, other: &BitString) {
        self.bits.extend_from_slice(&other.bits);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    /// Number of set bits.
    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Bitwise XOR; errors unless lengths match.
    pub fn xor(&self, other: &BitString) -> Result<BitString, BitsError> {
        if self.len() != other.len() {
            return Err(BitsError::LengthMismatch { left: self.len(), right: other.len() });
        }
        Ok(BitString {
            bits: self
                .bits
                .iter()
                .zip(other.bits.iter())
                .map(|(&a, &b)| a ^ b)
                .collect(),
        })
    }

    /// Number of positions where the strings differ; errors unless lengths match.
    pub fn hamming(&self, other: &BitString) -> Result<usize, BitsError> {
        if self.len() != other.len() {
            return Err(BitsError::LengthMismatch { left: self.len(), right: other.len() });
        }
        Ok(self
            .bits
            .iter()
            .zip(other.bits.iter())
            .filter(|(a, b)| a != b)
            .count())
    }

    /// Copy of the sub-range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> BitString {
        BitString { bits: self.bits[start..end].to_vec() }
    }

    /// Split into (prefix of `mid` bits, rest).
    pub fn split_at(&self, mid: usize) -> (BitString, BitString) {
        (self.slice(0, mid), self.slice(mid, self.len()))
    }

    /// Keep the positions where `mask` is set, in order; errors unless lengths match.
    pub fn select(&self, mask: &BitString) -> Result<BitString, BitsError> {
        if self.len() != mask.len() {
            return Err(BitsError::LengthMismatch { left: self.len(), right: mask.len() });
        }
        Ok(BitString {
            bits: self
                .bits
                .iter()
                .zip(mask.bits.iter())
                .filter(|(_, &m)| m)
                .map(|(&b, _)| b)
                .collect(),
        })
    }

    /// Pack into little-endian bytes: bit `i` lands in byte `i / 8`, position `i % 8`.
    pub fn to_bytes_lsb(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                out[i / 8] |= 1 << (i % 8);
            }
        }
        out
    }

    /// Inverse of [`BitString::to_bytes_lsb`]; `len` selects how many bits to take.
    pub fn from_bytes_lsb(bytes: &[u8], len: usize) -> Self {
        assert!(len <= bytes.len() * 8, "not enough bytes for {len} bits");
        BitString {
            bits: (0..len).map(|i| (bytes[i / 8] >> (i % 8)) & 1 == 1).collect(),
        }
    }

    /// Pack into 64-bit words, same bit order as [`BitString::to_bytes_lsb`].
    pub fn to_words_lsb(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.len().div_ceil(64)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                out[i / 64] |= 1 << (i % 64);
            }
        }
        out
    }

    /// Fraction of set bits, `0.0` for the empty string.
    pub fn ones_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.count_ones() as f64 / self.len() as f64
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    /// Abbreviates long strings so transcripts stay readable in test output.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len() <= 64 {
            write!(f, "BitString({self})")
        } else {
            let head: String = self.bits[..32].iter().map(|&b| if b { '1' } else { '0' }).collect();
            write!(f, "BitString({head}.. len={})", self.len())
        }
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        BitString { bits: iter.into_iter().collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_of_examples() {
        let a = BitString::from_str01("1010").unwrap();
        let b = BitString::from_str01("0110").unwrap();
        assert_eq!(a.xor(&b).unwrap(), BitString::from_str01("1100").unwrap());
    }

    #[test]
    fn xor_identity_and_mismatch() {
        let a = BitString::from_str01("1010").unwrap();
        let z = BitString::zeros(4);
        assert_eq!(a.xor(&z).unwrap(), a);
        let short = BitString::from_str01("101").unwrap();
        assert_eq!(
            a.xor(&short),
            Err(BitsError::LengthMismatch { left: 4, right: 3 })
        );
    }

    #[test]
    fn round_trips() {
        let a = BitString::from_str01("1011001110001").unwrap();
        assert_eq!(BitString::from_bytes_lsb(&a.to_bytes_lsb(), a.len()), a);
        let v = 0xDEAD_BEEFu64;
        assert_eq!(BitString::from_u64(v, 37).to_u64(), v & ((1 << 37) - 1));
    }

    #[test]
    fn select_picks_masked_positions() {
        let a = BitString::from_str01("10110").unwrap();
        let m = BitString::from_str01("11001").unwrap();
        assert_eq!(a.select(&m).unwrap(), BitString::from_str01("100").unwrap());
    }

    #[test]
    fn bad_digit_is_reported() {
        assert_eq!(
            BitString::from_str01("10x1"),
            Err(BitsError::BadDigit { position: 2 })
        );
    }
}
