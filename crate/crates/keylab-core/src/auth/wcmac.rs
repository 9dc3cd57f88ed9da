//! Wegman-Carter one-time MAC.
//!
//! The tag of a message is a polynomial hash over GF(2^k) masked with a
//! single-use pad:
//!
//! * split the message into k-bit blocks m_1 .. m_d (least significant bit
//!   first, last block zero-padded); the empty message has no blocks
//! * hash H(m) = m_1 * a + m_2 * a^2 + ... + m_d * a^d, where `a` is the
//!   secret evaluation point (kept nonzero so a single-bit change always
//!   moves the hash)
//! * tag = H(m) XOR pad\[i\], where `i` is the message sequence number
//!
//! For two equal-length messages the collision probability is at most
//! d / 2^k over the choice of `a`. Tagging and verifying both consume the
//! next pad index on the caller's copy of the key, so the state machine never
//! lets one pad cover two messages; running out of pads is the
//! authentication-key-exhaustion error.

use super::gf2k::Gf2k;
use super::AuthError;
use crate::bits::BitString;
use crate::rng::SeededRng;
use alloc::vec::Vec;

/// Shared MAC key: evaluation point plus a pool of one-time pads.
///
/// Each party holds its own copy and consumes indices in message order, so
/// the copies stay aligned as long as both see the same message sequence.
#[derive(Debug, Clone)]
pub struct WcMacKey {
    field: Gf2k,
    poly_key: u64,
    pads: Vec<u64>,
    next_index: usize,
}

impl WcMacKey {
    /// Fresh random key with `pad_count` single-use pads.
    pub fn generate(k: u32, pad_count: usize, rng: &mut SeededRng) -> Self {
        let field = Gf2k::new(k).expect("supported field width");
        let poly_key = loop {
            let candidate = rng.next_u64() & field.mask();
            if candidate != 0 {
                break candidate;
            }
        };
        let pads = (0..pad_count).map(|_| rng.next_u64() & field.mask()).collect();
        WcMacKey { field, poly_key, pads, next_index: 0 }
    }

    /// Parse a key from raw key material: k bits of evaluation point followed
    /// by `pad_count` pads of k bits each. A zero evaluation point (one
    /// chance in 2^k) is bumped to 1 to keep the nonzero invariant.
    pub fn from_bits(k: u32, material: &BitString) -> Result<Self, AuthError> {
        let field = Gf2k::new(k).expect("supported field width");
        let kb = k as usize;
        if material.len() < kb || !material.len().is_multiple_of(kb) {
            return Err(AuthError::ShortKeyMaterial {
                needed: kb,
                got: material.len(),
            });
        }
        let mut poly_key = material.slice(0, kb).to_u64();
        if poly_key == 0 {
            poly_key = 1;
        }
        let pads = (kb..material.len())
            .step_by(kb)
            .map(|i| material.slice(i, i + kb).to_u64())
            .collect();
        Ok(WcMacKey { field, poly_key, pads, next_index: 0 })
    }

    /// Key material length in bits for a key covering `messages` messages.
    pub fn material_bits(k: u32, messages: usize) -> usize {
        k as usize * (messages + 1)
    }

    pub fn tag_bits(&self) -> usize {
        self.field.width() as usize
    }

    pub fn pads_remaining(&self) -> usize {
        self.pads.len() - self.next_index
    }

    fn poly_hash(&self, msg: &BitString) -> u64 {
        let k = self.field.width() as usize;
        let mut acc = 0u64;
        let mut i = msg.len();
        // Horner from the last block: ((m_d * a + m_{d-1}) * a + ...) * a.
        while i > 0 {
            let start = (i - 1) / k * k;
            let block = msg.slice(start, i).to_u64();
            acc = self.field.mul(acc ^ block, self.poly_key);
            i = start;
        }
        acc
    }

    /// Tag the next message in sequence, consuming one pad.
    pub fn tag_next(&mut self, msg: &BitString) -> Result<BitString, AuthError> {
        let pad = *self.pads.get(self.next_index).ok_or(AuthError::KeyExhausted)?;
        self.next_index += 1;
        Ok(BitString::from_u64(self.poly_hash(msg) ^ pad, self.tag_bits()))
    }

    /// Verify the next message in sequence, consuming one pad.
    pub fn verify_next(&mut self, msg: &BitString, tag: &BitString) -> Result<bool, AuthError> {
        let pad = *self.pads.get(self.next_index).ok_or(AuthError::KeyExhausted)?;
        self.next_index += 1;
        if tag.len() != self.tag_bits() {
            return Ok(false);
        }
        Ok(tag.to_u64() == self.poly_hash(msg) ^ pad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(seed: u64, pads: usize) -> WcMacKey {
        WcMacKey::generate(32, pads, &mut SeededRng::new(seed))
    }

    #[test]
    fn tag_of_empty_message_is_the_pad() {
        let mut k = key(1, 2);
        let pad0 = k.pads[0];
        let tag = k.tag_next(&BitString::new()).unwrap();
        assert_eq!(tag.to_u64(), pad0);
    }

    #[test]
    fn roundtrip_and_single_bit_flip() {
        let mut sender = key(2, 4);
        let mut receiver = sender.clone();
        let msg = SeededRng::new(9).bits(200);
        let tag = sender.tag_next(&msg).unwrap();
        assert!(receiver.verify_next(&msg, &tag).unwrap());

        let mut receiver = key(2, 4);
        let mut tampered = msg.clone();
        tampered.flip(77);
        assert!(!receiver.verify_next(&tampered, &tag).unwrap());
    }

    #[test]
    fn truncated_tag_is_rejected() {
        let mut sender = key(3, 2);
        let mut receiver = sender.clone();
        let msg = SeededRng::new(10).bits(64);
        let tag = sender.tag_next(&msg).unwrap();
        let short = tag.slice(0, tag.len() - 1);
        assert!(!receiver.verify_next(&msg, &short).unwrap());
    }

    #[test]
    fn exhaustion_is_an_error() {
        let mut k = key(4, 1);
        let msg = BitString::from_str01("1").unwrap();
        k.tag_next(&msg).unwrap();
        assert_eq!(k.tag_next(&msg), Err(AuthError::KeyExhausted));
    }

    #[test]
    fn pad_indices_never_repeat_across_mixed_schedules() {
        // Whatever mix of tagging and verifying a copy performs, each
        // operation consumes a fresh index.
        let mut rng = SeededRng::new(5);
        let mut k = key(6, 16);
        let reference = key(6, 16);
        let msg = BitString::from_str01("10110").unwrap();
        let mut seen = Vec::new();
        for _ in 0..16 {
            let index_before = k.next_index;
            if rng.next_bool() {
                k.tag_next(&msg).unwrap();
            } else {
                let mut tagger = reference.clone();
                tagger.next_index = index_before;
                let tag = tagger.tag_next(&msg).unwrap();
                assert!(k.verify_next(&msg, &tag).unwrap());
            }
            assert!(!seen.contains(&index_before));
            seen.push(index_before);
        }
        assert_eq!(k.pads_remaining(), 0);
    }
}
