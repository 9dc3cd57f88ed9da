//! Lamport one-time signatures over the configured one-way function.
//!
//! A keypair holds two preimages per digest bit; signing a message reveals
//! one preimage per bit of the message digest and burns the keypair (the
//! `used` flag refuses a second signature). Verification recomputes the
//! digest and checks each revealed preimage against the published image.
//!
//! Wire encodings (used inside transcript payloads and frozen in the golden
//! test vectors):
//!
//! * public key: 2 * m images of w bits each, ordered
//!   `images[0][0], images[0][1], images[1][0], ...`
//! * signature: m preimages of w bits each, in digest-bit order
//!
//! where m is the digest length and w the one-way function width.

use super::owf::{md_digest, OwfConfig};
use super::AuthError;
use crate::bits::BitString;
use crate::rng::SeededRng;
use alloc::vec::Vec;

/// Verification half of a keypair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LamportPublic {
    pub owf: OwfConfig,
    pub digest_bits: usize,
    images: Vec<[u64; 2]>,
}

/// Full keypair; `sign` consumes its one shot.
#[derive(Debug, Clone)]
pub struct LamportKeypair {
    owf: OwfConfig,
    digest_bits: usize,
    preimages: Vec<[u64; 2]>,
    images: Vec<[u64; 2]>,
    used: bool,
}

/// Revealed preimages for one message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LamportSignature {
    reveals: Vec<u64>,
}

impl LamportKeypair {
    pub fn generate(owf: OwfConfig, digest_bits: usize, rng: &mut SeededRng) -> Self {
        let mask = owf.domain_mask();
        let preimages: Vec<[u64; 2]> = (0..digest_bits)
            .map(|_| [rng.next_u64() & mask, rng.next_u64() & mask])
            .collect();
        let images = preimages
            .iter()
            .map(|pair| [owf.apply(pair[0]), owf.apply(pair[1])])
            .collect();
        LamportKeypair { owf, digest_bits, preimages, images, used: false }
    }

    pub fn public(&self) -> LamportPublic {
        LamportPublic {
            owf: self.owf,
            digest_bits: self.digest_bits,
            images: self.images.clone(),
        }
    }

    /// Rebuild a full signing keypair from a verification key by inverting
    /// every image. Feasible only against the toy function; returns `None`
    /// whenever any image resists inversion.
    pub fn recover_from_public(public: &LamportPublic) -> Option<LamportKeypair> {
        if !public.owf.is_toy() {
            return None;
        }
        let preimages: Vec<[u64; 2]> = public
            .images
            .iter()
            .map(|pair| {
                Some([public.owf.toy_invert(pair[0])?, public.owf.toy_invert(pair[1])?])
            })
            .collect::<Option<Vec<_>>>()?;
        Some(LamportKeypair {
            owf: public.owf,
            digest_bits: public.digest_bits,
            preimages,
            images: public.images.clone(),
            used: false,
        })
    }

    pub fn is_used(&self) -> bool {
        self.used
    }

    /// Sign once; any further attempt reports the keypair as consumed.
    pub fn sign(&mut self, msg: &BitString) -> Result<LamportSignature, AuthError> {
        if self.used {
            return Err(AuthError::KeypairConsumed);
        }
        self.used = true;
        let digest = md_digest(self.owf, msg, self.digest_bits);
        let reveals = (0..self.digest_bits)
            .map(|i| self.preimages[i][digest.get(i) as usize])
            .collect();
        Ok(LamportSignature { reveals })
    }
}

impl LamportPublic {
    pub fn verify(&self, msg: &BitString, sig: &LamportSignature) -> bool {
        if sig.reveals.len() != self.digest_bits {
            return false;
        }
        let digest = md_digest(self.owf, msg, self.digest_bits);
        (0..self.digest_bits)
            .all(|i| self.owf.apply(sig.reveals[i]) == self.images[i][digest.get(i) as usize])
    }

    /// Image for one digest bit value, used by brute-force forgery demos.
    pub fn image(&self, bit_index: usize, bit_value: bool) -> u64 {
        self.images[bit_index][bit_value as usize]
    }

    pub fn to_bits(&self) -> BitString {
        let w = self.owf.width() as usize;
        let mut out = BitString::new();
        for pair in &self.images {
            out.extend(&BitString::from_u64(pair[0], w));
            out.extend(&BitString::from_u64(pair[1], w));
        }
        out
    }

    pub fn from_bits(owf: OwfConfig, digest_bits: usize, bits: &BitString) -> Result<Self, AuthError> {
        let w = owf.width() as usize;
        let needed = 2 * digest_bits * w;
        if bits.len() != needed {
            return Err(AuthError::ShortKeyMaterial { needed, got: bits.len() });
        }
        let images = (0..digest_bits)
            .map(|i| {
                let base = 2 * i * w;
                [
                    bits.slice(base, base + w).to_u64(),
                    bits.slice(base + w, base + 2 * w).to_u64(),
                ]
            })
            .collect();
        Ok(LamportPublic { owf, digest_bits, images })
    }
}

impl LamportSignature {
    pub fn to_bits(&self, owf: OwfConfig) -> BitString {
        let w = owf.width() as usize;
        let mut out = BitString::new();
        for &r in &self.reveals {
            out.extend(&BitString::from_u64(r, w));
        }
        out
    }

    pub fn from_bits(owf: OwfConfig, digest_bits: usize, bits: &BitString) -> Result<Self, AuthError> {
        let w = owf.width() as usize;
        let needed = digest_bits * w;
        if bits.len() != needed {
            return Err(AuthError::ShortKeyMaterial { needed, got: bits.len() });
        }
        let reveals = (0..digest_bits)
            .map(|i| bits.slice(i * w, (i + 1) * w).to_u64())
            .collect();
        Ok(LamportSignature { reveals })
    }

    /// Build a signature from raw preimages (forgery construction helper).
    pub fn from_reveals(reveals: Vec<u64>) -> Self {
        LamportSignature { reveals }
    }

    pub fn reveals(&self) -> &[u64] {
        &self.reveals
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIGEST_BITS: usize = 64;

    #[test]
    fn sign_verify_roundtrip() {
        let mut rng = SeededRng::new(21);
        let mut kp = LamportKeypair::generate(OwfConfig::Strong, DIGEST_BITS, &mut rng);
        let public = kp.public();
        let msg = rng.bits(300);
        let sig = kp.sign(&msg).unwrap();
        assert!(public.verify(&msg, &sig));
        assert!(!public.verify(&rng.bits(300), &sig));
    }

    #[test]
    fn second_signature_is_refused() {
        let mut rng = SeededRng::new(22);
        let mut kp = LamportKeypair::generate(OwfConfig::Strong, DIGEST_BITS, &mut rng);
        let msg = rng.bits(64);
        kp.sign(&msg).unwrap();
        assert_eq!(kp.sign(&msg), Err(AuthError::KeypairConsumed));
    }

    #[test]
    fn encodings_roundtrip() {
        let mut rng = SeededRng::new(23);
        let mut kp = LamportKeypair::generate(OwfConfig::Strong, DIGEST_BITS, &mut rng);
        let public = kp.public();
        let decoded =
            LamportPublic::from_bits(OwfConfig::Strong, DIGEST_BITS, &public.to_bits()).unwrap();
        assert_eq!(decoded, public);

        let msg = rng.bits(80);
        let sig = kp.sign(&msg).unwrap();
        let decoded =
            LamportSignature::from_bits(OwfConfig::Strong, DIGEST_BITS, &sig.to_bits(OwfConfig::Strong))
                .unwrap();
        assert_eq!(decoded, sig);
    }

    #[test]
    fn wrong_length_material_is_rejected() {
        let bits = BitString::zeros(10);
        assert!(LamportPublic::from_bits(OwfConfig::Strong, DIGEST_BITS, &bits).is_err());
        assert!(LamportSignature::from_bits(OwfConfig::Strong, DIGEST_BITS, &bits).is_err());
    }
}
