//! Toy Goldwasser-Micali trapdoor predicate (quadratic residuosity).
//!
//! Deliberately small: the modulus is capped at 32 bits so trial division
//! factors it in microseconds. That is the point: the surrounding protocol
//! experiments need a trapdoor that can be switched between "assumed hard"
//! (the adversary is forbidden from brute force) and "broken" (the factoring
//! oracle below) without changing any protocol code.
//!
//! Construction: N = p * q with p, q = 3 (mod 4), so z = N - 1 is a
//! quadratic non-residue with Jacobi symbol +1. Bit b encrypts as
//! r^2 * z^b mod N for random invertible r; the ciphertext is a residue
//! exactly when b = 0, decided with the trapdoor by a Legendre symbol mod p.
//! Multiplying ciphertexts XORs the plaintext bits.

use crate::bits::BitString;
use crate::rng::SeededRng;
use alloc::vec::Vec;
use core::fmt;

/// Errors from key generation and decryption.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GmError {
    /// Modulus width outside the supported toy range 16..=32.
    BadModulusBits { got: u32 },
    /// Ciphertext not coprime to the modulus (never produced honestly).
    InvalidCiphertext { value: u64 },
}

impl fmt::Display for GmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GmError::BadModulusBits { got } => {
                write!(f, "toy modulus must be 16..=32 bits, got {got}")
            }
            GmError::InvalidCiphertext { value } => {
                write!(f, "ciphertext {value} shares a factor with the modulus")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GmError {}

/// Public half: modulus and the fixed pseudo-residue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GmPublicKey {
    pub n: u64,
    pub z: u64,
}

/// Keypair with the factorization as trapdoor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GmKeyPair {
    pub public: GmPublicKey,
    pub p: u64,
    pub q: u64,
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Trial-division primality, fine at toy scale (candidates are < 2^17).
fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

fn random_blum_prime(bits: u32, rng: &mut SeededRng) -> u64 {
    let lo = 1u64 << (bits - 1);
    let hi = 1u64 << bits;
    loop {
        let candidate = lo + rng.next_below(hi - lo);
        if candidate % 4 == 3 && is_prime(candidate) {
            return candidate;
        }
    }
}

impl GmKeyPair {
    /// Generate a keypair with a modulus of roughly `modulus_bits` bits
    /// (two primes of `modulus_bits / 2` bits each).
    pub fn generate(modulus_bits: u32, rng: &mut SeededRng) -> Result<Self, GmError> {
        if !(16..=32).contains(&modulus_bits) {
            return Err(GmError::BadModulusBits { got: modulus_bits });
        }
        let half = modulus_bits / 2;
        let p = random_blum_prime(half, rng);
        let q = loop {
            let q = random_blum_prime(half, rng);
            if q != p {
                break q;
            }
        };
        let n = p * q;
        Ok(GmKeyPair {
            public: GmPublicKey { n, z: n - 1 },
            p,
            q,
        })
    }

    /// Decrypt with the trapdoor: Legendre symbol of the ciphertext mod p.
    pub fn decrypt(&self, c: u64) -> Result<bool, GmError> {
        decrypt_with_factors(self.p, self.q, c)
    }

    pub fn decrypt_bits(&self, cts: &[u64]) -> Result<BitString, GmError> {
        cts.iter().map(|&c| self.decrypt(c)).collect()
    }
}

impl GmPublicKey {
    /// Encrypt one bit as r^2 * z^b mod N.
    pub fn encrypt(&self, bit: bool, rng: &mut SeededRng) -> u64 {
        let r = loop {
            let r = 1 + rng.next_below(self.n - 1);
            if gcd(r, self.n) == 1 {
                break r;
            }
        };
        let c = mul_mod(r, r, self.n);
        if bit {
            mul_mod(c, self.z, self.n)
        } else {
            c
        }
    }

    pub fn encrypt_bits(&self, bits: &BitString, rng: &mut SeededRng) -> Vec<u64> {
        bits.iter().map(|b| self.encrypt(b, rng)).collect()
    }

    /// Homomorphic XOR: the product of two ciphertexts decrypts to the XOR
    /// of the plaintext bits.
    pub fn xor_ciphertexts(&self, c1: u64, c2: u64) -> u64 {
        mul_mod(c1, c2, self.n)
    }
}

/// Decrypt knowing the factors, however they were obtained.
pub fn decrypt_with_factors(p: u64, q: u64, c: u64) -> Result<bool, GmError> {
    let n = p * q;
    if gcd(c % n, n) != 1 {
        return Err(GmError::InvalidCiphertext { value: c });
    }
    // Legendre symbol c^((p-1)/2) mod p: 1 for residues, p-1 otherwise.
    let legendre = pow_mod(c % p, (p - 1) / 2, p);
    Ok(legendre != 1)
}

/// Factor a toy modulus by trial division. This is the "trapdoor broken"
/// oracle; it succeeds for every modulus this module can generate.
pub fn factor_toy_modulus(n: u64) -> Option<(u64, u64)> {
    if n < 4 {
        return None;
    }
    if n.is_multiple_of(2) {
        return Some((2, n / 2));
    }
    let mut d = 3u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return Some((d, n / d));
        }
        d += 2;
    }
    None
}

/// Jacobi symbol (a / n) for odd n, used by tests to check that z really is
/// a pseudo-residue.
pub fn jacobi(mut a: u64, mut n: u64) -> i32 {
    debug_assert!(n % 2 == 1);
    a %= n;
    let mut result = 1i32;
    while a != 0 {
        while a.is_multiple_of(2) {
            a /= 2;
            if n % 8 == 3 || n % 8 == 5 {
                result = -result;
            }
        }
        core::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            result = -result;
        }
        a %= n;
    }
    if n == 1 {
        result
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modulus_bits_validation() {
        let mut rng = SeededRng::new(1);
        assert!(GmKeyPair::generate(15, &mut rng).is_err());
        assert!(GmKeyPair::generate(33, &mut rng).is_err());
    }

    #[test]
    fn z_is_a_jacobi_one_nonresidue() {
        let mut rng = SeededRng::new(2);
        let kp = GmKeyPair::generate(24, &mut rng).unwrap();
        assert_eq!(jacobi(kp.public.z, kp.public.n), 1);
        // Non-residue mod p means the Legendre symbol is p - 1.
        assert_ne!(pow_mod(kp.public.z % kp.p, (kp.p - 1) / 2, kp.p), 1);
    }

    #[test]
    fn encrypt_decrypt_roundtrip() {
        let mut rng = SeededRng::new(3);
        let kp = GmKeyPair::generate(20, &mut rng).unwrap();
        let plain = rng.bits(64);
        let cts = kp.public.encrypt_bits(&plain, &mut rng);
        assert_eq!(kp.decrypt_bits(&cts).unwrap(), plain);
    }

    #[test]
    fn same_bit_encrypts_differently() {
        let mut rng = SeededRng::new(4);
        let kp = GmKeyPair::generate(24, &mut rng).unwrap();
        let c1 = kp.public.encrypt(true, &mut rng);
        let c2 = kp.public.encrypt(true, &mut rng);
        assert_ne!(c1, c2);
        assert!(kp.decrypt(c1).unwrap() && kp.decrypt(c2).unwrap());
    }

    #[test]
    fn homomorphic_xor() {
        let mut rng = SeededRng::new(5);
        let kp = GmKeyPair::generate(24, &mut rng).unwrap();
        for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
            let ca = kp.public.encrypt(a, &mut rng);
            let cb = kp.public.encrypt(b, &mut rng);
            let combined = kp.public.xor_ciphertexts(ca, cb);
            assert_eq!(kp.decrypt(combined).unwrap(), a ^ b);
        }
    }

    #[test]
    fn factoring_breaks_it() {
        let mut rng = SeededRng::new(6);
        let kp = GmKeyPair::generate(28, &mut rng).unwrap();
        let plain = rng.bits(32);
        let cts = kp.public.encrypt_bits(&plain, &mut rng);
        let (p, q) = factor_toy_modulus(kp.public.n).unwrap();
        assert!((p == kp.p && q == kp.q) || (p == kp.q && q == kp.p));
        let recovered: BitString = cts
            .iter()
            .map(|&c| decrypt_with_factors(p, q, c).unwrap())
            .collect();
        assert_eq!(recovered, plain);
    }
}
