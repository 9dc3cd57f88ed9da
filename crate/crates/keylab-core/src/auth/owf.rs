//! The lab's one-way function, digests built from it, and counter-mode
//! pseudorandom expansion.
//!
//! Two modes share one code path:
//!
//! * **strong**: 64 bits in, 64 bits out, a Davies-Meyer construction over a
//!   fixed 64-bit mixing permutation. Nothing in the lab inverts it.
//! * **toy**: `w` bits in, `w` bits out for `w <= 16`, the same construction
//!   truncated to a domain small enough that exhaustive search over at most
//!   2^16 candidates inverts it. The break-the-primitive experiments depend
//!   on this being feasible.
//!
//! Digests use Merkle-Damgard-style chaining of the configured function, so
//! breaking the toy function breaks toy digests too, which is exactly what
//! the two-phase experiments need.

use crate::bits::BitString;
use crate::rng::mix64;
use core::fmt;

const DM_ADD: u64 = 0x9E37_79B9_7F4A_7C15;
const DM_XOR: u64 = 0xD1B5_4A32_D192_ED03;
const TOY_TWEAK: u64 = 0xB5AD_4ECE_DA1C_E2A9;
const DIGEST_IV: u64 = 0xA5A5_5A5A_C3C3_3C3C;
// Domain separator so digesting a string and expanding it as a PRG seed
// never produce the same block stream.
const PRG_SEP: u64 = 0x5851_F42D_4C95_7F2D;

/// Errors configuring the function family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OwfError {
    /// Toy width outside 1..=16.
    BadToyWidth { got: u32 },
}

impl fmt::Display for OwfError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OwfError::BadToyWidth { got } => {
                write!(f, "toy one-way function width must be 1..=16 bits, got {got}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for OwfError {}

/// Which instantiation of the one-way function a protocol runs with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OwfConfig {
    Strong,
    Toy { output_bits: u32 },
}

impl OwfConfig {
    pub fn toy(output_bits: u32) -> Result<Self, OwfError> {
        if (1..=16).contains(&output_bits) {
            Ok(OwfConfig::Toy { output_bits })
        } else {
            Err(OwfError::BadToyWidth { got: output_bits })
        }
    }

    /// Input and output width in bits.
    pub fn width(&self) -> u32 {
        match self {
            OwfConfig::Strong => 64,
            OwfConfig::Toy { output_bits } => *output_bits,
        }
    }

    pub fn is_toy(&self) -> bool {
        matches!(self, OwfConfig::Toy { .. })
    }

    pub fn domain_mask(&self) -> u64 {
        let w = self.width();
        if w == 64 {
            u64::MAX
        } else {
            (1u64 << w) - 1
        }
    }

    /// Apply the one-way function to a `width()`-bit input.
    pub fn apply(&self, x: u64) -> u64 {
        let masked = x & self.domain_mask();
        let spread = match self {
            OwfConfig::Strong => masked,
            // Spread the tiny domain across 64 bits before mixing so nearby
            // toy inputs do not produce nearby outputs.
            OwfConfig::Toy { .. } => masked ^ TOY_TWEAK,
        };
        // Davies-Meyer: permutation(x) XOR x. The permutation is two rounds
        // of the SplitMix64 finalizer separated by constant injection, a
        // bijection on u64, so the XOR makes the result non-invertible in
        // any obvious algebraic way.
        let permuted = mix64(mix64(spread.wrapping_add(DM_ADD)) ^ DM_XOR);
        (permuted ^ spread) & self.domain_mask()
    }

    /// Exhaustive preimage search; only available in toy mode.
    ///
    /// Returns the smallest preimage of `target`, or `None` if the target is
    /// outside the image (possible, the toy function is not surjective).
    pub fn toy_invert(&self, target: u64) -> Option<u64> {
        assert!(self.is_toy(), "preimage search is a toy-mode facility");
        let limit = 1u64 << self.width();
        (0..limit).find(|&x| self.apply(x) == target)
    }
}

/// Merkle-Damgard digest of `msg` to `out_bits` bits.
///
/// The message is split into `width()`-bit blocks (zero-padded), followed by
/// one block holding the bit length (reduced mod 2^width). Output longer than
/// one block comes from counter-mode finalization.
pub fn md_digest(cfg: OwfConfig, msg: &BitString, out_bits: usize) -> BitString {
    let w = cfg.width() as usize;
    let mut state = DIGEST_IV & cfg.domain_mask();
    let mut i = 0;
    while i < msg.len() {
        let end = usize::min(i + w, msg.len());
        let block = msg.slice(i, end).to_u64();
        state = cfg.apply(state ^ block);
        i += w;
    }
    state = cfg.apply(state ^ (msg.len() as u64 & cfg.domain_mask()));
    squeeze(cfg, state, out_bits)
}

/// Counter-mode pseudorandom expansion of a seed to `out_bits` bits.
///
/// The seed is absorbed with the digest chaining, then output block `j` is
/// `owf(state XOR (j + 1))`. Depends only on the seed and the block index,
/// so a longer expansion of the same seed extends a shorter one bit for bit.
pub fn prg_expand(cfg: OwfConfig, seed: &BitString, out_bits: usize) -> BitString {
    let w = cfg.width() as usize;
    let mut state = (DIGEST_IV ^ PRG_SEP) & cfg.domain_mask();
    let mut i = 0;
    while i < seed.len() {
        let end = usize::min(i + w, seed.len());
        state = cfg.apply(state ^ seed.slice(i, end).to_u64());
        i += w;
    }
    state = cfg.apply(state ^ (seed.len() as u64 & cfg.domain_mask()));
    squeeze(cfg, state, out_bits)
}

fn squeeze(cfg: OwfConfig, state: u64, out_bits: usize) -> BitString {
    let w = cfg.width() as usize;
    let mut out = BitString::new();
    let mut counter = 0u64;
    while out.len() < out_bits {
        counter += 1;
        let block = cfg.apply(state ^ (counter & cfg.domain_mask()));
        let take = usize::min(w, out_bits - out.len());
        out.extend(&BitString::from_u64(block, take));
    }
    out
}

/// Digest truncated to a u64, convenience for transcript hashing.
pub fn md_digest64(cfg: OwfConfig, msg: &BitString) -> u64 {
    md_digest(cfg, msg, 64).to_u64()
}
