//! Arithmetic in the binary fields GF(2^k), k in {8, 16, 32, 64}.
//!
//! Elements are the low `k` bits of a `u64`. Addition is XOR; multiplication
//! is shift-and-reduce against a fixed low-weight irreducible polynomial per
//! width (from the standard pentanomial tables):
//!
//! * k = 8:  x^8 + x^4 + x^3 + x + 1          (low part 0x1B)
//! * k = 16: x^16 + x^5 + x^3 + x + 1         (low part 0x2B)
//! * k = 32: x^32 + x^7 + x^3 + x^2 + 1       (low part 0x8D)
//! * k = 64: x^64 + x^4 + x^3 + x + 1         (low part 0x1B)

use core::fmt;

/// Errors constructing a field of unsupported width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnsupportedWidth(pub u32);

impl fmt::Display for UnsupportedWidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF(2^k) width {} not supported (use 8, 16, 32 or 64)", self.0)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for UnsupportedWidth {}

/// One of the supported binary fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gf2k {
    k: u32,
    reduction: u64,
}

impl Gf2k {
    pub fn new(k: u32) -> Result<Self, UnsupportedWidth> {
        let reduction = match k {
            8 => 0x1B,
            16 => 0x2B,
            32 => 0x8D,
            64 => 0x1B,
            _ => return Err(UnsupportedWidth(k)),
        };
        Ok(Gf2k { k, reduction })
    }

    pub fn width(&self) -> u32 {
        self.k
    }

    /// Bit mask selecting the element range.
    pub fn mask(&self) -> u64 {
        if self.k == 64 {
            u64::MAX
        } else {
            (1u64 << self.k) - 1
        }
    }

    pub fn add(&self, a: u64, b: u64) -> u64 {
        a ^ b
    }

    /// Multiply by x, reducing once if the top bit falls off.
    fn xtime(&self, a: u64) -> u64 {
        let carry = (a >> (self.k - 1)) & 1;
        let shifted = (a << 1) & self.mask();
        if carry == 1 {
            shifted ^ self.reduction
        } else {
            shifted
        }
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        debug_assert!(a <= self.mask() && b <= self.mask());
        let mut acc = 0u64;
        let mut shifted = a;
        for i in 0..self.k {
            if (b >> i) & 1 == 1 {
                acc ^= shifted;
            }
            shifted = self.xtime(shifted);
        }
        acc
    }

    /// `a` raised to the power `2^e` (e-fold squaring).
    pub fn frobenius(&self, a: u64, e: u32) -> u64 {
        let mut acc = a;
        for _ in 0..e {
            acc = self.mul(acc, acc);
        }
        acc
    }

    /// Multiplicative inverse of a nonzero element, via a^(2^k - 2).
    ///
    /// Uses the identity a^(2^k - 2) = prod of a^(2^i) for i in 1..k.
    pub fn inv(&self, a: u64) -> u64 {
        assert!(a != 0, "zero has no inverse");
        let mut acc = 1u64;
        let mut power = a;
        for _ in 1..self.k {
            power = self.mul(power, power);
            acc = self.mul(acc, power);
        }
        acc
    }
}
