//! Marginal uniformity check over a batch of session keys.
//!
//! Each bit position across the batch should behave like an independent
//! fair coin. The check aggregates the per-position deviations into a
//! chi-square statistic with one degree of freedom per bit and converts it
//! to a p-value through the Wilson-Hilferty cube-root normal
//! approximation, which is accurate to a few parts in a thousand for ten
//! or more degrees of freedom.

use alloc::vec::Vec;
use core::fmt;

use crate::bits::BitString;

/// Significance level the `pass` verdict uses.
pub const ALPHA: f64 = 0.05;

/// Fewer samples than this cannot resolve the biases worth flagging.
pub const MIN_SAMPLES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UniformityError {
    TooFewSamples { got: usize, need: usize },
    UnequalLengths,
    EmptyKeys,
}

impl fmt::Display for UniformityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UniformityError::TooFewSamples { got, need } => {
                write!(f, "uniformity needs {need} keys, got {got}")
            }
            UniformityError::UnequalLengths => f.write_str("keys must share one length"),
            UniformityError::EmptyKeys => f.write_str("keys must be non-empty"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for UniformityError {}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformityReport {
    pub samples: usize,
    pub key_bits: usize,
    /// Fraction of ones at each bit position across the batch.
    pub ones_fraction_per_bit: Vec<f64>,
    pub chi_square: f64,
    pub degrees: usize,
    pub p_value: f64,
    pub alpha: f64,
    /// True when the batch is consistent with fair independent marginals.
    pub pass: bool,
}

/// Upper-tail probability of a chi-square variate via Wilson-Hilferty.
pub fn chi_square_upper_tail(chi: f64, degrees: usize) -> f64 {
    if degrees == 0 {
        return 1.0;
    }
    let k = degrees as f64;
    let spread = 2.0 / (9.0 * k);
    let z = (libm::cbrt(chi / k) - (1.0 - spread)) / libm::sqrt(spread);
    0.5 * libm::erfc(z / core::f64::consts::SQRT_2)
}

/// Test a batch of equal-length keys for fair per-position marginals.
pub fn uniformity_check(keys: &[BitString]) -> Result<UniformityReport, UniformityError> {
    if keys.len() < MIN_SAMPLES {
        return Err(UniformityError::TooFewSamples { got: keys.len(), need: MIN_SAMPLES });
    }
    let key_bits = keys[0].len();
    if key_bits == 0 {
        return Err(UniformityError::EmptyKeys);
    }
    if keys.iter().any(|k| k.len() != key_bits) {
        return Err(UniformityError::UnequalLengths);
    }
    let samples = keys.len();
    let mut ones = alloc::vec![0usize; key_bits];
    for key in keys {
        for (position, count) in ones.iter_mut().enumerate() {
            if key.get(position) {
                *count += 1;
            }
        }
    }
    let n = samples as f64;
    let expected = n / 2.0;
    let variance = n / 4.0;
    let mut chi_square = 0.0;
    let ones_fraction_per_bit: Vec<f64> = ones
        .iter()
        .map(|&count| {
            let deviation = count as f64 - expected;
            chi_square += deviation * deviation / variance;
            count as f64 / n
        })
        .collect();
    let p_value = chi_square_upper_tail(chi_square, key_bits);
    Ok(UniformityReport {
        samples,
        key_bits,
        ones_fraction_per_bit,
        chi_square,
        degrees: key_bits,
        p_value,
        alpha: ALPHA,
        pass: p_value >= ALPHA,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn uniform_batch(count: usize, bits: usize, seed: u64) -> Vec<BitString> {
        let mut rng = SeededRng::new(seed);
        (0..count).map(|_| rng.bits(bits)).collect()
    }

    #[test]
    fn tail_matches_a_table_value() {
        let p = chi_square_upper_tail(18.307, 10);
        assert!((p - 0.05).abs() < 2e-3, "{p}");
        assert!((chi_square_upper_tail(10.0, 10) - 0.44).abs() < 0.01);
        assert!(chi_square_upper_tail(0.0, 10) > 0.999);
    }

    #[test]
    fn fresh_random_keys_pass() {
        let report = uniformity_check(&uniform_batch(600, 64, 20)).unwrap();
        assert!(report.pass, "p = {}", report.p_value);
        assert_eq!(report.samples, 600);
        assert_eq!(report.degrees, 64);
        assert!(report.ones_fraction_per_bit.iter().all(|f| (f - 0.5).abs() < 0.12));
    }

    #[test]
    fn a_stuck_bit_fails_loudly() {
        let mut keys = uniform_batch(600, 64, 21);
        for key in &mut keys {
            if !key.get(0) {
                key.flip(0);
            }
        }
        let report = uniformity_check(&keys).unwrap();
        assert!(!report.pass);
        assert!(report.p_value < 1e-6, "p = {}", report.p_value);
        assert_eq!(report.ones_fraction_per_bit[0], 1.0);
    }

    #[test]
    fn a_mild_global_tilt_fails() {
        let mut rng = SeededRng::new(22);
        let keys: Vec<BitString> = (0..2000)
            .map(|_| (0..64).map(|_| rng.next_f64() < 0.55).collect::<BitString>())
            .collect();
        let report = uniformity_check(&keys).unwrap();
        assert!(!report.pass, "p = {}", report.p_value);
    }

    #[test]
    fn input_shape_errors() {
        assert_eq!(
            uniformity_check(&uniform_batch(10, 64, 1)).unwrap_err(),
            UniformityError::TooFewSamples { got: 10, need: MIN_SAMPLES }
        );
        let mut ragged = uniform_batch(600, 64, 2);
        ragged[3] = BitString::from_u64(1, 8);
        assert_eq!(uniformity_check(&ragged).unwrap_err(), UniformityError::UnequalLengths);
        let empty = alloc::vec![BitString::default(); 600];
        assert_eq!(uniformity_check(&empty).unwrap_err(), UniformityError::EmptyKeys);
    }
}
