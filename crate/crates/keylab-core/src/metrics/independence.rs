//! Permutation test for statistical dependence between session keys and
//! public wire data.
//!
//! Each run contributes one key and one scalar feature extracted from its
//! transcript. For every key bit position the test measures the plug-in
//! mutual information between that bit and the bucketed feature, then
//! compares it against the distribution obtained by re-pairing features
//! and keys uniformly at random. The permutation p-value needs no
//! distributional assumptions and is exact up to Monte Carlo resolution
//! 1 / (permutations + 1).
//!
//! Runs are packed into 64-bit words so one permutation costs a feature
//! shuffle plus popcount joint counting across all key bits at once.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::bits::BitString;
use crate::rng::SeededRng;
use crate::transcript::Transcript;

/// How features are bucketed and how many re-pairings are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndependenceOptions {
    /// Number of feature buckets; features land in `feature % buckets`.
    pub buckets: usize,
    /// Number of uniform re-pairings the null distribution is built from.
    pub permutations: usize,
}

impl Default for IndependenceOptions {
    fn default() -> Self {
        IndependenceOptions { buckets: 8, permutations: 200 }
    }
}

/// Fewer paired runs than this cannot fill the joint table.
pub const MIN_RUNS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndependenceError {
    TooFewRuns { got: usize, need: usize },
    MismatchedFeatures { keys: usize, features: usize },
    UnequalKeyLengths,
    EmptyKeys,
    BadOptions,
}

impl fmt::Display for IndependenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndependenceError::TooFewRuns { got, need } => {
                write!(f, "independence needs {need} runs, got {got}")
            }
            IndependenceError::MismatchedFeatures { keys, features } => {
                write!(f, "{keys} keys but {features} features")
            }
            IndependenceError::UnequalKeyLengths => f.write_str("keys must share one length"),
            IndependenceError::EmptyKeys => f.write_str("keys must be non-empty"),
            IndependenceError::BadOptions => {
                f.write_str("buckets must be at least 2 and permutations at least 1")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for IndependenceError {}

/// One p-value per key bit position, plus the observed statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    pub runs: usize,
    pub key_bits: usize,
    pub buckets: usize,
    pub permutations: usize,
    /// Permutation p-value for each key bit, in multiples of
    /// 1 / (permutations + 1).
    pub p_values: Vec<f64>,
    /// Plug-in mutual information, in bits, for each key bit.
    pub observed_mi: Vec<f64>,
}

impl IndependenceReport {
    /// Fraction of key bits whose p-value falls at or below `alpha`.
    pub fn rejection_fraction(&self, alpha: f64) -> f64 {
        if self.p_values.is_empty() {
            return 0.0;
        }
        let hits = self.p_values.iter().filter(|&&p| p <= alpha).count();
        hits as f64 / self.p_values.len() as f64
    }
}

/// Plug-in Shannon entropy, in bits, of a histogram.
pub fn plug_in_entropy(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * libm::log2(p)
        })
        .sum()
}

/// The whole-digest transcript feature.
pub fn digest_feature(transcript: &Transcript) -> u64 {
    transcript.digest64()
}

/// One byte of the transcript digest, selected by `byte` in 0..8. Distinct
/// bytes give near-independent features over the same batch of runs, which
/// multiplies the number of p-values a calibration study can pool.
pub fn digest_byte_feature(transcript: &Transcript, byte: usize) -> u64 {
    (transcript.digest64() >> (8 * (byte % 8))) & 0xFF
}

fn bucket_masks(assignment: &[u8], buckets: usize, words: usize) -> Vec<Vec<u64>> {
    let mut masks = vec![vec![0u64; words]; buckets];
    for (run, &bucket) in assignment.iter().enumerate() {
        masks[bucket as usize][run / 64] |= 1u64 << (run % 64);
    }
    masks
}

fn mutual_information_bits(
    ones_per_bucket: &[usize],
    bucket_sizes: &[usize],
    bit_ones: usize,
    runs: usize,
) -> f64 {
    let n = runs as f64;
    let margins = [runs - bit_ones, bit_ones];
    let mut info = 0.0;
    for (bucket, &size) in bucket_sizes.iter().enumerate() {
        let cells = [size - ones_per_bucket[bucket], ones_per_bucket[bucket]];
        for (value, &cell) in cells.iter().enumerate() {
            if cell == 0 || size == 0 || margins[value] == 0 {
                continue;
            }
            let joint = cell as f64 / n;
            info += joint * libm::log2(cell as f64 * n / (size as f64 * margins[value] as f64));
        }
    }
    info.max(0.0)
}

/// Test every key bit for dependence on the run features. `features[i]`
/// belongs to `keys[i]`. The permutations re-pair features with keys, so
/// the null hypothesis is exchangeability of the pairing, exactly what
/// "the key carries no information about the wire data" asserts.
pub fn independence_test(
    keys: &[BitString],
    features: &[u64],
    options: &IndependenceOptions,
    rng: &mut SeededRng,
) -> Result<IndependenceReport, IndependenceError> {
    if options.buckets < 2 || options.buckets > 64 || options.permutations == 0 {
        return Err(IndependenceError::BadOptions);
    }
    if keys.len() < MIN_RUNS {
        return Err(IndependenceError::TooFewRuns { got: keys.len(), need: MIN_RUNS });
    }
    if keys.len() != features.len() {
        return Err(IndependenceError::MismatchedFeatures {
            keys: keys.len(),
            features: features.len(),
        });
    }
    let key_bits = keys[0].len();
    if key_bits == 0 {
        return Err(IndependenceError::EmptyKeys);
    }
    if keys.iter().any(|k| k.len() != key_bits) {
        return Err(IndependenceError::UnequalKeyLengths);
    }

    let runs = keys.len();
    let words = runs.div_ceil(64);
    let mut bit_masks = vec![vec![0u64; words]; key_bits];
    let mut bit_ones = vec![0usize; key_bits];
    for (run, key) in keys.iter().enumerate() {
        for bit in 0..key_bits {
            if key.get(bit) {
                bit_masks[bit][run / 64] |= 1u64 << (run % 64);
                bit_ones[bit] += 1;
            }
        }
    }

    let mut assignment: Vec<u8> =
        features.iter().map(|&f| (f % options.buckets as u64) as u8).collect();
    let mut bucket_sizes = vec![0usize; options.buckets];
    for &bucket in &assignment {
        bucket_sizes[bucket as usize] += 1;
    }

    let joint_ones = |masks: &[Vec<u64>], bit: usize| -> Vec<usize> {
        masks
            .iter()
            .map(|bucket| {
                bucket
                    .iter()
                    .zip(&bit_masks[bit])
                    .map(|(b, k)| (b & k).count_ones() as usize)
                    .sum()
            })
            .collect()
    };

    let masks = bucket_masks(&assignment, options.buckets, words);
    let observed_mi: Vec<f64> = (0..key_bits)
        .map(|bit| {
            mutual_information_bits(&joint_ones(&masks, bit), &bucket_sizes, bit_ones[bit], runs)
        })
        .collect();

    let mut exceed = vec![0usize; key_bits];
    for _ in 0..options.permutations {
        rng.shuffle(&mut assignment);
        let masks = bucket_masks(&assignment, options.buckets, words);
        for bit in 0..key_bits {
            let mi =
                mutual_information_bits(&joint_ones(&masks, bit), &bucket_sizes, bit_ones[bit], runs);
            if mi >= observed_mi[bit] {
                exceed[bit] += 1;
            }
        }
    }

    let denom = (options.permutations + 1) as f64;
    let p_values = exceed.iter().map(|&count| (1 + count) as f64 / denom).collect();
    Ok(IndependenceReport {
        runs,
        key_bits,
        buckets: options.buckets,
        permutations: options.permutations,
        p_values,
        observed_mi,
    })
}
