//! Simulated conjugate-coding quantum channel.
//!
//! A frame of pulses is prepared in one of two bases per pulse and measured
//! once at the far end. The simulation enforces the two properties the lab
//! leans on:
//!
//! * Measuring in the wrong basis yields a fresh random bit, drawn from a
//!   dedicated "nature" stream that belongs to neither party. Measurement
//!   outcomes are therefore not a function of any party's local coins.
//! * A frame can be measured once. There is no copy or peek operation, and a
//!   second measurement is an error. An interceptor must measure and resend,
//!   which disturbs mismatched-basis pulses and is what post-hoc error
//!   estimation detects (expected 25% disagreement on sifted positions under
//!   a full intercept-resend tap).
//!
//! Randomness is consumed in a documented per-pulse order so that runs are
//! reproducible: for each pulse, first-leg noise (skipped entirely when the
//! noise probability is zero), then the tap's basis and measurement draws,
//! then second-leg noise, then the receiver's measurement draw. Draws happen
//! only on the branches that need them.

use crate::bits::BitString;
use crate::rng::SeededRng;
use alloc::vec::Vec;
use core::fmt;

/// Preparation or measurement basis for one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    Rectilinear,
    Diagonal,
}

impl Basis {
    pub fn random(rng: &mut SeededRng) -> Basis {
        if rng.next_bool() {
            Basis::Diagonal
        } else {
            Basis::Rectilinear
        }
    }

    /// Encode as one bit for basis-disclosure messages.
    pub fn as_bit(self) -> bool {
        self == Basis::Diagonal
    }

    pub fn from_bit(bit: bool) -> Basis {
        if bit {
            Basis::Diagonal
        } else {
            Basis::Rectilinear
        }
    }
}

/// One prepared pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pulse {
    pub basis: Basis,
    pub bit: bool,
}

/// A frame of pulses in flight. Consumed by its first measurement.
#[derive(Debug, Clone)]
pub struct QubitFrame {
    pulses: Vec<Pulse>,
    consumed: bool,
}

/// What an interceptor learned from one tapped frame.
#[derive(Debug, Clone, PartialEq)]
pub struct InterceptRecord {
    pub bases: Vec<Basis>,
    pub results: BitString,
}

/// How a tap chooses its measurement bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisPolicy {
    Random,
    Fixed(Basis),
}

/// Interception applied to a frame in flight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveTap {
    /// Frame passes untouched. Passive observation of a quantum channel is
    /// not a thing this simulation offers, deliberately.
    None,
    /// Measure every pulse, then resend each in the basis it was measured.
    InterceptResend(BasisPolicy),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChannelError {
    /// The frame was already measured once.
    AlreadyConsumed,
    /// Receiver basis list does not cover the frame.
    LengthMismatch { pulses: usize, bases: usize },
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::AlreadyConsumed => write!(f, "frame already measured"),
            ChannelError::LengthMismatch { pulses, bases } => {
                write!(f, "frame has {pulses} pulses but {bases} bases were given")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ChannelError {}

impl QubitFrame {
    /// Encode `bits` pulse by pulse in the given bases.
    pub fn prepare(bits: &BitString, bases: &[Basis]) -> QubitFrame {
        debug_assert_eq!(bits.len(), bases.len());
        let pulses = bits
            .iter()
            .zip(bases.iter())
            .map(|(bit, &basis)| Pulse { basis, bit })
            .collect();
        QubitFrame { pulses, consumed: false }
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }
}

/// Draw n random bases.
pub fn random_bases(n: usize, rng: &mut SeededRng) -> Vec<Basis> {
    (0..n).map(|_| Basis::random(rng)).collect()
}

/// Pack a basis list into a bit string for disclosure messages.
pub fn bases_to_bits(bases: &[Basis]) -> BitString {
    bases.iter().map(|b| b.as_bit()).collect()
}

pub fn bits_to_bases(bits: &BitString) -> Vec<Basis> {
    bits.iter().map(Basis::from_bit).collect()
}

fn measure_pulse(pulse: Pulse, basis: Basis, nature: &mut SeededRng) -> bool {
    if pulse.basis == basis {
        pulse.bit
    } else {
        nature.next_bool()
    }
}

fn leg_noise(bit: bool, noise_flip_prob: f64, nature: &mut SeededRng) -> bool {
    if noise_flip_prob > 0.0 && nature.next_f64() < noise_flip_prob {
        !bit
    } else {
        bit
    }
}

/// Send `frame` through the channel and measure it in `receiver_bases`.
///
/// Consumes the frame (a second call fails). `noise_flip_prob` applies per
/// channel leg: once source to receiver without a tap, or once source to tap
/// and once tap to receiver with one. Returns the receiver's raw bits and,
/// if the frame was tapped, what the tap recorded.
pub fn transmit_and_measure(
    frame: &mut QubitFrame,
    receiver_bases: &[Basis],
    tap: EveTap,
    noise_flip_prob: f64,
    nature: &mut SeededRng,
    eve_rng: &mut SeededRng,
) -> Result<(BitString, Option<InterceptRecord>), ChannelError> {
    if frame.consumed {
        return Err(ChannelError::AlreadyConsumed);
    }
    if frame.pulses.len() != receiver_bases.len() {
        return Err(ChannelError::LengthMismatch {
            pulses: frame.pulses.len(),
            bases: receiver_bases.len(),
        });
    }
    frame.consumed = true;

    let mut received = BitString::zeros(frame.pulses.len());
    let mut intercept = match tap {
        EveTap::None => None,
        EveTap::InterceptResend(_) => Some(InterceptRecord {
            bases: Vec::with_capacity(frame.pulses.len()),
            results: BitString::zeros(frame.pulses.len()),
        }),
    };

    for (i, &pulse) in frame.pulses.iter().enumerate() {
        let bit = match tap {
            EveTap::None => {
                let arriving = Pulse { basis: pulse.basis, bit: leg_noise(pulse.bit, noise_flip_prob, nature) };
                measure_pulse(arriving, receiver_bases[i], nature)
            }
            EveTap::InterceptResend(policy) => {
                let at_tap = Pulse { basis: pulse.basis, bit: leg_noise(pulse.bit, noise_flip_prob, nature) };
                let eve_basis = match policy {
                    BasisPolicy::Random => Basis::random(eve_rng),
                    BasisPolicy::Fixed(b) => b,
                };
                let eve_bit = measure_pulse(at_tap, eve_basis, nature);
                let record = intercept.as_mut().expect("tap record exists");
                record.bases.push(eve_basis);
                record.results.set(i, eve_bit);
                let resent = Pulse { basis: eve_basis, bit: leg_noise(eve_bit, noise_flip_prob, nature) };
                measure_pulse(resent, receiver_bases[i], nature)
            }
        };
        received.set(i, bit);
    }

    Ok((received, intercept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, SeededRng};

    fn matched_disagreement(tap: EveTap, noise: f64, seed: u64, n: usize) -> f64 {
        let mut alice = SeededRng::derive(seed, stream::ALICE);
        let mut bob = SeededRng::derive(seed, stream::BOB);
        let mut nature = SeededRng::derive(seed, stream::NATURE);
        let mut eve = SeededRng::derive(seed, stream::EVE);
        let bits = alice.bits(n);
        let a_bases = random_bases(n, &mut alice);
        let b_bases = random_bases(n, &mut bob);
        let mut frame = QubitFrame::prepare(&bits, &a_bases);
        let (received, _) =
            transmit_and_measure(&mut frame, &b_bases, tap, noise, &mut nature, &mut eve).unwrap();
        let mut matched = 0usize;
        let mut errors = 0usize;
        for i in 0..n {
            if a_bases[i] == b_bases[i] {
                matched += 1;
                if bits.get(i) != received.get(i) {
                    errors += 1;
                }
            }
        }
        errors as f64 / matched as f64
    }

    #[test]
    fn clean_channel_is_exact_on_matched_bases() {
        assert_eq!(matched_disagreement(EveTap::None, 0.0, 11, 4000), 0.0);
    }

    #[test]
    fn intercept_resend_disturbs_a_quarter() {
        for seed in [1u64, 2, 3] {
            let rate = matched_disagreement(
                EveTap::InterceptResend(BasisPolicy::Random),
                0.0,
                seed,
                20000,
            );
            assert!((rate - 0.25).abs() < 0.015, "seed {seed}: rate {rate}");
        }
    }

    #[test]
    fn fixed_basis_tap_disturbs_a_quarter_too() {
        let rate = matched_disagreement(
            EveTap::InterceptResend(BasisPolicy::Fixed(Basis::Rectilinear)),
            0.0,
            7,
            20000,
        );
        assert!((rate - 0.25).abs() < 0.015, "rate {rate}");
    }

    #[test]
    fn leg_noise_shows_up_at_configured_rate() {
        let rate = matched_disagreement(EveTap::None, 0.05, 13, 20000);
        assert!((rate - 0.05).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn frames_cannot_be_measured_twice() {
        let mut rng = SeededRng::new(3);
        let bits = rng.bits(16);
        let bases = random_bases(16, &mut rng);
        let mut frame = QubitFrame::prepare(&bits, &bases);
        let mut nature = SeededRng::new(4);
        let mut eve = SeededRng::new(5);
        transmit_and_measure(&mut frame, &bases, EveTap::None, 0.0, &mut nature, &mut eve).unwrap();
        assert!(frame.is_consumed());
        let second =
            transmit_and_measure(&mut frame, &bases, EveTap::None, 0.0, &mut nature, &mut eve);
        assert_eq!(second, Err(ChannelError::AlreadyConsumed));
    }

    #[test]
    fn basis_bit_encoding_round_trips() {
        let mut rng = SeededRng::new(9);
        let bases = random_bases(100, &mut rng);
        assert_eq!(bits_to_bases(&bases_to_bits(&bases)), bases);
    }

    #[test]
    fn mismatched_receiver_sees_coin_flips() {
        // All pulses rectilinear, all measurements diagonal: every outcome is
        // a nature draw, so it should look like a fair coin.
        let mut rng = SeededRng::new(21);
        let bits = BitString::zeros(20000);
        let bases = alloc::vec![Basis::Rectilinear; 20000];
        let to_measure = alloc::vec![Basis::Diagonal; 20000];
        let mut frame = QubitFrame::prepare(&bits, &bases);
        let mut eve = SeededRng::new(22);
        let (received, _) =
            transmit_and_measure(&mut frame, &to_measure, EveTap::None, 0.0, &mut rng, &mut eve)
                .unwrap();
        let ones = received.ones_fraction();
        assert!((ones - 0.5).abs() < 0.02, "ones fraction {ones}");
    }
}
