//! The key-vs-uniform distinguisher game.
//!
//! A distinguisher receives one sample per trial: the passive wire view of
//! a session plus a candidate session key. In the real system the candidate
//! is the key the parties actually agreed on; in the ideal system it is a
//! fresh uniform string of the same length, drawn independently of the
//! session. The empirical advantage of a distinguisher is the absolute
//! difference between its fire rates on two ensembles of such samples.
//!
//! The bias detectors fire on deviations beyond [`DETECTOR_SIGMA`] standard
//! errors. Under a uniform key that happens with probability about 5e-4, so
//! advantage estimates against a well-behaved system concentrate near zero
//! instead of fluctuating around some large null rate.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::adversary::recompute_guess;
use crate::auth::owf::{prg_expand, OwfConfig};
use crate::bits::BitString;
use crate::metrics::stats::{ConfidenceInterval, Z_95};
use crate::protocols::{generate_initial_keys, run_protocol, EveView};
use crate::qchannel::EveTap;
use crate::rng::{child_seed, stream, SeededRng};
use crate::session::NoTap;
use crate::types::{ChannelAccess, InitialKeys, ProtocolClassId, ProtocolConfig};

/// Threshold, in standard errors of a balanced coin, beyond which the
/// registered bias detectors fire.
pub const DETECTOR_SIGMA: f64 = 3.5;

/// One observation handed to a distinguisher.
#[derive(Debug, Clone)]
pub struct SystemSample {
    /// Passive wire view of the session that produced the candidate key.
    pub view: EveView,
    /// The long-term setup keys, present only when the game grants them.
    pub revealed_keys: Option<InitialKeys>,
    /// The candidate session key to judge.
    pub key: BitString,
}

/// A decision rule over samples. `true` means "this looks like the real
/// system".
pub trait Distinguisher {
    fn name(&self) -> &'static str;
    fn decide(&self, sample: &SystemSample) -> bool;
}

/// Fires when the candidate key equals what the public wire data plus any
/// granted setup keys determine it to be.
pub struct RecomputeMatch;

impl Distinguisher for RecomputeMatch {
    fn name(&self) -> &'static str {
        "recompute-match"
    }

    fn decide(&self, sample: &SystemSample) -> bool {
        recompute_guess(sample.view.class, &sample.view, sample.revealed_keys.as_ref())
            .is_some_and(|guess| guess == sample.key)
    }
}

/// Fires when the fraction of ones in the candidate key sits further from
/// one half than [`DETECTOR_SIGMA`] standard errors allow.
pub struct MonobitBias;

impl Distinguisher for MonobitBias {
    fn name(&self) -> &'static str {
        "monobit-bias"
    }

    fn decide(&self, sample: &SystemSample) -> bool {
        let n = sample.key.len();
        if n == 0 {
            return false;
        }
        let deviation = libm::fabs(sample.key.ones_fraction() - 0.5);
        deviation > DETECTOR_SIGMA * 0.5 / libm::sqrt(n as f64)
    }
}

/// Fires when the candidate key agrees unusually well or unusually badly
/// with a pseudorandom probe stretched from the transcript digest. A key
/// that is a public function of the wire traffic correlates with such
/// probes; a key independent of the traffic matches about half the bits.
pub struct TranscriptCorrelation;

impl Distinguisher for TranscriptCorrelation {
    fn name(&self) -> &'static str {
        "transcript-correlation"
    }

    fn decide(&self, sample: &SystemSample) -> bool {
        let n = sample.key.len();
        if n == 0 {
            return false;
        }
        let digest = BitString::from_u64(sample.view.transcript.digest64(), 64);
        let probe = prg_expand(OwfConfig::Strong, &digest, n);
        let agreeing = (0..n).filter(|&i| probe.get(i) == sample.key.get(i)).count();
        let fraction = agreeing as f64 / n as f64;
        libm::fabs(fraction - 0.5) > DETECTOR_SIGMA * 0.5 / libm::sqrt(n as f64)
    }
}

/// The standing library of decision rules every advantage report covers.
pub fn registered() -> Vec<Box<dyn Distinguisher>> {
    vec![
        Box::new(RecomputeMatch),
        Box::new(MonobitBias),
        Box::new(TranscriptCorrelation),
    ]
}

/// Which ensemble a sample generator draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// Honest sessions; the candidate key is the agreed key. The flag
    /// grants the distinguisher the long-term setup keys.
    Real { reveal_keys: bool },
    /// Honest sessions, but the candidate key is replaced by a fresh
    /// uniform string of the same length.
    Ideal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistinguishError {
    NoTrials,
    NoSessions,
}

impl fmt::Display for DistinguishError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistinguishError::NoTrials => f.write_str("the game needs at least one trial"),
            DistinguishError::NoSessions => {
                f.write_str("no trial produced an established session on both sides")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DistinguishError {}

/// Outcome of the game for one decision rule.
#[derive(Debug, Clone, PartialEq)]
pub struct DistinguisherResult {
    pub name: &'static str,
    /// Fire rate on the left ensemble.
    pub left_rate: f64,
    /// Fire rate on the right ensemble.
    pub right_rate: f64,
    /// Absolute difference of the fire rates.
    pub advantage: f64,
    /// Number of sample pairs both rates are estimated from.
    pub trials: usize,
    /// Normal-approximation interval for the advantage, clamped to [0, 1].
    /// The clamp mirrors the estimate itself, which folds the sign away.
    pub confidence: ConfidenceInterval,
}

/// Per-rule results of one game, plus the bookkeeping to reproduce it.
#[derive(Debug, Clone)]
pub struct AdvantageReport {
    pub class: ProtocolClassId,
    pub left: SystemKind,
    pub right: SystemKind,
    /// Trial indices attempted per ensemble.
    pub trials_requested: usize,
    /// Pairs in which both ensembles produced an established session.
    pub trials_used: usize,
    pub base_seed: u64,
    pub results: Vec<DistinguisherResult>,
}

impl AdvantageReport {
    pub fn max_advantage(&self) -> f64 {
        self.results.iter().map(|r| r.advantage).fold(0.0, f64::max)
    }

    pub fn best(&self) -> Option<&DistinguisherResult> {
        self.results
            .iter()
            .max_by(|a, b| a.advantage.partial_cmp(&b.advantage).unwrap_or(core::cmp::Ordering::Equal))
    }
}

fn difference_interval(left: f64, right: f64, trials: usize) -> ConfidenceInterval {
    let n = trials as f64;
    let variance = left * (1.0 - left) / n + right * (1.0 - right) / n;
    let half = Z_95 * libm::sqrt(variance);
    let estimate = libm::fabs(left - right);
    ConfidenceInterval {
        low: (estimate - half).max(0.0),
        high: (estimate + half).min(1.0),
    }
}

/// Draw one sample of the given kind. Returns `None` when the underlying
/// session aborts, which cannot happen under a noiseless default
/// configuration but keeps noisy configurations honest.
pub fn sample(
    kind: SystemKind,
    class: ProtocolClassId,
    config: &ProtocolConfig,
    trial_seed: u64,
) -> Option<SystemSample> {
    let session_config =
        ProtocolConfig { rng_seed: child_seed(trial_seed, stream::TRIAL), ..*config };
    let mut setup = SeededRng::derive(trial_seed, stream::SETUP);
    let keys = generate_initial_keys(class, &session_config, OwfConfig::Strong, &mut setup);
    let run = run_protocol(class, &session_config, &keys, OwfConfig::Strong, EveTap::None, &mut NoTap)
        .ok()?;
    let agreed = run.established_key()?.clone();
    let view = run.eve_view(ChannelAccess::Passive, ChannelAccess::Passive);
    match kind {
        SystemKind::Real { reveal_keys } => Some(SystemSample {
            view,
            revealed_keys: reveal_keys.then(|| run.initial_keys.clone()),
            key: agreed,
        }),
        SystemKind::Ideal => {
            let mut ideal = SeededRng::derive(trial_seed, stream::IDEAL);
            let key = ideal.bits(agreed.len());
            Some(SystemSample { view, revealed_keys: None, key })
        }
    }
}

/// Play the game with a caller-supplied rule set. The two ensembles use
/// disjoint seed branches, so even two ideal systems are sampled
/// independently rather than echoing each other.
pub fn advantage_game_with(
    rules: &[Box<dyn Distinguisher>],
    class: ProtocolClassId,
    config: &ProtocolConfig,
    left: SystemKind,
    right: SystemKind,
    trials: usize,
    base_seed: u64,
) -> Result<AdvantageReport, DistinguishError> {
    if trials == 0 {
        return Err(DistinguishError::NoTrials);
    }
    let left_cell = child_seed(base_seed, 0x4C45_4654);
    let right_cell = child_seed(base_seed, 0x5249_4748);
    let mut left_fires = vec![0usize; rules.len()];
    let mut right_fires = vec![0usize; rules.len()];
    let mut used = 0usize;
    for index in 0..trials {
        let left_sample = sample(left, class, config, child_seed(left_cell, index as u64));
        let right_sample = sample(right, class, config, child_seed(right_cell, index as u64));
        let (Some(left_sample), Some(right_sample)) = (left_sample, right_sample) else {
            continue;
        };
        used += 1;
        for (slot, rule) in rules.iter().enumerate() {
            if rule.decide(&left_sample) {
                left_fires[slot] += 1;
            }
            if rule.decide(&right_sample) {
                right_fires[slot] += 1;
            }
        }
    }
    if used == 0 {
        return Err(DistinguishError::NoSessions);
    }
    let results = rules
        .iter()
        .enumerate()
        .map(|(slot, rule)| {
            let left_rate = left_fires[slot] as f64 / used as f64;
            let right_rate = right_fires[slot] as f64 / used as f64;
            DistinguisherResult {
                name: rule.name(),
                left_rate,
                right_rate,
                advantage: libm::fabs(left_rate - right_rate),
                trials: used,
                confidence: difference_interval(left_rate, right_rate, used),
            }
        })
        .collect();
    Ok(AdvantageReport {
        class,
        left,
        right,
        trials_requested: trials,
        trials_used: used,
        base_seed,
        results,
    })
}

/// Play the game with the registered rule library.
pub fn advantage_game(
    class: ProtocolClassId,
    config: &ProtocolConfig,
    left: SystemKind,
    right: SystemKind,
    trials: usize,
    base_seed: u64,
) -> Result<AdvantageReport, DistinguishError> {
    advantage_game_with(&registered(), class, config, left, right, trials, base_seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    const REAL_OPEN: SystemKind = SystemKind::Real { reveal_keys: true };
    const REAL_SEALED: SystemKind = SystemKind::Real { reveal_keys: false };

    #[test]
    fn revealed_transport_key_makes_the_session_key_recomputable() {
        let config = ProtocolConfig::default();
        let report = advantage_game(
            ProtocolClassId::Seb,
            &config,
            REAL_OPEN,
            SystemKind::Ideal,
            60,
            411,
        )
        .unwrap();
        let recompute =
            report.results.iter().find(|r| r.name == "recompute-match").unwrap();
        assert_eq!(recompute.left_rate, 1.0);
        assert_eq!(recompute.right_rate, 0.0);
        assert_eq!(recompute.advantage, 1.0);
        assert_eq!(report.max_advantage(), 1.0);
        assert_eq!(report.best().unwrap().name, "recompute-match");
    }

    #[test]
    fn quantum_output_defeats_every_registered_rule() {
        let config = ProtocolConfig::default();
        let report = advantage_game(
            ProtocolClassId::MacQke,
            &config,
            REAL_SEALED,
            SystemKind::Ideal,
            120,
            412,
        )
        .unwrap();
        assert_eq!(report.trials_used, 120);
        for result in &report.results {
            assert!(
                result.advantage <= 0.05,
                "{} fired apart: {:?}",
                result.name,
                result
            );
        }
    }

    #[test]
    fn two_ideal_ensembles_are_indistinguishable() {
        let config = ProtocolConfig::default();
        let report = advantage_game(
            ProtocolClassId::Pge,
            &config,
            SystemKind::Ideal,
            SystemKind::Ideal,
            150,
            413,
        )
        .unwrap();
        for result in &report.results {
            assert!(result.advantage <= 0.03, "{:?}", result);
        }
    }

    #[test]
    fn game_is_deterministic_in_the_seed() {
        let config = ProtocolConfig::default();
        let once = advantage_game(
            ProtocolClassId::Seb,
            &config,
            REAL_OPEN,
            SystemKind::Ideal,
            25,
            77,
        )
        .unwrap();
        let again = advantage_game(
            ProtocolClassId::Seb,
            &config,
            REAL_OPEN,
            SystemKind::Ideal,
            25,
            77,
        )
        .unwrap();
        assert_eq!(once.results, again.results);
    }

    struct FirstTwoBits;

    impl Distinguisher for FirstTwoBits {
        fn name(&self) -> &'static str {
            "first-two-bits"
        }

        fn decide(&self, sample: &SystemSample) -> bool {
            sample.key.len() >= 2 && sample.key.get(0) && sample.key.get(1)
        }
    }

    #[test]
    fn interval_tightens_as_trials_grow() {
        let config = ProtocolConfig::default();
        let rules: Vec<Box<dyn Distinguisher>> = vec![Box::new(FirstTwoBits)];
        let narrow = advantage_game_with(
            &rules,
            ProtocolClassId::Oob,
            &config,
            REAL_SEALED,
            SystemKind::Ideal,
            240,
            99,
        )
        .unwrap();
        let wide = advantage_game_with(
            &rules,
            ProtocolClassId::Oob,
            &config,
            REAL_SEALED,
            SystemKind::Ideal,
            60,
            99,
        )
        .unwrap();
        let ratio = wide.results[0].confidence.width() / narrow.results[0].confidence.width();
        assert!(ratio >= 1.3, "ratio {ratio}");
        assert!(narrow.results[0].advantage < 0.25);
    }

    #[test]
    fn zero_trials_is_an_error() {
        let config = ProtocolConfig::default();
        assert_eq!(
            advantage_game(
                ProtocolClassId::Oob,
                &config,
                REAL_SEALED,
                SystemKind::Ideal,
                0,
                5
            )
            .unwrap_err(),
            DistinguishError::NoTrials
        );
    }
}
