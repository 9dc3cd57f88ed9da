//! Compromise-timing experiments: what seizing long-term material is
//! worth before versus after the protected exchange.
//!
//! Two setups. In mediated mode the adversary takes over the key
//! distribution center, either after sessions completed (its records) or
//! while a session's issued key is still live. In two-phase mode the
//! adversary's computational break of the one-way function lands either
//! after a signature-bootstrapped chain finished or while the first
//! session's signatures were the only thing standing.

use super::{balanced_challenges, mitm, AttackError, RECOGNITION_CHANCE};
use crate::auth::lamport::LamportKeypair;
use crate::auth::owf::{prg_expand, OwfConfig};
use crate::auth::{Authenticator, WcAuthenticator};
use crate::protocols::kdc::run_kdc_mediated;
use crate::protocols::two_phase::{run_two_phase, signing_pool};
use crate::protocols::{seb, MAC_TAG_BITS, SIGNING_POOL};
use crate::qchannel::EveTap;
use crate::rng::{child_seed, stream, SeededRng};
use crate::session::{header, NoTap};
use crate::transcript::MessageKind;
use crate::types::{InitialKeys, Party, ProtocolClassId, ProtocolConfig};
use alloc::vec::Vec;

/// When the adversary's access lands relative to the protected exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompromiseTiming {
    /// Access while the compromised material still protects the exchange.
    Before,
    /// Access only after the exchange completed.
    After,
}

/// Outcome of seizing the distribution center.
#[derive(Debug, Clone, PartialEq)]
pub struct KdcCompromiseReport {
    pub timing: CompromiseTiming,
    pub trials: usize,
    /// Fraction of trials in which the center's material gave up the
    /// issued session key.
    pub session_key_recovered_rate: f64,
    /// Balanced-challenge recognition rate against the key the parties
    /// actually finished with.
    pub final_key_recognition_rate: f64,
    pub recognition_chance: f64,
    /// Before-timing only: fraction of trials in which both impersonation
    /// half-sessions completed.
    pub mitm_success_rate: Option<f64>,
}

/// Seize the center `trials` times at the given timing.
///
/// After the fact, the records decrypt every delivery leg, so the issued
/// session key falls out in full; the final key came out of the keyed
/// quantum phase and stays beyond recognition. Before the fact, the live
/// session key is the quantum phase's authentication key, and holding it
/// converts into a sustained woman-in-the-middle.
pub fn kdc_compromise(
    config: &ProtocolConfig,
    timing: CompromiseTiming,
    trials: usize,
    base_seed: u64,
) -> Result<KdcCompromiseReport, AttackError> {
    if trials == 0 {
        return Err(AttackError::NoTrials);
    }
    let cell = child_seed(base_seed, 0x006B_6463);
    let mut recovered = 0usize;
    let mut hits = 0usize;
    let mut challenges = 0usize;
    let mut mitm_complete = 0usize;
    for index in 0..trials {
        let trial = child_seed(cell, index as u64);
        let session_config =
            ProtocolConfig { rng_seed: child_seed(trial, stream::TRIAL), ..*config };
        let mediated = run_kdc_mediated(&session_config, EveTap::None, &mut NoTap)
            .expect("clean mediated flow runs");
        let mut eve = SeededRng::derive(trial, stream::EVE);
        match timing {
            CompromiseTiming::After => {
                let leg = mediated
                    .state
                    .alice_leg_transcript
                    .first_of_kind(MessageKind::KeyTransport)
                    .expect("delivery leg transports the key");
                let pad = prg_expand(
                    OwfConfig::Strong,
                    &mediated.state.alice_leg_key.slice(0, seb::ENC_SEED_BITS),
                    leg.payload.len(),
                );
                let candidate = leg.payload.xor(&pad).expect("pad matches payload length");
                if candidate == mediated.state.session_key {
                    recovered += 1;
                }
                if let Some(final_key) = mediated.qke.established_key() {
                    hits += balanced_challenges(final_key, None, &mut eve) as usize;
                    challenges += 2;
                }
            }
            CompromiseTiming::Before => {
                recovered += 1;
                let keys =
                    InitialKeys::Symmetric { key: mediated.state.session_key.clone() };
                let outcome = mitm(ProtocolClassId::MacQke, &session_config, &keys, trial)
                    .expect("issued keys fit the keyed phase");
                if let Some((alice_side, _)) = &outcome.keys {
                    mitm_complete += 1;
                    hits += balanced_challenges(alice_side, Some(alice_side), &mut eve) as usize;
                    challenges += 2;
                }
            }
        }
    }
    let recognition = if challenges == 0 {
        RECOGNITION_CHANCE
    } else {
        hits as f64 / challenges as f64
    };
    Ok(KdcCompromiseReport {
        timing,
        trials,
        session_key_recovered_rate: recovered as f64 / trials as f64,
        final_key_recognition_rate: recognition,
        recognition_chance: RECOGNITION_CHANCE,
        mitm_success_rate: match timing {
            CompromiseTiming::Before => Some(mitm_complete as f64 / trials as f64),
            CompromiseTiming::After => None,
        },
    })
}

/// Outcome of breaking the one-way function against a two-phase chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhaseBreakReport {
    pub timing: CompromiseTiming,
    pub sessions: usize,
    /// Session keys the adversary ended up holding.
    pub keys_recovered: usize,
    /// Balanced-challenge recognition rate across the chain's keys.
    pub recognition_rate: f64,
    pub recognition_chance: f64,
    /// Whether impersonated chains ran end to end in the parties' stead.
    pub chain_compromised: bool,
    /// Whether an attempt to keep the chain going on guessed
    /// authentication keys was rejected.
    pub continuation_blocked: bool,
}

/// Run a `sessions`-long chain over an invertible toy one-way function and
/// break that function at the given timing.
///
/// Broken after the chain: every public verification key inverts, yet no
/// session key falls out, because only the first session ever leaned on
/// the function and its key came from the quantum phase. Broken during the
/// first session: the recovered signing pools impersonate both parties,
/// and the whole chain inherits the compromise.
pub fn two_phase_owf_break(
    config: &ProtocolConfig,
    sessions: usize,
    base_seed: u64,
    timing: CompromiseTiming,
) -> Result<TwoPhaseBreakReport, AttackError> {
    if sessions == 0 {
        return Err(AttackError::NoTrials);
    }
    let owf = OwfConfig::toy(12).expect("12-bit toy width is valid");
    let root = child_seed(base_seed, 0x006F_7766);
    let pool = signing_pool(owf, SIGNING_POOL, &mut SeededRng::derive(root, stream::SETUP));
    let InitialKeys::Asymmetric { alice_signing, bob_signing } = &pool else {
        unreachable!("signing_pool builds asymmetric keys");
    };
    let mut eve = SeededRng::derive(root, stream::EVE);
    let mut hits = 0usize;
    let mut challenges = 0usize;
    match timing {
        CompromiseTiming::After => {
            let chain_config = ProtocolConfig { rng_seed: child_seed(root, stream::TRIAL), ..*config };
            let outcome = run_two_phase(&chain_config, sessions, pool.clone(), owf)
                .expect("valid chain setup");
            let inverted = alice_signing
                .iter()
                .chain(bob_signing)
                .all(|kp| LamportKeypair::recover_from_public(&kp.public()).is_some());
            debug_assert!(inverted, "toy one-way functions invert by scan");
            for key in outcome.keys() {
                hits += balanced_challenges(key, None, &mut eve) as usize;
                challenges += 2;
            }
            let reserve = outcome
                .chain
                .sessions
                .iter()
                .rev()
                .find_map(|run| run.recycled.clone())
                .map(|(reserve, _)| reserve)
                .expect("established sessions reserve");
            let guessed = eve.bits(reserve.len());
            let mut forger = WcAuthenticator::from_bits(MAC_TAG_BITS, &guessed)
                .expect("guessed material sized like the reserve");
            let mut truth = WcAuthenticator::from_bits(MAC_TAG_BITS, &reserve)
                .expect("reserve sized for the next session");
            let ctx = header(Party::Alice, MessageKind::BasisDisclosure, 0);
            let payload = eve.bits(32);
            let tag = forger
                .protect(&ctx, &payload)
                .expect("fresh forger holds pads")
                .expect("one-time MACs always tag");
            let continuation_blocked = truth.verify(&ctx, &payload, Some(&tag)).is_err();
            let recognition = if challenges == 0 {
                RECOGNITION_CHANCE
            } else {
                hits as f64 / challenges as f64
            };
            Ok(TwoPhaseBreakReport {
                timing,
                sessions,
                keys_recovered: 0,
                recognition_rate: recognition,
                recognition_chance: RECOGNITION_CHANCE,
                chain_compromised: false,
                continuation_blocked,
            })
        }
        CompromiseTiming::Before => {
            let recover = |pool: &Vec<LamportKeypair>| -> Vec<LamportKeypair> {
                pool.iter()
                    .map(|kp| {
                        LamportKeypair::recover_from_public(&kp.public())
                            .expect("toy one-way functions invert by scan")
                    })
                    .collect()
            };
            let recovered_alice = recover(alice_signing);
            let recovered_bob = recover(bob_signing);
            let cfg_a =
                ProtocolConfig { rng_seed: child_seed(root, stream::MITM_A), ..*config };
            let cfg_b =
                ProtocolConfig { rng_seed: child_seed(root, stream::MITM_B), ..*config };
            let with_alice = run_two_phase(
                &cfg_a,
                sessions,
                InitialKeys::Asymmetric {
                    alice_signing: alice_signing.clone(),
                    bob_signing: recovered_bob,
                },
                owf,
            )
            .expect("valid chain setup");
            let with_bob = run_two_phase(
                &cfg_b,
                sessions,
                InitialKeys::Asymmetric {
                    alice_signing: recovered_alice,
                    bob_signing: bob_signing.clone(),
                },
                owf,
            )
            .expect("valid chain setup");
            let alice_keys = with_alice.keys();
            for key in &alice_keys {
                hits += balanced_challenges(key, Some(key), &mut eve) as usize;
                challenges += 2;
            }
            let chain_compromised = with_alice.halted.is_none()
                && with_bob.halted.is_none()
                && alice_keys.len() == sessions
                && with_bob.keys().len() == sessions;
            let recognition = if challenges == 0 {
                RECOGNITION_CHANCE
            } else {
                hits as f64 / challenges as f64
            };
            Ok(TwoPhaseBreakReport {
                timing,
                sessions,
                keys_recovered: alice_keys.len(),
                recognition_rate: recognition,
                recognition_chance: RECOGNITION_CHANCE,
                chain_compromised,
                continuation_blocked: false,
            })
        }
    }
}
