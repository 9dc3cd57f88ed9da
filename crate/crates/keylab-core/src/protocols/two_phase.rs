//! The two-phase session manager: signatures buy the first session, and
//! every session's output funds the next session's one-time MAC key.
//!
//! After session one completes, no later session depends on any
//! computational assumption; the signature scheme only ever had to hold for
//! the duration of that first exchange. The chain halts on any abort and
//! can be advanced again from its surviving state.

use super::{
    run_mac_qke, run_sig_qke, ProtocolError, ProtocolRun, MAC_TAG_BITS,
};
use crate::auth::lamport::LamportKeypair;
use crate::auth::owf::OwfConfig;
use crate::auth::wcmac::WcMacKey;
use crate::auth::LAMPORT_DIGEST_BITS;
use crate::bits::BitString;
use crate::qchannel::EveTap;
use crate::rng::{child_seed, stream, SeededRng};
use crate::session::NoTap;
use crate::types::{AbortReason, InitialKeys, ProtocolConfig};
use alloc::vec::Vec;

/// Signing-key pools for both parties, `count` keypairs each.
pub fn signing_pool(owf: OwfConfig, count: usize, rng: &mut SeededRng) -> InitialKeys {
    let pool = |rng: &mut SeededRng| {
        (0..count).map(|_| LamportKeypair::generate(owf, LAMPORT_DIGEST_BITS, rng)).collect()
    };
    InitialKeys::Asymmetric { alice_signing: pool(rng), bob_signing: pool(rng) }
}

fn session_seed(root: u64, index: usize, attempt: u64) -> u64 {
    child_seed(child_seed(child_seed(root, stream::TRIAL), index as u64), attempt)
}

/// The chain's live state: completed sessions plus what the next one needs.
#[derive(Debug, Clone)]
pub struct TwoPhaseChain {
    pub config: ProtocolConfig,
    owf: OwfConfig,
    initial_keys: InitialKeys,
    pub sessions: Vec<ProtocolRun>,
    mac_key: Option<BitString>,
    next_index: usize,
    attempt: u64,
}

impl TwoPhaseChain {
    pub fn new(
        config: ProtocolConfig,
        initial_keys: InitialKeys,
        owf: OwfConfig,
    ) -> Result<Self, ProtocolError> {
        config.validate()?;
        if !matches!(initial_keys, InitialKeys::Asymmetric { .. }) {
            return Err(ProtocolError::KeyShape {
                class: crate::types::ProtocolClassId::SigQke,
            });
        }
        Ok(TwoPhaseChain {
            config,
            owf,
            initial_keys,
            sessions: Vec::new(),
            mac_key: None,
            next_index: 0,
            attempt: 0,
        })
    }

    /// Index of the session the next [`TwoPhaseChain::advance`] will attempt.
    pub fn next_index(&self) -> usize {
        self.next_index
    }

    pub fn completed_sessions(&self) -> usize {
        self.next_index
    }

    /// Attempt the next session. On success the reserve segment of its
    /// output becomes the following session's MAC key. On an abort the
    /// chain does not advance; calling again retries with fresh coins from
    /// the surviving reserve.
    pub fn advance(&mut self) -> Result<&ProtocolRun, ProtocolError> {
        let seed = session_seed(self.config.rng_seed, self.next_index, self.attempt);
        self.attempt += 1;
        let session_config = ProtocolConfig { rng_seed: seed, ..self.config };
        let run = if self.next_index == 0 {
            run_sig_qke(&session_config, &self.initial_keys, self.owf, EveTap::None, &mut NoTap)?
        } else {
            let key = self.mac_key.clone().expect("a completed session funded this one");
            run_mac_qke(
                &session_config,
                &InitialKeys::Symmetric { key },
                EveTap::None,
                &mut NoTap,
            )?
        };
        if run.outcome.is_established() {
            let (reserve_a, reserve_b) =
                run.recycled.clone().expect("established quantum sessions reserve");
            debug_assert_eq!(reserve_a, reserve_b);
            self.mac_key = Some(reserve_a);
            self.next_index += 1;
        }
        self.sessions.push(run);
        Ok(self.sessions.last().expect("just pushed"))
    }
}

/// Result of driving a chain toward a target session count.
#[derive(Debug, Clone)]
pub struct TwoPhaseOutcome {
    pub chain: TwoPhaseChain,
    /// Set when the chain stopped early: which session aborted and why.
    pub halted: Option<(usize, AbortReason)>,
}

impl TwoPhaseOutcome {
    /// The established session keys, in order.
    pub fn keys(&self) -> Vec<&BitString> {
        self.chain.sessions.iter().filter_map(|run| run.established_key()).collect()
    }
}

/// Run up to `session_count` chained sessions, stopping at the first abort.
pub fn run_two_phase(
    config: &ProtocolConfig,
    session_count: usize,
    initial_keys: InitialKeys,
    owf: OwfConfig,
) -> Result<TwoPhaseOutcome, ProtocolError> {
    let mut chain = TwoPhaseChain::new(*config, initial_keys, owf)?;
    while chain.completed_sessions() < session_count {
        let index = chain.next_index();
        let run = chain.advance()?;
        if let Some(reason) = run.outcome.abort_reason() {
            let reason = reason.clone();
            return Ok(TwoPhaseOutcome { chain, halted: Some((index, reason)) });
        }
    }
    Ok(TwoPhaseOutcome { chain, halted: None })
}

/// The authentication budget contrast: a MAC session keyed for fewer
/// messages than its schedule needs fails with key exhaustion, while a
/// signature session started from the minimum pool finishes the same
/// schedule by refilling in band.
pub fn exhaustion_contrast(
    config: &ProtocolConfig,
    starved_messages: usize,
) -> Result<(ProtocolRun, ProtocolRun), ProtocolError> {
    let mut setup = SeededRng::derive(config.rng_seed, stream::SETUP);
    let starved = InitialKeys::Symmetric {
        key: setup.bits(WcMacKey::material_bits(MAC_TAG_BITS, starved_messages)),
    };
    let mac = run_mac_qke(config, &starved, EveTap::None, &mut NoTap)?;
    let sig_keys = signing_pool(OwfConfig::Strong, 2, &mut setup);
    let sig = run_sig_qke(config, &sig_keys, OwfConfig::Strong, EveTap::None, &mut NoTap)?;
    Ok((mac, sig))
}
