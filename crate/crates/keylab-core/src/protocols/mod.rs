//! The protocol classes under study, all speaking the same channel and
//! authentication interfaces so that experiments can swap one for another.
//!
//! Class runners return a [`ProtocolRun`]: the full lab record of one
//! session, including both parties' key material and coin-stream seeds.
//! Adversary code never reads a run directly; it goes through
//! [`ProtocolRun::eve_view`], which projects out exactly what the modeled
//! adversary can observe, plus whatever knowledge grants an experiment
//! explicitly hands over.

pub mod kdc;
pub mod oob;
pub mod pge;
pub mod seb;
pub mod ske;
pub mod two_phase;

use crate::auth::owf::OwfConfig;
use crate::auth::wcmac::WcMacKey;
use crate::auth::{
    AuthError, Authenticator, LamportAuthenticator, NullAuth, WcAuthenticator,
    LAMPORT_DIGEST_BITS,
};
use crate::bits::BitString;
use crate::qchannel::{EveTap, InterceptRecord};
use crate::qke::{run_uke_session, QkeStats, UkeOptions};
use crate::rng::{child_seed, stream, SeededRng};
use crate::session::ClassicalTap;
use crate::transcript::Transcript;
use crate::types::{
    Assumption, ChannelAccess, ConfigError, InitialKeys, ProtocolClassId, ProtocolConfig,
    SessionOutcome,
};
use alloc::vec::Vec;
use core::fmt;

/// Tag width for every message authentication code in the lab.
pub const MAC_TAG_BITS: u32 = 32;

/// Pad budget one authenticated quantum session is keyed for. The fixed
/// message schedule uses 25; the margin absorbs nothing today and exists so
/// the budget is not knife-edge against a schedule tweak.
pub const QKE_SESSION_MESSAGES: usize = 28;

/// Messages in one encrypted key transport session.
pub const SKE_SESSION_MESSAGES: usize = 3;

/// Preloaded signing keypairs per party for signature-based classes.
pub const SIGNING_POOL: usize = 4;

/// Bits of amplified output every quantum session sets aside as the next
/// session's authentication key.
pub fn recycle_reserve_bits() -> usize {
    WcMacKey::material_bits(MAC_TAG_BITS, QKE_SESSION_MESSAGES)
}

/// Ways a runner can be mis-assembled. Everything that can go wrong inside
/// a correctly assembled session is a [`SessionOutcome::Aborted`] instead.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolError {
    KeyShape { class: ProtocolClassId },
    Auth(AuthError),
    Config(ConfigError),
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolError::KeyShape { class } => {
                write!(f, "initial keys do not fit class {}", class.label())
            }
            ProtocolError::Auth(e) => write!(f, "authentication setup: {e}"),
            ProtocolError::Config(e) => write!(f, "configuration: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ProtocolError {}

impl From<AuthError> for ProtocolError {
    fn from(e: AuthError) -> Self {
        ProtocolError::Auth(e)
    }
}

impl From<ConfigError> for ProtocolError {
    fn from(e: ConfigError) -> Self {
        ProtocolError::Config(e)
    }
}

/// Complete record of one protocol session, from the lab's omniscient
/// perspective.
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub class: ProtocolClassId,
    pub config: ProtocolConfig,
    pub initial_keys: InitialKeys,
    pub outcome: SessionOutcome,
    pub transcript: Transcript,
    pub intercept: Option<InterceptRecord>,
    /// Seed replaying Alice's coin stream, and nothing else.
    pub r_a_seed: u64,
    /// Seed replaying Bob's coin stream.
    pub r_b_seed: u64,
    pub stats: Option<QkeStats>,
    pub recycled: Option<(BitString, BitString)>,
    pub assumptions: Vec<Assumption>,
}

/// What a particular adversary observed of a run.
#[derive(Debug, Clone)]
pub struct EveView {
    pub class: ProtocolClassId,
    pub ell: usize,
    pub transcript: Transcript,
    pub intercept: Option<InterceptRecord>,
}

impl ProtocolRun {
    /// Project the run down to one adversary's observations. The classical
    /// transcript is public at every access level; quantum measurement data
    /// exists only for an adversary who actively tapped the frame, since
    /// passive and delayed quantum access cannot copy unknown states.
    pub fn eve_view(&self, classical: ChannelAccess, quantum: ChannelAccess) -> EveView {
        let _ = classical;
        EveView {
            class: self.class,
            ell: self.config.ell,
            transcript: self.transcript.clone(),
            intercept: if quantum == ChannelAccess::Active {
                self.intercept.clone()
            } else {
                None
            },
        }
    }

    pub fn established_key(&self) -> Option<&BitString> {
        self.outcome.agreed_key()
    }
}

/// Output of one core exchange, before it is wrapped into a [`ProtocolRun`].
#[derive(Debug, Clone)]
pub struct CoreOutput {
    pub outcome: SessionOutcome,
    pub transcript: Transcript,
    pub intercept: Option<InterceptRecord>,
    pub stats: Option<QkeStats>,
    pub recycled: Option<(BitString, BitString)>,
}

fn assemble(
    class: ProtocolClassId,
    config: &ProtocolConfig,
    keys: &InitialKeys,
    core: CoreOutput,
) -> ProtocolRun {
    ProtocolRun {
        class,
        config: *config,
        initial_keys: keys.clone(),
        outcome: core.outcome,
        transcript: core.transcript,
        intercept: core.intercept,
        r_a_seed: child_seed(config.rng_seed, stream::ALICE),
        r_b_seed: child_seed(config.rng_seed, stream::BOB),
        stats: core.stats,
        recycled: core.recycled,
        assumptions: class.assumptions().to_vec(),
    }
}

/// Build the matching authenticator pair from the initial keys and hand it
/// to a core exchange. Both authenticated quantum runners and both
/// encrypted-transport variants are this combinator applied to their
/// unauthenticated cores, so "same keys, different channel discipline" is
/// true by construction rather than by parallel code.
pub fn authenticate_uke<F>(
    keys: &InitialKeys,
    owf: OwfConfig,
    refill_seed: u64,
    core: F,
) -> Result<CoreOutput, AuthError>
where
    F: FnOnce(&mut dyn Authenticator, &mut dyn Authenticator) -> CoreOutput,
{
    match keys {
        InitialKeys::None => Ok(core(&mut NullAuth, &mut NullAuth)),
        InitialKeys::Symmetric { key } => {
            let mut alice = WcAuthenticator::from_bits(MAC_TAG_BITS, key)?;
            let mut bob = WcAuthenticator::from_bits(MAC_TAG_BITS, key)?;
            Ok(core(&mut alice, &mut bob))
        }
        InitialKeys::Asymmetric { alice_signing, bob_signing } => {
            let alice_publics: Vec<_> = alice_signing.iter().map(|kp| kp.public()).collect();
            let bob_publics: Vec<_> = bob_signing.iter().map(|kp| kp.public()).collect();
            let mut alice = LamportAuthenticator::new(
                owf,
                alice_signing.clone(),
                bob_publics,
                SeededRng::derive(refill_seed, stream::ALICE_AUTH),
            );
            let mut bob = LamportAuthenticator::new(
                owf,
                bob_signing.clone(),
                alice_publics,
                SeededRng::derive(refill_seed, stream::BOB_AUTH),
            );
            Ok(core(&mut alice, &mut bob))
        }
    }
}

/// Initial key material of the right shape and size for a class, drawn from
/// `rng` (conventionally the `SETUP` stream of an experiment seed).
pub fn generate_initial_keys(
    class: ProtocolClassId,
    config: &ProtocolConfig,
    owf: OwfConfig,
    rng: &mut SeededRng,
) -> InitialKeys {
    match class {
        ProtocolClassId::Oob => InitialKeys::Symmetric { key: rng.bits(config.ell) },
        ProtocolClassId::Pge => InitialKeys::Symmetric { key: rng.bits(128) },
        ProtocolClassId::Seb => InitialKeys::Symmetric { key: rng.bits(seb::key_bits()) },
        ProtocolClassId::SkeMac => InitialKeys::Symmetric {
            key: rng.bits(WcMacKey::material_bits(MAC_TAG_BITS, SKE_SESSION_MESSAGES)),
        },
        ProtocolClassId::MacQke => InitialKeys::Symmetric { key: rng.bits(recycle_reserve_bits()) },
        ProtocolClassId::SkeSig | ProtocolClassId::SigQke => {
            let pool = |rng: &mut SeededRng| {
                (0..SIGNING_POOL)
                    .map(|_| {
                        crate::auth::lamport::LamportKeypair::generate(
                            owf,
                            LAMPORT_DIGEST_BITS,
                            rng,
                        )
                    })
                    .collect()
            };
            InitialKeys::Asymmetric { alice_signing: pool(rng), bob_signing: pool(rng) }
        }
    }
}

fn qke_core_output(run: crate::qke::UkeRun) -> CoreOutput {
    CoreOutput {
        outcome: run.outcome,
        transcript: run.transcript,
        intercept: run.intercept,
        stats: Some(run.stats),
        recycled: match (run.recycled_alice, run.recycled_bob) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        },
    }
}

/// Authenticated quantum key establishment with an information-theoretic
/// MAC on every classical message: the combinator applied to the quantum
/// engine with the symmetric key as pad material.
pub fn run_mac_qke(
    config: &ProtocolConfig,
    keys: &InitialKeys,
    quantum_tap: EveTap,
    classical_tap: &mut dyn ClassicalTap,
) -> Result<ProtocolRun, ProtocolError> {
    config.validate()?;
    if !matches!(keys, InitialKeys::Symmetric { .. }) {
        return Err(ProtocolError::KeyShape { class: ProtocolClassId::MacQke });
    }
    let options = UkeOptions { reserve: recycle_reserve_bits(), quantum_tap };
    let core = authenticate_uke(keys, OwfConfig::Strong, config.rng_seed, |a, b| {
        qke_core_output(run_uke_session(config, &options, a, b, classical_tap))
    })?;
    Ok(assemble(ProtocolClassId::MacQke, config, keys, core))
}

/// Authenticated quantum key establishment with one-time signatures and
/// in-band pool refills: the combinator applied to the same engine.
pub fn run_sig_qke(
    config: &ProtocolConfig,
    keys: &InitialKeys,
    owf: OwfConfig,
    quantum_tap: EveTap,
    classical_tap: &mut dyn ClassicalTap,
) -> Result<ProtocolRun, ProtocolError> {
    config.validate()?;
    if !matches!(keys, InitialKeys::Asymmetric { .. }) {
        return Err(ProtocolError::KeyShape { class: ProtocolClassId::SigQke });
    }
    let options = UkeOptions { reserve: recycle_reserve_bits(), quantum_tap };
    let core = authenticate_uke(keys, owf, config.rng_seed, |a, b| {
        qke_core_output(run_uke_session(config, &options, a, b, classical_tap))
    })?;
    Ok(assemble(ProtocolClassId::SigQke, config, keys, core))
}

/// Run any class through one entry point.
pub fn run_protocol(
    class: ProtocolClassId,
    config: &ProtocolConfig,
    keys: &InitialKeys,
    owf: OwfConfig,
    quantum_tap: EveTap,
    classical_tap: &mut dyn ClassicalTap,
) -> Result<ProtocolRun, ProtocolError> {
    match class {
        ProtocolClassId::Oob => oob::run(config, keys),
        ProtocolClassId::Pge => pge::run(config, keys),
        ProtocolClassId::Seb => seb::run(config, keys, classical_tap),
        ProtocolClassId::SkeMac | ProtocolClassId::SkeSig => {
            ske::run(class, config, keys, owf, classical_tap)
        }
        ProtocolClassId::MacQke => run_mac_qke(config, keys, quantum_tap, classical_tap),
        ProtocolClassId::SigQke => run_sig_qke(config, keys, owf, quantum_tap, classical_tap),
    }
}
