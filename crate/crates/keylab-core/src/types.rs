//! Shared vocabulary for the lab: parties, protocol classes, adversary
//! capabilities, session configuration, and session outcomes.

use crate::auth::lamport::LamportKeypair;
use crate::bits::BitString;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// A participant in a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Party {
    Alice,
    Bob,
    Kdc,
}

impl Party {
    pub fn index(self) -> u8 {
        match self {
            Party::Alice => 0,
            Party::Bob => 1,
            Party::Kdc => 2,
        }
    }

    pub fn from_index(index: u8) -> Option<Party> {
        match index {
            0 => Some(Party::Alice),
            1 => Some(Party::Bob),
            2 => Some(Party::Kdc),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
            Party::Kdc => "kdc",
        }
    }
}

/// Computational or setup assumptions a protocol's security rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assumption {
    /// The initial key was delivered over a channel the adversary never saw.
    OutOfBandDelivery,
    /// A one-way function stays hard for as long as the key must stay secret.
    OneWayFunction,
    /// A one-way function stays hard only while the session is running;
    /// breaking it afterwards reveals nothing about the established key.
    OneWayFunctionDuringSession,
    /// A trapdoor predicate (quadratic residuosity here) stays hard.
    TrapdoorPredicate,
}

impl Assumption {
    pub fn label(self) -> &'static str {
        match self {
            Assumption::OutOfBandDelivery => "out-of-band-delivery",
            Assumption::OneWayFunction => "one-way-function",
            Assumption::OneWayFunctionDuringSession => "one-way-function-during-session",
            Assumption::TrapdoorPredicate => "trapdoor-predicate",
        }
    }
}

/// The key-establishment protocol families the lab implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProtocolClassId {
    /// Out-of-band: the session secret is the pre-shared key itself.
    Oob,
    /// Pseudorandom generator expansion of the pre-shared key.
    Pge,
    /// Secret equals broadcast: one-time-pad transport under a MAC.
    Seb,
    /// Computational key exchange over an ephemeral trapdoor predicate,
    /// authenticated with a one-time MAC.
    SkeMac,
    /// Same exchange, authenticated with one-time signatures.
    SkeSig,
    /// Quantum key establishment authenticated with a one-time MAC.
    MacQke,
    /// Quantum key establishment authenticated with one-time signatures.
    SigQke,
}

impl ProtocolClassId {
    pub const ALL: [ProtocolClassId; 7] = [
        ProtocolClassId::Oob,
        ProtocolClassId::Pge,
        ProtocolClassId::Seb,
        ProtocolClassId::SkeMac,
        ProtocolClassId::SkeSig,
        ProtocolClassId::MacQke,
        ProtocolClassId::SigQke,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ProtocolClassId::Oob => "oob",
            ProtocolClassId::Pge => "pge",
            ProtocolClassId::Seb => "seb",
            ProtocolClassId::SkeMac => "ske-mac",
            ProtocolClassId::SkeSig => "ske-sig",
            ProtocolClassId::MacQke => "mac-qke",
            ProtocolClassId::SigQke => "sig-qke",
        }
    }

    pub fn parse(s: &str) -> Option<ProtocolClassId> {
        Self::ALL.into_iter().find(|c| c.label() == s)
    }

    pub fn uses_quantum(self) -> bool {
        matches!(self, ProtocolClassId::MacQke | ProtocolClassId::SigQke)
    }

    /// Whether the established secret is a function of the transcript and the
    /// two parties' local coins alone.
    pub fn key_from_coins(self) -> bool {
        matches!(self, ProtocolClassId::SkeMac | ProtocolClassId::SkeSig)
    }

    pub fn assumptions(self) -> &'static [Assumption] {
        match self {
            ProtocolClassId::Oob => &[Assumption::OutOfBandDelivery],
            ProtocolClassId::Pge => &[Assumption::OneWayFunction],
            ProtocolClassId::Seb => &[],
            ProtocolClassId::SkeMac => &[Assumption::TrapdoorPredicate],
            ProtocolClassId::SkeSig => {
                &[Assumption::TrapdoorPredicate, Assumption::OneWayFunction]
            }
            ProtocolClassId::MacQke => &[],
            ProtocolClassId::SigQke => &[Assumption::OneWayFunctionDuringSession],
        }
    }
}

impl fmt::Display for ProtocolClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Pre-shared material the parties hold before a session starts.
#[derive(Debug, Clone)]
pub enum InitialKeys {
    /// No pre-shared material (unauthenticated runs).
    None,
    /// Both parties hold the same bit string.
    Symmetric { key: BitString },
    /// Each party holds its own signing keypairs and the peer's public keys
    /// (the public halves are derivable from the keypairs).
    Asymmetric {
        alice_signing: Vec<LamportKeypair>,
        bob_signing: Vec<LamportKeypair>,
    },
}

impl InitialKeys {
    pub fn symmetric(&self) -> Option<&BitString> {
        match self {
            InitialKeys::Symmetric { key } => Some(key),
            _ => None,
        }
    }
}

/// What an adversary may do with one channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelAccess {
    /// Observe traffic as it flows. On the quantum channel this grants
    /// nothing: observation is measurement, and measurement is active.
    Passive,
    /// Obtain a recording after the session ends. Quantum states cannot be
    /// recorded for later, so on the quantum channel this also grants nothing.
    Delayed,
    /// Intercept, modify, inject.
    Active,
}

impl ChannelAccess {
    pub fn letter(self) -> char {
        match self {
            ChannelAccess::Passive => 'p',
            ChannelAccess::Delayed => 'd',
            ChannelAccess::Active => 'a',
        }
    }

    pub fn parse(ch: char) -> Option<ChannelAccess> {
        match ch {
            'p' => Some(ChannelAccess::Passive),
            'd' => Some(ChannelAccess::Delayed),
            'a' => Some(ChannelAccess::Active),
            _ => None,
        }
    }
}

/// Adversary capability as a (classical channel, quantum channel) pair,
/// plus whether the parties' initial keys have been handed to Eve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AdversarySpec {
    pub classical: ChannelAccess,
    pub quantum: ChannelAccess,
    pub initial_keys_revealed: bool,
}

impl AdversarySpec {
    pub fn new(classical: ChannelAccess, quantum: ChannelAccess) -> Self {
        AdversarySpec { classical, quantum, initial_keys_revealed: false }
    }

    pub fn revealed(mut self) -> Self {
        self.initial_keys_revealed = true;
        self
    }

    /// The capability pairs the capability table reports, weakest first.
    /// The reveal flag is left off; experiments set it per row.
    pub fn table_cells() -> [AdversarySpec; 5] {
        use ChannelAccess::{Active, Delayed, Passive};
        [
            AdversarySpec::new(Passive, Passive),
            AdversarySpec::new(Delayed, Delayed),
            AdversarySpec::new(Active, Passive),
            AdversarySpec::new(Active, Delayed),
            AdversarySpec::new(Active, Active),
        ]
    }

    /// Sustained interception of both channels, the only capability under
    /// which a full member-in-the-middle position can be held.
    pub fn is_full_mitm(self) -> bool {
        self.classical == ChannelAccess::Active && self.quantum == ChannelAccess::Active
    }

    pub fn notation(self) -> String {
        let mut s = String::new();
        s.push('(');
        s.push(self.classical.letter());
        s.push(',');
        s.push(self.quantum.letter());
        s.push(')');
        s
    }

    pub fn parse(s: &str) -> Option<AdversarySpec> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let mut parts = trimmed.split(',');
        let classical = ChannelAccess::parse(parts.next()?.trim().chars().next()?)?;
        let quantum = ChannelAccess::parse(parts.next()?.trim().chars().next()?)?;
        if parts.next().is_some() {
            return None;
        }
        Some(AdversarySpec::new(classical, quantum))
    }
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.notation())
    }
}

/// Per-session tunables shared by every protocol class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    /// Raw pulses to send on the quantum channel; 0 scales automatically
    /// from `ell`.
    pub n_pulses: usize,
    /// Requested length of the established secret in bits.
    pub ell: usize,
    /// Abort when the estimated error rate exceeds this.
    pub qber_abort_threshold: f64,
    /// Physical flip probability per channel leg.
    pub noise_flip_prob: f64,
    /// Fraction of sifted bits disclosed for error estimation.
    pub sample_fraction: f64,
    /// Bit width of the trapdoor modulus for the computational exchange.
    pub gm_modulus_bits: u32,
    /// Root seed for every stream the session draws on.
    pub rng_seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            n_pulses: 0,
            ell: 128,
            qber_abort_threshold: 0.11,
            noise_flip_prob: 0.0,
            sample_fraction: 0.5,
            gm_modulus_bits: 24,
            rng_seed: 1,
        }
    }
}

/// Configuration rejected before a session starts.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    BadSecretLength { ell: usize },
    BadThreshold { value: f64 },
    BadSampleFraction { value: f64 },
    BadNoise { value: f64 },
    BadModulusBits { bits: u32 },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::BadSecretLength { ell } => {
                write!(f, "secret length {ell} out of range (8..=4096)")
            }
            ConfigError::BadThreshold { value } => {
                write!(f, "abort threshold {value} outside (0, 0.5)")
            }
            ConfigError::BadSampleFraction { value } => {
                write!(f, "sample fraction {value} outside (0, 1)")
            }
            ConfigError::BadNoise { value } => {
                write!(f, "noise probability {value} outside [0, 0.5]")
            }
            ConfigError::BadModulusBits { bits } => {
                write!(f, "modulus width {bits} outside 16..=32")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ConfigError {}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ell < 8 || self.ell > 4096 {
            return Err(ConfigError::BadSecretLength { ell: self.ell });
        }
        if !(self.qber_abort_threshold > 0.0 && self.qber_abort_threshold < 0.5) {
            return Err(ConfigError::BadThreshold { value: self.qber_abort_threshold });
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction < 1.0) {
            return Err(ConfigError::BadSampleFraction { value: self.sample_fraction });
        }
        if !(0.0..=0.5).contains(&self.noise_flip_prob) {
            return Err(ConfigError::BadNoise { value: self.noise_flip_prob });
        }
        if !(16..=32).contains(&self.gm_modulus_bits) {
            return Err(ConfigError::BadModulusBits { bits: self.gm_modulus_bits });
        }
        Ok(())
    }
}

/// Why a session ended without a key.
#[derive(Debug, Clone, PartialEq)]
pub enum AbortReason {
    /// Estimated channel error above the configured threshold.
    QberExceeded { estimate: f64, threshold: f64 },
    /// A message failed authentication.
    AuthReject,
    /// Error reconciliation did not converge.
    ReconcileFailed,
    /// Not enough secret material survived to meet the request.
    InsufficientKey,
    /// One-time authentication key ran out mid-session.
    AuthKeyExhausted,
    /// Final key confirmation digests disagreed.
    KeyConfirmFailed,
}

impl AbortReason {
    pub fn label(&self) -> &'static str {
        match self {
            AbortReason::QberExceeded { .. } => "qber-exceeded",
            AbortReason::AuthReject => "auth-reject",
            AbortReason::ReconcileFailed => "reconcile-failed",
            AbortReason::InsufficientKey => "insufficient-key",
            AbortReason::AuthKeyExhausted => "auth-key-exhausted",
            AbortReason::KeyConfirmFailed => "key-confirm-failed",
        }
    }
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbortReason::QberExceeded { estimate, threshold } => {
                write!(f, "error estimate {estimate:.4} above threshold {threshold:.4}")
            }
            other => f.write_str(other.label()),
        }
    }
}

/// How a session ended, as seen by the honest parties.
#[derive(Debug, Clone, PartialEq)]
pub enum SessionOutcome {
    Established { key_a: BitString, key_b: BitString },
    Aborted { reason: AbortReason },
}

impl SessionOutcome {
    /// The shared key, present only when both parties hold identical bits.
    pub fn agreed_key(&self) -> Option<&BitString> {
        match self {
            SessionOutcome::Established { key_a, key_b } if key_a == key_b => Some(key_a),
            _ => None,
        }
    }

    pub fn is_established(&self) -> bool {
        matches!(self, SessionOutcome::Established { .. })
    }

    pub fn abort_reason(&self) -> Option<&AbortReason> {
        match self {
            SessionOutcome::Aborted { reason } => Some(reason),
            _ => None,
        }
    }
}

/// What a reconstruction attempt is allowed to use. The transcript is always
/// granted; the flags extend it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct KnowledgeSet {
    /// The parties' pre-shared material.
    pub initial_key: bool,
    /// Permission to use key-transport ciphertexts found in the transcript.
    pub ciphertext: bool,
    /// Both parties' local random streams.
    pub coins: bool,
    /// An oracle that breaks the trapdoor predicate (factors the modulus).
    pub broken_trapdoor: bool,
}

impl KnowledgeSet {
    /// Transcript and initial key.
    pub fn initial_key_only() -> Self {
        KnowledgeSet { initial_key: true, ..Default::default() }
    }

    /// Transcript, initial key, and transport ciphertexts.
    pub fn initial_key_and_ciphertext() -> Self {
        KnowledgeSet { initial_key: true, ciphertext: true, ..Default::default() }
    }

    /// Transcript and both parties' coins.
    pub fn party_coins() -> Self {
        KnowledgeSet { coins: true, ..Default::default() }
    }

    /// Transcript, transport ciphertexts, and a trapdoor break.
    pub fn broken_trapdoor() -> Self {
        KnowledgeSet { ciphertext: true, broken_trapdoor: true, ..Default::default() }
    }

    /// The four canonical grant sets the class-relation suite exercises.
    pub fn canonical() -> [KnowledgeSet; 4] {
        [
            Self::initial_key_only(),
            Self::initial_key_and_ciphertext(),
            Self::party_coins(),
            Self::broken_trapdoor(),
        ]
    }

    pub fn label(&self) -> &'static str {
        match (self.initial_key, self.ciphertext, self.coins, self.broken_trapdoor) {
            (true, false, false, false) => "transcript+initial-key",
            (true, true, false, false) => "transcript+initial-key+ciphertext",
            (false, false, true, false) => "transcript+coins",
            (false, true, false, true) => "transcript+ciphertext+trapdoor-break",
            _ => "custom",
        }
    }
}
