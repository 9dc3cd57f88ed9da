//! Eve strategies and the experiment runner that fills the
//! security-under-key-reveal matrix.
//!
//! Each cell of the matrix pairs a protocol class with an adversary
//! capability column and asks whether the session key survives the
//! parties' initial keys being handed to Eve. The attacks are executed,
//! not asserted: recompute attacks actually recompute the key from Eve's
//! view, the impersonation attack actually runs both half-sessions with
//! Eve as the peer, and the forgery probes actually rewrite wire messages
//! with valid tags made from the revealed keys.
//!
//! Verdict semantics: a cell is compromised when Eve exactly recovers the
//! agreed session key or recognizes it at a rate of at least
//! [`RECOGNITION_COMPROMISE_THRESHOLD`]. Sessions that end without both
//! parties agreeing on a key yield no secret to compromise; the
//! disruption Eve can cause there is reported separately as a
//! forced-abort rate, never as security failure.
//!
//! Capability columns map to attack repertoires as follows. Passive and
//! delayed classical access grant the recorded transcript. Active
//! classical access additionally grants transient forgery: rewriting a
//! message in flight, with a valid tag when the keys are revealed. The
//! sustained position needed to impersonate each party to the other for a
//! whole session requires activity on both channels, so the dual
//! half-session attack runs only in the rightmost column.

pub mod compromise;

use crate::auth::gm::GmKeyPair;
use crate::auth::owf::{prg_expand, OwfConfig};
use crate::auth::{Authenticator, LamportAuthenticator, WcAuthenticator};
use crate::bits::BitString;
use crate::metrics::stats::{wilson_interval, ConfidenceInterval, Z_95};
use crate::protocols::{generate_initial_keys, run_protocol, seb, EveView, ProtocolRun, MAC_TAG_BITS};
use crate::qchannel::EveTap;
use crate::rng::{child_seed, stream, SeededRng};
use crate::session::{header, ClassicalTap, NoTap};
use crate::transcript::{ClassicalMessage, MessageKind};
use crate::types::{AdversarySpec, ChannelAccess, InitialKeys, ProtocolClassId, ProtocolConfig};
use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

/// Recognition rate at or above which a cell counts as compromised.
pub const RECOGNITION_COMPROMISE_THRESHOLD: f64 = 0.9;

/// Chance level of the balanced two-candidate recognition game.
pub const RECOGNITION_CHANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttackError {
    NoTrials,
}

impl fmt::Display for AttackError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackError::NoTrials => f.write_str("an attack needs at least one trial"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AttackError {}

/// What the attack produced as its headline measurement.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackEvidence {
    /// Fraction of trials in which Eve output the agreed key exactly.
    RecoveredKey { rate: f64 },
    /// Fraction of balanced real-versus-uniform challenges Eve answered
    /// correctly; `chance` is what candidate-blind guessing scores.
    Recognition { rate: f64, chance: f64 },
    /// Fraction of attacked sessions Eve ended without key agreement.
    AbortForced { rate: f64 },
}

impl AttackEvidence {
    pub fn rate(&self) -> f64 {
        match self {
            AttackEvidence::RecoveredKey { rate } => *rate,
            AttackEvidence::Recognition { rate, .. } => *rate,
            AttackEvidence::AbortForced { rate } => *rate,
        }
    }
}

/// Outcome of one matrix cell.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub class: ProtocolClassId,
    pub adversary: AdversarySpec,
    pub compromised: bool,
    pub evidence: AttackEvidence,
    pub trials: usize,
    /// Sessions (or half-session pairs) that ended with an agreed key.
    pub agreed_sessions: usize,
    /// Wilson interval on the evidence rate.
    pub confidence: ConfidenceInterval,
    /// Abort rate over the active-interference probes, when any ran.
    pub forced_abort_rate: Option<f64>,
}

impl AttackResult {
    pub fn secure(&self) -> bool {
        !self.compromised
    }
}

/// One trial's contribution, mergeable in any order.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialRecord {
    pub agreed: bool,
    pub recovered: bool,
    /// Correct answers over this trial's two balanced challenges.
    pub challenge_hits: u8,
    /// Whether the active-interference probe ended the session without
    /// agreement; `None` when no probe ran.
    pub probe_aborted: Option<bool>,
}

/// Both halves of a sustained impersonation: Eve plays Bob to Alice and
/// Alice to Bob, as a full protocol participant in each.
#[derive(Debug, Clone)]
pub struct MitmOutcome {
    pub with_alice: ProtocolRun,
    pub with_bob: ProtocolRun,
    /// The two established keys, present when neither half aborted. Eve
    /// holds both by virtue of having run both half-sessions.
    pub keys: Option<(BitString, BitString)>,
}

/// Run the sustained impersonation against `class` using the revealed
/// initial keys. Each half-session is a complete run of the protocol with
/// Eve as one endpoint; success means both honest parties finish without
/// abort while Eve ends up holding both keys.
pub fn mitm(
    class: ProtocolClassId,
    config: &ProtocolConfig,
    revealed_keys: &InitialKeys,
    trial_seed: u64,
) -> Result<MitmOutcome, crate::protocols::ProtocolError> {
    let cfg_a = ProtocolConfig { rng_seed: child_seed(trial_seed, stream::MITM_A), ..*config };
    let cfg_b = ProtocolConfig { rng_seed: child_seed(trial_seed, stream::MITM_B), ..*config };
    let with_alice =
        run_protocol(class, &cfg_a, revealed_keys, OwfConfig::Strong, EveTap::None, &mut NoTap)?;
    let with_bob =
        run_protocol(class, &cfg_b, revealed_keys, OwfConfig::Strong, EveTap::None, &mut NoTap)?;
    let keys = match (with_alice.established_key(), with_bob.established_key()) {
        (Some(a), Some(b)) => Some((a.clone(), b.clone())),
        _ => None,
    };
    Ok(MitmOutcome { with_alice, with_bob, keys })
}

/// Eve's offline key reconstruction from her view of a run plus whatever
/// initial keys were revealed to her. This is the entire input surface of
/// the offline attacks; honest parties' private state is not reachable
/// from here.
pub fn recompute_guess(
    class: ProtocolClassId,
    view: &EveView,
    revealed: Option<&InitialKeys>,
) -> Option<BitString> {
    let keys = revealed?;
    match class {
        ProtocolClassId::Oob => keys.symmetric().filter(|k| k.len() == view.ell).cloned(),
        ProtocolClassId::Pge => {
            keys.symmetric().map(|k| prg_expand(OwfConfig::Strong, k, view.ell))
        }
        ProtocolClassId::Seb => {
            let k = keys.symmetric()?;
            if k.len() < seb::ENC_SEED_BITS {
                return None;
            }
            let c = &view.transcript.first_of_kind(MessageKind::KeyTransport)?.payload;
            let pad = prg_expand(OwfConfig::Strong, &k.slice(0, seb::ENC_SEED_BITS), c.len());
            c.xor(&pad).ok()
        }
        ProtocolClassId::SkeMac
        | ProtocolClassId::SkeSig
        | ProtocolClassId::MacQke
        | ProtocolClassId::SigQke => None,
    }
}

/// Classes whose sessions are a live two-party exchange Eve could sit
/// inside, as opposed to local or one-shot key delivery.
fn peered(class: ProtocolClassId) -> bool {
    matches!(
        class,
        ProtocolClassId::SkeMac
            | ProtocolClassId::SkeSig
            | ProtocolClassId::MacQke
            | ProtocolClassId::SigQke
    )
}

fn access_salt(access: ChannelAccess) -> u64 {
    match access {
        ChannelAccess::Passive => 0,
        ChannelAccess::Delayed => 1,
        ChannelAccess::Active => 2,
    }
}

fn class_salt(class: ProtocolClassId) -> u64 {
    match class {
        ProtocolClassId::Oob => 1,
        ProtocolClassId::Pge => 2,
        ProtocolClassId::Seb => 3,
        ProtocolClassId::SkeMac => 4,
        ProtocolClassId::SkeSig => 5,
        ProtocolClassId::MacQke => 6,
        ProtocolClassId::SigQke => 7,
    }
}

fn spec_salt(spec: AdversarySpec) -> u64 {
    access_salt(spec.classical) * 8
        + access_salt(spec.quantum) * 2
        + spec.initial_keys_revealed as u64
}

/// Seed for one trial of one cell. Trials are independent of each other
/// and of every other cell, so shards can be computed in any grouping and
/// merged without changing a single bit of the outcome.
pub fn trial_seed(base_seed: u64, class: ProtocolClassId, spec: AdversarySpec, index: usize) -> u64 {
    let cell = child_seed(child_seed(base_seed, class_salt(class)), spec_salt(spec));
    child_seed(cell, index as u64)
}

enum FirstRewrite {
    Complement,
    Replace(BitString),
}

/// Rewrites the session's first wire message and re-tags it with a forger
/// built from the revealed keys, then lets the rest of the session run.
struct ForgedFirstMessage {
    rewrite: FirstRewrite,
    forger: Box<dyn Authenticator>,
    fired: bool,
}

impl ClassicalTap for ForgedFirstMessage {
    fn intercept(&mut self, message: &mut ClassicalMessage) {
        if self.fired {
            return;
        }
        self.fired = true;
        let new_payload = match &self.rewrite {
            FirstRewrite::Complement => {
                let mut p = message.payload.clone();
                for i in 0..p.len() {
                    p.flip(i);
                }
                p
            }
            FirstRewrite::Replace(payload) => payload.clone(),
        };
        let ctx = header(message.sender, message.kind, 0);
        if let Ok(tag) = self.forger.protect(&ctx, &new_payload) {
            message.payload = new_payload;
            message.auth = tag;
        }
    }
}

/// Rewrites the first message without being able to re-tag it; the stale
/// tag is what the receiver's verification rejects.
#[derive(Default)]
struct StaleTagTamper {
    fired: bool,
}

impl ClassicalTap for StaleTagTamper {
    fn intercept(&mut self, message: &mut ClassicalMessage) {
        if self.fired || message.payload.is_empty() {
            return;
        }
        self.fired = true;
        message.payload.flip(0);
    }
}

fn forger_for(keys: &InitialKeys, eve_rng: SeededRng) -> Option<Box<dyn Authenticator>> {
    match keys {
        InitialKeys::None => None,
        InitialKeys::Symmetric { key } => WcAuthenticator::from_bits(MAC_TAG_BITS, key)
            .ok()
            .map(|a| Box::new(a) as Box<dyn Authenticator>),
        InitialKeys::Asymmetric { bob_signing, .. } => Some(Box::new(LamportAuthenticator::new(
            OwfConfig::Strong,
            bob_signing.clone(),
            Vec::new(),
            eve_rng,
        ))),
    }
}

/// Two challenges per trial, one with the real key first and one with it
/// second, each against a fresh uniform decoy. A recognizer that cannot
/// score candidates answers exactly one of the two correctly, so the
/// chance level carries no sampling noise.
pub(crate) fn balanced_challenges(
    key: &BitString,
    guess: Option<&BitString>,
    rng: &mut SeededRng,
) -> u8 {
    let mut hits = 0;
    for real_first in [true, false] {
        let decoy = rng.bits(key.len());
        let (first, second) = if real_first { (key, &decoy) } else { (&decoy, key) };
        let pick_first = match guess {
            Some(g) if g == second => false,
            Some(g) if g == first => true,
            _ => true,
        };
        if pick_first == real_first {
            hits += 1;
        }
    }
    hits
}

enum CellKind {
    Recompute,
    MitmSustained,
    MitmRejected,
    RecognitionOnly,
}

fn cell_kind(class: ProtocolClassId, spec: AdversarySpec) -> CellKind {
    if peered(class) && spec.is_full_mitm() {
        if spec.initial_keys_revealed {
            CellKind::MitmSustained
        } else {
            CellKind::MitmRejected
        }
    } else if !peered(class) && spec.initial_keys_revealed {
        CellKind::Recompute
    } else {
        CellKind::RecognitionOnly
    }
}

/// Execute one trial of one cell. Pure in `(base_seed, class, spec,
/// index)`; experiments shard by index.
pub fn attack_trial(
    class: ProtocolClassId,
    spec: AdversarySpec,
    config: &ProtocolConfig,
    base_seed: u64,
    index: usize,
) -> TrialRecord {
    let seed = trial_seed(base_seed, class, spec, index);
    let session_config =
        ProtocolConfig { rng_seed: child_seed(seed, stream::TRIAL), ..*config };
    let mut setup = SeededRng::derive(seed, stream::SETUP);
    let keys = generate_initial_keys(class, &session_config, OwfConfig::Strong, &mut setup);
    let mut eve_rng = SeededRng::derive(seed, stream::EVE);
    let revealed = spec.initial_keys_revealed;

    let (agreed_key, recovered, probe_aborted) = match cell_kind(class, spec) {
        CellKind::MitmSustained => {
            let outcome =
                mitm(class, &session_config, &keys, seed).expect("generated keys fit the class");
            let agreed_key = outcome.keys.as_ref().map(|(a, _)| a.clone());
            let recovered = outcome.keys.is_some();
            (agreed_key, recovered, None)
        }
        CellKind::MitmRejected => {
            let mut tamper = StaleTagTamper::default();
            let run = run_protocol(
                class,
                &session_config,
                &keys,
                OwfConfig::Strong,
                EveTap::None,
                &mut tamper,
            )
            .expect("generated keys fit the class");
            let agreed_key = run.established_key().cloned();
            let aborted = agreed_key.is_none();
            (agreed_key, false, Some(aborted))
        }
        CellKind::Recompute | CellKind::RecognitionOnly => {
            let run = run_protocol(
                class,
                &session_config,
                &keys,
                OwfConfig::Strong,
                EveTap::None,
                &mut NoTap,
            )
            .expect("generated keys fit the class");
            let view = run.eve_view(spec.classical, spec.quantum);
            let guess = recompute_guess(class, &view, revealed.then_some(&keys));
            let agreed_key = run.established_key().cloned();
            let recovered = match (&guess, &agreed_key) {
                (Some(g), Some(k)) => g == k,
                _ => false,
            };

            let probe_aborted = if peered(class) && spec.classical == ChannelAccess::Active {
                let mut probe_tap: Box<dyn ClassicalTap> = if revealed {
                    let rewrite = match class {
                        ProtocolClassId::SkeMac | ProtocolClassId::SkeSig => {
                            let keypair =
                                GmKeyPair::generate(session_config.gm_modulus_bits, &mut eve_rng)
                                    .expect("toy modulus generation");
                            FirstRewrite::Replace(BitString::from_u64(keypair.public.n, 64))
                        }
                        _ => FirstRewrite::Complement,
                    };
                    let forger_rng = SeededRng::new(eve_rng.next_u64());
                    match forger_for(&keys, forger_rng) {
                        Some(forger) => {
                            Box::new(ForgedFirstMessage { rewrite, forger, fired: false })
                        }
                        None => Box::new(StaleTagTamper::default()),
                    }
                } else {
                    Box::new(StaleTagTamper::default())
                };
                let probed = run_protocol(
                    class,
                    &session_config,
                    &keys,
                    OwfConfig::Strong,
                    EveTap::None,
                    probe_tap.as_mut(),
                )
                .expect("generated keys fit the class");
                Some(probed.established_key().is_none())
            } else {
                None
            };

            return finish_trial(agreed_key, guess, recovered, probe_aborted, &mut eve_rng);
        }
    };

    let guess = agreed_key.clone();
    finish_trial(agreed_key, guess, recovered, probe_aborted, &mut eve_rng)
}

fn finish_trial(
    agreed_key: Option<BitString>,
    guess: Option<BitString>,
    recovered: bool,
    probe_aborted: Option<bool>,
    eve_rng: &mut SeededRng,
) -> TrialRecord {
    let (agreed, challenge_hits) = match &agreed_key {
        Some(key) => (true, balanced_challenges(key, guess.as_ref(), eve_rng)),
        None => (false, 0),
    };
    TrialRecord { agreed, recovered, challenge_hits, probe_aborted }
}

/// Merge trial records into the cell verdict. Pure summation, so the
/// result does not depend on how trials were grouped or ordered.
pub fn reduce_records(
    class: ProtocolClassId,
    spec: AdversarySpec,
    records: &[TrialRecord],
) -> AttackResult {
    let trials = records.len();
    let agreed = records.iter().filter(|r| r.agreed).count();
    let recovered = records.iter().filter(|r| r.recovered).count();
    let hits: usize = records.iter().map(|r| r.challenge_hits as usize).sum();
    let probes = records.iter().filter(|r| r.probe_aborted.is_some()).count();
    let probe_aborts = records.iter().filter(|r| r.probe_aborted == Some(true)).count();

    let frac = |num: usize, denom: usize| if denom == 0 { 0.0 } else { num as f64 / denom as f64 };
    let (evidence, successes, denom) = match cell_kind(class, spec) {
        CellKind::Recompute | CellKind::MitmSustained => {
            (AttackEvidence::RecoveredKey { rate: frac(recovered, trials) }, recovered, trials)
        }
        CellKind::MitmRejected => (
            AttackEvidence::AbortForced { rate: frac(probe_aborts, probes) },
            probe_aborts,
            probes,
        ),
        CellKind::RecognitionOnly => {
            let challenges = 2 * agreed;
            (
                AttackEvidence::Recognition {
                    rate: frac(hits, challenges),
                    chance: RECOGNITION_CHANCE,
                },
                hits,
                challenges,
            )
        }
    };
    let compromised = match &evidence {
        AttackEvidence::RecoveredKey { rate } | AttackEvidence::Recognition { rate, .. } => {
            *rate >= RECOGNITION_COMPROMISE_THRESHOLD
        }
        AttackEvidence::AbortForced { .. } => false,
    };
    AttackResult {
        class,
        adversary: spec,
        compromised,
        evidence,
        trials,
        agreed_sessions: agreed,
        confidence: wilson_interval(successes, denom, Z_95),
        forced_abort_rate: (probes > 0).then(|| frac(probe_aborts, probes)),
    }
}

/// Run one matrix cell.
pub fn attack(
    class: ProtocolClassId,
    spec: AdversarySpec,
    config: &ProtocolConfig,
    trials: usize,
    base_seed: u64,
) -> Result<AttackResult, AttackError> {
    if trials == 0 {
        return Err(AttackError::NoTrials);
    }
    let records: Vec<TrialRecord> =
        (0..trials).map(|i| attack_trial(class, spec, config, base_seed, i)).collect();
    Ok(reduce_records(class, spec, &records))
}

/// Row order of the security matrix.
pub const TABLE_ROWS: [ProtocolClassId; 4] =
    [ProtocolClassId::Oob, ProtocolClassId::Pge, ProtocolClassId::Seb, ProtocolClassId::MacQke];

/// The row appended on request: the classical public-key transport class,
/// whose verdict pattern matches the quantum row's.
pub const SKE_ROW: ProtocolClassId = ProtocolClassId::SkeMac;

#[derive(Debug, Clone, PartialEq)]
pub struct Table3Row {
    pub class: ProtocolClassId,
    pub cells: Vec<AttackResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table3 {
    pub trials_per_cell: usize,
    pub base_seed: u64,
    pub revealed: bool,
    pub rows: Vec<Table3Row>,
}

/// The verdict the matrix is expected to show: with keys revealed, the
/// rows whose keys are functions of initial keys and transcript fall in
/// every column, while the coin-based classes fall only to the sustained
/// impersonation; with keys withheld every cell is secure.
pub fn expected_secure(class: ProtocolClassId, spec: AdversarySpec) -> bool {
    if !spec.initial_keys_revealed {
        return true;
    }
    match class {
        ProtocolClassId::Oob | ProtocolClassId::Pge | ProtocolClassId::Seb => false,
        _ => !spec.is_full_mitm(),
    }
}

impl Table3 {
    /// Cells whose measured verdict differs from the expected pattern.
    pub fn mismatches(&self) -> Vec<(ProtocolClassId, AdversarySpec)> {
        let mut out = Vec::new();
        for row in &self.rows {
            for cell in &row.cells {
                if cell.secure() != expected_secure(row.class, cell.adversary) {
                    out.push((row.class, cell.adversary));
                }
            }
        }
        out
    }

    pub fn matches_expected(&self) -> bool {
        self.mismatches().is_empty()
    }
}

/// Fill the whole matrix at `trials_per_cell` trials per cell.
pub fn table3_matrix(
    config: &ProtocolConfig,
    trials_per_cell: usize,
    base_seed: u64,
    include_ske_row: bool,
    revealed: bool,
) -> Result<Table3, AttackError> {
    let mut classes: Vec<ProtocolClassId> = TABLE_ROWS.to_vec();
    if include_ske_row {
        classes.push(SKE_ROW);
    }
    let mut rows = Vec::with_capacity(classes.len());
    for class in classes {
        let mut cells = Vec::with_capacity(5);
        for base_cell in AdversarySpec::table_cells() {
            let cell = if revealed { base_cell.revealed() } else { base_cell };
            cells.push(attack(class, cell, config, trials_per_cell, base_seed)?);
        }
        rows.push(Table3Row { class, cells });
    }
    Ok(Table3 { trials_per_cell, base_seed, revealed, rows })
}
