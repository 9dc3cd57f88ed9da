//! Recomputation oracles: which grants of knowledge suffice to rebuild a
//! run's established key.
//!
//! Each protocol class is defined by a relation between its session key
//! and some subset of the session's artifacts. The oracle makes those
//! relations executable: handed a completed run and a [`Knowledge`] grant,
//! it runs the class's reconstruction algorithm exactly when the grant
//! covers that algorithm's inputs, and reports whether the rebuilt key
//! matches bit for bit.
//!
//! Unlike the bounded adversary, the oracle may factor the announced toy
//! modulus when granted [`Knowledge::broken_trapdoor`]; that power exists
//! to measure what a trapdoor break would yield, not to model a realistic
//! attacker.

use crate::auth::gm::{decrypt_with_factors, factor_toy_modulus, GmKeyPair};
use crate::auth::owf::{prg_expand, OwfConfig};
use crate::bits::BitString;
use crate::protocols::{generate_initial_keys, run_protocol, seb, ske, ProtocolRun};
use crate::qchannel::EveTap;
use crate::rng::{child_seed, stream, SeededRng};
use crate::session::NoTap;
use crate::transcript::MessageKind;
use crate::types::{ProtocolClassId, ProtocolConfig};
use alloc::vec::Vec;

/// What the oracle is allowed to look at.
///
/// `transcript` covers the classical messages of the run except the
/// symmetric transport ciphertext, which is its own grant (`ciphertext`)
/// because that delivery is modeled as riding a separate channel. The coin
/// grants expose the parties' random tapes, and `broken_trapdoor` permits
/// factoring the announced modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Knowledge {
    pub transcript: bool,
    pub initial_keys: bool,
    pub ciphertext: bool,
    pub coins_a: bool,
    pub coins_b: bool,
    pub broken_trapdoor: bool,
}

impl Knowledge {
    pub const fn none() -> Self {
        Knowledge {
            transcript: false,
            initial_keys: false,
            ciphertext: false,
            coins_a: false,
            coins_b: false,
            broken_trapdoor: false,
        }
    }

    /// Everything at once, for ceiling measurements.
    pub const fn full() -> Self {
        Knowledge {
            transcript: true,
            initial_keys: true,
            ciphertext: true,
            coins_a: true,
            coins_b: true,
            broken_trapdoor: true,
        }
    }

    /// The four canonical grant columns of the class-relation matrix:
    /// transcript with initial keys, the same plus the transport
    /// ciphertext, transcript with both coin tapes, and transcript with
    /// the trapdoor broken.
    pub fn canonical_columns() -> [Knowledge; 4] {
        let base = Knowledge { transcript: true, ..Knowledge::none() };
        [
            Knowledge { initial_keys: true, ..base },
            Knowledge { initial_keys: true, ciphertext: true, ..base },
            Knowledge { coins_a: true, coins_b: true, ..base },
            Knowledge { broken_trapdoor: true, ..base },
        ]
    }

    pub fn column_label(index: usize) -> &'static str {
        match index {
            0 => "initial keys",
            1 => "initial keys + ciphertext",
            2 => "coin tapes",
            3 => "broken trapdoor",
            _ => "unknown",
        }
    }
}

/// Result of one oracle invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub success: bool,
    pub candidate: Option<BitString>,
}

/// Run the class-prescribed reconstruction under `knowledge`. Success
/// means the candidate equals the run's established key exactly;
/// aborted runs never count as success.
pub fn recompute_oracle(run: &ProtocolRun, knowledge: Knowledge) -> OracleOutcome {
    let candidate = candidate_key(run, knowledge);
    let success = match (&candidate, run.established_key()) {
        (Some(c), Some(k)) => c == k,
        _ => false,
    };
    OracleOutcome { success, candidate }
}

/// The reconstruction itself, without the comparison. `None` when the
/// class prescribes no algorithm for the granted set or the algorithm
/// fails on this run's artifacts.
pub fn candidate_key(run: &ProtocolRun, knowledge: Knowledge) -> Option<BitString> {
    match run.class {
        ProtocolClassId::Oob => {
            if !knowledge.initial_keys {
                return None;
            }
            run.initial_keys.symmetric().filter(|k| k.len() == run.config.ell).cloned()
        }
        ProtocolClassId::Pge => {
            if !knowledge.initial_keys {
                return None;
            }
            run.initial_keys
                .symmetric()
                .map(|k| prg_expand(OwfConfig::Strong, k, run.config.ell))
        }
        ProtocolClassId::Seb => {
            if !(knowledge.initial_keys && knowledge.ciphertext) {
                return None;
            }
            let k = run.initial_keys.symmetric()?;
            if k.len() < seb::ENC_SEED_BITS {
                return None;
            }
            let c = &run.transcript.first_of_kind(MessageKind::KeyTransport)?.payload;
            let pad = prg_expand(OwfConfig::Strong, &k.slice(0, seb::ENC_SEED_BITS), c.len());
            c.xor(&pad).ok()
        }
        ProtocolClassId::SkeMac | ProtocolClassId::SkeSig => {
            if knowledge.transcript && knowledge.coins_a && knowledge.coins_b {
                replay_from_coins(run)
            } else if knowledge.transcript && knowledge.broken_trapdoor {
                break_trapdoor(run)
            } else {
                None
            }
        }
        ProtocolClassId::MacQke | ProtocolClassId::SigQke => None,
    }
}

/// Re-execute both parties' random tapes against the recorded transcript:
/// Bob's tape regenerates the trapdoor keypair that decrypts the recorded
/// ciphertexts, Alice's tape replays the seed draw directly, and the two
/// reconstructions must agree.
fn replay_from_coins(run: &ProtocolRun) -> Option<BitString> {
    let mut bob = SeededRng::new(run.r_b_seed);
    let keypair = GmKeyPair::generate(run.config.gm_modulus_bits, &mut bob).ok()?;
    let announce = run.transcript.first_of_kind(MessageKind::PublicKeyAnnounce)?;
    if announce.payload.len() != 64 || keypair.public.n != announce.payload.to_u64() {
        return None;
    }
    let seed_bob = transported_seed(run, |ct| keypair.decrypt(ct).ok())?;
    let mut alice = SeededRng::new(run.r_a_seed);
    let seed_alice = alice.bits(ske::TRANSPORT_SEED_BITS);
    if seed_alice != seed_bob {
        return None;
    }
    let (key, _) = ske::expand_transport_seed(&seed_alice, run.config.ell);
    Some(key)
}

/// Factor the announced modulus by trial division, then decrypt the
/// recorded ciphertexts without ever holding the trapdoor.
pub(crate) fn break_trapdoor(run: &ProtocolRun) -> Option<BitString> {
    let announce = run.transcript.first_of_kind(MessageKind::PublicKeyAnnounce)?;
    if announce.payload.len() != 64 {
        return None;
    }
    let n = announce.payload.to_u64();
    let (p, q) = factor_toy_modulus(n)?;
    let seed = transported_seed(run, |ct| decrypt_with_factors(p, q, ct).ok())?;
    let (key, _) = ske::expand_transport_seed(&seed, run.config.ell);
    Some(key)
}

/// Decrypt the recorded bit ciphertexts with `decrypt_bit`, check the
/// known plaintext header, and return the transport seed.
fn transported_seed(
    run: &ProtocolRun,
    mut decrypt_bit: impl FnMut(u64) -> Option<bool>,
) -> Option<BitString> {
    let cts = run.transcript.first_of_kind(MessageKind::BitCiphertexts)?;
    let words = ske::unpack_ciphertexts(&cts.payload)?;
    if words.len() != ske::TRANSPORT_PLAINTEXT_BITS {
        return None;
    }
    let mut plain = BitString::new();
    for &word in &words {
        plain.push(decrypt_bit(word)?);
    }
    if plain.slice(0, ske::PLAINTEXT_HEADER_BITS).to_u64() != ske::PLAINTEXT_HEADER {
        return None;
    }
    Some(plain.slice(ske::PLAINTEXT_HEADER_BITS, ske::TRANSPORT_PLAINTEXT_BITS))
}

/// Whether the class relation says the column's grant should reconstruct
/// the key.
pub fn expected_success(class: ProtocolClassId, column: usize) -> bool {
    match class {
        ProtocolClassId::Oob | ProtocolClassId::Pge => column <= 1,
        ProtocolClassId::Seb => column == 1,
        ProtocolClassId::SkeMac | ProtocolClassId::SkeSig => column == 2 || column == 3,
        ProtocolClassId::MacQke | ProtocolClassId::SigQke => false,
    }
}

/// Per-class success counts over the four canonical columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub class: ProtocolClassId,
    pub established_runs: usize,
    pub successes: [usize; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMatrix {
    pub runs_per_class: usize,
    pub base_seed: u64,
    pub rows: Vec<OracleRow>,
}

impl OracleMatrix {
    /// Cells where the measured count disagrees with the class relation:
    /// expected columns must succeed on every established run, the rest on
    /// none.
    pub fn mismatches(&self) -> Vec<(ProtocolClassId, usize)> {
        let mut out = Vec::new();
        for row in &self.rows {
            for (column, &successes) in row.successes.iter().enumerate() {
                let expected =
                    if expected_success(row.class, column) { row.established_runs } else { 0 };
                if successes != expected {
                    out.push((row.class, column));
                }
            }
        }
        out
    }

    pub fn matches_expected(&self) -> bool {
        self.mismatches().is_empty()
    }
}

fn run_for_trial(
    class: ProtocolClassId,
    config: &ProtocolConfig,
    cell_seed: u64,
    index: usize,
) -> ProtocolRun {
    let trial = child_seed(cell_seed, index as u64);
    let session_config = ProtocolConfig { rng_seed: child_seed(trial, stream::TRIAL), ..*config };
    let mut setup = SeededRng::derive(trial, stream::SETUP);
    let keys = generate_initial_keys(class, &session_config, OwfConfig::Strong, &mut setup);
    run_protocol(class, &session_config, &keys, OwfConfig::Strong, EveTap::None, &mut NoTap)
        .expect("generated keys fit the class")
}

/// Fill the class-relation matrix: honest runs per class, each probed with
/// all four canonical grants.
pub fn oracle_matrix(config: &ProtocolConfig, runs_per_class: usize, base_seed: u64) -> OracleMatrix {
    let columns = Knowledge::canonical_columns();
    let rows = ProtocolClassId::ALL
        .iter()
        .enumerate()
        .map(|(class_index, &class)| {
            let cell_seed = child_seed(base_seed, class_index as u64);
            let mut row =
                OracleRow { class, established_runs: 0, successes: [0; 4] };
            for index in 0..runs_per_class {
                let run = run_for_trial(class, config, cell_seed, index);
                if run.established_key().is_none() {
                    continue;
                }
                row.established_runs += 1;
                for (column, &knowledge) in columns.iter().enumerate() {
                    if recompute_oracle(&run, knowledge).success {
                        row.successes[column] += 1;
                    }
                }
            }
            row
        })
        .collect();
    OracleMatrix { runs_per_class, base_seed, rows }
}

/// Recognition rate of an oracle holding the full grant, measured with
/// paired real-versus-decoy challenges. Classes with a reconstruction
/// route score one; classes without one cannot rank the candidates and
/// score exactly one half.
pub fn full_grant_recognition_rate(
    class: ProtocolClassId,
    config: &ProtocolConfig,
    trials: usize,
    base_seed: u64,
) -> f64 {
    let cell_seed = child_seed(base_seed, 0x6F72);
    let mut hits = 0usize;
    let mut challenges = 0usize;
    for index in 0..trials {
        let run = run_for_trial(class, config, cell_seed, index);
        let Some(key) = run.established_key() else { continue };
        let candidate = candidate_key(&run, Knowledge::full());
        let mut eve = SeededRng::derive(child_seed(cell_seed, index as u64), stream::EVE);
        hits += crate::adversary::balanced_challenges(key, candidate.as_ref(), &mut eve) as usize;
        challenges += 2;
    }
    if challenges == 0 {
        return 0.0;
    }
    hits as f64 / challenges as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> ProtocolConfig {
        ProtocolConfig { rng_seed: seed, ..Default::default() }
    }

    #[test]
    fn matrix_matches_the_class_relations() {
        let matrix = oracle_matrix(&cfg(0), 6, 2101);
        assert!(matrix.matches_expected(), "{:?}", matrix.mismatches());
        for row in &matrix.rows {
            assert_eq!(row.established_runs, 6, "{}", row.class.label());
        }
    }

    #[test]
    fn no_grant_reconstructs_nothing() {
        for class in ProtocolClassId::ALL {
            let run = run_for_trial(class, &cfg(3), 2102, 0);
            let outcome = recompute_oracle(&run, Knowledge::none());
            assert!(!outcome.success);
            assert_eq!(outcome.candidate, None);
        }
    }

    #[test]
    fn coin_replay_and_trapdoor_break_agree_on_the_ske_key() {
        let run = run_for_trial(ProtocolClassId::SkeSig, &cfg(4), 2103, 0);
        let columns = Knowledge::canonical_columns();
        let coins = recompute_oracle(&run, columns[2]);
        let factored = recompute_oracle(&run, columns[3]);
        assert!(coins.success && factored.success);
        assert_eq!(coins.candidate, factored.candidate);
        assert_eq!(coins.candidate.as_ref(), run.established_key());
    }

    #[test]
    fn oracle_is_deterministic_per_run_and_grant() {
        let run = run_for_trial(ProtocolClassId::SkeMac, &cfg(5), 2104, 1);
        for knowledge in Knowledge::canonical_columns() {
            assert_eq!(recompute_oracle(&run, knowledge), recompute_oracle(&run, knowledge));
        }
    }

    #[test]
    fn quantum_keys_resist_even_the_full_grant() {
        for class in [ProtocolClassId::MacQke, ProtocolClassId::SigQke] {
            let run = run_for_trial(class, &cfg(6), 2105, 0);
            let outcome = recompute_oracle(&run, Knowledge::full());
            assert!(!outcome.success, "{}", class.label());
            assert_eq!(outcome.candidate, None);
        }
    }

    #[test]
    fn full_grant_recognition_is_exactly_chance_for_quantum_output() {
        let rate = full_grant_recognition_rate(ProtocolClassId::MacQke, &cfg(7), 40, 2106);
        assert_eq!(rate, 0.5);
        let rate = full_grant_recognition_rate(ProtocolClassId::Seb, &cfg(7), 10, 2106);
        assert_eq!(rate, 1.0);
    }
}
