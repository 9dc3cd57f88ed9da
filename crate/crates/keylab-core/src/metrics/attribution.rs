//! Attributability of an established key and of traffic encrypted under
//! it.
//!
//! The question a judge asks after the fact: does this ciphertext tie back
//! to that session, and does the session tie back to a particular party?
//! Three properties stack. A key is *attributable* when the judge's
//! granted material links the ciphertext's key to the recorded session.
//! It is *party-attributable* when the session itself is bound to the
//! identities that ran it. It is *provably* party-attributable when that
//! binding convinces a third party, which symmetric authentication never
//! does: either holder of a shared MAC key can manufacture a full
//! alternative transcript, and [`forge_alternative_transcript`] does
//! exactly that.
//!
//! How the key was used matters as much as how it was made. One-time-pad
//! usage is perfectly equivocable, so nothing downstream of the key links
//! back, whatever the protocol was.

use crate::auth::{Authenticator, WcAuthenticator};
use crate::bits::BitString;
use crate::metrics::oracle::{break_trapdoor, recompute_oracle, Knowledge};
use crate::protocols::{ske, ProtocolRun, MAC_TAG_BITS};
use crate::session::header;
use crate::transcript::{ClassicalMessage, Transcript};
use crate::types::{InitialKeys, ProtocolClassId};

/// How the established key is consumed after the session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CipherUse {
    /// One-time pad: any key of the right length explains any ciphertext,
    /// so ciphertexts carry no linkage whatsoever.
    Otp,
    /// A cipher whose ciphertexts commit to their key, so the judge can
    /// check a candidate key against a ciphertext.
    Committing,
}

/// How the judge linked the key to the session, if at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributionMethod {
    NotLinked,
    /// The granted material reconstructed the session key outright.
    Recomputed,
    /// A transcript relation confirmed the candidate key.
    Recognized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttributionVerdict {
    pub attributable: bool,
    pub party_attributable: bool,
    pub provably_party_attributable: bool,
    pub method: AttributionMethod,
}

impl AttributionVerdict {
    fn unlinked() -> Self {
        AttributionVerdict {
            attributable: false,
            party_attributable: false,
            provably_party_attributable: false,
            method: AttributionMethod::NotLinked,
        }
    }

    /// The strongest property that holds, as a stable label.
    pub fn label(&self) -> &'static str {
        if self.provably_party_attributable {
            "provably-party-attributable"
        } else if self.party_attributable {
            "party-attributable"
        } else if self.attributable {
            "key-attributable"
        } else {
            "nonattributable"
        }
    }
}

/// What the class's authentication binds, once the key itself is linked:
/// `(party_attributable, provably_party_attributable)`.
pub fn class_binding(class: ProtocolClassId) -> (bool, bool) {
    match class {
        ProtocolClassId::Oob | ProtocolClassId::Pge | ProtocolClassId::Seb => (false, false),
        ProtocolClassId::SkeMac | ProtocolClassId::MacQke => (true, false),
        ProtocolClassId::SkeSig | ProtocolClassId::SigQke => (true, true),
    }
}

/// A transcript relation the judge can test a candidate key against.
pub type KeyRecognizer = dyn Fn(&ProtocolRun, &BitString) -> bool;

/// Judge the attributability of one established session's key under the
/// given cipher usage, knowledge grant, and optional recognizer.
pub fn attribution_check(
    run: &ProtocolRun,
    cipher: CipherUse,
    knowledge: Knowledge,
    recognizer: Option<&KeyRecognizer>,
) -> AttributionVerdict {
    let Some(key) = run.established_key() else {
        return AttributionVerdict::unlinked();
    };
    if cipher == CipherUse::Otp {
        return AttributionVerdict::unlinked();
    }
    let method = if recompute_oracle(run, knowledge).success {
        AttributionMethod::Recomputed
    } else if recognizer.is_some_and(|relation| relation(run, key)) {
        AttributionMethod::Recognized
    } else {
        return AttributionVerdict::unlinked();
    };
    let (party_attributable, provably_party_attributable) = class_binding(run.class);
    AttributionVerdict {
        attributable: true,
        party_attributable,
        provably_party_attributable,
        method,
    }
}

/// Confirms a candidate key by factoring the announced trapdoor modulus,
/// decrypting the recorded ciphertexts, and re-deriving the key. Fires
/// only on classical trapdoor handshakes; quantum-derived keys have no
/// such transcript relation.
pub fn trapdoor_recognizer(run: &ProtocolRun, candidate: &BitString) -> bool {
    break_trapdoor(run).is_some_and(|key| key == *candidate)
}

/// Scans the wire for a message prefix that decrypts, under the candidate
/// key, to the well-known transport plaintext header. Models a judge
/// looking for the key having been spent as a pad on formatted plaintext.
pub fn otp_usage_recognizer(run: &ProtocolRun, candidate: &BitString) -> bool {
    if candidate.len() < ske::PLAINTEXT_HEADER_BITS {
        return false;
    }
    let key_prefix = candidate.slice(0, ske::PLAINTEXT_HEADER_BITS);
    run.transcript.messages.iter().any(|message| {
        message.payload.len() >= ske::PLAINTEXT_HEADER_BITS
            && message
                .payload
                .slice(0, ske::PLAINTEXT_HEADER_BITS)
                .xor(&key_prefix)
                .map(|plain| plain.to_u64() == ske::PLAINTEXT_HEADER)
                .unwrap_or(false)
    })
}

/// Walk a transcript as a verifier holding the shared MAC key and check
/// every tag in sequence.
pub fn mac_transcript_verifies(transcript: &Transcript, mac_key: &BitString) -> bool {
    let Ok(mut checker) = WcAuthenticator::from_bits(MAC_TAG_BITS, mac_key) else {
        return false;
    };
    transcript.messages.iter().enumerate().all(|(seq, message)| {
        let ctx = header(message.sender, message.kind, seq as u32);
        checker.verify(&ctx, &message.payload, message.auth.as_ref()).is_ok()
    })
}

/// The deniability constructor for symmetric authentication: from nothing
/// but the shared MAC key, produce a transcript that differs from the real
/// one in a payload bit yet carries valid tags throughout. Either party
/// could have made it, so the real transcript proves nothing to a third
/// party. Returns `None` for signature-authenticated classes, where this
/// construction is exactly what the one-way function prevents.
pub fn forge_alternative_transcript(run: &ProtocolRun) -> Option<Transcript> {
    if !matches!(run.class, ProtocolClassId::SkeMac | ProtocolClassId::MacQke) {
        return None;
    }
    run.established_key()?;
    let InitialKeys::Symmetric { key } = &run.initial_keys else {
        return None;
    };
    let mut tagger = WcAuthenticator::from_bits(MAC_TAG_BITS, key).ok()?;
    let target = run.transcript.messages.iter().rposition(|m| !m.payload.is_empty())?;
    let mut forged = Transcript::new();
    for (seq, message) in run.transcript.messages.iter().enumerate() {
        let mut payload = message.payload.clone();
        if seq == target {
            payload.flip(0);
        }
        let ctx = header(message.sender, message.kind, seq as u32);
        let tag = tagger.protect(&ctx, &payload).ok()??;
        forged.push(ClassicalMessage {
            sender: message.sender,
            kind: message.kind,
            payload,
            auth: Some(tag),
        });
    }
    for frame in &run.transcript.frames {
        forged.record_frame(*frame);
    }
    Some(forged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::owf::OwfConfig;
    use crate::protocols::{generate_initial_keys, run_protocol};
    use crate::qchannel::EveTap;
    use crate::rng::{child_seed, stream, SeededRng};
    use crate::session::NoTap;
    use crate::transcript::MessageKind;
    use crate::types::{Party, ProtocolConfig};

    fn sample_run(class: ProtocolClassId, seed: u64) -> ProtocolRun {
        let config =
            ProtocolConfig { rng_seed: child_seed(seed, stream::TRIAL), ..ProtocolConfig::default() };
        let mut setup = SeededRng::derive(seed, stream::SETUP);
        let keys = generate_initial_keys(class, &config, OwfConfig::Strong, &mut setup);
        run_protocol(class, &config, &keys, OwfConfig::Strong, EveTap::None, &mut NoTap).unwrap()
    }

    #[test]
    fn pad_usage_is_never_attributable() {
        for class in ProtocolClassId::ALL {
            let run = sample_run(class, 500 + class as u64);
            let verdict = attribution_check(
                &run,
                CipherUse::Otp,
                Knowledge::full(),
                Some(&trapdoor_recognizer),
            );
            assert_eq!(verdict.label(), "nonattributable", "{class:?}");
            assert_eq!(verdict.method, AttributionMethod::NotLinked);
        }
    }

    #[test]
    fn broken_trapdoor_attributes_the_classical_handshake() {
        let grant = Knowledge {
            transcript: true,
            broken_trapdoor: true,
            ..Knowledge::none()
        };
        let signed = sample_run(ProtocolClassId::SkeSig, 510);
        let verdict = attribution_check(&signed, CipherUse::Committing, grant, None);
        assert_eq!(verdict.label(), "provably-party-attributable");
        assert_eq!(verdict.method, AttributionMethod::Recomputed);
        let maced = sample_run(ProtocolClassId::SkeMac, 511);
        let verdict = attribution_check(&maced, CipherUse::Committing, grant, None);
        assert_eq!(verdict.label(), "party-attributable");
        assert!(!verdict.provably_party_attributable);
    }

    #[test]
    fn quantum_keys_defeat_the_judge_even_with_everything_granted() {
        for class in [ProtocolClassId::MacQke, ProtocolClassId::SigQke] {
            let run = sample_run(class, 520 + class as u64);
            let verdict = attribution_check(
                &run,
                CipherUse::Committing,
                Knowledge::full(),
                Some(&trapdoor_recognizer),
            );
            assert_eq!(verdict.label(), "nonattributable", "{class:?}");
            let verdict = attribution_check(
                &run,
                CipherUse::Committing,
                Knowledge::full(),
                Some(&otp_usage_recognizer),
            );
            assert_eq!(verdict.label(), "nonattributable", "{class:?}");
        }
    }

    #[test]
    fn transported_key_links_to_no_party() {
        let run = sample_run(ProtocolClassId::Seb, 530);
        let grant = Knowledge {
            transcript: true,
            initial_keys: true,
            ciphertext: true,
            ..Knowledge::none()
        };
        let verdict = attribution_check(&run, CipherUse::Committing, grant, None);
        assert_eq!(verdict.label(), "key-attributable");
        assert!(verdict.attributable && !verdict.party_attributable);
    }

    #[test]
    fn a_spent_pad_over_formatted_plaintext_is_recognized() {
        let mut run = sample_run(ProtocolClassId::Oob, 540);
        let key = run.established_key().unwrap().clone();
        let ciphertext = BitString::from_u64(ske::PLAINTEXT_HEADER, ske::PLAINTEXT_HEADER_BITS)
            .xor(&key.slice(0, ske::PLAINTEXT_HEADER_BITS))
            .unwrap();
        run.transcript.push(ClassicalMessage {
            sender: Party::Alice,
            kind: MessageKind::KeyTransport,
            payload: ciphertext,
            auth: None,
        });
        assert!(otp_usage_recognizer(&run, &key));
        let verdict = attribution_check(
            &run,
            CipherUse::Committing,
            Knowledge::none(),
            Some(&otp_usage_recognizer),
        );
        assert_eq!(verdict.method, AttributionMethod::Recognized);
        assert_eq!(verdict.label(), "key-attributable");
    }

    #[test]
    fn shared_mac_keys_forge_a_verifying_alternative_history() {
        for class in [ProtocolClassId::SkeMac, ProtocolClassId::MacQke] {
            let run = sample_run(class, 550 + class as u64);
            let InitialKeys::Symmetric { key } = &run.initial_keys else {
                panic!("symmetric class");
            };
            assert!(mac_transcript_verifies(&run.transcript, key), "{class:?} original");
            let forged = forge_alternative_transcript(&run).unwrap();
            assert_ne!(forged.messages, run.transcript.messages, "{class:?}");
            assert!(mac_transcript_verifies(&forged, key), "{class:?} forged");
        }
    }

    #[test]
    fn signature_transcripts_resist_the_forger() {
        let run = sample_run(ProtocolClassId::SigQke, 560);
        assert!(forge_alternative_transcript(&run).is_none());
    }
}
