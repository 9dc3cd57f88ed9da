//! Encrypted key transport under the shared initial key: Alice samples the
//! session key, sends it one-time-pad style under a stream derived from the
//! encryption subkey, and tags the ciphertext with a one-time MAC from the
//! authentication subkey.
//!
//! The session key is recoverable from the initial key plus the ciphertext
//! on the wire, which is the defining weakness this class carries into the
//! key-reveal experiments.

use super::{assemble, CoreOutput, ProtocolError, ProtocolRun, MAC_TAG_BITS};
use crate::auth::owf::{prg_expand, OwfConfig};
use crate::auth::wcmac::WcMacKey;
use crate::auth::WcAuthenticator;
use crate::bits::BitString;
use crate::rng::{stream, SeededRng};
use crate::session::{ClassicalTap, SessionChannel};
use crate::transcript::MessageKind;
use crate::types::{
    AbortReason, InitialKeys, Party, ProtocolClassId, ProtocolConfig, SessionOutcome,
};

/// Bits of the initial key used to seed the transport pad.
pub const ENC_SEED_BITS: usize = 64;

/// Total initial key size: pad seed plus one-time MAC material for the
/// single transport message.
pub fn key_bits() -> usize {
    ENC_SEED_BITS + WcMacKey::material_bits(MAC_TAG_BITS, 1)
}

/// One authenticated, encrypted key delivery from `sender` to `receiver`
/// over `channel`. Returns the secret as the receiver decrypts it.
///
/// Shared between the class runner (Alice to Bob) and the mediated mode's
/// center-to-party legs.
pub(crate) fn transport_leg(
    secret: &BitString,
    shared_key: &BitString,
    sender: Party,
    receiver: Party,
    channel: &mut SessionChannel,
    tap: &mut dyn ClassicalTap,
) -> Result<BitString, (AbortReason, Party)> {
    let enc_seed = shared_key.slice(0, ENC_SEED_BITS);
    let mac_material = shared_key.slice(ENC_SEED_BITS, shared_key.len());
    let mut sender_auth = WcAuthenticator::from_bits(MAC_TAG_BITS, &mac_material)
        .map_err(|_| (AbortReason::AuthKeyExhausted, sender))?;
    let mut receiver_auth = WcAuthenticator::from_bits(MAC_TAG_BITS, &mac_material)
        .map_err(|_| (AbortReason::AuthKeyExhausted, receiver))?;
    let pad = prg_expand(OwfConfig::Strong, &enc_seed, secret.len());
    let ciphertext = secret.xor(&pad).expect("pad sized to secret");
    let delivered = channel
        .exchange(
            sender,
            MessageKind::KeyTransport,
            ciphertext,
            &mut sender_auth,
            &mut receiver_auth,
            tap,
        )
        .map_err(|reason| match reason {
            AbortReason::AuthKeyExhausted => (AbortReason::AuthKeyExhausted, sender),
            other => (other, receiver),
        })?;
    if delivered.len() != secret.len() {
        return Err((AbortReason::KeyConfirmFailed, receiver));
    }
    Ok(delivered.xor(&pad).expect("lengths checked"))
}

pub fn run(
    config: &ProtocolConfig,
    keys: &InitialKeys,
    tap: &mut dyn ClassicalTap,
) -> Result<ProtocolRun, ProtocolError> {
    config.validate()?;
    let InitialKeys::Symmetric { key } = keys else {
        return Err(ProtocolError::KeyShape { class: ProtocolClassId::Seb });
    };
    if key.len() != key_bits() {
        return Err(ProtocolError::KeyShape { class: ProtocolClassId::Seb });
    }
    let mut alice = SeededRng::derive(config.rng_seed, stream::ALICE);
    let s = alice.bits(config.ell);
    let mut channel = SessionChannel::new();
    let outcome = match transport_leg(&s, key, Party::Alice, Party::Bob, &mut channel, tap) {
        Ok(s_b) => SessionOutcome::Established { key_a: s, key_b: s_b },
        Err((reason, party)) => {
            channel.abort_notice(party, &reason);
            SessionOutcome::Aborted { reason }
        }
    };
    let core = CoreOutput {
        outcome,
        transcript: channel.transcript,
        intercept: None,
        stats: None,
        recycled: None,
    };
    Ok(assemble(ProtocolClassId::Seb, config, keys, core))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::NoTap;
    use crate::transcript::ClassicalMessage;

    fn fresh_keys(seed: u64) -> InitialKeys {
        InitialKeys::Symmetric { key: SeededRng::new(seed).bits(key_bits()) }
    }

    #[test]
    fn honest_transport_delivers_one_tagged_ciphertext() {
        let config = ProtocolConfig { rng_seed: 21, ..Default::default() };
        let run = run(&config, &fresh_keys(21), &mut NoTap).unwrap();
        let key = run.established_key().expect("agreed");
        assert_eq!(key.len(), config.ell);
        assert_eq!(run.transcript.messages.len(), 1);
        let msg = &run.transcript.messages[0];
        assert_eq!(msg.kind, MessageKind::KeyTransport);
        assert!(msg.auth.is_some());
        // The wire never carries the key in the clear.
        assert_ne!(&msg.payload, key);
    }

    #[test]
    fn ciphertext_and_initial_key_recompute_the_session_key() {
        let config = ProtocolConfig { rng_seed: 22, ..Default::default() };
        let keys = fresh_keys(22);
        let run = run(&config, &keys, &mut NoTap).unwrap();
        let InitialKeys::Symmetric { key } = &keys else { unreachable!() };
        let pad = prg_expand(OwfConfig::Strong, &key.slice(0, ENC_SEED_BITS), config.ell);
        let recovered = run.transcript.messages[0].payload.xor(&pad).unwrap();
        assert_eq!(&recovered, run.established_key().unwrap());
    }

    #[test]
    fn tampered_ciphertext_without_the_key_aborts() {
        struct Flip;
        impl ClassicalTap for Flip {
            fn intercept(&mut self, message: &mut ClassicalMessage) {
                message.payload.flip(0);
            }
        }
        let config = ProtocolConfig { rng_seed: 23, ..Default::default() };
        let run = run(&config, &fresh_keys(23), &mut Flip).unwrap();
        assert_eq!(run.outcome.abort_reason(), Some(&AbortReason::AuthReject));
        // Abort notice follows the rejected transport on the wire.
        assert_eq!(run.transcript.messages.len(), 2);
        assert_eq!(run.transcript.messages[1].kind, MessageKind::Abort);
    }
}
