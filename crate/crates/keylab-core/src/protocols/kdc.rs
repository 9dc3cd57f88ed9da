//! Mediated mode: a key distribution center shares a long-lived key with
//! each party, delivers a fresh session key to both over encrypted
//! transport, and the parties then run authenticated quantum key
//! establishment keyed by that session key.
//!
//! The point of the construction is what the center ends up knowing: all of
//! the session key, none of the final key. The center's complete records
//! are kept in [`KdcState`] so compromise experiments can hand them to an
//! adversary wholesale.

use super::{run_mac_qke, seb, ProtocolError, ProtocolRun};
use crate::bits::BitString;
use crate::qchannel::EveTap;
use crate::rng::{stream, SeededRng};
use crate::session::{ClassicalTap, SessionChannel};
use crate::transcript::Transcript;
use crate::types::{InitialKeys, Party, ProtocolConfig};

/// Everything the center held or saw: leg keys, the issued session key,
/// and both delivery transcripts.
#[derive(Debug, Clone)]
pub struct KdcState {
    pub alice_leg_key: BitString,
    pub bob_leg_key: BitString,
    pub session_key: BitString,
    pub alice_leg_transcript: Transcript,
    pub bob_leg_transcript: Transcript,
}

/// The mediated session: two delivery legs, then the keyed quantum phase.
#[derive(Debug, Clone)]
pub struct KdcMediatedRun {
    pub qke: ProtocolRun,
    pub state: KdcState,
}

/// Run the full mediated flow. Interception hooks apply to the quantum
/// phase; the delivery legs run clean, since the compromise experiments
/// attack the center's records rather than the legs' wires.
pub fn run_kdc_mediated(
    config: &ProtocolConfig,
    quantum_tap: EveTap,
    classical_tap: &mut dyn ClassicalTap,
) -> Result<KdcMediatedRun, ProtocolError> {
    config.validate()?;
    let mut setup = SeededRng::derive(config.rng_seed, stream::SETUP);
    let alice_leg_key = setup.bits(seb::key_bits());
    let bob_leg_key = setup.bits(seb::key_bits());
    let mut center = SeededRng::derive(config.rng_seed, stream::KDC);
    let session_key = center.bits(super::recycle_reserve_bits());

    let leg = |leg_key: &BitString, receiver: Party| {
        let mut channel = SessionChannel::new();
        let delivered = seb::transport_leg(
            &session_key,
            leg_key,
            Party::Kdc,
            receiver,
            &mut channel,
            &mut crate::session::NoTap,
        )
        .expect("clean leg cannot abort");
        (delivered, channel.transcript)
    };
    let (alice_session_key, alice_leg_transcript) = leg(&alice_leg_key, Party::Alice);
    let (bob_session_key, bob_leg_transcript) = leg(&bob_leg_key, Party::Bob);
    debug_assert_eq!(alice_session_key, bob_session_key);

    let qke_keys = InitialKeys::Symmetric { key: alice_session_key };
    let qke = run_mac_qke(config, &qke_keys, quantum_tap, classical_tap)?;

    Ok(KdcMediatedRun {
        qke,
        state: KdcState {
            alice_leg_key,
            bob_leg_key,
            session_key,
            alice_leg_transcript,
            bob_leg_transcript,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::owf::{prg_expand, OwfConfig};
    use crate::session::NoTap;
    use crate::transcript::MessageKind;

    #[test]
    fn mediated_flow_establishes_a_key_the_center_never_saw() {
        let config = ProtocolConfig { rng_seed: 91, ..Default::default() };
        let mediated = run_kdc_mediated(&config, EveTap::None, &mut NoTap).unwrap();
        let final_key = mediated.qke.established_key().expect("keyed phase agrees");
        assert_eq!(final_key.len(), config.ell);
        // The center issued the quantum phase's initial key in full.
        let InitialKeys::Symmetric { key } = &mediated.qke.initial_keys else { unreachable!() };
        assert_eq!(key, &mediated.state.session_key);
        // The final key is not the session key, a prefix of it, or anything
        // the center's records contain verbatim.
        assert_ne!(final_key, &mediated.state.session_key.slice(0, final_key.len()));
    }

    #[test]
    fn leg_transcripts_decrypt_under_the_leg_keys() {
        let config = ProtocolConfig { rng_seed: 92, ..Default::default() };
        let mediated = run_kdc_mediated(&config, EveTap::None, &mut NoTap).unwrap();
        for (leg_key, transcript) in [
            (&mediated.state.alice_leg_key, &mediated.state.alice_leg_transcript),
            (&mediated.state.bob_leg_key, &mediated.state.bob_leg_transcript),
        ] {
            let msg = transcript.first_of_kind(MessageKind::KeyTransport).unwrap();
            assert_eq!(msg.sender, Party::Kdc);
            let pad = prg_expand(
                OwfConfig::Strong,
                &leg_key.slice(0, seb::ENC_SEED_BITS),
                msg.payload.len(),
            );
            assert_eq!(msg.payload.xor(&pad).unwrap(), mediated.state.session_key);
        }
    }

    #[test]
    fn issued_session_keys_differ_across_sessions() {
        let one = run_kdc_mediated(
            &ProtocolConfig { rng_seed: 93, ..Default::default() },
            EveTap::None,
            &mut NoTap,
        )
        .unwrap();
        let two = run_kdc_mediated(
            &ProtocolConfig { rng_seed: 94, ..Default::default() },
            EveTap::None,
            &mut NoTap,
        )
        .unwrap();
        assert_ne!(one.state.session_key, two.state.session_key);
    }
}
