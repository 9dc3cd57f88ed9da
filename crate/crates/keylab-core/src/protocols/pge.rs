//! Pseudorandom key expansion: both parties expand the shared short key
//! into the session key locally.
//!
//! Still no in-band communication; unlike out-of-band delivery, the session
//! key can be longer than the couriered key, at the price of resting on the
//! expander's one-wayness. The session key is a pure function of the
//! initial key, which the recomputation oracle demonstrates.

use super::{assemble, CoreOutput, ProtocolError, ProtocolRun};
use crate::auth::owf::{prg_expand, OwfConfig};
use crate::transcript::Transcript;
use crate::types::{InitialKeys, ProtocolClassId, ProtocolConfig, SessionOutcome};

pub fn run(config: &ProtocolConfig, keys: &InitialKeys) -> Result<ProtocolRun, ProtocolError> {
    config.validate()?;
    let InitialKeys::Symmetric { key } = keys else {
        return Err(ProtocolError::KeyShape { class: ProtocolClassId::Pge });
    };
    if key.is_empty() {
        return Err(ProtocolError::KeyShape { class: ProtocolClassId::Pge });
    }
    let s = prg_expand(OwfConfig::Strong, key, config.ell);
    let core = CoreOutput {
        outcome: SessionOutcome::Established { key_a: s.clone(), key_b: s },
        transcript: Transcript::new(),
        intercept: None,
        stats: None,
        recycled: None,
    };
    Ok(assemble(ProtocolClassId::Pge, config, keys, core))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn expansion_is_deterministic_and_transcript_free() {
        let config = ProtocolConfig { ell: 256, ..Default::default() };
        let keys = InitialKeys::Symmetric { key: SeededRng::new(7).bits(128) };
        let first = run(&config, &keys).unwrap();
        let second = run(&config, &keys).unwrap();
        assert_eq!(first.established_key(), second.established_key());
        assert_eq!(first.established_key().unwrap().len(), 256);
        assert!(first.transcript.messages.is_empty());
    }

    #[test]
    fn output_reaches_past_the_input_length() {
        let config = ProtocolConfig { ell: 512, ..Default::default() };
        let key = SeededRng::new(8).bits(128);
        let keys = InitialKeys::Symmetric { key: key.clone() };
        let run = run(&config, &keys).unwrap();
        let s = run.established_key().unwrap();
        assert_eq!(s.len(), 512);
        assert!(s.len() > key.len());
        let InitialKeys::Symmetric { key } = &keys else { unreachable!() };
        assert_eq!(s, &prg_expand(OwfConfig::Strong, key, 512));
    }

    #[test]
    fn empty_key_is_rejected() {
        let config = ProtocolConfig::default();
        let keys = InitialKeys::Symmetric { key: crate::bits::BitString::new() };
        assert!(matches!(run(&config, &keys), Err(ProtocolError::KeyShape { .. })));
    }
}
