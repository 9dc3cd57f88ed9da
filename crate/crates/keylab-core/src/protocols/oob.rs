//! Out-of-band key delivery: the couriered key is the session key.
//!
//! Nothing is sent in band, so there is nothing to authenticate and the
//! transcript stays empty. Every bit of session key costs a bit of couriered
//! key, which is the baseline the other classes improve on.

use super::{assemble, CoreOutput, ProtocolError, ProtocolRun};
use crate::types::{InitialKeys, ProtocolClassId, ProtocolConfig, SessionOutcome};
use crate::transcript::Transcript;

pub fn run(config: &ProtocolConfig, keys: &InitialKeys) -> Result<ProtocolRun, ProtocolError> {
    config.validate()?;
    let InitialKeys::Symmetric { key } = keys else {
        return Err(ProtocolError::KeyShape { class: ProtocolClassId::Oob });
    };
    if key.len() != config.ell {
        return Err(ProtocolError::KeyShape { class: ProtocolClassId::Oob });
    }
    let core = CoreOutput {
        outcome: SessionOutcome::Established { key_a: key.clone(), key_b: key.clone() },
        transcript: Transcript::new(),
        intercept: None,
        stats: None,
        recycled: None,
    };
    Ok(assemble(ProtocolClassId::Oob, config, keys, core))
}
