//! The classical conversation layer every protocol runs on: sequenced,
//! optionally authenticated message exchange with an interception hook.
//!
//! Authentication covers a fixed header (sender, kind, sequence number)
//! concatenated with the payload, so a tag can neither be replayed for a
//! different message kind nor spliced into a different position. Sequence
//! numbers count every message in the session, key refills included. Abort
//! notices are the one unauthenticated message: a party that has just
//! rejected a tag cannot authenticate anything further.

use crate::auth::{AuthError, Authenticator};
use crate::bits::BitString;
use crate::transcript::{ClassicalMessage, MessageKind, Transcript};
use crate::types::{AbortReason, Party};

/// An active classical-channel adversary. Receives every message on the
/// wire and may rewrite it before delivery.
pub trait ClassicalTap {
    fn intercept(&mut self, message: &mut ClassicalMessage);
}

/// No interception.
pub struct NoTap;

impl ClassicalTap for NoTap {
    fn intercept(&mut self, _: &mut ClassicalMessage) {}
}

fn abort_code(reason: &AbortReason) -> u8 {
    match reason {
        AbortReason::QberExceeded { .. } => 1,
        AbortReason::AuthReject => 2,
        AbortReason::ReconcileFailed => 3,
        AbortReason::InsufficientKey => 4,
        AbortReason::AuthKeyExhausted => 5,
        AbortReason::KeyConfirmFailed => 6,
    }
}

/// Header the authenticator binds to each message. Public because an
/// adversary forging tags must reproduce it exactly.
pub fn header(sender: Party, kind: MessageKind, seq: u32) -> BitString {
    let word =
        (sender.index() as u64) | ((kind as u64) << 8) | (((seq & 0xFFFF) as u64) << 16);
    BitString::from_u64(word, 32)
}

/// One session's classical channel: transcript accumulation plus sequencing.
pub struct SessionChannel {
    pub transcript: Transcript,
    seq: u32,
}

impl SessionChannel {
    pub fn new() -> Self {
        SessionChannel { transcript: Transcript::new(), seq: 0 }
    }

    /// Send one message from `sender`, through the tap, to the peer.
    ///
    /// Returns the payload as delivered (the tap may have rewritten it), or
    /// the abort the receiving side raises when verification fails. Pending
    /// signature-key refills are flushed first, as their own messages.
    pub fn exchange(
        &mut self,
        sender: Party,
        kind: MessageKind,
        payload: BitString,
        sender_auth: &mut dyn Authenticator,
        receiver_auth: &mut dyn Authenticator,
        tap: &mut dyn ClassicalTap,
    ) -> Result<BitString, AbortReason> {
        loop {
            let refill_ctx = header(sender, MessageKind::SigKeyRefill, self.seq);
            let Some((refill_payload, refill_sig)) = sender_auth
                .pending_refill(&refill_ctx)
                .map_err(exhaustion_or_reject)?
            else {
                break;
            };
            let mut message = ClassicalMessage {
                sender,
                kind: MessageKind::SigKeyRefill,
                payload: refill_payload,
                auth: Some(refill_sig),
            };
            tap.intercept(&mut message);
            self.transcript.push(message.clone());
            let delivered_ctx = header(message.sender, message.kind, self.seq);
            self.seq += 1;
            let sig = message.auth.as_ref().ok_or(AbortReason::AuthReject)?;
            receiver_auth
                .accept_refill(&delivered_ctx, &message.payload, sig)
                .map_err(|_| AbortReason::AuthReject)?;
        }

        let ctx = header(sender, kind, self.seq);
        let auth = sender_auth.protect(&ctx, &payload).map_err(exhaustion_or_reject)?;
        let mut message = ClassicalMessage { sender, kind, payload, auth };
        tap.intercept(&mut message);
        self.transcript.push(message.clone());
        let delivered_ctx = header(message.sender, message.kind, self.seq);
        self.seq += 1;
        receiver_auth
            .verify(&delivered_ctx, &message.payload, message.auth.as_ref())
            .map_err(|e| match e {
                AuthError::KeyExhausted => AbortReason::AuthKeyExhausted,
                _ => AbortReason::AuthReject,
            })?;
        Ok(message.payload)
    }

    /// Record an unauthenticated abort notice from `sender`.
    pub fn abort_notice(&mut self, sender: Party, reason: &AbortReason) {
        self.transcript.push(ClassicalMessage {
            sender,
            kind: MessageKind::Abort,
            payload: BitString::from_u64(abort_code(reason) as u64, 8),
            auth: None,
        });
        self.seq += 1;
    }

    pub fn messages_sent(&self) -> u32 {
        self.seq
    }
}

impl Default for SessionChannel {
    fn default() -> Self {
        Self::new()
    }
}

fn exhaustion_or_reject(e: AuthError) -> AbortReason {
    match e {
        AuthError::KeyExhausted => AbortReason::AuthKeyExhausted,
        _ => AbortReason::AuthReject,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::auth::wcmac::WcMacKey;
    use crate::auth::{NullAuth, WcAuthenticator};
    use crate::rng::SeededRng;

    struct FlipTap {
        target_kind: MessageKind,
        bit: usize,
    }

    impl ClassicalTap for FlipTap {
        fn intercept(&mut self, message: &mut ClassicalMessage) {
            if message.kind == self.target_kind && message.payload.len() > self.bit {
                message.payload.flip(self.bit);
            }
        }
    }

    #[test]
    fn untampered_mac_exchange_delivers() {
        let key = WcMacKey::generate(32, 8, &mut SeededRng::new(1));
        let mut a = WcAuthenticator::new(key.clone());
        let mut b = WcAuthenticator::new(key);
        let mut ch = SessionChannel::new();
        let payload = SeededRng::new(2).bits(64);
        let delivered = ch
            .exchange(Party::Alice, MessageKind::Parity, payload.clone(), &mut a, &mut b, &mut NoTap)
            .unwrap();
        assert_eq!(delivered, payload);
        assert_eq!(ch.messages_sent(), 1);
    }

    #[test]
    fn tampering_under_mac_is_caught() {
        let key = WcMacKey::generate(32, 8, &mut SeededRng::new(3));
        let mut a = WcAuthenticator::new(key.clone());
        let mut b = WcAuthenticator::new(key);
        let mut ch = SessionChannel::new();
        let mut tap = FlipTap { target_kind: MessageKind::Parity, bit: 5 };
        let result = ch.exchange(
            Party::Alice,
            MessageKind::Parity,
            SeededRng::new(4).bits(64),
            &mut a,
            &mut b,
            &mut tap,
        );
        assert_eq!(result, Err(AbortReason::AuthReject));
        // The tampered payload is what the transcript shows on the wire.
        assert_eq!(ch.transcript.messages.len(), 1);
    }

    #[test]
    fn tampering_without_auth_passes_through() {
        let mut a = NullAuth;
        let mut b = NullAuth;
        let mut ch = SessionChannel::new();
        let mut tap = FlipTap { target_kind: MessageKind::Parity, bit: 0 };
        let payload = BitString::from_str01("1000").unwrap();
        let delivered = ch
            .exchange(Party::Alice, MessageKind::Parity, payload, &mut a, &mut b, &mut tap)
            .unwrap();
        assert_eq!(delivered, BitString::from_str01("0000").unwrap());
    }

    #[test]
    fn pad_exhaustion_surfaces_as_its_own_abort() {
        let key = WcMacKey::generate(32, 1, &mut SeededRng::new(5));
        let mut a = WcAuthenticator::new(key.clone());
        let mut b = WcAuthenticator::new(key);
        let mut ch = SessionChannel::new();
        let payload = BitString::from_str01("11").unwrap();
        ch.exchange(Party::Alice, MessageKind::Parity, payload.clone(), &mut a, &mut b, &mut NoTap)
            .unwrap();
        let second =
            ch.exchange(Party::Bob, MessageKind::Parity, payload, &mut b, &mut a, &mut NoTap);
        assert_eq!(second, Err(AbortReason::AuthKeyExhausted));
    }

    #[test]
    fn abort_notice_is_unauthenticated() {
        let mut ch = SessionChannel::new();
        ch.abort_notice(Party::Bob, &AbortReason::AuthReject);
        let msg = &ch.transcript.messages[0];
        assert_eq!(msg.kind, MessageKind::Abort);
        assert!(msg.auth.is_none());
        assert_eq!(msg.payload.to_u64(), 2);
    }
}
