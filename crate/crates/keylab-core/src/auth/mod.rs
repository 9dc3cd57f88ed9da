//! Authentication and encryption primitives: GF(2^k) arithmetic, a
//! Wegman-Carter one-time MAC, Lamport one-time signatures, the one-way
//! function family they share, and a toy Goldwasser-Micali trapdoor
//! predicate.
//!
//! The [`Authenticator`] trait is the seam between these primitives and the
//! protocol runners: a key-establishment session is written once against the
//! trait, and becomes MAC-authenticated or signature-authenticated (or
//! unauthenticated) purely by which implementation each party holds.

pub mod gf2k;
pub mod gm;
pub mod lamport;
pub mod owf;
pub mod wcmac;

use crate::bits::BitString;
use crate::rng::SeededRng;
use alloc::vec::Vec;
use core::fmt;
use lamport::{LamportKeypair, LamportPublic, LamportSignature};
use owf::OwfConfig;
use wcmac::WcMacKey;

/// Errors raised by authentication primitives and authenticators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuthError {
    /// The one-time pad pool ran dry: the authentication-key-exhaustion
    /// condition. MAC-based sessions abort on it; signature-based sessions
    /// never raise it because pools refill.
    KeyExhausted,
    /// Key material too short or mis-sized for the requested scheme.
    ShortKeyMaterial { needed: usize, got: usize },
    /// A MAC tag failed verification.
    TagMismatch,
    /// A one-time signature failed verification.
    SignatureInvalid,
    /// A Lamport keypair was asked to sign a second message.
    KeypairConsumed,
    /// A signature-key refill announcement did not parse or verify.
    BadRefill,
}

impl fmt::Display for AuthError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuthError::KeyExhausted => write!(f, "authentication key exhausted"),
            AuthError::ShortKeyMaterial { needed, got } => {
                write!(f, "key material too short: need {needed} bits, got {got}")
            }
            AuthError::TagMismatch => write!(f, "MAC tag mismatch"),
            AuthError::SignatureInvalid => write!(f, "signature invalid"),
            AuthError::KeypairConsumed => write!(f, "one-time keypair already used"),
            AuthError::BadRefill => write!(f, "signature key refill rejected"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for AuthError {}

/// Which authentication scheme a session runs under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuthScheme {
    None,
    WcMac,
    Lamport,
}

/// One party's authentication state for one session.
///
/// `protect` and `verify` must be called once per classical message, in
/// message order, on both parties' instances (each instance sees its own
/// sends and its peer's sends), so the two sides' key state stays aligned.
/// The authenticated content is the message header (`context`) concatenated
/// with the payload, so tags cannot be replayed under a different kind,
/// sender or sequence number.
pub trait Authenticator {
    fn scheme(&self) -> AuthScheme;

    /// Produce the tag for an outgoing message, advancing key state.
    fn protect(&mut self, context: &BitString, payload: &BitString)
        -> Result<Option<BitString>, AuthError>;

    /// Check an incoming message, advancing key state.
    fn verify(
        &mut self,
        context: &BitString,
        payload: &BitString,
        auth: Option<&BitString>,
    ) -> Result<(), AuthError>;

    /// An extra control message this party must send before its next
    /// protected message (signature pool refill). `context` is the header
    /// the engine will attach to that control message.
    fn pending_refill(&mut self, context: &BitString) -> Result<Option<(BitString, BitString)>, AuthError> {
        let _ = context;
        Ok(None)
    }

    /// Install a peer's refill control message.
    fn accept_refill(&mut self, context: &BitString, payload: &BitString, auth: &BitString)
        -> Result<(), AuthError> {
        let (_, _, _) = (context, payload, auth);
        Err(AuthError::BadRefill)
    }
}

fn auth_input(context: &BitString, payload: &BitString) -> BitString {
    let mut joined = context.clone();
    joined.extend(payload);
    joined
}

/// No authentication: plain qUKE.
#[derive(Debug, Clone, Default)]
pub struct NullAuth;

impl Authenticator for NullAuth {
    fn scheme(&self) -> AuthScheme {
        AuthScheme::None
    }

    fn protect(&mut self, _: &BitString, _: &BitString) -> Result<Option<BitString>, AuthError> {
        Ok(None)
    }

    fn verify(&mut self, _: &BitString, _: &BitString, auth: Option<&BitString>) -> Result<(), AuthError> {
        match auth {
            None => Ok(()),
            Some(_) => Err(AuthError::TagMismatch),
        }
    }
}

/// Wegman-Carter MAC authentication from a shared symmetric key.
#[derive(Debug, Clone)]
pub struct WcAuthenticator {
    key: WcMacKey,
}

impl WcAuthenticator {
    pub fn new(key: WcMacKey) -> Self {
        WcAuthenticator { key }
    }

    /// Parse from raw shared key material (see [`WcMacKey::from_bits`]).
    pub fn from_bits(k: u32, material: &BitString) -> Result<Self, AuthError> {
        Ok(WcAuthenticator { key: WcMacKey::from_bits(k, material)? })
    }

    pub fn pads_remaining(&self) -> usize {
        self.key.pads_remaining()
    }
}

impl Authenticator for WcAuthenticator {
    fn scheme(&self) -> AuthScheme {
        AuthScheme::WcMac
    }

    fn protect(&mut self, context: &BitString, payload: &BitString)
        -> Result<Option<BitString>, AuthError> {
        Ok(Some(self.key.tag_next(&auth_input(context, payload))?))
    }

    fn verify(
        &mut self,
        context: &BitString,
        payload: &BitString,
        auth: Option<&BitString>,
    ) -> Result<(), AuthError> {
        let tag = auth.ok_or(AuthError::TagMismatch)?;
        if self.key.verify_next(&auth_input(context, payload), tag)? {
            Ok(())
        } else {
            Err(AuthError::TagMismatch)
        }
    }
}

/// How many digest bits Lamport signatures cover throughout the lab.
pub const LAMPORT_DIGEST_BITS: usize = 64;

/// Lamport signature authentication with chained pool refills.
///
/// Holds this party's signing keypairs and the peer's verification keys.
/// When one signing keypair remains, the next protected send is preceded by
/// a refill announcement: a fresh pool is generated, its public keys are
/// signed with the final old keypair, and the peer installs them after
/// verification. The chain keeps signatures available indefinitely; there is
/// no exhaustion failure mode.
#[derive(Debug, Clone)]
pub struct LamportAuthenticator {
    owf: OwfConfig,
    mine: Vec<LamportKeypair>,
    mine_next: usize,
    theirs: Vec<LamportPublic>,
    theirs_next: usize,
    pool_size: usize,
    rng: SeededRng,
}

impl LamportAuthenticator {
    /// `mine` are this party's signing keypairs, `theirs` the peer's public
    /// keys; `rng` generates refill pools (it is this party's own stream).
    pub fn new(
        owf: OwfConfig,
        mine: Vec<LamportKeypair>,
        theirs: Vec<LamportPublic>,
        rng: SeededRng,
    ) -> Self {
        let pool_size = mine.len().max(2);
        LamportAuthenticator {
            owf,
            mine,
            mine_next: 0,
            theirs,
            theirs_next: 0,
            pool_size,
            rng,
        }
    }

    pub fn keypairs_remaining(&self) -> usize {
        self.mine.len() - self.mine_next
    }

    fn encode_pool(publics: &[LamportPublic]) -> BitString {
        let mut payload = BitString::from_u64(publics.len() as u64, 16);
        for public in publics {
            payload.extend(&public.to_bits());
        }
        payload
    }

    fn decode_pool(&self, payload: &BitString) -> Result<Vec<LamportPublic>, AuthError> {
        if payload.len() < 16 {
            return Err(AuthError::BadRefill);
        }
        let count = payload.slice(0, 16).to_u64() as usize;
        let per = 2 * LAMPORT_DIGEST_BITS * self.owf.width() as usize;
        if count == 0 || payload.len() != 16 + count * per {
            return Err(AuthError::BadRefill);
        }
        (0..count)
            .map(|i| {
                let base = 16 + i * per;
                LamportPublic::from_bits(
                    self.owf,
                    LAMPORT_DIGEST_BITS,
                    &payload.slice(base, base + per),
                )
                .map_err(|_| AuthError::BadRefill)
            })
            .collect()
    }
}

impl Authenticator for LamportAuthenticator {
    fn scheme(&self) -> AuthScheme {
        AuthScheme::Lamport
    }

    fn protect(&mut self, context: &BitString, payload: &BitString)
        -> Result<Option<BitString>, AuthError> {
        let keypair = self.mine.get_mut(self.mine_next).ok_or(AuthError::KeyExhausted)?;
        self.mine_next += 1;
        let sig = keypair.sign(&auth_input(context, payload))?;
        Ok(Some(sig.to_bits(self.owf)))
    }

    fn verify(
        &mut self,
        context: &BitString,
        payload: &BitString,
        auth: Option<&BitString>,
    ) -> Result<(), AuthError> {
        let sig_bits = auth.ok_or(AuthError::SignatureInvalid)?;
        let public = self.theirs.get(self.theirs_next).ok_or(AuthError::SignatureInvalid)?;
        self.theirs_next += 1;
        let sig = LamportSignature::from_bits(self.owf, LAMPORT_DIGEST_BITS, sig_bits)
            .map_err(|_| AuthError::SignatureInvalid)?;
        if public.verify(&auth_input(context, payload), &sig) {
            Ok(())
        } else {
            Err(AuthError::SignatureInvalid)
        }
    }

    fn pending_refill(&mut self, context: &BitString) -> Result<Option<(BitString, BitString)>, AuthError> {
        if self.keypairs_remaining() > 1 {
            return Ok(None);
        }
        let fresh: Vec<LamportKeypair> = (0..self.pool_size)
            .map(|_| LamportKeypair::generate(self.owf, LAMPORT_DIGEST_BITS, &mut self.rng))
            .collect();
        let publics: Vec<LamportPublic> = fresh.iter().map(|kp| kp.public()).collect();
        let payload = Self::encode_pool(&publics);
        let signature = self.protect(context, &payload)?.expect("lamport always tags");
        self.mine = fresh;
        self.mine_next = 0;
        Ok(Some((payload, signature)))
    }

    fn accept_refill(&mut self, context: &BitString, payload: &BitString, auth: &BitString)
        -> Result<(), AuthError> {
        self.verify(context, payload, Some(auth)).map_err(|_| AuthError::BadRefill)?;
        self.theirs = self.decode_pool(payload)?;
        self.theirs_next = 0;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, SeededRng};

    fn lamport_pair(pool: usize) -> (LamportAuthenticator, LamportAuthenticator) {
        let mut setup = SeededRng::new(77);
        let alice_keys: Vec<LamportKeypair> = (0..pool)
            .map(|_| LamportKeypair::generate(OwfConfig::Strong, LAMPORT_DIGEST_BITS, &mut setup))
            .collect();
        let bob_keys: Vec<LamportKeypair> = (0..pool)
            .map(|_| LamportKeypair::generate(OwfConfig::Strong, LAMPORT_DIGEST_BITS, &mut setup))
            .collect();
        let alice_pub: Vec<LamportPublic> = alice_keys.iter().map(|k| k.public()).collect();
        let bob_pub: Vec<LamportPublic> = bob_keys.iter().map(|k| k.public()).collect();
        let alice = LamportAuthenticator::new(
            OwfConfig::Strong,
            alice_keys,
            bob_pub,
            SeededRng::derive(77, stream::ALICE),
        );
        let bob = LamportAuthenticator::new(
            OwfConfig::Strong,
            bob_keys,
            alice_pub,
            SeededRng::derive(77, stream::BOB),
        );
        (alice, bob)
    }

    #[test]
    fn wc_pair_protect_verify() {
        let key = WcMacKey::generate(32, 8, &mut SeededRng::new(5));
        let mut alice = WcAuthenticator::new(key.clone());
        let mut bob = WcAuthenticator::new(key);
        let ctx = BitString::from_u64(0x0102, 16);
        let payload = SeededRng::new(6).bits(100);
        let tag = alice.protect(&ctx, &payload).unwrap();
        assert!(bob.verify(&ctx, &payload, tag.as_ref()).is_ok());

        // Same payload under a different context must not verify.
        let tag = alice.protect(&ctx, &payload).unwrap();
        let wrong_ctx = BitString::from_u64(0x0103, 16);
        assert_eq!(bob.verify(&wrong_ctx, &payload, tag.as_ref()), Err(AuthError::TagMismatch));
    }

    #[test]
    fn lamport_refill_chain_survives_many_messages() {
        let (mut alice, mut bob) = lamport_pair(3);
        let payload = BitString::from_str01("110010").unwrap();
        for i in 0..20u64 {
            let ctx = BitString::from_u64(i, 32);
            while let Some((refill_payload, sig)) = alice.pending_refill(&ctx).unwrap() {
                bob.accept_refill(&ctx, &refill_payload, &sig).unwrap();
            }
            let tag = alice.protect(&ctx, &payload).unwrap();
            bob.verify(&ctx, &payload, tag.as_ref()).unwrap();
        }
        // Twenty messages through a pool of three is only possible if the
        // chain refilled repeatedly.
        assert!(alice.keypairs_remaining() >= 1);
    }

    #[test]
    fn tampered_refill_is_rejected() {
        let (mut alice, mut bob) = lamport_pair(2);
        let ctx = BitString::from_u64(0, 32);
        let body = BitString::from_str01("01").unwrap();
        let tag = alice.protect(&ctx, &body).unwrap();
        bob.verify(&ctx, &body, tag.as_ref()).unwrap();
        let (mut payload, sig) =
            alice.pending_refill(&ctx).unwrap().expect("one keypair left triggers refill");
        payload.flip(20);
        assert_eq!(bob.accept_refill(&ctx, &payload, &sig), Err(AuthError::BadRefill));
    }

    #[test]
    fn null_auth_rejects_unexpected_tags() {
        let mut null = NullAuth;
        let ctx = BitString::new();
        let payload = BitString::from_str01("1").unwrap();
        assert!(null.verify(&ctx, &payload, None).is_ok());
        let stray = BitString::from_str01("1").unwrap();
        assert!(null.verify(&ctx, &payload, Some(&stray)).is_err());
    }
}
