//! Session transcripts: every classical message a run exchanged, plus a
//! record of quantum frame activity, with a stable binary encoding so runs
//! can be archived and replayed byte-identically.

use crate::bits::BitString;
use crate::types::Party;
use alloc::vec::Vec;
use core::fmt;

/// Classical message types, tagged for serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageKind {
    /// Sender's measurement or preparation bases for a quantum frame.
    BasisDisclosure = 0x01,
    /// Which pulse positions survived basis comparison.
    SiftMask = 0x02,
    /// Which sifted positions are disclosed for error estimation.
    SampleMask = 0x03,
    /// The disclosed sample values.
    SampleBits = 0x04,
    /// Seed for the shared reconciliation permutation.
    ReconcileSeed = 0x05,
    /// Block parities disclosed during reconciliation.
    Parity = 0x06,
    /// Reconciliation replies: mismatch flags and binary-search choices.
    ReconcileControl = 0x07,
    /// Hash of the reconciled string for verification.
    VerifyHash = 0x08,
    /// Whether the verification hashes matched.
    VerifyResult = 0x09,
    /// Seed for the privacy-amplification extractor.
    PaSeed = 0x0A,
    /// An encrypted session secret in transit.
    KeyTransport = 0x0B,
    /// An announced public key.
    PublicKeyAnnounce = 0x0C,
    /// Per-bit trapdoor ciphertexts in transit.
    BitCiphertexts = 0x0D,
    /// Key-confirmation digest.
    KeyConfirm = 0x0E,
    /// Fresh signature keys signed with the last old one.
    SigKeyRefill = 0x0F,
    /// Session abandoned; payload is an abort code.
    Abort = 0x10,
}

impl MessageKind {
    pub const ALL: [MessageKind; 16] = [
        MessageKind::BasisDisclosure,
        MessageKind::SiftMask,
        MessageKind::SampleMask,
        MessageKind::SampleBits,
        MessageKind::ReconcileSeed,
        MessageKind::Parity,
        MessageKind::ReconcileControl,
        MessageKind::VerifyHash,
        MessageKind::VerifyResult,
        MessageKind::PaSeed,
        MessageKind::KeyTransport,
        MessageKind::PublicKeyAnnounce,
        MessageKind::BitCiphertexts,
        MessageKind::KeyConfirm,
        MessageKind::SigKeyRefill,
        MessageKind::Abort,
    ];

    pub fn from_u8(tag: u8) -> Option<MessageKind> {
        Self::ALL.into_iter().find(|k| *k as u8 == tag)
    }

    /// Payloads that carry an encrypted session secret.
    pub fn is_transport_ciphertext(self) -> bool {
        matches!(self, MessageKind::KeyTransport | MessageKind::BitCiphertexts)
    }

    pub fn label(self) -> &'static str {
        match self {
            MessageKind::BasisDisclosure => "basis-disclosure",
            MessageKind::SiftMask => "sift-mask",
            MessageKind::SampleMask => "sample-mask",
            MessageKind::SampleBits => "sample-bits",
            MessageKind::ReconcileSeed => "reconcile-seed",
            MessageKind::Parity => "parity",
            MessageKind::ReconcileControl => "reconcile-control",
            MessageKind::VerifyHash => "verify-hash",
            MessageKind::VerifyResult => "verify-result",
            MessageKind::PaSeed => "pa-seed",
            MessageKind::KeyTransport => "key-transport",
            MessageKind::PublicKeyAnnounce => "public-key-announce",
            MessageKind::BitCiphertexts => "bit-ciphertexts",
            MessageKind::KeyConfirm => "key-confirm",
            MessageKind::SigKeyRefill => "sig-key-refill",
            MessageKind::Abort => "abort",
        }
    }
}

/// One authenticated (or bare) classical message.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalMessage {
    pub sender: Party,
    pub kind: MessageKind,
    pub payload: BitString,
    pub auth: Option<BitString>,
}

/// One quantum frame's passage, as classical bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRecord {
    pub frame_id: u32,
    pub sender: Party,
    pub pulses: u32,
    pub tapped: bool,
}

/// Everything observable on the channels during one session.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub messages: Vec<ClassicalMessage>,
    pub frames: Vec<FrameRecord>,
}

/// Decoding failures for archived transcripts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TranscriptError {
    BadMagic,
    Truncated,
    BadSender { value: u8 },
    BadKind { value: u8 },
    TrailingBytes { count: usize },
}

impl fmt::Display for TranscriptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TranscriptError::BadMagic => write!(f, "not a transcript: bad magic"),
            TranscriptError::Truncated => write!(f, "transcript truncated"),
            TranscriptError::BadSender { value } => write!(f, "unknown sender tag {value}"),
            TranscriptError::BadKind { value } => write!(f, "unknown message kind {value}"),
            TranscriptError::TrailingBytes { count } => {
                write!(f, "{count} bytes after transcript end")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TranscriptError {}

const MAGIC: &[u8; 4] = b"KLT1";

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TranscriptError> {
        if self.pos + n > self.bytes.len() {
            return Err(TranscriptError::Truncated);
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, TranscriptError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, TranscriptError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn bits(&mut self, bit_len: usize) -> Result<BitString, TranscriptError> {
        let byte_len = bit_len.div_ceil(8);
        let bytes = self.take(byte_len)?;
        Ok(BitString::from_bytes_lsb(bytes, bit_len))
    }
}

impl Transcript {
    pub fn new() -> Self {
        Transcript::default()
    }

    pub fn push(&mut self, message: ClassicalMessage) {
        self.messages.push(message);
    }

    pub fn record_frame(&mut self, frame: FrameRecord) {
        self.frames.push(frame);
    }

    pub fn messages_of_kind(&self, kind: MessageKind) -> impl Iterator<Item = &ClassicalMessage> {
        self.messages.iter().filter(move |m| m.kind == kind)
    }

    pub fn first_of_kind(&self, kind: MessageKind) -> Option<&ClassicalMessage> {
        self.messages.iter().find(|m| m.kind == kind)
    }

    /// Disclosed parity bits from one sender; reconciliation leak accounting
    /// is cross-checked against this.
    pub fn parity_bits_from(&self, sender: Party) -> usize {
        self.messages
            .iter()
            .filter(|m| m.sender == sender && m.kind == MessageKind::Parity)
            .map(|m| m.payload.len())
            .sum()
    }

    /// Total classical payload bits on the wire (authentication excluded).
    pub fn payload_bits(&self) -> usize {
        self.messages.iter().map(|m| m.payload.len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.messages.len() as u32).to_le_bytes());
        for m in &self.messages {
            out.push(m.sender.index());
            out.push(m.kind as u8);
            out.push(m.auth.is_some() as u8);
            out.extend_from_slice(&(m.payload.len() as u32).to_le_bytes());
            let auth_len = m.auth.as_ref().map_or(0, |a| a.len());
            out.extend_from_slice(&(auth_len as u32).to_le_bytes());
            out.extend_from_slice(&m.payload.to_bytes_lsb());
            if let Some(auth) = &m.auth {
                out.extend_from_slice(&auth.to_bytes_lsb());
            }
        }
        out.extend_from_slice(&(self.frames.len() as u32).to_le_bytes());
        for fr in &self.frames {
            out.extend_from_slice(&fr.frame_id.to_le_bytes());
            out.push(fr.sender.index());
            out.extend_from_slice(&fr.pulses.to_le_bytes());
            out.push(fr.tapped as u8);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TranscriptError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(TranscriptError::BadMagic);
        }
        let message_count = r.u32()? as usize;
        let mut messages = Vec::with_capacity(message_count.min(1 << 16));
        for _ in 0..message_count {
            let sender_tag = r.u8()?;
            let sender =
                Party::from_index(sender_tag).ok_or(TranscriptError::BadSender { value: sender_tag })?;
            let kind_tag = r.u8()?;
            let kind =
                MessageKind::from_u8(kind_tag).ok_or(TranscriptError::BadKind { value: kind_tag })?;
            let has_auth = r.u8()? != 0;
            let payload_len = r.u32()? as usize;
            let auth_len = r.u32()? as usize;
            let payload = r.bits(payload_len)?;
            let auth = if has_auth { Some(r.bits(auth_len)?) } else { None };
            messages.push(ClassicalMessage { sender, kind, payload, auth });
        }
        let frame_count = r.u32()? as usize;
        let mut frames = Vec::with_capacity(frame_count.min(1 << 16));
        for _ in 0..frame_count {
            let frame_id = r.u32()?;
            let sender_tag = r.u8()?;
            let sender =
                Party::from_index(sender_tag).ok_or(TranscriptError::BadSender { value: sender_tag })?;
            let pulses = r.u32()?;
            let tapped = r.u8()? != 0;
            frames.push(FrameRecord { frame_id, sender, pulses, tapped });
        }
        if r.pos != bytes.len() {
            return Err(TranscriptError::TrailingBytes { count: bytes.len() - r.pos });
        }
        Ok(Transcript { messages, frames })
    }

    /// FNV-1a over the serialized form; used to fingerprint transcripts in
    /// reports and correlation tests.
    pub fn digest64(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.to_bytes() {
            hash ^= byte as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        hash
    }
}
