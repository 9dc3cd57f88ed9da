//! Simulated key-establishment laboratory.
//!
//! This crate models several families of two-party key establishment side by
//! side, over the same bit-level machinery, so their security behaviour can be
//! compared experimentally:
//!
//! * preloaded out-of-band keys ([`protocols::oob`])
//! * pseudorandom expansion of a short preloaded key ([`protocols::pge`])
//! * symmetric encrypted key transport ([`protocols::seb`])
//! * public-key (trapdoor predicate) key transport ([`protocols::ske`])
//! * BB84-style quantum key establishment, authenticated either by an
//!   information-theoretic MAC ([`protocols::run_mac_qke`]) or by one-time
//!   signatures ([`protocols::run_sig_qke`])
//!
//! Everything is deterministic given a seed: sessions draw from named child
//! streams of a session seed ([`rng::SeededRng`]), transcripts serialize to a
//! byte-exact format ([`transcript::Transcript`]), and every experiment in
//! [`adversary`] and [`metrics`] records the seed it ran under, so any number
//! in a report can be regenerated.
//!
//! The crate is `no_std`-compatible (with `alloc`); the `std` feature (on by
//! default) only adds `std::error::Error` impls for the error types.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod adversary;
pub mod auth;
pub mod bits;
pub mod metrics;
pub mod protocols;
pub mod qchannel;
pub mod qke;
pub mod rng;
pub mod session;
pub mod transcript;
pub mod types;

pub use bits::BitString;
pub use rng::SeededRng;
pub use types::{
    AdversarySpec, ChannelAccess, InitialKeys, ProtocolClassId, ProtocolConfig, SessionOutcome,
};
