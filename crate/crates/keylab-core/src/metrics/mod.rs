//! Statistical machinery for the experiment harness: interval estimates,
//! the key-vs-uniform distinguisher game, uniformity and independence
//! tests, recompute oracles, and attributability analysis.

pub mod attribution;
pub mod distinguisher;
pub mod independence;
pub mod oracle;
pub mod stats;
pub mod uniformity;
