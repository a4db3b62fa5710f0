//! Frame-of-reference spatial reasoning suites for vision-language models.
//!
//! The crate generates scene manifests and Yes/No queries ([`testgen`]), collects model
//! answer probabilities ([`harness`]), and scores them against geometric acceptance
//! regions under competing frames of reference ([`geometry`], [`metrics`], [`analysis`]).

pub mod analysis;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod testgen;

pub use exec::Execution;

/// 64-bit FNV-1a, used for stable seeds and choices derived from ids.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}
