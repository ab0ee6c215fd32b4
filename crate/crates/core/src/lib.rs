//! Cross-chain value transfers executed by fault-prone facilitator groups,
//! with every outcome recorded on a meta-ledger and fed into a trust system
//! that governs future facilitator selection.
//!
//! The crate is organized around five subsystems:
//!
//! - [`chain`]: a single ledger — accounts, transactions, hash-chained
//!   blocks, pending-set admission and verification by replay.
//! - [`interchain`]: the facilitator protocol — group formation, source-leg
//!   escrow, attestation quorum, and atomic release-or-forfeit settlement.
//! - [`meta`]: the meta-ledger of outcome records, exportable as an RDF
//!   graph in N-Triples.
//! - [`reputation`]: local trust from recorded behaviour, global trust by
//!   damped power iteration over pre-trusted peers, fee-aware selection
//!   weights.
//! - [`sim`]: the deterministic scenario harness tying it all together.
//!
//! Everything is integer-tick, seed-driven and platform independent; two
//! runs of the same scenario produce byte-identical outputs.

pub mod chain;
pub mod hashing;
pub mod interchain;
pub mod meta;
pub mod reputation;
pub mod rng;
pub mod sim;
