//! Planning and pipeline toolkit for multilingual pretraining corpora.
//!
//! The crate computes per-language sampling distributions (temperature-based
//! and budget-capped water-filling), converts training budgets into concrete
//! per-language character allocations with explicit repeat caps, mixes
//! document shards deterministically according to such a plan, and audits
//! corpora and distributions (filtering, epoch counts, representation
//! ratios).
//!
//! Module map:
//! * [`record`] — newline-delimited document records and shard I/O.
//! * [`stats`] — per-language corpus statistics and their commutative merge.
//! * [`filter`] — language-ID confidence and blocklist filtering.
//! * [`policy`] — sampling distributions (proportional, temperature, uniform).
//! * [`plan`] — budget conversion, capped allocation, epoch reports.
//! * [`mixer`] — deterministic deficit-scheduled shard interleaving.
//! * [`analysis`] — rate/epoch curves, representation ratios, script mix.

pub mod analysis;
pub mod error;
pub mod filter;
pub mod mixer;
pub mod plan;
pub mod policy;
pub mod record;
pub mod stats;

pub use error::{Error, Result};

/// Tool version echoed into every output file for provenance.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
