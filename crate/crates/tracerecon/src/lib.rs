//! Reconstruction of bit strings from deletion-channel traces, for deletion
//! rates around `n^-(1/3+ε)`.
//!
//! A *trace* of `x ∈ {0,1}^n` is what remains after each bit is deleted
//! independently with probability `δ`. Bitwise majority alignment recovers
//! `x` from a handful of traces as long as `x` has no long periodic stretch
//! (*desert*); the end-finding machinery in this crate measures how long
//! each desert runs and re-aligns the traces past it, which is what pushes
//! the tolerable deletion rate from `n^-1/2` down to `n^-1/3`.
//!
//! The crate splits into the channel simulator ([`channel`]), the bit-level
//! string primitives ([`bitstring`]), desert analysis ([`desert`]),
//! majority alignment ([`bma`]), desert-end location ([`findend`]), the
//! full pipeline ([`pipeline`]), a seeded experiment harness ([`harness`]),
//! and independent reference implementations for testing ([`oracles`]).
//! The `tracerecon` binary drives all of it from the command line; the
//! mdbook under `book/` walks through the concepts with runnable snippets.
//!
//! ```
//! use tracerecon::channel::{Streams, TraceSampler};
//! use tracerecon::harness::{generate_string, GenKind};
//! use tracerecon::pipeline::{derive_params, reconstruct, Overrides, Rate, ReconOutcome};
//!
//! // a string certified desert-free is recovered by majority alignment alone
//! let params = derive_params(1200, Rate::Delta(1e-3), &Overrides::default()).unwrap();
//! let mut streams = Streams::new(7);
//! let z = generate_string(
//!     &GenKind::DesertFree,
//!     1200,
//!     &params.desert_params(),
//!     &mut streams.next().rng(),
//! )
//! .unwrap();
//! let sampler = TraceSampler::new(&z, params.delta);
//! let report = reconstruct(&sampler, &params, &mut streams);
//! assert_eq!(report.outcome, ReconOutcome::Reconstructed(z));
//! ```

pub mod bitstring;
pub mod bma;
pub mod channel;
pub mod desert;
pub mod findend;
pub mod harness;
pub mod oracles;
pub mod params;
pub mod pipeline;

#[cfg(doctest)]
mod booktests;
