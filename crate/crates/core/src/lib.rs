//! fairrep: removal of protected-attribute information from vector
//! representations by maximizing coding-rate objectives, plus the audit
//! suite (probing attacks, online-coding description length, group-fairness
//! metrics, clustering overlap, numerical rank) used to judge the result.
//!
//! The crate is organized around the pipeline:
//!
//! 1. [`data`] — load or synthesize labeled vector datasets;
//! 2. [`rate`] — coding-rate values and their analytic gradients;
//! 3. [`neural`] — feed-forward feature maps with manual backprop and
//!    sphere-projecting output normalization;
//! 4. [`trainer`] — the debiasing objectives (unconstrained,
//!    target-constrained, the collapse ablation, multi-attribute variants);
//! 5. [`evalkit`] — everything needed to audit what a trained map leaks.
//!
//! All randomness flows from explicit seeds; a run with a fixed seed and a
//! single thread is bit-reproducible.

pub mod data;
pub mod error;
mod linalg;
pub mod evalkit;
pub mod neural;
pub mod rate;
pub mod trainer;

pub use error::{Error, Result};
pub use rate::{MembershipMatrix, Precision, RepresentationBatch};
