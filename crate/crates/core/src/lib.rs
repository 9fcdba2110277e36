// SPDX-License-Identifier: Apache-2.0

//! Fall detection over an escalation cascade: an edge-device threshold gate,
//! then classifiers of increasing capacity on edge servers and the cloud, trained
//! with plain cross-entropy or single/multi-stage knowledge distillation.
//!
//! The crate also provides the analytic latency and FLOPs model used to account
//! for how much data each layer processes.

pub mod cascade;
pub mod dataset;
pub mod distill;
pub mod edge_threshold;
pub mod error;
pub mod eval;
pub mod nn;
pub mod perfmodel;
pub mod preprocess;
pub mod registry;
pub mod strategy;

pub use error::{Error, Result};

/// Mixes a base seed with a tag into an independent stream seed.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
