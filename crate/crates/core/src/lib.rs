//! Expected Exploitability (EE): a time-varying estimate of how likely a
//! functional exploit is to appear for a vulnerability, computed from the
//! artifacts published about it after disclosure.
//!
//! The crate is organised bottom-up:
//!
//! * [`corpus`] ingests vulnerabilities, artifacts and exploit evidence and
//!   derives lifecycle dates and ground-truth labels.
//! * [`langid`], [`astfeat`], [`textfeat`] and [`vulnfeat`] turn artifacts
//!   into namespaced sparse features.
//! * [`pipeline`] assembles design matrices over temporal train/test splits.
//! * [`model`] is a small feed-forward network trained with noise-aware
//!   losses.
//! * [`noise`] and [`eval`] implement the label-noise protocol and all of the
//!   evaluation metrics.
//! * [`synth`] generates corpora with known ground truth, and [`experiment`]
//!   wires everything into end-to-end runs.

pub mod astfeat;
pub mod corpus;
pub mod eval;
pub mod experiment;
pub mod langid;
pub mod model;
pub mod noise;
pub mod pipeline;
pub mod sparse;
pub mod synth;
pub mod textfeat;
pub mod vulnfeat;

pub use sparse::SparseVector;

use sha2::{Digest, Sha256};

/// Hex-encoded SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
