//! Sequential recommendation with a hierarchical gating network.
//!
//! The model scores the next items a user will interact with from three
//! signals: a matrix-factorization term for long-term taste, a gated and
//! pooled representation of the most recent items for short-term intent,
//! and an item-item product that links context items to candidates.
//! Training is pairwise (BPR) with analytic gradients and Adam updates;
//! evaluation reports Recall@k and NDCG@k on chronological splits.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod synth;
pub mod train;

pub use error::HgnError;
