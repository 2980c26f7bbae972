//! Dataset ingestion, filtering, chronological splitting, sliding-window
//! instance generation, and negative sampling.

mod bundle;
mod load;
mod sampler;
mod split;
mod windows;

pub use bundle::{read_bundle, write_bundle};
pub use load::{build_log, load_interactions, parse_rows, DatasetFormat};
pub use sampler::UniformNegativeSampler;
pub use split::chronological_split;
pub use windows::{generate_instances, instances_for_split};

use crate::error::HgnError;
use std::collections::HashMap;

/// One raw interaction row as read from disk, before any filtering.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRating {
    pub user: String,
    pub item: String,
    pub rating: f64,
    pub timestamp: i64,
}

/// Filtered interaction data with dense internal indices.
///
/// `sequences[u]` holds user `u`'s item indices ordered by timestamp
/// (ties keep input order). External ids are kept for both directions.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionLog {
    pub num_users: usize,
    pub num_items: usize,
    pub sequences: Vec<Vec<u32>>,
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
    pub user_index: HashMap<String, u32>,
    pub item_index: HashMap<String, u32>,
}

impl InteractionLog {
    pub fn num_interactions(&self) -> usize {
        self.sequences.iter().map(|s| s.len()).sum()
    }

    /// Interactions / (users * items), as a fraction.
    pub fn density(&self) -> f64 {
        if self.num_users == 0 || self.num_items == 0 {
            return 0.0;
        }
        self.num_interactions() as f64 / (self.num_users as f64 * self.num_items as f64)
    }
}

/// Per-user chronological partition of an [`InteractionLog`].
///
/// The full sequence is kept once; train/validation/test are prefix,
/// middle, and suffix views, so the three parts always concatenate back
/// to the original sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitLog {
    pub log: InteractionLog,
    /// `(train_len, train_len + val_len)` per user.
    bounds: Vec<(usize, usize)>,
}

impl SplitLog {
    pub fn new(log: InteractionLog, bounds: Vec<(usize, usize)>) -> Result<Self, HgnError> {
        if bounds.len() != log.num_users {
            return Err(HgnError::Contract(format!(
                "split bounds for {} users but log has {}",
                bounds.len(),
                log.num_users
            )));
        }
        for (u, &(t, v)) in bounds.iter().enumerate() {
            if t > v || v > log.sequences[u].len() {
                return Err(HgnError::Contract(format!(
                    "split bounds ({t}, {v}) out of range for user {u} with {} interactions",
                    log.sequences[u].len()
                )));
            }
        }
        Ok(SplitLog { log, bounds })
    }

    pub fn num_users(&self) -> usize {
        self.log.num_users
    }

    pub fn num_items(&self) -> usize {
        self.log.num_items
    }

    pub fn bounds(&self, user: usize) -> (usize, usize) {
        self.bounds[user]
    }

    pub fn train(&self, user: usize) -> &[u32] {
        &self.log.sequences[user][..self.bounds[user].0]
    }

    pub fn val(&self, user: usize) -> &[u32] {
        &self.log.sequences[user][self.bounds[user].0..self.bounds[user].1]
    }

    pub fn test(&self, user: usize) -> &[u32] {
        &self.log.sequences[user][self.bounds[user].1..]
    }
}

/// One training example: `context` immediately precedes `targets` in the
/// user's train sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingInstance {
    pub user: u32,
    pub context: Vec<u32>,
    pub targets: Vec<u32>,
}
