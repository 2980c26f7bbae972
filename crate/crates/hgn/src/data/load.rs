//! Raw log parsing and the positive-feedback filters.

use super::{InteractionLog, RawRating};
use crate::error::HgnError;
use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::str::FromStr;

/// Minimum rating treated as positive feedback.
pub const POSITIVE_RATING: f64 = 4.0;
/// An item must be rated by at least this many distinct users.
pub const MIN_RATERS_PER_ITEM: usize = 5;
/// A user must retain at least this many interactions.
pub const MIN_INTERACTIONS_PER_USER: usize = 10;

/// Input encoding of a rating file: delimiter plus header handling.
/// Rows are `user<delim>item<delim>rating<delim>timestamp`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetFormat {
    pub delimiter: char,
    pub has_header: bool,
}

impl DatasetFormat {
    pub const CSV: DatasetFormat = DatasetFormat {
        delimiter: ',',
        has_header: false,
    };
    pub const CSV_HEADER: DatasetFormat = DatasetFormat {
        delimiter: ',',
        has_header: true,
    };
    pub const TSV: DatasetFormat = DatasetFormat {
        delimiter: '\t',
        has_header: false,
    };
    pub const TSV_HEADER: DatasetFormat = DatasetFormat {
        delimiter: '\t',
        has_header: true,
    };
}

impl FromStr for DatasetFormat {
    type Err = HgnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(DatasetFormat::CSV),
            "csv-header" => Ok(DatasetFormat::CSV_HEADER),
            "tsv" => Ok(DatasetFormat::TSV),
            "tsv-header" => Ok(DatasetFormat::TSV_HEADER),
            other => Err(HgnError::Config(format!(
                "unknown dataset format `{other}` (expected csv, csv-header, tsv, tsv-header)"
            ))),
        }
    }
}

/// Parse a rating file into raw rows. Line numbers are 1-based and include
/// the header line if present.
pub fn parse_rows(text: &str, format: DatasetFormat) -> Result<Vec<RawRating>, HgnError> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if format.has_header && idx == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(format.delimiter).map(str::trim).collect();
        if fields.len() != 4 {
            return Err(HgnError::Parse {
                line: line_no,
                msg: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let rating: f64 = fields[2].parse().map_err(|_| HgnError::Parse {
            line: line_no,
            msg: format!("bad rating `{}`", fields[2]),
        })?;
        let timestamp: i64 = fields[3].parse().map_err(|_| HgnError::Parse {
            line: line_no,
            msg: format!("bad timestamp `{}`", fields[3]),
        })?;
        rows.push(RawRating {
            user: fields[0].to_string(),
            item: fields[1].to_string(),
            rating,
            timestamp,
        });
    }
    Ok(rows)
}

/// Load, filter, and index a rating file.
pub fn load_interactions(
    path: impl AsRef<Path>,
    format: DatasetFormat,
) -> Result<InteractionLog, HgnError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| HgnError::io(path, e))?;
    let rows = parse_rows(&text, format)?;
    build_log(&rows)
}

/// Filter raw rows and build the indexed log.
///
/// Filters run once, in this order: drop ratings below 4, drop items with
/// fewer than 5 distinct raters, drop users left with fewer than 10
/// interactions. Per-user sequences are then sorted by timestamp with ties
/// keeping input order, and dense indices are assigned in order of first
/// appearance among the surviving rows.
pub fn build_log(rows: &[RawRating]) -> Result<InteractionLog, HgnError> {
    let positive: Vec<&RawRating> = rows
        .iter()
        .filter(|r| r.rating >= POSITIVE_RATING)
        .collect();

    let mut raters: HashMap<&str, HashSet<&str>> = HashMap::new();
    for r in &positive {
        raters
            .entry(r.item.as_str())
            .or_default()
            .insert(r.user.as_str());
    }
    let kept_items: HashSet<&str> = raters
        .iter()
        .filter(|(_, users)| users.len() >= MIN_RATERS_PER_ITEM)
        .map(|(item, _)| *item)
        .collect();

    let mut user_counts: HashMap<&str, usize> = HashMap::new();
    for r in &positive {
        if kept_items.contains(r.item.as_str()) {
            *user_counts.entry(r.user.as_str()).or_default() += 1;
        }
    }
    let kept_users: HashSet<&str> = user_counts
        .iter()
        .filter(|(_, n)| **n >= MIN_INTERACTIONS_PER_USER)
        .map(|(user, _)| *user)
        .collect();

    let mut user_index: HashMap<String, u32> = HashMap::new();
    let mut item_index: HashMap<String, u32> = HashMap::new();
    let mut user_ids = Vec::new();
    let mut item_ids = Vec::new();
    // (timestamp, input order, item) per user
    let mut pending: Vec<Vec<(i64, usize, u32)>> = Vec::new();

    for (order, r) in positive.iter().enumerate() {
        if !kept_items.contains(r.item.as_str()) || !kept_users.contains(r.user.as_str()) {
            continue;
        }
        let u = *user_index.entry(r.user.clone()).or_insert_with(|| {
            user_ids.push(r.user.clone());
            pending.push(Vec::new());
            (user_ids.len() - 1) as u32
        });
        let i = *item_index.entry(r.item.clone()).or_insert_with(|| {
            item_ids.push(r.item.clone());
            (item_ids.len() - 1) as u32
        });
        pending[u as usize].push((r.timestamp, order, i));
    }

    if user_ids.is_empty() {
        return Err(HgnError::EmptyDataset);
    }

    let sequences = pending
        .into_iter()
        .map(|mut seq| {
            seq.sort_by_key(|&(ts, order, _)| (ts, order));
            seq.into_iter().map(|(_, _, item)| item).collect()
        })
        .collect();

    Ok(InteractionLog {
        num_users: user_ids.len(),
        num_items: item_ids.len(),
        sequences,
        user_ids,
        item_ids,
        user_index,
        item_index,
    })
}
