//! Per-user chronological 70/10/20 split.

use super::{InteractionLog, SplitLog};
use crate::error::HgnError;

/// Split every user's sequence into a 70% train prefix, 10% validation
/// middle, and the remainder as test. Train and validation sizes use
/// integer floors (`7n/10` and `n/10`), so the test part is never empty
/// once sequences have at least 10 interactions.
pub fn chronological_split(log: InteractionLog) -> Result<SplitLog, HgnError> {
    let bounds = log
        .sequences
        .iter()
        .map(|seq| {
            let n = seq.len();
            let train = 7 * n / 10;
            let val = n / 10;
            (train, train + val)
        })
        .collect();
    SplitLog::new(log, bounds)
}
