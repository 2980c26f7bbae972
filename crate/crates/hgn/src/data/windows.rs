//! Sliding-window extraction of training instances.

use super::{SplitLog, TrainingInstance};

/// Enumerate stride-1 windows over one user's train sequence: each window
/// takes `context_len` successive items as input and the next
/// `min(horizon, remaining)` items as targets. Windows with fewer than
/// `context_len` items of history or no remaining target are skipped; no
/// padding is used.
pub fn generate_instances(
    user: u32,
    train_seq: &[u32],
    context_len: usize,
    horizon: usize,
) -> Vec<TrainingInstance> {
    assert!(context_len >= 1 && horizon >= 1);
    let n = train_seq.len();
    if n <= context_len {
        return Vec::new();
    }
    (0..n - context_len)
        .map(|start| {
            let ctx_end = start + context_len;
            let tgt_end = (ctx_end + horizon).min(n);
            TrainingInstance {
                user,
                context: train_seq[start..ctx_end].to_vec(),
                targets: train_seq[ctx_end..tgt_end].to_vec(),
            }
        })
        .collect()
}

/// All training instances for every user in the split, in user order.
pub fn instances_for_split(
    split: &SplitLog,
    context_len: usize,
    horizon: usize,
) -> Vec<TrainingInstance> {
    (0..split.num_users())
        .flat_map(|u| generate_instances(u as u32, split.train(u), context_len, horizon))
        .collect()
}
