//! Held-out ranking evaluation: candidate exclusion, Recall@k, NDCG@k.

use crate::data::SplitLog;
use crate::error::HgnError;
use crate::model::{forward_context, Architecture, ModelParams};
use rayon::prelude::*;
use std::collections::HashSet;

/// Which held-out set is being scored. Test-time inputs include the
/// validation interactions; validation-time inputs are train only.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalSplit {
    Validation,
    Test,
}

/// Mean Recall@k and NDCG@k over evaluable users.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub ks: Vec<usize>,
    pub recall: Vec<f64>,
    pub ndcg: Vec<f64>,
    pub users_evaluated: usize,
    pub users_skipped: usize,
}

impl MetricReport {
    /// Structured key=value lines (documented in the README).
    pub fn machine_lines(&self) -> String {
        let mut out = String::from("# hgn metrics v1\n");
        out.push_str(&format!("users_evaluated={}\n", self.users_evaluated));
        out.push_str(&format!("users_skipped={}\n", self.users_skipped));
        for (i, k) in self.ks.iter().enumerate() {
            out.push_str(&format!("recall@{}={:.9}\n", k, self.recall[i]));
            out.push_str(&format!("ndcg@{}={:.9}\n", k, self.ndcg[i]));
        }
        out
    }

    /// Aligned human-readable table.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>8} {:>12} {:>12}\n",
            "k", "Recall@k", "NDCG@k"
        ));
        for (i, k) in self.ks.iter().enumerate() {
            out.push_str(&format!(
                "{:>8} {:>12.6} {:>12.6}\n",
                k, self.recall[i], self.ndcg[i]
            ));
        }
        out.push_str(&format!(
            "users evaluated: {}, skipped: {}\n",
            self.users_evaluated, self.users_skipped
        ));
        out
    }

    pub fn metric_at(&self, k: usize) -> Option<(f64, f64)> {
        self.ks
            .iter()
            .position(|&x| x == k)
            .map(|i| (self.recall[i], self.ndcg[i]))
    }
}

/// The model input and candidate exclusions for one user at evaluation
/// time: the context is the last `context_len` items of the input
/// sequence, and every input item is excluded from ranking. Returns
/// `None` (skip) when the input is shorter than the window.
pub fn build_eval_context(
    split: &SplitLog,
    user: usize,
    context_len: usize,
    mode: EvalSplit,
) -> Option<(Vec<u32>, HashSet<u32>)> {
    let train = split.train(user);
    let val = split.val(user);
    let input: Vec<u32> = match mode {
        EvalSplit::Test => train.iter().chain(val.iter()).copied().collect(),
        EvalSplit::Validation => train.to_vec(),
    };
    if input.len() < context_len {
        return None;
    }
    let context = input[input.len() - context_len..].to_vec();
    let exclusion: HashSet<u32> = input.into_iter().collect();
    Some((context, exclusion))
}

/// Top-k item indices by descending score, ties broken by ascending item
/// index, excluded items never ranked.
pub fn rank_items(scores: &[f64], exclusion: &HashSet<u32>, k: usize) -> Result<Vec<u32>, HgnError> {
    let candidates = scores.len() - exclusion.len();
    if k > candidates {
        return Err(HgnError::Contract(format!(
            "cannot rank top-{k} out of {candidates} candidates"
        )));
    }
    let mut order: Vec<u32> = (0..scores.len() as u32)
        .filter(|i| !exclusion.contains(i))
        .collect();
    order.sort_by(|&a, &b| {
        scores[b as usize]
            .partial_cmp(&scores[a as usize])
            .expect("scores must not be NaN")
            .then(a.cmp(&b))
    });
    order.truncate(k);
    Ok(order)
}

/// Fraction of the held-out items that appear in the top-k.
pub fn recall_at_k(ranked: &[u32], heldout: &HashSet<u32>, k: usize) -> f64 {
    assert!(k <= ranked.len());
    assert!(!heldout.is_empty());
    let hits = ranked[..k].iter().filter(|i| heldout.contains(i)).count();
    hits as f64 / heldout.len() as f64
}

/// Binary-relevance NDCG: DCG with a `log2(pos + 1)` discount, normalized
/// by the ideal ranking truncated at the held-out size.
pub fn ndcg_at_k(ranked: &[u32], heldout: &HashSet<u32>, k: usize) -> f64 {
    assert!(k <= ranked.len());
    assert!(!heldout.is_empty());
    let mut dcg = 0.0;
    for (pos, item) in ranked[..k].iter().enumerate() {
        if heldout.contains(item) {
            dcg += 1.0 / ((pos + 2) as f64).log2();
        }
    }
    let ideal = k.min(heldout.len());
    let idcg: f64 = (0..ideal).map(|pos| 1.0 / ((pos + 2) as f64).log2()).sum();
    dcg / idcg
}

/// Evaluate trained parameters over every user with enough input and a
/// nonempty held-out set, averaging each metric without weighting.
pub fn evaluate(
    params: &ModelParams,
    split: &SplitLog,
    arch: &Architecture,
    ks: &[usize],
    mode: EvalSplit,
    workers: usize,
) -> Result<MetricReport, HgnError> {
    let scorer = |user: usize, context: &[u32]| -> Result<Vec<f64>, HgnError> {
        let cache = forward_context(params, user as u32, context, arch)?;
        Ok(params.item_out.tr_mul_vec(&cache.combined))
    };
    evaluate_with_scorer(scorer, params.num_items, split, params.seq_len, ks, mode, workers)
}

/// Per-user (recall, ndcg) pairs at each requested cutoff, or `None` for
/// a skipped user.
type UserMetrics = Option<Vec<(f64, f64)>>;

/// Evaluation loop with an injected scorer; `evaluate` wraps the model
/// forward, tests can substitute oracle scorers.
pub fn evaluate_with_scorer<F>(
    scorer: F,
    num_items: usize,
    split: &SplitLog,
    context_len: usize,
    ks: &[usize],
    mode: EvalSplit,
    workers: usize,
) -> Result<MetricReport, HgnError>
where
    F: Fn(usize, &[u32]) -> Result<Vec<f64>, HgnError> + Sync,
{
    if ks.is_empty() {
        return Err(HgnError::Config("no cutoffs requested".into()));
    }
    let max_k = *ks.iter().max().unwrap();

    let eval_user = |user: usize| -> Result<UserMetrics, HgnError> {
        let Some((context, exclusion)) = build_eval_context(split, user, context_len, mode)
        else {
            return Ok(None);
        };
        let heldout: HashSet<u32> = match mode {
            EvalSplit::Test => split.test(user).iter().copied().collect(),
            EvalSplit::Validation => split.val(user).iter().copied().collect(),
        };
        if heldout.is_empty() || num_items - exclusion.len() < max_k {
            return Ok(None);
        }
        let scores = scorer(user, &context)?;
        if scores.len() != num_items {
            return Err(HgnError::Contract(format!(
                "scorer returned {} scores for {num_items} items",
                scores.len()
            )));
        }
        let ranked = rank_items(&scores, &exclusion, max_k)?;
        let per_k = ks
            .iter()
            .map(|&k| {
                (
                    recall_at_k(&ranked, &heldout, k),
                    ndcg_at_k(&ranked, &heldout, k),
                )
            })
            .collect();
        Ok(Some(per_k))
    };

    let users: Vec<usize> = (0..split.num_users()).collect();
    let results: Vec<Result<UserMetrics, HgnError>> = if workers > 1 {
        users.par_iter().map(|&u| eval_user(u)).collect()
    } else {
        users.iter().map(|&u| eval_user(u)).collect()
    };

    let mut recall = vec![0.0; ks.len()];
    let mut ndcg = vec![0.0; ks.len()];
    let mut evaluated = 0usize;
    let mut skipped = 0usize;
    // Reduce in user order for determinism.
    for r in results {
        match r? {
            Some(per_k) => {
                evaluated += 1;
                for (i, (rec, nd)) in per_k.into_iter().enumerate() {
                    recall[i] += rec;
                    ndcg[i] += nd;
                }
            }
            None => skipped += 1,
        }
    }
    if evaluated == 0 {
        return Err(HgnError::Report("no evaluable users".into()));
    }
    for v in recall.iter_mut().chain(ndcg.iter_mut()) {
        *v /= evaluated as f64;
    }
    Ok(MetricReport {
        ks: ks.to_vec(),
        recall,
        ndcg,
        users_evaluated: evaluated,
        users_skipped: skipped,
    })
}

/// Convenience wrapper scoring all items with the model (used by tests
/// and the chance-level check).
pub fn score_all_items(
    params: &ModelParams,
    user: u32,
    context: &[u32],
    arch: &Architecture,
) -> Result<Vec<f64>, HgnError> {
    let cache = forward_context(params, user, context, arch)?;
    Ok(params.item_out.tr_mul_vec(&cache.combined))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::chronological_split;

    /// Direct fixture: 6 users with 18 distinct items each out of 40, so
    /// every user is evaluable at k = 10 with exclusions applied.
    fn split_with(_unused: usize) -> SplitLog {
        use crate::data::InteractionLog;
        use std::collections::HashMap;
        let num_users = 6;
        let num_items = 40;
        let sequences: Vec<Vec<u32>> = (0..num_users)
            .map(|u| (0..18).map(|i| ((u + i * 2) % num_items) as u32).collect())
            .collect();
        let log = InteractionLog {
            num_users,
            num_items,
            sequences,
            user_ids: (0..num_users).map(|u| format!("u{u}")).collect(),
            item_ids: (0..num_items).map(|i| format!("i{i}")).collect(),
            user_index: HashMap::new(),
            item_index: HashMap::new(),
        };
        chronological_split(log).unwrap()
    }

    #[test]
    fn context_is_the_input_suffix() {
        let split = split_with(8);
        let (t, v) = split.bounds(0);
        let input: Vec<u32> = split.log.sequences[0][..v].to_vec();
        let _ = t;
        let (context, exclusion) = build_eval_context(&split, 0, 5, EvalSplit::Test).unwrap();
        assert_eq!(context, input[input.len() - 5..].to_vec());
        let expect: HashSet<u32> = input.into_iter().collect();
        assert_eq!(exclusion, expect);
    }

    #[test]
    fn short_input_is_skipped() {
        let split = split_with(8);
        let (_, v) = split.bounds(0);
        assert!(build_eval_context(&split, 0, v + 1, EvalSplit::Test).is_none());
        assert!(build_eval_context(&split, 0, v, EvalSplit::Test).is_some());
    }

    #[test]
    fn validation_mode_excludes_train_only() {
        let split = split_with(10);
        let (t, _) = split.bounds(0);
        let (_, exclusion) = build_eval_context(&split, 0, 3, EvalSplit::Validation).unwrap();
        let expect: HashSet<u32> = split.log.sequences[0][..t].iter().copied().collect();
        assert_eq!(exclusion, expect);
    }

    #[test]
    fn rank_excludes_and_orders() {
        let scores = [0.1, 0.9, 0.5];
        let exclusion: HashSet<u32> = [1].into_iter().collect();
        assert_eq!(rank_items(&scores, &exclusion, 2).unwrap(), vec![2, 0]);
    }

    #[test]
    fn equal_scores_rank_by_index() {
        let scores = [0.5; 5];
        let exclusion: HashSet<u32> = [2].into_iter().collect();
        assert_eq!(rank_items(&scores, &exclusion, 3).unwrap(), vec![0, 1, 3]);
    }

    #[test]
    fn rank_matches_full_sort_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(5, crate::rng::STREAM_INIT);
        for _ in 0..50 {
            let n = rng.random_range(5..40);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let exclusion: HashSet<u32> =
                (0..n as u32).filter(|_| rng.random_bool(0.2)).collect();
            let k = (n - exclusion.len()).min(5);
            if k == 0 {
                continue;
            }
            let ranked = rank_items(&scores, &exclusion, k).unwrap();

            // Oracle: full stable sort of (score desc, idx asc) pairs.
            let mut all: Vec<u32> =
                (0..n as u32).filter(|i| !exclusion.contains(i)).collect();
            all.sort_by(|&a, &b| {
                scores[b as usize]
                    .partial_cmp(&scores[a as usize])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            assert_eq!(ranked, all[..k].to_vec());
        }
    }

    #[test]
    fn rank_rejects_oversized_k() {
        let scores = [0.0; 3];
        let exclusion: HashSet<u32> = [0].into_iter().collect();
        assert!(rank_items(&scores, &exclusion, 3).is_err());
    }

    #[test]
    fn ranking_is_scale_invariant() {
        let scores = [0.2, -0.4, 0.9, 0.1];
        let scaled: Vec<f64> = scores.iter().map(|s| s * 7.5).collect();
        let none = HashSet::new();
        assert_eq!(
            rank_items(&scores, &none, 4).unwrap(),
            rank_items(&scaled, &none, 4).unwrap()
        );
    }

    #[test]
    fn recall_counts_hits_over_heldout() {
        let ranked: Vec<u32> = (0..10).collect();
        let heldout: HashSet<u32> = [1, 5, 20, 30].into_iter().collect();
        assert_eq!(recall_at_k(&ranked, &heldout, 10), 0.5);
        let none: HashSet<u32> = [20, 30].into_iter().collect();
        assert_eq!(recall_at_k(&ranked, &none, 10), 0.0);
    }

    #[test]
    fn recall_matches_set_oracle() {
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(6, crate::rng::STREAM_INIT);
        for _ in 0..50 {
            let mut ranked: Vec<u32> = (0..100).collect();
            ranked.shuffle(&mut rng);
            ranked.truncate(20);
            let heldout: HashSet<u32> = (0..5).map(|_| rng.random_range(0..100)).collect();
            let k = rng.random_range(1..=20);

            // Oracle: explicit set intersection of the top-k with heldout.
            let topk: HashSet<u32> = ranked[..k].iter().copied().collect();
            let expect = topk.intersection(&heldout).count() as f64 / heldout.len() as f64;
            assert_eq!(recall_at_k(&ranked, &heldout, k), expect);
        }
    }

    #[test]
    fn ndcg_ideal_and_second_place() {
        let heldout: HashSet<u32> = [7].into_iter().collect();
        let mut ranked: Vec<u32> = vec![7];
        ranked.extend((0..7).chain(8..10));
        assert!((ndcg_at_k(&ranked, &heldout, 10) - 1.0).abs() < 1e-12);

        let ranked2: Vec<u32> = vec![0, 7, 1, 2, 3, 4, 5, 6, 8, 9];
        let expect = 1.0 / 3.0_f64.log2();
        assert!((ndcg_at_k(&ranked2, &heldout, 10) - expect).abs() < 1e-9);
        assert!((ndcg_at_k(&ranked2, &heldout, 10) - 0.63093).abs() < 1e-5);
    }

    #[test]
    fn ndcg_matches_direct_summation() {
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut rng = crate::rng::stream_rng(7, crate::rng::STREAM_INIT);
        for _ in 0..50 {
            let mut items: Vec<u32> = (0..50).collect();
            items.shuffle(&mut rng);
            let ranked = &items[..20];
            let heldout: HashSet<u32> = (0..rng.random_range(1..8))
                .map(|_| rng.random_range(0..50))
                .collect();
            let k = rng.random_range(1..=20);

            let mut dcg = 0.0;
            for pos in 1..=k {
                if heldout.contains(&ranked[pos - 1]) {
                    dcg += 1.0 / ((pos + 1) as f64).log2();
                }
            }
            let mut idcg = 0.0;
            for pos in 1..=k.min(heldout.len()) {
                idcg += 1.0 / ((pos + 1) as f64).log2();
            }
            let expect = dcg / idcg;
            assert!((ndcg_at_k(ranked, &heldout, k) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_monotone_in_k() {
        use rand::seq::SliceRandom;
        let mut rng = crate::rng::stream_rng(8, crate::rng::STREAM_INIT);
        let mut items: Vec<u32> = (0..40).collect();
        items.shuffle(&mut rng);
        let ranked = &items[..20];
        let heldout: HashSet<u32> = [3, 11, 19, 27].into_iter().collect();
        let mut prev_recall = 0.0;
        let mut prev_dcg = 0.0;
        for k in 1..=20 {
            let r = recall_at_k(ranked, &heldout, k);
            assert!(r >= prev_recall);
            prev_recall = r;
            let mut dcg = 0.0;
            for pos in 1..=k {
                if heldout.contains(&ranked[pos - 1]) {
                    dcg += 1.0 / ((pos + 1) as f64).log2();
                }
            }
            assert!(dcg >= prev_dcg);
            prev_dcg = dcg;
        }
    }

    #[test]
    fn perfect_scorer_hits_the_upper_bound() {
        let split = split_with(10);
        let n = split.num_items();
        let ks = [5usize, 10];
        let scorer = |user: usize, _context: &[u32]| {
            let heldout: HashSet<u32> = split.test(user).iter().copied().collect();
            Ok((0..n as u32)
                .map(|i| if heldout.contains(&i) { 1e6 } else { 0.0 })
                .collect())
        };
        let report =
            evaluate_with_scorer(scorer, n, &split, 3, &ks, EvalSplit::Test, 1).unwrap();
        // Every user's held-out items all fit in the top-10 here, so
        // Recall@10 = 1 and NDCG = 1 at every k >= |heldout|.
        for user in 0..split.num_users() {
            assert!(split.test(user).len() <= 10);
        }
        let (r10, n10) = report.metric_at(10).unwrap();
        assert!((r10 - 1.0).abs() < 1e-12);
        assert!((n10 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_evaluable_users_is_an_error() {
        let split = split_with(8);
        let n = split.num_items();
        let huge_window = 1000;
        let scorer = |_: usize, _: &[u32]| Ok(vec![0.0; n]);
        let r = evaluate_with_scorer(scorer, n, &split, huge_window, &[5], EvalSplit::Test, 1);
        assert!(matches!(r, Err(HgnError::Report(_))));
    }

    #[test]
    fn evaluation_never_ranks_input_items() {
        let split = split_with(10);
        let n = split.num_items();
        for user in 0..split.num_users() {
            let Some((_, exclusion)) = build_eval_context(&split, user, 5, EvalSplit::Test)
            else {
                continue;
            };
            let scores: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let ranked = rank_items(&scores, &exclusion, n - exclusion.len()).unwrap();
            assert!(ranked.iter().all(|i| !exclusion.contains(i)));
            // And the full candidate list has no duplicates.
            let uniq: HashSet<u32> = ranked.iter().copied().collect();
            assert_eq!(uniq.len(), ranked.len());
        }
    }
}
