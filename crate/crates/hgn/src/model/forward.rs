//! Forward pass: embedding lookup, the two gates, pooling, and the
//! three-term score.

use crate::error::HgnError;
use crate::linalg::{axpy, dot, sigmoid, Mat};
use crate::model::{Architecture, ModelParams, Pooling};

/// Intermediates retained for the backward pass. Fields are present only
/// when the architecture computes them; `combined` is the vector the
/// candidate embeddings are scored against (user embedding plus whichever
/// of the pooled and summed-context terms are active).
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// d x L context embeddings.
    pub seq_emb: Option<Mat>,
    /// Feature-gate activations, d x L.
    pub feature_gate: Option<Mat>,
    /// Context embeddings after the feature gate.
    pub gated_seq: Option<Mat>,
    /// Instance-gate activations, length L.
    pub instance_gate: Option<Vec<f64>>,
    /// Context embeddings after both gates.
    pub gated_items: Option<Mat>,
    /// Pooled short-term vector, length d.
    pub pooled: Option<Vec<f64>>,
    /// Winning column per dimension (max pooling only).
    pub pool_argmax: Option<Vec<usize>>,
    /// Sum of the raw context embeddings, length d.
    pub context_sum: Option<Vec<f64>>,
    /// Score-side vector, length d.
    pub combined: Vec<f64>,
}

/// Gather the embedding columns for a context window: column `j` of the
/// result is the embedding of `context[j]`.
pub fn embed_sequence(item_in: &Mat, context: &[u32]) -> Result<Mat, HgnError> {
    let mut s = Mat::zeros(item_in.rows(), context.len());
    for (j, &item) in context.iter().enumerate() {
        if item as usize >= item_in.cols() {
            return Err(HgnError::Contract(format!(
                "item index {item} out of range (N = {})",
                item_in.cols()
            )));
        }
        s.col_mut(j).copy_from_slice(item_in.col(item as usize));
    }
    Ok(s)
}

/// Feature gate: `gate = sigmoid(W1 * S + W2 * u + b)` with the user term
/// broadcast across columns, and `S_F = S (*) gate`. Returns (S_F, gate).
pub fn feature_gate(
    seq_emb: &Mat,
    user: &[f64],
    seq_weight: &Mat,
    user_weight: &Mat,
    bias: &[f64],
) -> Result<(Mat, Mat), HgnError> {
    let d = seq_emb.rows();
    let cols = seq_emb.cols();
    let mut user_term = user_weight.mul_vec(user);
    for (t, b) in user_term.iter_mut().zip(bias) {
        *t += b;
    }

    let mut gate = Mat::zeros(d, cols);
    let mut gated = Mat::zeros(d, cols);
    for l in 0..cols {
        let mut pre = seq_weight.mul_vec(seq_emb.col(l));
        for (p, t) in pre.iter_mut().zip(&user_term) {
            *p += t;
        }
        if pre.iter().any(|v| !v.is_finite()) {
            return Err(HgnError::Numeric(
                "non-finite feature-gate pre-activation".into(),
            ));
        }
        let gate_col = gate.col_mut(l);
        let gated_col = gated.col_mut(l);
        let src = seq_emb.col(l);
        for r in 0..d {
            let g = sigmoid(pre[r]);
            gate_col[r] = g;
            gated_col[r] = src[r] * g;
        }
    }
    Ok((gated, gate))
}

/// Instance gate: `gate[l] = sigmoid(w3 . S_F[:,l] + u . W4[:,l])`, then
/// column `l` of the result is `gate[l] * S_F[:,l]`. Returns (S_I, gate).
pub fn instance_gate(
    gated_seq: &Mat,
    user: &[f64],
    feat_weight: &[f64],
    user_weight: &Mat,
) -> Result<(Mat, Vec<f64>), HgnError> {
    let cols = gated_seq.cols();
    let mut gate = Vec::with_capacity(cols);
    let mut gated = Mat::zeros(gated_seq.rows(), cols);
    for l in 0..cols {
        let pre = dot(feat_weight, gated_seq.col(l)) + dot(user, user_weight.col(l));
        if !pre.is_finite() {
            return Err(HgnError::Numeric(
                "non-finite instance-gate pre-activation".into(),
            ));
        }
        let g = sigmoid(pre);
        gate.push(g);
        let out = gated.col_mut(l);
        let src = gated_seq.col(l);
        for r in 0..gated_seq.rows() {
            out[r] = src[r] * g;
        }
    }
    Ok((gated, gate))
}

/// Pool the gated context into a single vector. Average pooling returns
/// row means; max pooling returns row maxima plus the winning column per
/// row, with the earliest column winning ties.
pub fn aggregate(gated_items: &Mat, pooling: Pooling) -> (Vec<f64>, Option<Vec<usize>>) {
    let d = gated_items.rows();
    let cols = gated_items.cols();
    assert!(cols >= 1, "cannot pool an empty window");
    match pooling {
        Pooling::Avg => {
            let mut pooled = vec![0.0; d];
            for l in 0..cols {
                axpy(&mut pooled, 1.0, gated_items.col(l));
            }
            for v in &mut pooled {
                *v /= cols as f64;
            }
            (pooled, None)
        }
        Pooling::Max => {
            let mut pooled = gated_items.col(0).to_vec();
            let mut argmax = vec![0usize; d];
            for l in 1..cols {
                let col = gated_items.col(l);
                for r in 0..d {
                    if col[r] > pooled[r] {
                        pooled[r] = col[r];
                        argmax[r] = l;
                    }
                }
            }
            (pooled, Some(argmax))
        }
    }
}

/// Accumulated item-item relation scores: `(sum_k e_k)^T Q`. Summing the
/// context first is algebraically identical to summing per-item scores.
pub fn item_item_scores(context_sum: &[f64], item_out: &Mat) -> Vec<f64> {
    item_out.tr_mul_vec(context_sum)
}

/// Three-term score against every candidate item:
/// `score[j] = (u + pooled + context_sum) . q_j`.
pub fn predict_all(user: &[f64], pooled: &[f64], context_sum: &[f64], item_out: &Mat) -> Vec<f64> {
    let combined: Vec<f64> = user
        .iter()
        .zip(pooled)
        .zip(context_sum)
        .map(|((u, p), c)| u + p + c)
        .collect();
    item_out.tr_mul_vec(&combined)
}

/// Run the configured pipeline for one (user, context) pair and score all
/// items. The cache holds every intermediate the backward pass needs.
pub fn forward(
    params: &ModelParams,
    user: u32,
    context: &[u32],
    arch: &Architecture,
) -> Result<(Vec<f64>, ForwardCache), HgnError> {
    let cache = forward_context(params, user, context, arch)?;
    let scores = params.item_out.tr_mul_vec(&cache.combined);
    Ok((scores, cache))
}

/// Everything in [`forward`] except the final scoring sweep, so training
/// can score only the sampled items.
pub fn forward_context(
    params: &ModelParams,
    user: u32,
    context: &[u32],
    arch: &Architecture,
) -> Result<ForwardCache, HgnError> {
    if user as usize >= params.num_users {
        return Err(HgnError::Contract(format!(
            "user index {user} out of range (M = {})",
            params.num_users
        )));
    }
    let user_vec = params.user_emb.col(user as usize);
    let mut cache = ForwardCache {
        seq_emb: None,
        feature_gate: None,
        gated_seq: None,
        instance_gate: None,
        gated_items: None,
        pooled: None,
        pool_argmax: None,
        context_sum: None,
        combined: user_vec.to_vec(),
    };
    if !arch.uses_context() {
        return Ok(cache);
    }
    if context.len() != params.seq_len {
        return Err(HgnError::Contract(format!(
            "context has {} items but the model expects {}",
            context.len(),
            params.seq_len
        )));
    }

    let seq_emb = embed_sequence(&params.item_in, context)?;

    if arch.item_item {
        let mut sum = vec![0.0; params.dim];
        for l in 0..seq_emb.cols() {
            axpy(&mut sum, 1.0, seq_emb.col(l));
        }
        for (w, s) in cache.combined.iter_mut().zip(&sum) {
            *w += s;
        }
        cache.context_sum = Some(sum);
    }

    if arch.short_term {
        let gated_seq = if arch.feature_gate {
            let (gated, gate) = feature_gate(
                &seq_emb,
                user_vec,
                &params.feat_seq_weight,
                &params.feat_user_weight,
                &params.feat_bias,
            )?;
            cache.feature_gate = Some(gate);
            cache.gated_seq = Some(gated);
            cache.gated_seq.as_ref().unwrap()
        } else {
            &seq_emb
        };

        let gated_items = if arch.instance_gate {
            let (gated, gate) = instance_gate(
                gated_seq,
                user_vec,
                &params.inst_feat_weight,
                &params.inst_user_weight,
            )?;
            cache.instance_gate = Some(gate);
            cache.gated_items = Some(gated);
            cache.gated_items.as_ref().unwrap()
        } else {
            gated_seq
        };

        let (pooled, argmax) = aggregate(gated_items, arch.pooling);
        for (w, p) in cache.combined.iter_mut().zip(&pooled) {
            *w += p;
        }
        cache.pooled = Some(pooled);
        cache.pool_argmax = argmax;
    }

    cache.seq_emb = Some(seq_emb);
    Ok(cache)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;
    use crate::rng::{stream_rng, STREAM_INIT};
    use rand::Rng;

    fn rand_mat(rows: usize, cols: usize, rng: &mut impl Rng) -> Mat {
        Mat::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn embed_picks_basis_columns() {
        let e = Mat::from_fn(3, 4, |r, c| if r == c { 1.0 } else { 0.0 });
        let s = embed_sequence(&e, &[2, 0]).unwrap();
        assert_eq!(s.col(0), &[0.0, 0.0, 1.0]);
        assert_eq!(s.col(1), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn embed_repeats_columns() {
        let mut rng = stream_rng(1, STREAM_INIT);
        let e = rand_mat(4, 8, &mut rng);
        let s = embed_sequence(&e, &[5, 5]).unwrap();
        assert_eq!(s.col(0), s.col(1));
    }

    #[test]
    fn embed_matches_elementwise_lookup() {
        let mut rng = stream_rng(2, STREAM_INIT);
        let e = rand_mat(5, 9, &mut rng);
        let context = [3u32, 7, 0, 3];
        let s = embed_sequence(&e, &context).unwrap();
        for (j, &item) in context.iter().enumerate() {
            for r in 0..5 {
                assert_eq!(s.get(r, j), e.get(r, item as usize));
            }
        }
    }

    #[test]
    fn embed_rejects_out_of_range() {
        let e = Mat::zeros(2, 3);
        assert!(matches!(
            embed_sequence(&e, &[3]),
            Err(HgnError::Contract(_))
        ));
    }

    #[test]
    fn zero_weights_gate_at_one_half() {
        let mut rng = stream_rng(3, STREAM_INIT);
        let s = rand_mat(4, 3, &mut rng);
        let user = vec![0.3; 4];
        let (gated, gate) =
            feature_gate(&s, &user, &Mat::zeros(4, 4), &Mat::zeros(4, 4), &[0.0; 4]).unwrap();
        for l in 0..3 {
            for r in 0..4 {
                assert_eq!(gate.get(r, l), 0.5);
                assert!((gated.get(r, l) - 0.5 * s.get(r, l)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn saturated_bias_passes_features_through() {
        let mut rng = stream_rng(4, STREAM_INIT);
        let s = rand_mat(4, 3, &mut rng);
        let user = vec![0.0; 4];
        let (gated, _) =
            feature_gate(&s, &user, &Mat::zeros(4, 4), &Mat::zeros(4, 4), &[50.0; 4]).unwrap();
        for l in 0..3 {
            for r in 0..4 {
                assert!((gated.get(r, l) - s.get(r, l)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn feature_gate_matches_scalar_oracle() {
        // d=2, L=2, identity weights: gate entry (r, l) is
        // sigmoid(S[r][l] + u[r]).
        let s = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let user = [1.0, 0.0];
        let eye = Mat::from_fn(2, 2, |r, c| if r == c { 1.0 } else { 0.0 });
        let (gated, gate) = feature_gate(&s, &user, &eye, &eye, &[0.0, 0.0]).unwrap();
        for l in 0..2 {
            for r in 0..2 {
                let pre = s.get(r, l) + user[r];
                let expect = 1.0 / (1.0 + (-pre as f64).exp());
                assert!((gate.get(r, l) - expect).abs() < 1e-12);
                assert!((gated.get(r, l) - s.get(r, l) * expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn feature_gate_flags_non_finite() {
        let s = Mat::from_rows(&[vec![f64::INFINITY]]);
        let r = feature_gate(
            &s,
            &[1.0],
            &Mat::from_rows(&[vec![1.0]]),
            &Mat::zeros(1, 1),
            &[0.0],
        );
        assert!(matches!(r, Err(HgnError::Numeric(_))));
    }

    #[test]
    fn zero_instance_weights_halve_columns() {
        let mut rng = stream_rng(5, STREAM_INIT);
        let sf = rand_mat(3, 4, &mut rng);
        let (gated, gate) =
            instance_gate(&sf, &[0.0; 3], &[0.0; 3], &Mat::zeros(3, 4)).unwrap();
        assert!(gate.iter().all(|&g| g == 0.5));
        for l in 0..4 {
            for r in 0..3 {
                assert!((gated.get(r, l) - 0.5 * sf.get(r, l)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn saturated_instance_gate_keeps_one_column() {
        let mut rng = stream_rng(6, STREAM_INIT);
        let sf = rand_mat(3, 3, &mut rng);
        // Large +/- user-side weights: column 1 open, others closed.
        let w4 = Mat::from_fn(3, 3, |r, c| {
            if r == 0 {
                if c == 1 {
                    50.0
                } else {
                    -50.0
                }
            } else {
                0.0
            }
        });
        let user = [1.0, 0.0, 0.0];
        let (gated, _) = instance_gate(&sf, &user, &[0.0; 3], &w4).unwrap();
        for r in 0..3 {
            assert!((gated.get(r, 1) - sf.get(r, 1)).abs() < 1e-9);
            assert!(gated.get(r, 0).abs() < 1e-9 * sf.get(r, 0).abs().max(1.0));
            assert!(gated.get(r, 2).abs() < 1e-9 * sf.get(r, 2).abs().max(1.0));
        }
    }

    #[test]
    fn instance_gate_matches_scalar_oracle() {
        let mut rng = stream_rng(7, STREAM_INIT);
        let sf = rand_mat(3, 2, &mut rng);
        let user: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w3: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w4 = rand_mat(3, 2, &mut rng);
        let (gated, gate) = instance_gate(&sf, &user, &w3, &w4).unwrap();
        for l in 0..2 {
            let mut pre = 0.0;
            for r in 0..3 {
                pre += w3[r] * sf.get(r, l) + user[r] * w4.get(r, l);
            }
            let g = 1.0 / (1.0 + (-pre).exp());
            assert!((gate[l] - g).abs() < 1e-12);
            for r in 0..3 {
                assert!((gated.get(r, l) - g * sf.get(r, l)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pooling_identical_columns_is_identity() {
        let col = [0.4, -1.2, 0.7];
        let m = Mat::from_fn(3, 4, |r, _| col[r]);
        let (avg, _) = aggregate(&m, Pooling::Avg);
        let (max, arg) = aggregate(&m, Pooling::Max);
        for r in 0..3 {
            assert!((avg[r] - col[r]).abs() < 1e-15);
            assert_eq!(max[r], col[r]);
        }
        // Ties resolve to the first column.
        assert_eq!(arg.unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn pooling_hand_example() {
        let m = Mat::from_rows(&[vec![1.0, -1.0], vec![0.0, 2.0]]);
        let (avg, _) = aggregate(&m, Pooling::Avg);
        let (max, arg) = aggregate(&m, Pooling::Max);
        assert_eq!(avg, vec![0.0, 1.0]);
        assert_eq!(max, vec![1.0, 2.0]);
        assert_eq!(arg.unwrap(), vec![0, 1]);
    }

    #[test]
    fn max_dominates_avg() {
        let mut rng = stream_rng(8, STREAM_INIT);
        for _ in 0..20 {
            let m = rand_mat(5, 6, &mut rng);
            let (avg, _) = aggregate(&m, Pooling::Avg);
            let (max, _) = aggregate(&m, Pooling::Max);
            for r in 0..5 {
                assert!(max[r] >= avg[r]);
            }
        }
    }

    #[test]
    fn argmax_stable_under_small_perturbation() {
        let mut rng = stream_rng(9, STREAM_INIT);
        let m = rand_mat(6, 5, &mut rng);
        let (pooled, argmax) = aggregate(&m, Pooling::Max);
        let argmax = argmax.unwrap();

        // Smallest winner-to-runner-up gap across rows.
        let mut gap = f64::INFINITY;
        for r in 0..6 {
            for l in 0..5 {
                if l != argmax[r] {
                    gap = gap.min(pooled[r] - m.get(r, l));
                }
            }
        }
        assert!(gap > 0.0);
        let eps = gap / 4.0;
        let perturbed = Mat::from_fn(6, 5, |r, c| {
            m.get(r, c) + eps * ((r + 2 * c) as f64 % 3.0 - 1.0) / 2.0
        });
        let (_, argmax2) = aggregate(&perturbed, Pooling::Max);
        assert_eq!(argmax2.unwrap(), argmax);
    }

    #[test]
    fn item_scores_zero_context_sum() {
        let q = Mat::from_fn(3, 5, |r, c| (r + c) as f64);
        assert_eq!(item_item_scores(&[0.0; 3], &q), vec![0.0; 5]);
    }

    #[test]
    fn item_scores_single_item_equals_projection() {
        let mut rng = stream_rng(10, STREAM_INIT);
        let q = rand_mat(4, 6, &mut rng);
        let e: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let scores = item_item_scores(&e, &q);
        for j in 0..6 {
            assert!((scores[j] - dot(&e, q.col(j))).abs() < 1e-12);
        }
    }

    #[test]
    fn sum_then_project_matches_term_by_term() {
        let mut rng = stream_rng(11, STREAM_INIT);
        let q = rand_mat(6, 10, &mut rng);
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let mut sum = vec![0.0; 6];
        for c in &cols {
            axpy(&mut sum, 1.0, c);
        }
        let fast = item_item_scores(&sum, &q);
        for j in 0..10 {
            let slow: f64 = cols.iter().map(|c| dot(c, q.col(j))).sum();
            assert!((fast[j] - slow).abs() < 1e-10);
        }
    }

    #[test]
    fn predict_reduces_to_mf_without_context_terms() {
        let mut rng = stream_rng(12, STREAM_INIT);
        let q = rand_mat(4, 7, &mut rng);
        let u: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let scores = predict_all(&u, &[0.0; 4], &[0.0; 4], &q);
        for j in 0..7 {
            assert!((scores[j] - dot(&u, q.col(j))).abs() < 1e-12);
        }
    }

    #[test]
    fn predict_zero_candidate_scores_zero() {
        let mut q = Mat::from_fn(3, 4, |_, _| 1.0);
        q.col_mut(2).fill(0.0);
        let scores = predict_all(&[1.0, 2.0, 3.0], &[0.5; 3], &[0.1; 3], &q);
        assert_eq!(scores[2], 0.0);
    }

    #[test]
    fn predict_decomposes_into_three_terms() {
        let mut rng = stream_rng(13, STREAM_INIT);
        let q = rand_mat(5, 8, &mut rng);
        let u: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let scores = predict_all(&u, &p, &c, &q);
        for j in 0..8 {
            let parts = dot(&u, q.col(j)) + dot(&p, q.col(j)) + dot(&c, q.col(j));
            let denom = parts.abs().max(1.0);
            assert!((scores[j] - parts).abs() / denom < 1e-10);
        }
    }

    #[test]
    fn prediction_is_linear_in_candidates() {
        let mut rng = stream_rng(14, STREAM_INIT);
        let q = rand_mat(4, 6, &mut rng);
        let scaled = Mat::from_fn(4, 6, |r, c| 3.0 * q.get(r, c));
        let u: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = predict_all(&u, &[0.0; 4], &[0.0; 4], &q);
        let b = predict_all(&u, &[0.0; 4], &[0.0; 4], &scaled);
        for j in 0..6 {
            assert!((b[j] - 3.0 * a[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_params_score_zero() {
        let params = ModelParams::zeros(4, 3, 8, 3);
        let arch = Variant::Hgn.architecture(Pooling::Avg);
        let (scores, _) = forward(&params, 0, &[1, 2, 3], &arch).unwrap();
        assert!(scores.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn bpr_variant_ignores_context() {
        let mut rng = stream_rng(15, STREAM_INIT);
        let params = ModelParams::init(4, 3, 8, 3, &mut rng);
        let arch = Variant::Bpr.architecture(Pooling::Avg);
        let (a, _) = forward(&params, 1, &[0, 1, 2], &arch).unwrap();
        let (b, _) = forward(&params, 1, &[5, 6, 7], &arch).unwrap();
        assert_eq!(a, b);
        let u = params.user_emb.col(1);
        for j in 0..8 {
            assert!((a[j] - dot(u, params.item_out.col(j))).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_matches_straight_line_reimplementation() {
        // Independent scalar-loop oracle over the full pipeline.
        let mut rng = stream_rng(16, STREAM_INIT);
        let params = ModelParams::init(4, 3, 8, 3, &mut rng);
        let context = [2u32, 7, 2];
        let user = 1usize;
        let arch = Variant::Hgn.architecture(Pooling::Avg);
        let (scores, _) = forward(&params, user as u32, &context, &arch).unwrap();

        let d = 4;
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        let u: Vec<f64> = (0..d).map(|r| params.user_emb.get(r, user)).collect();
        // S and the feature gate, entry by entry.
        let mut sf = vec![vec![0.0; 3]; d];
        let mut s = vec![vec![0.0; 3]; d];
        for l in 0..3 {
            for r in 0..d {
                s[r][l] = params.item_in.get(r, context[l] as usize);
            }
        }
        for l in 0..3 {
            for r in 0..d {
                let mut pre = params.feat_bias[r];
                for k in 0..d {
                    pre += params.feat_seq_weight.get(r, k) * s[k][l];
                    pre += params.feat_user_weight.get(r, k) * u[k];
                }
                sf[r][l] = s[r][l] * sig(pre);
            }
        }
        // Instance gate and average pooling.
        let mut pooled = vec![0.0; d];
        for l in 0..3 {
            let mut pre = 0.0;
            for r in 0..d {
                pre += params.inst_feat_weight[r] * sf[r][l];
                pre += u[r] * params.inst_user_weight.get(r, l);
            }
            let g = sig(pre);
            for r in 0..d {
                pooled[r] += g * sf[r][l] / 3.0;
            }
        }
        // Three score terms per item.
        for j in 0..8 {
            let mut expect = 0.0;
            for r in 0..d {
                let mut ctx_sum = 0.0;
                for l in 0..3 {
                    ctx_sum += s[r][l];
                }
                expect +=
                    (u[r] + pooled[r] + ctx_sum) * params.item_out.get(r, j);
            }
            let denom = expect.abs().max(1.0);
            assert!(
                (scores[j] - expect).abs() / denom < 1e-10,
                "item {j}: {} vs {expect}",
                scores[j]
            );
        }
    }

    #[test]
    fn gates_stay_in_open_interval_and_damp() {
        let mut rng = stream_rng(17, STREAM_INIT);
        for _ in 0..10 {
            let params = ModelParams::init(6, 4, 12, 4, &mut rng);
            let arch = Variant::Hgn.architecture(Pooling::Avg);
            let context = [0u32, 5, 11, 3];
            let (_, cache) = forward(&params, 2, &context, &arch).unwrap();
            let gate = cache.feature_gate.as_ref().unwrap();
            let igate = cache.instance_gate.as_ref().unwrap();
            let s = cache.seq_emb.as_ref().unwrap();
            let sf = cache.gated_seq.as_ref().unwrap();
            let si = cache.gated_items.as_ref().unwrap();
            for l in 0..4 {
                assert!(igate[l] > 0.0 && igate[l] < 1.0);
                for r in 0..6 {
                    let g = gate.get(r, l);
                    assert!(g > 0.0 && g < 1.0);
                    assert!(sf.get(r, l).abs() <= s.get(r, l).abs());
                    assert!(si.get(r, l).abs() <= sf.get(r, l).abs());
                }
            }
        }
    }

    #[test]
    fn avg_pooling_permutation_invariant_when_user_side_weights_are_zero() {
        let mut rng = stream_rng(18, STREAM_INIT);
        let mut params = ModelParams::init(5, 3, 10, 4, &mut rng);
        params.inst_user_weight = Mat::zeros(5, 4);
        let arch = Variant::Hgn.architecture(Pooling::Avg);
        let context = [1u32, 4, 7, 9];
        let permuted = [9u32, 1, 7, 4];
        let (_, c1) = forward(&params, 0, &context, &arch).unwrap();
        let (_, c2) = forward(&params, 0, &permuted, &arch).unwrap();
        let p1 = c1.pooled.unwrap();
        let p2 = c2.pooled.unwrap();
        for r in 0..5 {
            assert!((p1[r] - p2[r]).abs() < 1e-12);
        }
    }
}
