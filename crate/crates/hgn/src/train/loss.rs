//! Pairwise ranking loss and analytic gradients through the whole model.

use super::grads::GradientSet;
use crate::data::TrainingInstance;
use crate::error::HgnError;
use crate::linalg::{axpy, dot, norm_sq, sigmoid, softplus, Mat};
use crate::model::{forward_context, Architecture, Pooling};
use crate::model::ModelParams;
use std::collections::BTreeSet;

/// `-ln sigmoid(pos - neg)`, computed as `softplus(neg - pos)` so it is
/// stable for any finite gap.
#[inline]
pub fn bpr_pair_loss(score_pos: f64, score_neg: f64) -> f64 {
    softplus(score_neg - score_pos)
}

/// Loss and exact gradients for one training instance.
///
/// The loss is the sum of pairwise losses over the instance's targets,
/// one sampled negative per target, plus an L2 term over the parameter
/// columns this instance touches (its user, context items, and scored
/// items) and over the gate tensors the architecture uses.
pub fn instance_loss(
    params: &ModelParams,
    instance: &TrainingInstance,
    negatives: &[u32],
    lambda: f64,
    arch: &Architecture,
) -> Result<(f64, GradientSet), HgnError> {
    let mut grads = GradientSet::zeros(params.dim, params.seq_len);
    let loss = accumulate_instance(params, instance, negatives, lambda, arch, &mut grads)?;
    Ok((loss, grads))
}

/// Loss only, used by the finite-difference checker as the function being
/// differentiated. Shares the forward path with [`instance_loss`] but
/// computes no gradients.
pub fn instance_loss_value(
    params: &ModelParams,
    instance: &TrainingInstance,
    negatives: &[u32],
    lambda: f64,
    arch: &Architecture,
) -> Result<f64, HgnError> {
    check_pairs(instance, negatives)?;
    let cache = forward_context(params, instance.user, &instance.context, arch)?;
    let w = &cache.combined;
    let mut loss = 0.0;
    for (&pos, &neg) in instance.targets.iter().zip(negatives) {
        bounds_check(pos, params.num_items)?;
        bounds_check(neg, params.num_items)?;
        let s_pos = dot(w, params.item_out.col(pos as usize));
        let s_neg = dot(w, params.item_out.col(neg as usize));
        loss += bpr_pair_loss(s_pos, s_neg);
    }
    loss += regularization_value(params, instance, negatives, lambda, arch);
    Ok(loss)
}

/// Compute one instance's loss and add its gradients into `grads`.
pub fn accumulate_instance(
    params: &ModelParams,
    instance: &TrainingInstance,
    negatives: &[u32],
    lambda: f64,
    arch: &Architecture,
    grads: &mut GradientSet,
) -> Result<f64, HgnError> {
    check_pairs(instance, negatives)?;
    let d = params.dim;
    let user = instance.user;
    let cache = forward_context(params, user, &instance.context, arch)?;
    let w = &cache.combined;

    // Pairwise losses and dL/dscore coefficients, then candidate-side
    // gradients and the pullback onto the combined vector.
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; d];
    for (&pos, &neg) in instance.targets.iter().zip(negatives) {
        bounds_check(pos, params.num_items)?;
        bounds_check(neg, params.num_items)?;
        let q_pos = params.item_out.col(pos as usize);
        let q_neg = params.item_out.col(neg as usize);
        let delta = dot(w, q_pos) - dot(w, q_neg);
        loss += softplus(-delta);
        // d/d_delta of softplus(-delta) = -sigmoid(-delta)
        let gamma = sigmoid(-delta);
        grads.item_out.add_col(pos, -gamma, w);
        grads.item_out.add_col(neg, gamma, w);
        axpy(&mut grad_w, -gamma, q_pos);
        axpy(&mut grad_w, gamma, q_neg);
    }

    // The user embedding feeds the score directly; gate-path terms are
    // added below.
    let mut grad_user = grad_w.clone();

    if arch.uses_context() {
        let seq_emb = cache.seq_emb.as_ref().expect("context forward caches S");
        let cols = seq_emb.cols();
        let mut grad_seq = Mat::zeros(d, cols);

        if arch.short_term {
            // Pooling backward: average spreads the pooled gradient evenly,
            // max routes it to the recorded winning column per row.
            let mut grad_gated_items = Mat::zeros(d, cols);
            match arch.pooling {
                Pooling::Avg => {
                    for l in 0..cols {
                        axpy(grad_gated_items.col_mut(l), 1.0 / cols as f64, &grad_w);
                    }
                }
                Pooling::Max => {
                    let argmax = cache
                        .pool_argmax
                        .as_ref()
                        .expect("max pooling caches argmax");
                    for r in 0..d {
                        let l = argmax[r];
                        let v = grad_gated_items.col_mut(l);
                        v[r] += grad_w[r];
                    }
                }
            }

            // Instance-gate backward. `S_I[:,l] = g_l * S_F[:,l]` with
            // `g_l = sigmoid(w3 . S_F[:,l] + u . W4[:,l])`, so the gradient
            // reaches S_F both through the product and through the gate
            // pre-activation.
            let gated_seq: &Mat = cache.gated_seq.as_ref().unwrap_or(seq_emb);
            let mut grad_gated_seq;
            if arch.instance_gate {
                let gate = cache
                    .instance_gate
                    .as_ref()
                    .expect("instance gate cached");
                grad_gated_seq = Mat::zeros(d, cols);
                let user_vec = params.user_emb.col(user as usize);
                for (l, &gi) in gate.iter().enumerate() {
                    let g_col = grad_gated_items.col(l);
                    axpy(grad_gated_seq.col_mut(l), gi, g_col);
                    let grad_pre = dot(g_col, gated_seq.col(l)) * gi * (1.0 - gi);
                    axpy(&mut grads.inst_feat_weight, grad_pre, gated_seq.col(l));
                    axpy(grad_gated_seq.col_mut(l), grad_pre, &params.inst_feat_weight);
                    axpy(grads.inst_user_weight.col_mut(l), grad_pre, user_vec);
                    axpy(&mut grad_user, grad_pre, params.inst_user_weight.col(l));
                }
            } else {
                grad_gated_seq = grad_gated_items;
            }

            // Feature-gate backward. `S_F = S (*) G` with
            // `G = sigmoid(W1 S + W2 u + b)`; the user term and bias are
            // shared across columns, so their gradients take the column sum.
            if arch.feature_gate {
                let gate = cache.feature_gate.as_ref().expect("feature gate cached");
                let mut row_sum = vec![0.0; d];
                let user_vec = params.user_emb.col(user as usize);
                for l in 0..cols {
                    let g_sf = grad_gated_seq.col(l);
                    let s_col = seq_emb.col(l);
                    let gate_col = gate.col(l);
                    let mut grad_pre = vec![0.0; d];
                    {
                        let gs = grad_seq.col_mut(l);
                        for r in 0..d {
                            let g = gate_col[r];
                            gs[r] += g_sf[r] * g;
                            grad_pre[r] = g_sf[r] * s_col[r] * g * (1.0 - g);
                        }
                    }
                    grads.feat_seq_weight.add_outer(1.0, &grad_pre, s_col);
                    let back = params.feat_seq_weight.tr_mul_vec(&grad_pre);
                    axpy(grad_seq.col_mut(l), 1.0, &back);
                    axpy(&mut row_sum, 1.0, &grad_pre);
                }
                grads.feat_user_weight.add_outer(1.0, &row_sum, user_vec);
                axpy(&mut grads.feat_bias, 1.0, &row_sum);
                axpy(
                    &mut grad_user,
                    1.0,
                    &params.feat_user_weight.tr_mul_vec(&row_sum),
                );
            } else {
                grad_seq.add_assign(&grad_gated_seq);
            }
        }

        // Item-item path: the score reads the raw context sum, so every
        // context column receives the combined-vector gradient once more.
        if arch.item_item {
            for l in 0..cols {
                axpy(grad_seq.col_mut(l), 1.0, &grad_w);
            }
        }

        for (l, &item) in instance.context.iter().enumerate() {
            grads.item_in.add_col(item, 1.0, grad_seq.col(l));
        }
    }

    grads.user_emb.add_col(user, 1.0, &grad_user);

    loss += apply_regularization(params, instance, negatives, lambda, arch, grads);
    Ok(loss)
}

fn check_pairs(instance: &TrainingInstance, negatives: &[u32]) -> Result<(), HgnError> {
    if negatives.len() != instance.targets.len() {
        return Err(HgnError::Contract(format!(
            "{} negatives for {} targets",
            negatives.len(),
            instance.targets.len()
        )));
    }
    if instance.targets.is_empty() {
        return Err(HgnError::Contract("instance has no targets".into()));
    }
    Ok(())
}

fn bounds_check(item: u32, num_items: usize) -> Result<(), HgnError> {
    if item as usize >= num_items {
        return Err(HgnError::Contract(format!(
            "item index {item} out of range (N = {num_items})"
        )));
    }
    Ok(())
}

/// Columns whose L2 norms enter the per-instance regularizer.
fn touched_columns(
    instance: &TrainingInstance,
    negatives: &[u32],
    arch: &Architecture,
) -> (BTreeSet<u32>, BTreeSet<u32>) {
    let context: BTreeSet<u32> = if arch.uses_context() {
        instance.context.iter().copied().collect()
    } else {
        BTreeSet::new()
    };
    let scored: BTreeSet<u32> = instance
        .targets
        .iter()
        .chain(negatives)
        .copied()
        .collect();
    (context, scored)
}

fn regularization_value(
    params: &ModelParams,
    instance: &TrainingInstance,
    negatives: &[u32],
    lambda: f64,
    arch: &Architecture,
) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let (context, scored) = touched_columns(instance, negatives, arch);
    let mut sq = norm_sq(params.user_emb.col(instance.user as usize));
    for &c in &context {
        sq += norm_sq(params.item_in.col(c as usize));
    }
    for &s in &scored {
        sq += norm_sq(params.item_out.col(s as usize));
    }
    if arch.feature_gate {
        sq += params.feat_seq_weight.frob_sq();
        sq += params.feat_user_weight.frob_sq();
        sq += norm_sq(&params.feat_bias);
    }
    if arch.instance_gate {
        sq += norm_sq(&params.inst_feat_weight);
        sq += params.inst_user_weight.frob_sq();
    }
    lambda * sq
}

fn apply_regularization(
    params: &ModelParams,
    instance: &TrainingInstance,
    negatives: &[u32],
    lambda: f64,
    arch: &Architecture,
    grads: &mut GradientSet,
) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let (context, scored) = touched_columns(instance, negatives, arch);
    let two_lambda = 2.0 * lambda;
    grads.user_emb.add_col(
        instance.user,
        two_lambda,
        params.user_emb.col(instance.user as usize),
    );
    for &c in &context {
        grads
            .item_in
            .add_col(c, two_lambda, params.item_in.col(c as usize));
    }
    for &s in &scored {
        grads
            .item_out
            .add_col(s, two_lambda, params.item_out.col(s as usize));
    }
    if arch.feature_gate {
        add_scaled_mat(&mut grads.feat_seq_weight, two_lambda, &params.feat_seq_weight);
        add_scaled_mat(
            &mut grads.feat_user_weight,
            two_lambda,
            &params.feat_user_weight,
        );
        axpy(&mut grads.feat_bias, two_lambda, &params.feat_bias);
    }
    if arch.instance_gate {
        axpy(
            &mut grads.inst_feat_weight,
            two_lambda,
            &params.inst_feat_weight,
        );
        add_scaled_mat(
            &mut grads.inst_user_weight,
            two_lambda,
            &params.inst_user_weight,
        );
    }
    regularization_value(params, instance, negatives, lambda, arch)
}

fn add_scaled_mat(dst: &mut Mat, scale: f64, src: &Mat) {
    for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
        *d += scale * s;
    }
}
