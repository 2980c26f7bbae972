//! Adam with bias correction. Embedding moments update lazily: only the
//! columns carrying gradient in a step touch their accumulators.

use super::grads::GradientSet;
use crate::linalg::Mat;
use crate::model::ModelParams;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Completed update steps.
    pub step: u64,
    m_user: Mat,
    v_user: Mat,
    m_item_in: Mat,
    v_item_in: Mat,
    m_item_out: Mat,
    v_item_out: Mat,
    m_feat_seq: Mat,
    v_feat_seq: Mat,
    m_feat_user: Mat,
    v_feat_user: Mat,
    m_feat_bias: Vec<f64>,
    v_feat_bias: Vec<f64>,
    m_inst_feat: Vec<f64>,
    v_inst_feat: Vec<f64>,
    m_inst_user: Mat,
    v_inst_user: Mat,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let d = params.dim;
        AdamState {
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
            step: 0,
            m_user: Mat::zeros(d, params.num_users),
            v_user: Mat::zeros(d, params.num_users),
            m_item_in: Mat::zeros(d, params.num_items),
            v_item_in: Mat::zeros(d, params.num_items),
            m_item_out: Mat::zeros(d, params.num_items),
            v_item_out: Mat::zeros(d, params.num_items),
            m_feat_seq: Mat::zeros(d, d),
            v_feat_seq: Mat::zeros(d, d),
            m_feat_user: Mat::zeros(d, d),
            v_feat_user: Mat::zeros(d, d),
            m_feat_bias: vec![0.0; d],
            v_feat_bias: vec![0.0; d],
            m_inst_feat: vec![0.0; d],
            v_inst_feat: vec![0.0; d],
            m_inst_user: Mat::zeros(d, params.seq_len),
            v_inst_user: Mat::zeros(d, params.seq_len),
        }
    }

    /// Apply one update with gradients scaled by `scale` (the batch mean
    /// factor). Dense tensors update every entry; embedding tables update
    /// only the columns present in `grads`.
    pub fn apply(&mut self, params: &mut ModelParams, grads: &GradientSet, lr: f64, scale: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);

        let cfg = StepConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            lr,
            scale,
            bc1,
            bc2,
        };

        for (col, grad) in grads.user_emb.iter() {
            update_slice(
                params.user_emb.col_mut(col as usize),
                grad,
                self.m_user.col_mut(col as usize),
                self.v_user.col_mut(col as usize),
                &cfg,
            );
        }
        for (col, grad) in grads.item_in.iter() {
            update_slice(
                params.item_in.col_mut(col as usize),
                grad,
                self.m_item_in.col_mut(col as usize),
                self.v_item_in.col_mut(col as usize),
                &cfg,
            );
        }
        for (col, grad) in grads.item_out.iter() {
            update_slice(
                params.item_out.col_mut(col as usize),
                grad,
                self.m_item_out.col_mut(col as usize),
                self.v_item_out.col_mut(col as usize),
                &cfg,
            );
        }

        update_slice(
            params.feat_seq_weight.data_mut(),
            grads.feat_seq_weight.data(),
            self.m_feat_seq.data_mut(),
            self.v_feat_seq.data_mut(),
            &cfg,
        );
        update_slice(
            params.feat_user_weight.data_mut(),
            grads.feat_user_weight.data(),
            self.m_feat_user.data_mut(),
            self.v_feat_user.data_mut(),
            &cfg,
        );
        update_slice(
            &mut params.feat_bias,
            &grads.feat_bias,
            &mut self.m_feat_bias,
            &mut self.v_feat_bias,
            &cfg,
        );
        update_slice(
            &mut params.inst_feat_weight,
            &grads.inst_feat_weight,
            &mut self.m_inst_feat,
            &mut self.v_inst_feat,
            &cfg,
        );
        update_slice(
            params.inst_user_weight.data_mut(),
            grads.inst_user_weight.data(),
            self.m_inst_user.data_mut(),
            self.v_inst_user.data_mut(),
            &cfg,
        );
    }
}

struct StepConfig {
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    scale: f64,
    bc1: f64,
    bc2: f64,
}

fn update_slice(param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], cfg: &StepConfig) {
    debug_assert_eq!(param.len(), grad.len());
    for i in 0..param.len() {
        let g = grad[i] * cfg.scale;
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / cfg.bc1;
        let v_hat = v[i] / cfg.bc2;
        param[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}
