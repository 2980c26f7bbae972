//! Gradient containers: dense tensors for the gating weights, sparse
//! per-column maps for the embedding tables.

use crate::linalg::{axpy, Mat};
use std::collections::BTreeMap;

/// Sparse column gradients for an embedding matrix: only columns that an
/// instance actually touched carry entries, everything else is exactly
/// zero. Keys are ordered so accumulation and updates are deterministic.
#[derive(Clone, Debug, Default)]
pub struct SparseColGrad {
    dim: usize,
    cols: BTreeMap<u32, Vec<f64>>,
}

impl SparseColGrad {
    pub fn new(dim: usize) -> Self {
        SparseColGrad {
            dim,
            cols: BTreeMap::new(),
        }
    }

    /// `grad[:, col] += scale * v`.
    pub fn add_col(&mut self, col: u32, scale: f64, v: &[f64]) {
        debug_assert_eq!(v.len(), self.dim);
        let entry = self
            .cols
            .entry(col)
            .or_insert_with(|| vec![0.0; self.dim]);
        axpy(entry, scale, v);
    }

    pub fn col(&self, col: u32) -> Option<&[f64]> {
        self.cols.get(&col).map(|v| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &[f64])> {
        self.cols.iter().map(|(c, v)| (*c, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn merge(&mut self, other: &SparseColGrad) {
        for (col, v) in other.iter() {
            self.add_col(col, 1.0, v);
        }
    }
}

/// Gradients for every learnable tensor, shaped like [`super::super::model::ModelParams`].
#[derive(Clone, Debug)]
pub struct GradientSet {
    pub user_emb: SparseColGrad,
    pub item_in: SparseColGrad,
    pub item_out: SparseColGrad,
    pub feat_seq_weight: Mat,
    pub feat_user_weight: Mat,
    pub feat_bias: Vec<f64>,
    pub inst_feat_weight: Vec<f64>,
    pub inst_user_weight: Mat,
}

impl GradientSet {
    pub fn zeros(dim: usize, seq_len: usize) -> Self {
        GradientSet {
            user_emb: SparseColGrad::new(dim),
            item_in: SparseColGrad::new(dim),
            item_out: SparseColGrad::new(dim),
            feat_seq_weight: Mat::zeros(dim, dim),
            feat_user_weight: Mat::zeros(dim, dim),
            feat_bias: vec![0.0; dim],
            inst_feat_weight: vec![0.0; dim],
            inst_user_weight: Mat::zeros(dim, seq_len),
        }
    }

    pub fn merge(&mut self, other: &GradientSet) {
        self.user_emb.merge(&other.user_emb);
        self.item_in.merge(&other.item_in);
        self.item_out.merge(&other.item_out);
        self.feat_seq_weight.add_assign(&other.feat_seq_weight);
        self.feat_user_weight.add_assign(&other.feat_user_weight);
        axpy(&mut self.feat_bias, 1.0, &other.feat_bias);
        axpy(&mut self.inst_feat_weight, 1.0, &other.inst_feat_weight);
        self.inst_user_weight.add_assign(&other.inst_user_weight);
    }
}
