//! Learnable tensors, initialization, parameter accounting, and the
//! checkpoint format.

use crate::error::HgnError;
use crate::linalg::Mat;
use crate::model::Variant;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// All learnable tensors. Embedding matrices store one embedding per
/// column; `seq_len` is the context window length the gating tensors are
/// shaped for.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub dim: usize,
    pub num_users: usize,
    pub num_items: usize,
    pub seq_len: usize,
    /// d x M user embeddings.
    pub user_emb: Mat,
    /// d x N input item embeddings (context side).
    pub item_in: Mat,
    /// d x N output item embeddings (candidate side).
    pub item_out: Mat,
    /// d x d, applied to the context embeddings in the feature gate.
    pub feat_seq_weight: Mat,
    /// d x d, applied to the user embedding in the feature gate.
    pub feat_user_weight: Mat,
    /// d, feature-gate bias.
    pub feat_bias: Vec<f64>,
    /// d, item-side weights of the instance gate.
    pub inst_feat_weight: Vec<f64>,
    /// d x L, user-side weights of the instance gate.
    pub inst_user_weight: Mat,
}

impl ModelParams {
    pub fn zeros(dim: usize, num_users: usize, num_items: usize, seq_len: usize) -> Self {
        ModelParams {
            dim,
            num_users,
            num_items,
            seq_len,
            user_emb: Mat::zeros(dim, num_users),
            item_in: Mat::zeros(dim, num_items),
            item_out: Mat::zeros(dim, num_items),
            feat_seq_weight: Mat::zeros(dim, dim),
            feat_user_weight: Mat::zeros(dim, dim),
            feat_bias: vec![0.0; dim],
            inst_feat_weight: vec![0.0; dim],
            inst_user_weight: Mat::zeros(dim, seq_len),
        }
    }

    /// Embeddings and gate weights drawn i.i.d. N(0, 1/d); biases zero.
    /// The 1/sqrt(d) scale keeps initial gate pre-activations O(1).
    pub fn init(
        dim: usize,
        num_users: usize,
        num_items: usize,
        seq_len: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("valid stddev");
        let mut p = ModelParams::zeros(dim, num_users, num_items, seq_len);
        fn fill(m: &mut Mat, normal: &Normal<f64>, rng: &mut impl Rng) {
            for v in m.data_mut() {
                *v = normal.sample(rng);
            }
        }
        fill(&mut p.user_emb, &normal, rng);
        fill(&mut p.item_in, &normal, rng);
        fill(&mut p.item_out, &normal, rng);
        fill(&mut p.feat_seq_weight, &normal, rng);
        fill(&mut p.feat_user_weight, &normal, rng);
        for v in &mut p.inst_feat_weight {
            *v = normal.sample(rng);
        }
        fill(&mut p.inst_user_weight, &normal, rng);
        p
    }
}

/// Per-tensor parameter counts for a variant, with the gating subnetwork
/// and embedding tables totalled separately.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamCounts {
    pub per_tensor: Vec<(&'static str, usize)>,
    pub gating_total: usize,
    pub embedding_total: usize,
    pub grand_total: usize,
}

/// Count learnable parameters. Tensors a variant never reads count as
/// zero; for the full model the gating subnetwork contributes
/// `2 d^2 + 2 d + d L`.
pub fn parameter_count(
    dim: usize,
    seq_len: usize,
    num_users: usize,
    num_items: usize,
    variant: Variant,
) -> ParamCounts {
    use crate::model::Pooling;
    let arch = variant.architecture(Pooling::Avg);
    let d = dim;
    let f = arch.feature_gate;
    let g = arch.instance_gate;
    let ctx = arch.uses_context();

    let per_tensor: Vec<(&'static str, usize)> = vec![
        ("user_emb", d * num_users),
        ("item_in", if ctx { d * num_items } else { 0 }),
        ("item_out", d * num_items),
        ("feat_seq_weight", if f { d * d } else { 0 }),
        ("feat_user_weight", if f { d * d } else { 0 }),
        ("feat_bias", if f { d } else { 0 }),
        ("inst_feat_weight", if g { d } else { 0 }),
        ("inst_user_weight", if g { d * seq_len } else { 0 }),
    ];
    let gating_total = per_tensor[3..].iter().map(|(_, n)| n).sum();
    let embedding_total = per_tensor[..3].iter().map(|(_, n)| n).sum();
    ParamCounts {
        per_tensor,
        gating_total,
        embedding_total,
        grand_total: gating_total + embedding_total,
    }
}

const MAGIC: &[u8; 8] = b"HGNCKPT\0";
const VERSION: u32 = 1;

/// Tensor order in a checkpoint, written row-major as little-endian f64
/// after a `(d, L, M, N)` header: user_emb, item_in, item_out,
/// feat_seq_weight, feat_user_weight, feat_bias, inst_feat_weight,
/// inst_user_weight. Round-trips are bit-exact.
pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<(), HgnError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| HgnError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| HgnError::io(path, e);

    w.write_all(MAGIC).map_err(io_err)?;
    for v in [
        VERSION,
        params.dim as u32,
        params.seq_len as u32,
        params.num_users as u32,
        params.num_items as u32,
    ] {
        w.write_all(&v.to_le_bytes()).map_err(io_err)?;
    }
    for m in [
        &params.user_emb,
        &params.item_in,
        &params.item_out,
        &params.feat_seq_weight,
        &params.feat_user_weight,
    ] {
        write_mat(&mut w, m).map_err(io_err)?;
    }
    write_vec(&mut w, &params.feat_bias).map_err(io_err)?;
    write_vec(&mut w, &params.inst_feat_weight).map_err(io_err)?;
    write_mat(&mut w, &params.inst_user_weight).map_err(io_err)?;
    w.flush().map_err(io_err)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams, HgnError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| HgnError::io(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| HgnError::Format("truncated checkpoint".into()))?;
    if &magic != MAGIC {
        return Err(HgnError::Format("not a parameter checkpoint".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(HgnError::Format(format!(
            "unsupported checkpoint version {version} (expected {VERSION})"
        )));
    }
    let dim = read_u32(&mut r)? as usize;
    let seq_len = read_u32(&mut r)? as usize;
    let num_users = read_u32(&mut r)? as usize;
    let num_items = read_u32(&mut r)? as usize;
    if dim == 0 || seq_len == 0 {
        return Err(HgnError::Format("degenerate checkpoint dims".into()));
    }

    let mut p = ModelParams::zeros(dim, num_users, num_items, seq_len);
    read_mat(&mut r, &mut p.user_emb)?;
    read_mat(&mut r, &mut p.item_in)?;
    read_mat(&mut r, &mut p.item_out)?;
    read_mat(&mut r, &mut p.feat_seq_weight)?;
    read_mat(&mut r, &mut p.feat_user_weight)?;
    read_vec(&mut r, &mut p.feat_bias)?;
    read_vec(&mut r, &mut p.inst_feat_weight)?;
    read_mat(&mut r, &mut p.inst_user_weight)?;
    Ok(p)
}

fn write_mat(w: &mut impl Write, m: &Mat) -> std::io::Result<()> {
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            w.write_all(&m.get(r, c).to_le_bytes())?;
        }
    }
    Ok(())
}

fn write_vec(w: &mut impl Write, v: &[f64]) -> std::io::Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, HgnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| HgnError::Format("truncated checkpoint".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64, HgnError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| HgnError::Format("truncated checkpoint".into()))?;
    Ok(f64::from_le_bytes(b))
}

fn read_mat(r: &mut impl Read, m: &mut Mat) -> Result<(), HgnError> {
    for row in 0..m.rows() {
        for col in 0..m.cols() {
            let v = read_f64(r)?;
            m.set(row, col, v);
        }
    }
    Ok(())
}

fn read_vec(r: &mut impl Read, v: &mut [f64]) -> Result<(), HgnError> {
    for x in v.iter_mut() {
        *x = read_f64(r)?;
    }
    Ok(())
}
