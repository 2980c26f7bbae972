//! Finite-difference validation of the analytic gradients.

use super::loss::{instance_loss, instance_loss_value};
use crate::data::TrainingInstance;
use crate::error::HgnError;
use crate::model::{ModelParams, Pooling, Variant};
use crate::rng::{stream_rng, STREAM_INIT};
use rand::Rng;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorKind {
    UserEmb,
    ItemIn,
    ItemOut,
    FeatSeqWeight,
    FeatUserWeight,
    FeatBias,
    InstFeatWeight,
    InstUserWeight,
}

impl TensorKind {
    pub const ALL: [TensorKind; 8] = [
        TensorKind::UserEmb,
        TensorKind::ItemIn,
        TensorKind::ItemOut,
        TensorKind::FeatSeqWeight,
        TensorKind::FeatUserWeight,
        TensorKind::FeatBias,
        TensorKind::InstFeatWeight,
        TensorKind::InstUserWeight,
    ];
}

impl fmt::Display for TensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TensorKind::UserEmb => "user_emb",
            TensorKind::ItemIn => "item_in",
            TensorKind::ItemOut => "item_out",
            TensorKind::FeatSeqWeight => "feat_seq_weight",
            TensorKind::FeatUserWeight => "feat_user_weight",
            TensorKind::FeatBias => "feat_bias",
            TensorKind::InstFeatWeight => "inst_feat_weight",
            TensorKind::InstUserWeight => "inst_user_weight",
        })
    }
}

#[derive(Clone, Debug)]
pub struct GradCheckSettings {
    pub dim: usize,
    pub context_len: usize,
    pub num_items: usize,
    pub num_users: usize,
    pub num_targets: usize,
    pub seeds: u64,
    pub step: f64,
    pub tolerance: f64,
    pub lambda: f64,
    pub variants: Vec<Variant>,
    /// Test hook: add a deliberate error to this tensor's analytic
    /// gradient so the check must fail and name it.
    pub corrupt: Option<TensorKind>,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        GradCheckSettings {
            dim: 4,
            context_len: 3,
            num_items: 10,
            num_users: 3,
            num_targets: 2,
            seeds: 10,
            step: 1e-5,
            tolerance: 1e-4,
            lambda: 0.001,
            variants: vec![
                Variant::Bpr,
                Variant::FeatureAvg,
                Variant::InstanceAvg,
                Variant::FeatureInstanceAvg,
                Variant::FeatureInstanceMax,
                Variant::Hgn,
            ],
            corrupt: None,
        }
    }
}

/// Worst observed coordinate for one tensor across the whole grid.
#[derive(Clone, Debug)]
pub struct TensorCheck {
    pub tensor: TensorKind,
    pub max_rel_err: f64,
    pub worst_coord: (usize, usize),
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub worst_variant: Variant,
    pub worst_seed: u64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub runs: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn failed_tensors(&self) -> Vec<TensorKind> {
        self.tensors
            .iter()
            .filter(|t| !t.pass)
            .map(|t| t.tensor)
            .collect()
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compare analytic gradients with central finite differences over every
/// coordinate of every tensor, across the settings' variants and seeds.
pub fn check_gradients(settings: &GradCheckSettings) -> Result<GradCheckReport, HgnError> {
    let mut checks: Vec<TensorCheck> = TensorKind::ALL
        .iter()
        .map(|&tensor| TensorCheck {
            tensor,
            max_rel_err: 0.0,
            worst_coord: (0, 0),
            worst_analytic: 0.0,
            worst_numeric: 0.0,
            worst_variant: Variant::Hgn,
            worst_seed: 0,
            pass: true,
        })
        .collect();

    let mut runs = 0;
    for &variant in &settings.variants {
        for seed in 0..settings.seeds {
            check_one_run(settings, variant, seed, &mut checks)?;
            runs += 1;
        }
    }

    for c in &mut checks {
        c.pass = c.max_rel_err < settings.tolerance;
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(GradCheckReport {
        tensors: checks,
        runs,
        tolerance: settings.tolerance,
        pass,
    })
}

fn check_one_run(
    settings: &GradCheckSettings,
    variant: Variant,
    seed: u64,
    checks: &mut [TensorCheck],
) -> Result<(), HgnError> {
    let d = settings.dim;
    let n = settings.num_items as u32;
    let mut rng = stream_rng(seed.wrapping_mul(1000).wrapping_add(17), STREAM_INIT);
    let params = ModelParams::init(
        d,
        settings.num_users,
        settings.num_items,
        settings.context_len,
        &mut rng,
    );

    let user = rng.random_range(0..settings.num_users as u32);
    let context: Vec<u32> = (0..settings.context_len)
        .map(|_| rng.random_range(0..n))
        .collect();
    let targets: Vec<u32> = (0..settings.num_targets)
        .map(|_| rng.random_range(0..n))
        .collect();
    let negatives: Vec<u32> = targets
        .iter()
        .map(|&t| loop {
            let k = rng.random_range(0..n);
            if k != t {
                break k;
            }
        })
        .collect();
    let instance = TrainingInstance {
        user,
        context,
        targets,
    };

    let arch = variant.architecture(Pooling::Avg);
    let (_, mut grads) = instance_loss(&params, &instance, &negatives, settings.lambda, &arch)?;

    if let Some(kind) = settings.corrupt {
        corrupt_gradient(&mut grads, kind, &instance, &negatives);
    }

    let h = settings.step;
    let loss_of =
        |p: &ModelParams| instance_loss_value(p, &instance, &negatives, settings.lambda, &arch);

    // One closure per tensor: read the analytic coordinate and nudge the
    // parameter coordinate. Sparse tensors read zero where they carry no
    // entry.
    for (slot, kind) in TensorKind::ALL.iter().enumerate() {
        let (rows, cols) = tensor_shape(&params, *kind);
        for r in 0..rows {
            for c in 0..cols {
                let analytic = read_grad(&grads, *kind, r, c);
                let mut plus = params.clone();
                nudge(&mut plus, *kind, r, c, h);
                let mut minus = params.clone();
                nudge(&mut minus, *kind, r, c, -h);
                let numeric = (loss_of(&plus)? - loss_of(&minus)?) / (2.0 * h);
                let rel = relative_error(analytic, numeric);
                let check = &mut checks[slot];
                if rel > check.max_rel_err {
                    check.max_rel_err = rel;
                    check.worst_coord = (r, c);
                    check.worst_analytic = analytic;
                    check.worst_numeric = numeric;
                    check.worst_variant = variant;
                    check.worst_seed = seed;
                }
            }
        }
    }
    Ok(())
}

fn tensor_shape(params: &ModelParams, kind: TensorKind) -> (usize, usize) {
    match kind {
        TensorKind::UserEmb => (params.dim, params.num_users),
        TensorKind::ItemIn | TensorKind::ItemOut => (params.dim, params.num_items),
        TensorKind::FeatSeqWeight | TensorKind::FeatUserWeight => (params.dim, params.dim),
        TensorKind::FeatBias | TensorKind::InstFeatWeight => (params.dim, 1),
        TensorKind::InstUserWeight => (params.dim, params.seq_len),
    }
}

fn read_grad(grads: &super::grads::GradientSet, kind: TensorKind, r: usize, c: usize) -> f64 {
    match kind {
        TensorKind::UserEmb => grads.user_emb.col(c as u32).map_or(0.0, |v| v[r]),
        TensorKind::ItemIn => grads.item_in.col(c as u32).map_or(0.0, |v| v[r]),
        TensorKind::ItemOut => grads.item_out.col(c as u32).map_or(0.0, |v| v[r]),
        TensorKind::FeatSeqWeight => grads.feat_seq_weight.get(r, c),
        TensorKind::FeatUserWeight => grads.feat_user_weight.get(r, c),
        TensorKind::FeatBias => grads.feat_bias[r],
        TensorKind::InstFeatWeight => grads.inst_feat_weight[r],
        TensorKind::InstUserWeight => grads.inst_user_weight.get(r, c),
    }
}

fn nudge(params: &mut ModelParams, kind: TensorKind, r: usize, c: usize, h: f64) {
    match kind {
        TensorKind::UserEmb => {
            let v = params.user_emb.get(r, c);
            params.user_emb.set(r, c, v + h);
        }
        TensorKind::ItemIn => {
            let v = params.item_in.get(r, c);
            params.item_in.set(r, c, v + h);
        }
        TensorKind::ItemOut => {
            let v = params.item_out.get(r, c);
            params.item_out.set(r, c, v + h);
        }
        TensorKind::FeatSeqWeight => {
            let v = params.feat_seq_weight.get(r, c);
            params.feat_seq_weight.set(r, c, v + h);
        }
        TensorKind::FeatUserWeight => {
            let v = params.feat_user_weight.get(r, c);
            params.feat_user_weight.set(r, c, v + h);
        }
        TensorKind::FeatBias => params.feat_bias[r] += h,
        TensorKind::InstFeatWeight => params.inst_feat_weight[r] += h,
        TensorKind::InstUserWeight => {
            let v = params.inst_user_weight.get(r, c);
            params.inst_user_weight.set(r, c, v + h);
        }
    }
}

/// Damage one coordinate the instance actually touches so the mismatch is
/// guaranteed to surface.
fn corrupt_gradient(
    grads: &mut super::grads::GradientSet,
    kind: TensorKind,
    instance: &TrainingInstance,
    negatives: &[u32],
) {
    let bump = 0.05;
    let dim = grads.feat_bias.len();
    let mut one_hot = vec![0.0; dim];
    one_hot[0] = 1.0;
    match kind {
        TensorKind::UserEmb => grads.user_emb.add_col(instance.user, bump, &one_hot),
        TensorKind::ItemIn => grads.item_in.add_col(instance.context[0], bump, &one_hot),
        TensorKind::ItemOut => {
            let _ = negatives;
            grads.item_out.add_col(instance.targets[0], bump, &one_hot)
        }
        TensorKind::FeatSeqWeight => {
            let v = grads.feat_seq_weight.get(0, 0);
            grads.feat_seq_weight.set(0, 0, v + bump);
        }
        TensorKind::FeatUserWeight => {
            let v = grads.feat_user_weight.get(0, 0);
            grads.feat_user_weight.set(0, 0, v + bump);
        }
        TensorKind::FeatBias => grads.feat_bias[0] += bump,
        TensorKind::InstFeatWeight => grads.inst_feat_weight[0] += bump,
        TensorKind::InstUserWeight => {
            let v = grads.inst_user_weight.get(0, 0);
            grads.inst_user_weight.set(0, 0, v + bump);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_passes() {
        let settings = GradCheckSettings {
            seeds: 2,
            ..GradCheckSettings::default()
        };
        let report = check_gradients(&settings).unwrap();
        assert!(report.pass, "failures: {:?}", report.failed_tensors());
        assert_eq!(report.runs, 12);
        assert_eq!(report.tensors.len(), 8);
    }

    #[test]
    fn corrupted_gradient_fails_and_names_the_tensor() {
        let settings = GradCheckSettings {
            seeds: 1,
            variants: vec![Variant::Hgn],
            corrupt: Some(TensorKind::InstFeatWeight),
            ..GradCheckSettings::default()
        };
        let report = check_gradients(&settings).unwrap();
        assert!(!report.pass);
        assert_eq!(report.failed_tensors(), vec![TensorKind::InstFeatWeight]);
    }

    #[test]
    fn corrupted_embedding_is_caught_too() {
        let settings = GradCheckSettings {
            seeds: 1,
            variants: vec![Variant::Hgn],
            corrupt: Some(TensorKind::ItemOut),
            ..GradCheckSettings::default()
        };
        let report = check_gradients(&settings).unwrap();
        assert_eq!(report.failed_tensors(), vec![TensorKind::ItemOut]);
    }

    #[test]
    fn report_records_worst_coordinate() {
        let settings = GradCheckSettings {
            seeds: 1,
            variants: vec![Variant::Hgn],
            ..GradCheckSettings::default()
        };
        let report = check_gradients(&settings).unwrap();
        for t in &report.tensors {
            assert!(t.max_rel_err.is_finite());
            let (rows, cols) = (t.worst_coord.0, t.worst_coord.1);
            assert!(rows < settings.dim.max(settings.num_items));
            assert!(cols < settings.num_items.max(settings.dim));
        }
    }
}
