//! The training loop: shuffling, per-epoch negative sampling, batched
//! gradient accumulation, and Adam updates.

use super::adam::AdamState;
use super::grads::GradientSet;
use super::loss::accumulate_instance;
use crate::data::{instances_for_split, SplitLog, TrainingInstance, UniformNegativeSampler};
use crate::error::HgnError;
use crate::model::{ModelParams, Pooling, Variant};
use crate::rng::{stream_rng, STREAM_INIT, STREAM_NEGATIVE, STREAM_SHUFFLE};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

/// Gradients are accumulated over fixed-size sub-chunks that are merged in
/// order, so results are bit-identical for any worker count.
const ACCUM_CHUNK: usize = 256;

/// Training hyper-parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    pub context_len: usize,
    pub horizon: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub pooling: Pooling,
    pub variant: Variant,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 50,
            context_len: 5,
            horizon: 3,
            learning_rate: 0.001,
            lambda: 0.001,
            batch_size: 4096,
            epochs: 30,
            pooling: Pooling::Avg,
            variant: Variant::Hgn,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), HgnError> {
        let mut problems = Vec::new();
        if self.dim == 0 {
            problems.push("d must be at least 1");
        }
        if self.context_len == 0 {
            problems.push("L must be at least 1");
        }
        if self.horizon == 0 {
            problems.push("T must be at least 1");
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            problems.push("lr must be positive");
        }
        if self.lambda.is_nan() || self.lambda < 0.0 {
            problems.push("lambda must be non-negative");
        }
        if self.batch_size == 0 {
            problems.push("batch must be at least 1");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(HgnError::Config(problems.join("; ")))
        }
    }
}

/// Per-epoch training statistics. `train_secs` covers gradient and update
/// work only; negative sampling happens outside the timed section.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_secs: f64,
    pub instances_per_sec: f64,
}

impl EpochStats {
    /// Stable machine-parseable log line.
    pub fn log_line(&self) -> String {
        format!(
            "epoch={} mean_loss={:.9} train_secs={:.6} instances_per_sec={:.1}",
            self.epoch, self.mean_loss, self.train_secs, self.instances_per_sec
        )
    }
}

/// Anything that can produce a negative item for a user. The trainer pulls
/// all of an epoch's negatives before starting its timer.
pub trait NegativeSource {
    fn draw(&mut self, user: u32) -> Result<u32, HgnError>;
}

impl NegativeSource for UniformNegativeSampler {
    fn draw(&mut self, user: u32) -> Result<u32, HgnError> {
        UniformNegativeSampler::draw(self, user)
    }
}

/// One pass over all instances: shuffle, sample one negative per
/// (instance, target), then process batches and apply one Adam update per
/// batch with mean-scaled gradients.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch(
    params: &mut ModelParams,
    instances: &[TrainingInstance],
    sampler: &mut dyn NegativeSource,
    config: &TrainConfig,
    adam: &mut AdamState,
    shuffle_rng: &mut ChaCha8Rng,
    epoch: usize,
    workers: usize,
) -> Result<EpochStats, HgnError> {
    if instances.is_empty() {
        return Err(HgnError::Contract("no training instances".into()));
    }
    let arch = config.variant.architecture(config.pooling);

    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(shuffle_rng);

    // Negative sampling is untimed by design; the per-epoch wall time
    // reported below covers model work only.
    let mut negatives: Vec<Vec<u32>> = Vec::with_capacity(order.len());
    for &idx in &order {
        let inst = &instances[idx];
        let negs = inst
            .targets
            .iter()
            .map(|_| sampler.draw(inst.user))
            .collect::<Result<Vec<u32>, _>>()?;
        negatives.push(negs);
    }

    let started = Instant::now();
    let mut loss_total = 0.0;
    for (batch_ids, batch_negs) in order
        .chunks(config.batch_size)
        .zip(negatives.chunks(config.batch_size))
    {
        let (batch_loss, batch_grad) = batch_gradients(
            params,
            instances,
            batch_ids,
            batch_negs,
            config.lambda,
            &arch,
            workers,
        )?;
        adam.apply(
            params,
            &batch_grad,
            config.learning_rate,
            1.0 / batch_ids.len() as f64,
        );
        loss_total += batch_loss;
    }
    let train_secs = started.elapsed().as_secs_f64();

    Ok(EpochStats {
        epoch,
        mean_loss: loss_total / instances.len() as f64,
        train_secs,
        instances_per_sec: instances.len() as f64 / train_secs.max(1e-12),
    })
}

/// Sum losses and gradients over one batch. Work is split into fixed
/// chunks merged in order; `workers > 1` only parallelizes the chunk map.
fn batch_gradients(
    params: &ModelParams,
    instances: &[TrainingInstance],
    batch_ids: &[usize],
    batch_negs: &[Vec<u32>],
    lambda: f64,
    arch: &crate::model::Architecture,
    workers: usize,
) -> Result<(f64, GradientSet), HgnError> {
    let chunk_of = |(ids, negs): (&[usize], &[Vec<u32>])| -> Result<(f64, GradientSet), HgnError> {
        let mut grad = GradientSet::zeros(params.dim, params.seq_len);
        let mut loss = 0.0;
        for (&idx, negatives) in ids.iter().zip(negs) {
            loss +=
                accumulate_instance(params, &instances[idx], negatives, lambda, arch, &mut grad)?;
        }
        Ok((loss, grad))
    };

    let pieces: Vec<(&[usize], &[Vec<u32>])> = batch_ids
        .chunks(ACCUM_CHUNK)
        .zip(batch_negs.chunks(ACCUM_CHUNK))
        .collect();

    let partials: Vec<Result<(f64, GradientSet), HgnError>> = if workers > 1 {
        pieces.into_par_iter().map(chunk_of).collect()
    } else {
        pieces.into_iter().map(chunk_of).collect()
    };

    let mut total = GradientSet::zeros(params.dim, params.seq_len);
    let mut loss = 0.0;
    for partial in partials {
        let (l, g) = partial?;
        loss += l;
        total.merge(&g);
    }
    Ok((loss, total))
}

/// Mean per-instance loss on a frozen parameter snapshot, with the given
/// negatives. No updates are made; the result does not depend on the
/// instance order beyond floating-point round-off.
pub fn mean_loss(
    params: &ModelParams,
    instances: &[TrainingInstance],
    negatives: &[Vec<u32>],
    lambda: f64,
    arch: &crate::model::Architecture,
) -> Result<f64, HgnError> {
    let mut total = 0.0;
    for (inst, negs) in instances.iter().zip(negatives) {
        total += super::loss::instance_loss_value(params, inst, negs, lambda, arch)?;
    }
    Ok(total / instances.len() as f64)
}

/// Full training run on a split: derive instances, initialize parameters
/// from the run seed, and iterate epochs. `on_epoch` sees the stats and
/// the parameters after each epoch (for logging, checkpoints, or
/// validation metrics).
pub fn train_model(
    split: &SplitLog,
    config: &TrainConfig,
    workers: usize,
    mut on_epoch: impl FnMut(&EpochStats, &ModelParams) -> Result<(), HgnError>,
) -> Result<(ModelParams, Vec<EpochStats>), HgnError> {
    config.validate()?;
    let instances = instances_for_split(split, config.context_len, config.horizon);
    if instances.is_empty() {
        return Err(HgnError::Contract(
            "the split yields no training instances; is L larger than the train sequences?".into(),
        ));
    }

    let mut init_rng = stream_rng(config.seed, STREAM_INIT);
    let mut params = ModelParams::init(
        config.dim,
        split.num_users(),
        split.num_items(),
        config.context_len,
        &mut init_rng,
    );
    let mut sampler =
        UniformNegativeSampler::from_split(split, stream_rng(config.seed, STREAM_NEGATIVE));
    let mut shuffle_rng = stream_rng(config.seed, STREAM_SHUFFLE);
    let mut adam = AdamState::new(&params);

    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let stats = train_epoch(
            &mut params,
            &instances,
            &mut sampler,
            config,
            &mut adam,
            &mut shuffle_rng,
            epoch,
            workers,
        )?;
        on_epoch(&stats, &params)?;
        history.push(stats);
    }
    Ok((params, history))
}
