//! BPR training: pairwise loss, analytic gradients, Adam, and the epoch
//! loop.

mod adam;
mod epoch;
mod gradcheck;
mod grads;
mod loss;

pub use adam::{AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS};
pub use epoch::{
    mean_loss, train_epoch, train_model, EpochStats, NegativeSource, TrainConfig,
};
pub use gradcheck::{
    check_gradients, relative_error, GradCheckReport, GradCheckSettings, TensorCheck, TensorKind,
};
pub use grads::{GradientSet, SparseColGrad};
pub use loss::{accumulate_instance, bpr_pair_loss, instance_loss, instance_loss_value};
