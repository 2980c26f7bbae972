//! Model parameters and the gated forward pass.

mod forward;
mod params;
mod variant;

pub use forward::{
    aggregate, embed_sequence, feature_gate, forward, forward_context, instance_gate,
    item_item_scores, predict_all, ForwardCache,
};
pub use params::{
    load_checkpoint, parameter_count, save_checkpoint, ModelParams, ParamCounts,
};
pub use variant::{Architecture, Pooling, Variant};
