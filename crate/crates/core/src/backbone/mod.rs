//! The prediction model: edge-weight-aware message passing, sum pooling with
//! a residual readout MLP, and a linear classifier head.

mod model;
mod train;

pub use model::{
    forward, message, predict, predict_input, propagate, readout, BackboneParams, BoundBackbone,
    GraphInput, ModelShape,
};
pub use train::{
    argmax, evaluate, loss_and_gradients, prepare_inputs, train_backbone, train_on_inputs,
    EpochRecord, Evaluation, TrainConfig, TrainLog,
};
