//! Minimal deterministic CNN/MLP engine in double precision.
//!
//! Examples are processed one at a time; mini-batches accumulate gradients
//! across examples before each Adam step.

mod archive;
mod gradcheck;
mod layers;
mod model;
mod optim;
mod tensor;
mod train;

pub use archive::{TensorArchive, FEATURE_MAGIC, MODEL_MAGIC};
pub use gradcheck::{
    grad_check, grad_check_with, toy_case, GradCheckReport, ParameterCheck, ToyCase, DEFAULT_SAMPLES_PER_PARAMETER,
};
pub use layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, dropout, maxpool2x2, maxpool2x2_backward, relu,
    relu_backward, softmax, softmax_cross_entropy,
};
pub use model::{
    cnn_flat_dim, Layer, ModelSpec, Network, Trace, CONV1_FILTERS, CONV2_FILTERS, DROPOUT_RATE, HIDDEN_UNITS,
    KERNEL_SIZE,
};
pub use optim::Adam;
pub use tensor::Tensor;
pub use train::{
    argmax, train, EpochStats, TrainConfig, TrainHistory, DIVERGENCE_RISE_FRACTION, DIVERGENCE_WARMUP_EPOCHS,
};
