//! Compact convolutional tagger over log-mel spectrograms.
//!
//! Each block is a zero-padded stride-1 convolution, batchnorm, ELU and a
//! ceil-mode max-pool; a global max-pool over the remaining positions feeds
//! one dense layer with sigmoid outputs. Backpropagation is analytic and
//! covers batchnorm through its batch statistics. Tensors are flat,
//! `n × c × h × w` row-major.

mod arch;
mod checkpoint;
mod network;
mod params;
mod scalar;
mod train;

pub use arch::{ArchSpec, BlockSpec};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, standard_metadata, write_checkpoint,
    Checkpoint,
};
pub use network::{
    backward, bce_with_logits, forward, update_running_stats, ForwardPass, Mode, BN_EPSILON,
    BN_MOMENTUM,
};
pub use params::{Adam, BlockParams, Gradients, ModelParams};
pub use scalar::Scalar;
pub use train::{
    predict, train, write_training_log, Dataset, EpochLog, Precision, StopReason, TrainConfig,
    TrainOutcome,
};

use crate::lvs::LabelVectorMatrix;
use crate::Result;

/// The dense weight matrix (`embedding_dim × n_outputs`) with tag names
/// attached to its columns; the bias is not part of it.
pub fn extract_label_vectors<T: Scalar>(
    params: &ModelParams<T>,
    tags: &[String],
    source: &str,
) -> Result<LabelVectorMatrix> {
    LabelVectorMatrix::new(
        params.arch.embedding_dim(),
        tags.to_vec(),
        params.dense_weight.iter().map(|v| v.as_f64()).collect(),
        source,
    )
}
