//! A small trainable network stack with hand-written backward passes: the
//! Denoisy U-Net, the AE-GAN upsampler, their losses, and cascaded
//! end-to-end training.
//!
//! Networks see SH coefficients as `[batch, channels, bins]` tensors whose
//! channel index is `harmonic · 2 + ear`, so convolutions slide along
//! frequency.

mod aegan;
mod checkpoint;
mod dunet;
pub mod gradcheck;
mod layers;
pub mod loss;
mod models;
mod optim;
mod tensor;
mod train;

pub use aegan::{AeGanConfig, Discriminator, Generator, ResBlock};
pub use checkpoint::{write_history_csv, Checkpointable};
pub use dunet::{ConvBlock, DUNet, DUNetConfig};
pub use layers::{
    avg_pool2, avg_pool2_backward, concat_channels, split_channels, upsample2, upsample2_backward,
    BatchNorm1d, ChannelAttention, Conv1d, Dense, Layer, MinibatchDiscrimination, Mode, Param, Relu,
};
pub use models::{
    coeffs_to_features, features_to_coeffs, stack_batch, unstack_batch, Cascade, CoeffSample,
    DenoiserModel, JointForward, JointLosses, Standardizer, TrainingData, UpsamplerModel,
};
pub use optim::{Adam, AdamConfig};
pub use tensor::Tensor;
pub use train::{
    discriminator_accuracy, fine_tune_end_to_end, train_aegan, train_dunet, train_end_to_end,
    LossRecord, TrainOptions, TrainState,
};

/// A network whose parameters and running statistics can be enumerated in a
/// fixed order.
pub trait Network {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;
    fn buffers(&self) -> Vec<&Vec<f64>>;
    fn buffers_mut(&mut self) -> Vec<&mut Vec<f64>>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// All parameter values concatenated.
    fn flat_params(&self) -> Vec<f64> {
        self.params().iter().flat_map(|p| p.value.iter().copied()).collect()
    }

    /// All accumulated gradients concatenated.
    fn flat_grads(&self) -> Vec<f64> {
        self.params().iter().flat_map(|p| p.grad.iter().copied()).collect()
    }
}
