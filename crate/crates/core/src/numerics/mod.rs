//! Tensor kernels, layers, losses and optimizers used by the saliency model.

mod activation;
mod conv;
mod dense;
mod dropout;
mod gradcheck;
mod init;
mod loss;
mod optim;
mod pool;
mod real;
mod tensor;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward, sigmoid_scalar};
pub use conv::{ConvGrads, ConvLayer};
pub use dense::{DenseGrads, DenseLayer};
pub use dropout::{check_rate, dropout, DropoutMask};
pub use gradcheck::{grad_check, relative_error, GradCheck, REL_FLOOR};
pub use init::he_uniform;
pub use loss::{bce_loss, binary_entropy, euclidean_loss, mse_loss, BCE_CLAMP};
pub use optim::{AdamConfig, AdamState, Optimizer, OptimizerKind, Param, Sgd};
pub use pool::{maxpool, maxpool_backward, upsample, upsample_backward, Pooled, POOL};
pub use real::{gemm, gemm_into, MatRef, Real};
pub use tensor::Tensor;
