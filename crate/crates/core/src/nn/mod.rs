//! A small from-scratch network toolkit: dense tanh stacks with manual
//! reverse-mode gradients, losses, a categorical policy head, Adam, and a
//! finite-difference gradient checker. All arithmetic is `f64`.

mod adam;
mod categorical;
mod gradcheck;
mod loss;
mod mlp;
mod tensor;

pub use adam::{adam_step, clip_grad_norm, AdamConfig, AdamState};
pub use categorical::{categorical, softmax, Categorical};
pub use gradcheck::{corrupt_largest, gradient_check, gradient_check_with, GradCheckReport, DEFAULT_FD_STEP};
pub use loss::{bce_logit_grad, bce_loss, BCE_CLAMP};
pub use mlp::{init_mlp, sigmoid, Activation, ForwardRecord, Gradients, Mlp, MlpSpec};
pub use tensor::{Matrix, ParamTensor};
