//! Dense tensors, hand-written layer kernels with backward passes,
//! initializers, Adam, gradient clipping and a finite-difference checker.

mod checkpoint;
mod gradcheck;
mod init;
mod layers;
mod ops;
mod optim;
mod tensor;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, TensorEntry};
pub use gradcheck::{grad_check, GradCheckReport, HasParams};
pub use init::{init_orthogonal, init_truncated_normal};
pub use layers::{
    conv_encode, dropout, dropout_mask, gru_step, max_pool_time, ConvFilters, GruCell,
    GruStepCache, PooledFeatures,
};
pub use ops::{matmul, sigmoid, Transpose};
pub(crate) use layers::{conv_pool_backward, window as conv_window};
pub(crate) use ops::{add_bias, add_col_sums, softplus};
pub use optim::{apply_l2, clip_global_norm, global_norm, AdamState, LrSchedule};
pub use tensor::{Parameter, Tensor};
