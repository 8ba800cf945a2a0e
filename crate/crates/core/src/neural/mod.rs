//! Small reverse-mode autodiff engine, the layer set for a toy U-Net and the
//! stage classifier, Adam training and finite-difference gradient checks.

mod classify;
pub mod format;
mod gradcheck;
mod model;
mod optim;
mod tape;
mod tensor;

pub use classify::{argmax_stage, crop_tensor, predict_stage};
pub use format::{load_model, save_model};
pub use gradcheck::{check_function, gradient_check, relative_error, CheckTarget, GradCheckEntry, GradCheckReport, FD_STEP};
pub use model::{
    build_classifier, build_toy_unet, ClassifierConfig, Layer, Mode, ModelBuilder, ModelGraph, UNetConfig,
    KERNEL_SIZES,
};
pub use optim::{
    bce_loss, cce_loss, loss_curve_csv, total_loss, train, write_loss_curve, Adam, Dataset, Targets, TrainConfig,
};
pub use tape::{Gradients, Tape, Var, LOG_EPS};
pub use tensor::Tensor;
