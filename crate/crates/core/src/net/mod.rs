//! Recurrent emulators of time steppers and their training.

pub mod data;
pub mod dr_rnn;
pub mod optim;
pub mod rnn;
pub mod train;

pub use data::{mse_loss, Dataset, Sequence};
pub use dr_rnn::{initialize_model, DrRnn, DrRnnHyper, InitConfig, UInit};
pub use optim::{RmspropConfig, RmspropState};
pub use rnn::StandardRnn;
pub use train::{
    batch_loss_and_gradient, evaluate_mse, fit, train_drrnn, train_standard_rnn, LossRecord, Recurrent,
    TrainingConfig,
};
