//! Likelihood-gradient learning through the mean-field objectives, and the bars dataset.
//!
//! Records in a [`TrainHistory`] describe the parameters at the start of their epoch, so
//! epoch 0 is the initial network and epoch `n` the network after `n` updates.

mod dataset;
mod train;

pub use dataset::{bars_dataset, format_dataset, parse_dataset, read_dataset, write_dataset, Pattern};
pub use train::{
    default_learning_rate, loglik_gradient, train, true_loglik, Batch, HistoryRecord,
    ParamGradient, TrainConfig, TrainHistory, NOISY_OR_MIN_BIAS,
};
