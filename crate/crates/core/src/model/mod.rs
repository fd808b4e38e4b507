//! Dual-stream spike classifier: windowing, forward/backward passes, training,
//! and checkpoints.

mod checkpoint;
mod config;
mod network;
mod train;
mod window;

pub use checkpoint::{from_json, load_checkpoint, save_checkpoint, to_json, CHECKPOINT_VERSION};
pub use config::{ModelConfig, TrainConfig, Variant};
pub use network::{
    backward, forward, forward_prepared, predict, ForwardCache, ModelParams, Network,
    PreparedSample,
};
pub use train::{
    evaluate_loss, fit_window_pca, loss_and_gradient, train, validation_count,
    window_embedding_rows, EpochRecord, TrainOutcome,
};
pub use window::{make_windows, WindowedSample, DEFAULT_WINDOW};
