//! Differentiable kernels with hand-written reverse passes.

mod adam;
mod attention;
mod gradcheck;
mod head;
mod init;
mod loss;
mod lstm;

pub use adam::{clip_global_norm, AdamConfig, AdamState};
pub use attention::{
    attention_backward, attention_forward, softmax_rows, AttentionCache, AttentionParams,
};
pub use gradcheck::{grad_check, relative_error, GradCheckOptions, GradCheckReport};
pub use head::{head_backward, head_forward, HeadCache, HeadParams, Mode};
pub use init::uniform_fan_in;
pub use loss::{bce_loss, BceOutput, BCE_CLAMP};
pub use lstm::{lstm_backward, lstm_forward, LstmCache, LstmParams};
