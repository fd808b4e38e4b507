pub mod cli;
pub mod data_ingest;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod model;
pub mod news_agent;
pub mod nn;
pub mod reduce;
pub mod synthetic;

pub use error::{Error, Result};
