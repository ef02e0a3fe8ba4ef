pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod features;
pub mod gradcheck;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod spectral;
pub mod tensor;

pub use error::{Error, Result};
