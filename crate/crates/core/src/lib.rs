pub mod attribution;
pub mod cli;
pub mod data;
pub mod error;
pub mod model;
pub mod nn;
pub mod roar;
pub mod seed;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
