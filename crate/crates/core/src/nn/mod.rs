//! Differentiable layers, sequential networks and optimization.

pub mod network;
pub mod ops;
pub mod optim;

pub use network::{ForwardPass, Gradients, Layer, LayerCache, LayerKind, LayerSpec, Network, Params};
pub use optim::{glorot_uniform, AdamConfig, AdamState, LrSchedule};
