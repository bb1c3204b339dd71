//! Minimal reverse-mode automatic differentiation over dense real tensors.
//!
//! The op set is exactly what the baseline CNN and the dressed quantum head
//! need: valid-padding conv, max-pool, dense, elementwise activations,
//! inverted dropout, BCE-with-logits, and a row-wise map with externally
//! supplied Jacobians (used to splice the quantum circuit into the graph).

pub mod init;
mod kernels;
pub mod params;
pub mod tape;
pub mod tensor;

pub use params::{ParamId, Parameter, ParameterSet};
pub use tape::{sigmoid, ActivationKind, Tape, Var};
pub use tensor::{to_f32_grid, Tensor};
