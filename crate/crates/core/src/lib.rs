//! Hybrid quantum–classical transfer learning.
//!
//! A small CNN is trained as a (deliberately weak) baseline, its conv stack
//! is frozen, and the dense head is replaced either by a re-initialised
//! classical head or by a dressed quantum network: pre-net → `(π/2)·tanh`
//! → angle-embedded variational circuit → Z expectations → post-net. Circuit
//! gradients come from an exact adjoint sweep; inference can also run on a
//! density-matrix backend with depolarizing noise.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod dqn;
pub mod error;
pub mod metrics;
pub mod models;
pub mod pipeline;
pub mod quantum;

pub use error::{Error, Result};
