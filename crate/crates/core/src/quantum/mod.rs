//! Exact simulation of the variational circuits: statevector forward pass,
//! Z expectations, adjoint gradients with re-evaluation oracles, and a
//! density-matrix backend with per-gate depolarizing noise.

pub mod backend;
pub mod circuit;
pub mod density;
pub mod gradients;
pub mod statevector;

pub use backend::Backend;
pub use circuit::{build_ansatz, Circuit, Gate, GateKind, ParamRole};
pub use density::{noisy_expectations, simulate_noisy, simulate_noisy_observed, DensityMatrix, NoiseModel};
pub use gradients::{
    adjoint_gradients, adjoint_jacobian, finite_difference_gradients, oracle_gradients, shift_rule_gradients, Jacobian,
    Observable,
};
pub use statevector::{expectations, StateVector};
