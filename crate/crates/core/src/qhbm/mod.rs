//! Quantum Hamiltonian-based models: a Boltzmann machine diagonal in the
//! computational basis, rotated by a parameterized circuit.

pub mod circuit;
pub mod ebm;
pub mod model;

pub use circuit::{circuit_unitary, circuit_unitary_deriv, circuit_unitary_deriv2, CircuitSpec, Gate};
pub use ebm::{ebm_energy, latent_hamiltonian, log_partition, Boltzmann, EbmSpec};
pub use model::{FrozenModel, ModelEval, Order, QhbmModel, StateFamily};
