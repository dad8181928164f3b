//! Collective pure dephasing of coupled-qubit chains.
//!
//! Qubits in an open chain with nearest-neighbour exchange couple
//! longitudinally (through `σ_z`) to either one shared bath or to private
//! baths. In the energy eigenbasis of the chain this dephasing turns into
//! dissipation, and a shared bath makes the dephasing channels of different
//! qubits interfere. The crate provides:
//!
//! * [`spectral`]: Ohmic spectral densities and the common-bath cross-spectrum.
//! * [`system`]: chain Hamiltonian, eigensystems, `σ_z` in the eigenbasis.
//! * [`twoqubit`]: the two-qubit non-secular master equation and closed-form rates.
//! * [`lindblad`]: the secular Lindblad generator for any chain length.
//! * [`generator`]: the [`MasterEquation`] trait and a name-keyed registry.
//! * [`dynamics`]: density matrices, fixed-step and exact propagators.
//! * [`rates`]: golden-rule rates, the three-level cascade, rate fits, N scans.
//! * [`cli`]: the experiment runner behind the `dephasing` binary.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod generator;
pub mod lindblad;
pub mod rates;
pub mod registry;
pub mod spectral;
pub mod system;
pub mod twoqubit;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use error::{Error, Result};
pub use generator::MasterEquation;
pub use system::{BathTopology, ChainSpec, Subspace};

pub type CMatrix = DMatrix<Complex64>;
pub type RMatrix = DMatrix<f64>;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entry modulus of a complex matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc: f64, z| acc.max(z.norm()))
}
