//! Numerical model of a passive on-chip microwave circulator built from a
//! loop of three Josephson junctions whose waveguides are joined by shunt
//! capacitors.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the physics:
//!
//! * [`device`]: loop Hamiltonian in the two-charge basis, its eigensystem
//!   and the coupling charge operators.
//! * [`network`]: the 6×6 capacitance matrix and the unitary scattering
//!   block of the capacitively coupled waveguides.
//! * [`slh`]: SLH triples with the series, concatenation and feedback rules,
//!   and the composed drive/waveguide/loop system.
//! * [`dynamics`]: rotating-frame Lindblad master equation, steady state,
//!   the input-output scattering matrix and the adiabatic fast path.
//! * [`analysis`]: circulation fidelities, dB metrics, bias optimisation,
//!   the junction-spread study and saturation power.
//!
//! Frequencies and energies are ordinary frequencies in GHz throughout. The
//! factor 2π is applied in exactly one place, the Liouvillian builder, whose
//! time unit is therefore the nanosecond.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod device;
pub mod dynamics;
mod error;
pub mod linalg;
pub mod network;
pub mod slh;

pub use error::{Error, Result};

/// Planck constant in J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
