//! Numerical laboratory for open-quantum-system dynamics.
//!
//! The crate covers five physical settings sharing one toolbox:
//!
//! - `morse`: bound states, coherent states and closed-system wave-packet
//!   dynamics of the Morse oscillator (collapse, revivals, cat formation).
//! - `lindblad`: master-equation generators (anharmonic multilevel system
//!   coupled to a thermal bath, its secular and Pauli reductions, collective
//!   Dicke damping, harmonic presets) driven by the adaptive integrator in
//!   `integrate`.
//! - `spin`: collective two-level-atom algebra, atomic coherent and cat
//!   states, entanglement-rate formulas and classical reference mixtures.
//! - `phase_space`: planar W(x,p) and spherical W(θ,φ) Wigner functions,
//!   the nonclassicality measure and phase-space feature extraction.
//! - `metrics`: entropy/purity diagnostics, decoherence-time knee detection,
//!   Schmidt decomposition and the generic entanglement-rate formula.
//! - `cavity`: exact block dynamics of N two-level atoms in a detuned cavity
//!   and the phase-kick protocol preparing subradiant states.
//!
//! The `cli` module ties everything into config-driven, reproducible runs.

pub mod cavity;
pub mod cli;
pub mod error;
pub mod integrate;
pub mod lindblad;
pub mod metrics;
pub mod morse;
pub mod phase_space;
pub mod spin;
pub mod types;

pub use error::{Error, Result};
pub use types::{hs_distance, DensityOperator, RhoTolerances, StateVector};

pub type C64 = num_complex::Complex64;

#[cfg(test)]
pub(crate) mod test_support;
