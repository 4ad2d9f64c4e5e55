//! Numerical laboratory for single-photon homodyne Bell experiments on
//! truncated bosonic Fock spaces.
//!
//! The library models the canonical interferometric setup in which a single
//! photon (optionally superposed with vacuum) is split on a balanced
//! beamsplitter and each output is mixed with a local auxiliary coherent beam
//! on a tunable beamsplitter before photon-number detection. On top of that
//! it provides:
//!
//! * intensity and intensity-*rate* observables, their correlation functions
//!   and closed-form amplitudes ([`observables`]),
//! * CHSH- and Clauser-Horne-type inequalities for rates, closed-form
//!   correlators, derivative-free violation search and amplitude-landscape
//!   sweeps ([`inequalities`]),
//! * CHSH-based mode-entanglement witnesses for intensities and rates,
//!   together with random separable-state validation ([`witness`]),
//! * effective single-mode POVM operators equivalent to the full homodyne
//!   measurement, with dual-construction cross checks ([`povm`]).
//!
//! Everything is built on a small dense complex linear-algebra core over
//! multimode truncated photon-number bases ([`fock`], [`optics`]). All values
//! are immutable after construction and every operation is a pure function,
//! so grids and multi-start searches can be mapped over in parallel (enabled
//! by the default `parallel` feature).

pub mod error;
pub mod fock;
pub mod inequalities;
pub mod linalg;
pub mod observables;
pub mod optics;
pub mod optim;
pub mod povm;
pub mod witness;

pub use error::{Error, Result};
pub use fock::{C64, FockOperator, FockVector, ModeLayout};
