//! Exact diagonalization, free-fermion correlators and entanglement measures
//! for locating quantum phase transitions in spin-1/2 rings.

pub mod eigensolver;
pub mod error;
pub mod freefermion;
pub mod hilbert;
pub mod measures;
pub mod rdm;

pub use error::{QptError, Result};
pub mod analysis;
pub mod par;
