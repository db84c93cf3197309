//! Rovibrational polaritons of two diatomic molecules in a lossless
//! single-mode infrared cavity.

pub mod angular;
pub mod dynamics;
pub mod eigensolver;
pub mod error;
pub mod hamiltonian;
pub mod moldata;
pub mod polaritons;
pub mod quadrature;
pub mod sparse;
pub mod spectroscopy;
pub mod topology;
pub mod vpes;

pub use error::{Error, Result};
