//! Exact simulation of higher-order topological charge pumping of hard-core
//! bosons on a square superlattice.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod hamiltonian;
pub mod lattice;
pub mod output;
pub mod pump;
pub mod solver;
pub mod topology;

pub use error::{Error, Result};
