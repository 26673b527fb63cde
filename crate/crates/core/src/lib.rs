//! Coulomb control of convex pentagonal and quadrilateral linkages.

pub mod error;
pub mod geometry;
pub mod moduli;
pub mod potential;
pub mod stabilizer;
pub mod sampling;
pub mod control;
pub mod verify;
pub mod service;
pub mod cli;

pub use error::{Error, Result};
