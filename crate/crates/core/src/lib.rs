//! Capacitary potentials of starshaped rings in rotationally symmetric
//! Riemannian manifolds, solved in a conformally flat chart, together with
//! numerical checks that their superlevel sets are starshaped.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod domains;
pub mod error;
pub mod geometry;
pub mod numerics;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
