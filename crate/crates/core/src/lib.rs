//! Coupled-mode model of laser-written waveguide chips that convert a Gaussian
//! input into vortex and vector beams.

pub mod chip;
pub mod cli;
pub mod config;
pub mod coupling;
pub mod device;
pub mod error;
pub mod evolve;
pub mod field;
pub mod grid;
pub mod io;
pub mod modes;
pub mod numeric;
pub mod phase;
pub mod sweep;
pub mod waveguide;

pub use error::{Error, Result};
pub use grid::GridSpec;
