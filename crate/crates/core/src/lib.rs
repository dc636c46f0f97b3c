//! Numerical lab for the fractional Schrodinger equation with exterior
//! Dirichlet data: operator assembly, Dirichlet problem, DN maps, Runge
//! approximation, potential reconstruction, extension and diffusion.

pub mod calderon;
pub mod config;
pub mod diffusion;
pub mod dirichlet;
pub mod dnmap;
pub mod error;
pub mod extension;
pub mod fracop;
pub mod grid;
pub mod pipeline;
pub mod runge;
pub mod special;

pub use error::{Error, Result};
