//! Simulation and analysis of an epidemic model in which every infection
//! draws a random infectivity curve λ(·) and a random susceptibility curve
//! γ(·), so immunity wanes gradually and individuals can be reinfected.

pub mod abm;
pub mod equilibrium;
pub mod error;
pub mod grid;
pub mod harness;
pub mod kernel;
pub mod lln;
pub mod pde;
mod quad;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use grid::TrajectoryGrid;
pub use kernel::{AgeLaw, Duration, Family, InitialLaw, KernelLaw, KernelPath};
