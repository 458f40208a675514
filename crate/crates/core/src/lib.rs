//! Finite-volume simulator for biofilm growth in a viscous flow.
//!
//! Three physics are advanced together on a staggered box grid:
//!
//! * [`biomass`]: degenerate/singular diffusion of the biomass density `u`
//!   with transport by the mollified, cut-off density;
//! * [`nutrient`]: advection-diffusion of the nutrient `w` with
//!   biomass-dependent diffusivity and Monod consumption;
//! * [`flow`]: incompressible Navier-Stokes whose velocity is bounded
//!   pointwise by an obstacle depending on the averaged biomass density.
//!
//! [`coupling`] iterates the three solves to a fixed point in every time step.

pub mod biomass;
pub mod constitutive;
pub mod coupling;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod grid;
pub mod init;
pub mod io;
pub mod linalg;
pub mod mollify;
pub mod nutrient;
pub mod transport;
mod par;

pub use error::{Error, Result};
pub use par::with_threads;
