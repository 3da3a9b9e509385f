//! Isothermal multicomponent gas mixtures with Stefan-Maxwell collisions:
//! the conservation-dissipation structure of the governing equations, the
//! symmetric positive-definite diffusion matrix obtained by truncating the
//! flux evolution at its leading balance, and twin 1-D periodic solvers
//! (stiff relaxation system vs. its second-order limit) for measuring the
//! quadratic-in-epsilon gap between them.

pub mod cli;
pub mod closure;
pub mod config;
pub mod entropy;
pub mod error;
pub mod grid;
pub mod harness;
pub mod limit;
pub mod mixture;
pub mod numdiff;
pub mod relaxation;

pub use error::{MixtureError, Result};
pub use mixture::{MixtureSpec, PressureLaw};
