//! Finite-volume simulation of a chemotaxis system with two switching cell
//! phenotypes, of its Keller-Segel limit as the switching rate grows, and
//! of the entropy and Liapunov certificates that go with them.

pub mod app;
pub mod error;
pub mod experiments;
pub mod functionals;
pub mod grid;
pub mod initial;
pub mod io;
pub mod operators;
pub mod params;
pub mod solver;
pub mod state;

pub use error::{Error, Result};
pub use grid::{integrate, make_grid, norm_linf, norm_lp, norm_w12, Field, Grid};
pub use params::Params;
pub use state::{DiagRecord, StateFull, StateLimit};
