//! Grids, field containers, differential/integral operators and I/O.

pub mod banded;
pub mod fd;
mod field;
mod grid;
pub mod io;
pub mod spectral;
pub mod time;

pub use field::*;
pub use grid::{BLGrid, Grid, Grid2D, GridKind, Stretching};
