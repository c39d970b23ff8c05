//! Time-space grids, multilinear interpolation and the value array.

mod field;
mod grid;

pub use field::{fmt_f64, NodePolicy, Regime, ValueField};
pub use grid::{build_grid, interpolate, AxisSpec, BoundaryPolicy, Stencil, TimeSpaceGrid};
