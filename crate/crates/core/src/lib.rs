//! Grid solver for deterministic finite-horizon zero-sum differential games
//! with continuous and impulse controls.

pub mod error;
pub mod game_model;
pub mod grid_interp;

pub use error::{GameError, Result};
pub mod operators;
pub mod solver;
pub mod nash;
pub mod portfolio;
pub mod cli_io;
