//! Lithium-ion battery models for day-ahead energy arbitrage.
//!
//! A single-particle cell model serves as the reference simulator. Its
//! two-parameter reduction and linearizations become constraints of a
//! physics-based MILP, solved next to a conventional power-energy MILP. The
//! simulator then replays both schedules to measure how feasible they are.

pub mod calibrate;
pub mod error;
pub mod linearize;
pub mod milp;
pub mod params;
pub mod reduced;
pub mod spm;

pub use error::{CalibrationError, ModelError, MpsError, ParamError, PwlError, SolveError, SpmError};
pub use params::{load_params, CellParams, Electrode};
