//! Error types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

use crate::params::Electrode;

/// Failures while loading or validating a parameter set.
#[derive(Debug, Error)]
pub enum ParamError {
    #[error("cannot read parameter file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed parameter file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid parameter `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("concentration {value} mol/m^3 outside [0, {c_max}] for the {electrode} electrode")]
    ConcentrationRange {
        electrode: Electrode,
        value: f64,
        c_max: f64,
    },
}

impl ParamError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ParamError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Failures of the single-particle simulator.
#[derive(Debug, Error)]
pub enum SpmError {
    #[error("time step {dt} s exceeds the explicit stability limit {limit} s of the {electrode} particle")]
    Stability {
        electrode: Electrode,
        dt: f64,
        limit: f64,
    },
    #[error("concentration {value} mol/m^3 left [0, {c_max}] in shell {shell} of the {electrode} particle")]
    Concentration {
        electrode: Electrode,
        shell: usize,
        value: f64,
        c_max: f64,
    },
    #[error("surface concentration {value} mol/m^3 of the {electrode} electrode makes the exchange current vanish")]
    Kinetics { electrode: Electrode, value: f64 },
    #[error("invalid protocol: {0}")]
    Protocol(String),
}

/// Failures while fitting or evaluating piecewise-linear approximations.
#[derive(Debug, Error)]
pub enum PwlError {
    #[error("piecewise-linear function needs at least one segment")]
    NoSegments,
    #[error("breakpoints must be finite and strictly ascending")]
    Breakpoints,
    #[error("breakpoint and value arrays differ in length ({breakpoints} vs {values})")]
    Length { breakpoints: usize, values: usize },
    #[error("domain [{lo}, {hi}] is not inside the tabulated range [{table_lo}, {table_hi}]")]
    Domain {
        lo: f64,
        hi: f64,
        table_lo: f64,
        table_hi: f64,
    },
    #[error("argument {x} outside the domain [{lo}, {hi}]")]
    OutOfDomain { x: f64, lo: f64, hi: f64 },
}

/// Failures while constructing an optimization model.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("variable `{name}` has invalid bounds [{lower}, {upper}]")]
    Bounds { name: String, lower: f64, upper: f64 },
    #[error("constraint `{row}` references undeclared variable index {index}")]
    UnknownVariable { row: String, index: usize },
    #[error("constraint `{row}` has a non-finite coefficient or right-hand side")]
    NonFinite { row: String },
    #[error("{what}: {reason}")]
    Input { what: String, reason: String },
    #[error("reachable range [{lo}, {hi}] of `{variable}` exceeds the linearization domain [{domain_lo}, {domain_hi}]")]
    PwlDomain {
        variable: String,
        lo: f64,
        hi: f64,
        domain_lo: f64,
        domain_hi: f64,
    },
    #[error(transparent)]
    Pwl(#[from] PwlError),
}

impl ModelError {
    pub(crate) fn input(what: impl Into<String>, reason: impl Into<String>) -> Self {
        ModelError::Input {
            what: what.into(),
            reason: reason.into(),
        }
    }
}

/// Failures of a solver backend.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("solver backend failed: {0}")]
    Backend(String),
    #[error("cannot launch `{program}`: {source}")]
    Launch {
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver exited with {status}: {stderr}")]
    Exit { status: String, stderr: String },
    #[error("cannot parse solution file line {line}: {reason}")]
    SolutionParse { line: usize, reason: String },
    #[error("solution names variable `{0}` that the model does not declare")]
    UnknownName(String),
    #[error("model is infeasible")]
    Infeasible,
    #[error("solver stopped without a feasible solution ({0})")]
    NoSolution(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Failures while reading an MPS file.
#[derive(Debug, Error)]
pub enum MpsError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
}

/// Failures of calibration routines.
#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("C-rate {0} outside (0, 1]")]
    CRate(f64),
    #[error("simulation failed during calibration: {0}")]
    Simulation(#[from] SpmError),
    #[error("concentration {value} mol/m^3 outside the window [{lo}, {hi}]")]
    Window { value: f64, lo: f64, hi: f64 },
    #[error("energy {value} MWh outside [0, {q_max}]")]
    Energy { value: f64, q_max: f64 },
    #[error("no energy was charged; efficiency undefined")]
    NoCharge,
}
