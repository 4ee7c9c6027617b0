use thiserror::Error;

use crate::ode::OdeError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("exponent p = {p} is not below the critical exponent {critical}")]
    Supercritical { p: f64, critical: f64 },
    #[error("integer overflow computing {0}")]
    Overflow(&'static str),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("overflow guard exceeded at t = {t:e} after {zeros} zeros (|w| = {value:e})")]
    BlowUp { t: f64, zeros: usize, value: f64 },
    #[error("event localization failed near t = {0:e}")]
    EventLocalization(f64),
    #[error("zero {wanted} not reached before t = {t_reached:e} ({found} zeros found)")]
    ZeroNotFound {
        wanted: usize,
        found: usize,
        t_reached: f64,
    },
    #[error("residual {residual:e} above tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error("Nehari inner solve failed on ({a}, {b}): {reason}")]
    InnerSolve { a: f64, b: f64, reason: String },
    #[error("Nehari descent stalled: partition {partition:?}, defects {defects:?}")]
    DescentStalled {
        partition: Vec<f64>,
        defects: Vec<f64>,
    },
    #[error("eigenvalue bracket not found for index {index} (searched down to {lower:e})")]
    Bracket { index: usize, lower: f64 },
    #[error("eigenpair {index} failed certification: {reason}")]
    Certification { index: usize, reason: String },
    #[error("solver fault: {0}")]
    SolverFault(String),
    #[error("mass matrix not positive definite at node {node}; try t_start = {suggested_t_start:e}")]
    MassNotPositive { node: usize, suggested_t_start: f64 },
    #[error("singular spectrum is not certified exhaustive below zero")]
    NotExhaustive,
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
