//! Numerical laboratory for blow-up of
//! `u_tt - Δu + mu/(1+t) u_t + nu^2/(1+t)^2 u = |u_t|^p` with small data.
//!
//! The crate evaluates the explicit test functions `psi = (1+t)^{d/2} e^{-eta t} phi^eta(x)`
//! and their coefficient functions ([`special`]), integrates the equation for
//! radial data ([`wave`]), tracks the weighted functionals along a run
//! ([`functionals`]), checks every identity and inequality of the blow-up
//! argument ([`verifier`]) and measures lifespans over data-size sweeps
//! ([`lifespan`]).

pub mod config;
pub mod error;
pub mod functionals;
pub mod lifespan;
pub mod params;
pub mod quadrature;
pub mod report;
pub mod special;
pub mod verifier;
pub mod wave;

pub use config::RunConfig;
pub use error::{Error, Result};

pub use functionals::{data_constants, DataConstants, FunctionalTrace, TraceRecorder};
pub use lifespan::{SweepEntry, SweepResult};
pub use params::{ModelParams, Regime, TestFunctionParams, Thresholds};
pub use verifier::{CheckResult, Ledger, Status, Trend};

pub use wave::{InitialData, Outcome, RadialField, RunReport, SolverConfig};
