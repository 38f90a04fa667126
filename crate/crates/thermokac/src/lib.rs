//! Event-driven N-particle Monte Carlo for a pair-collision gas driven by a
//! uniform force field under a Gaussian (energy-conserving) thermostat,
//! together with its quenched mean-field approximation, a pathwise coupling
//! driver, and diagnostics that measure how fast marginal factorization and
//! pathwise closeness improve with N.
//!
//! The design has no time grid: collisions happen at exponential clock
//! times, and between collisions every coordinate moves by a closed-form
//! affine map, so all error is statistical in N and the replica count.
//!
//! With the default `parallel` feature, replica ensembles run on a rayon
//! pool; results are byte-identical to the sequential fallback because each
//! replica owns seeded random streams and aggregation runs in replica
//! order.

pub mod acceptance;
pub mod collision;
pub mod config;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod flow;
pub mod io;
pub mod oracle;
pub mod rng;
pub mod state;

pub use config::{InitialDistribution, QuenchedInit, SimConfig};
pub use engine::{
    run_ensemble, run_ensemble_sequential, simulate, simulate_coupled, CoupledSample,
    EnsembleData, EnsembleMode, EnsembleOptions, EnsembleResult, Process, TrajectorySample,
};
pub use error::{Result, SimError};
pub use flow::{solve_current, thermostatted_flow, CurrentKind, CurrentSolution};
pub use rng::{RngStreamKey, StreamTag};
pub use state::{sample_initial_state, MasterVector};
