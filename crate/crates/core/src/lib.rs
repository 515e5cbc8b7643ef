//! Readout-error mitigation by randomized bit flips.
//!
//! Measurement noise on `n` qubits is a left-stochastic matrix `A` acting on
//! outcome distributions. Flipping a random subset of qubits before readout
//! and undoing the flip classically averages `A` into a channel that is
//! diagonal in the Walsh basis, so each Pauli-Z expectation is only scaled by
//! an eigenvalue `lambda_w` that a calibration run can measure directly.
//!
//! Modules:
//! - [`pauli`]: bit strings, Z-observable masks and the Walsh-Hadamard transform
//! - [`noise`]: readout channels, sampling, and exact spectra
//! - [`state`]: ideal outcome distributions and shot simulation
//! - [`mitigation`]: data acquisition, the ratio estimator, calibration storage
//! - [`baselines`]: matrix inversion and per-qubit flip-model correction
//! - [`bounds`]: shot and circuit-count planning
//! - [`experiment`]: seeded campaigns over angle grids with CSV output

pub mod baselines;
pub mod bounds;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod mitigation;
pub mod noise;
pub mod pauli;
pub mod state;

pub use error::{Error, Result};
