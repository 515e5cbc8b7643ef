//! Randomized bit-flip data acquisition and the ratio estimator.
//!
//! Every shot runs the circuit with a random X-mask `q` applied just before
//! measurement. Folding each outcome as `z = x XOR q` turns the noisy channel
//! into one that is diagonal in the Walsh basis, so a single calibration
//! data set `D0` (identity circuit) gives the per-observable attenuation
//! `lambda_w` and `f(D1, w) / f(D0, w)` estimates `<Z^w>`.

mod dataset;
mod estimate;
mod histogram;
pub mod persist;

pub use dataset::{acquire_data, acquire_instances, counter_clock, wall_clock, DataSet, IndexSet, Record, ShotBudget};
pub use estimate::{
    estimator_f, estimator_f_all, prep_correction, prep_factors, protocol1_estimate, EstimateOptions, MitigationEstimate,
    DEFAULT_GUARD,
};
pub use histogram::Histogram;

/// Returns `d` without the records older than `cutoff`.
pub fn window_retire(mut d: DataSet, cutoff: u64) -> DataSet {
    d.retire_before(cutoff);
    d
}
