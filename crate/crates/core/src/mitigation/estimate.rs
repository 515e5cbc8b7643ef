use serde::{Deserialize, Serialize};

use super::dataset::DataSet;
use crate::bounds::{hoeffding_alpha, lemma1_ratio_bound};
use crate::error::{Error, Result};
use crate::pauli::PauliZIndex;

/// Default lower limit on `|lambda_hat|` before a ratio is refused.
pub const DEFAULT_GUARD: f64 = 0.05;

/// `f(D, s) = |D|^{-1} sum_{(q,x)} <<s,q>> (-1)^{<s,x>}`, evaluated through the
/// folded histogram as `|D|^{-1} sum_z count[z] (-1)^{<s,z>}`.
pub fn estimator_f(d: &DataSet, s: PauliZIndex) -> Result<f64> {
    check(d, s)?;
    Ok(d.folded().signed_sum(s.mask()) as f64 / d.len() as f64)
}

/// `f(D, s)` for every `s` at once: one Walsh-Hadamard transform of the folded
/// counts. Each entry is bit-identical to [`estimator_f`].
pub fn estimator_f_all(d: &DataSet) -> Result<Vec<f64>> {
    if d.is_empty() {
        return Err(Error::EmptyDataSet);
    }
    let total = d.len() as f64;
    Ok(d.folded().signed_sums_all()?.into_iter().map(|v| v as f64 / total).collect())
}

fn check(d: &DataSet, s: PauliZIndex) -> Result<()> {
    if d.is_empty() {
        return Err(Error::EmptyDataSet);
    }
    if s.n() != d.n() {
        return Err(Error::DimensionMismatch {
            expected: d.n(),
            got: s.n(),
        });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    /// Refuse to divide when `|lambda_hat|` falls below this.
    pub guard: f64,
    /// Failure probability used for the reported Hoeffding radius.
    pub delta: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        EstimateOptions {
            guard: DEFAULT_GUARD,
            delta: 0.05,
        }
    }
}

/// Result of the ratio estimator for one observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MitigationEstimate {
    pub w: PauliZIndex,
    /// `f(D1, w)`, the twirled noisy expectation.
    pub numerator: f64,
    /// `f(D0, w)`, the estimated twirled eigenvalue.
    pub lambda_hat: f64,
    pub value: f64,
    pub n0: usize,
    pub n1: usize,
    /// Additive Hoeffding radius that holds for both `f` values jointly with
    /// probability `1 - delta`.
    pub hoeffding_alpha: f64,
    /// `4 alpha / |lambda_hat|` when the radius is small enough for that ratio
    /// bound to apply.
    pub error_bound: Option<f64>,
}

impl MitigationEstimate {
    /// Forms the ratio from precomputed `f` values.
    pub fn from_parts(
        w: PauliZIndex,
        numerator: f64,
        lambda_hat: f64,
        n0: usize,
        n1: usize,
        opts: &EstimateOptions,
    ) -> Result<Self> {
        if lambda_hat.abs() < opts.guard || lambda_hat == 0.0 {
            return Err(Error::CalibrationTooNoisy {
                lambda_hat,
                guard: opts.guard,
            });
        }
        let alpha = hoeffding_alpha(n0.min(n1) as u64, opts.delta)?;
        Ok(MitigationEstimate {
            w,
            numerator,
            lambda_hat,
            value: numerator / lambda_hat,
            n0,
            n1,
            hoeffding_alpha: alpha,
            error_bound: lemma1_ratio_bound(alpha, lambda_hat.clamp(-1.0, 1.0)).ok(),
        })
    }
}

/// Ratio estimate `f(D1, w) / f(D0, w)`, with `D0` from the calibration
/// circuit and `D1` from the circuit of interest.
pub fn protocol1_estimate(d0: &DataSet, d1: &DataSet, w: PauliZIndex, opts: &EstimateOptions) -> Result<MitigationEstimate> {
    if d0.n() != d1.n() {
        return Err(Error::DimensionMismatch {
            expected: d0.n(),
            got: d1.n(),
        });
    }
    let lambda_hat = estimator_f(d0, w)?;
    let numerator = estimator_f(d1, w)?;
    MitigationEstimate::from_parts(w, numerator, lambda_hat, d0.len(), d1.len(), opts)
}

/// `prod_{l in w} (1 - 2 a_l)` for every `w`, qubit 0 as the lowest bit.
pub fn prep_factors(prep_alphas: &[f64]) -> Result<Vec<f64>> {
    crate::pauli::check_qubits(prep_alphas.len())?;
    let mut f = vec![1.0f64];
    for (l, &a) in prep_alphas.iter().enumerate() {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::InvalidParameter(format!("preparation error {a} outside [0, 1]")));
        }
        let k = 1.0 - 2.0 * a;
        if k == 0.0 {
            return Err(Error::NonInvertiblePrep { qubit: l });
        }
        let upper: Vec<f64> = f.iter().map(|v| v * k).collect();
        f.extend(upper);
    }
    Ok(f)
}

/// Removes the bias that imperfect `|0>` preparation puts on the calibration
/// vector: entry `w` is divided by `prod_{l in w} (1 - 2 a_l)`.
pub fn prep_correction(lambda_hat: &[f64], prep_alphas: &[f64]) -> Result<Vec<f64>> {
    let f = prep_factors(prep_alphas)?;
    if lambda_hat.len() != f.len() {
        return Err(Error::DimensionMismatch {
            expected: f.len(),
            got: lambda_hat.len(),
        });
    }
    Ok(lambda_hat.iter().zip(&f).map(|(v, k)| v / k).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mitigation::{acquire_data, counter_clock, IndexSet, Record};
    use crate::noise::NoiseModel;
    use crate::state::{ideal_distribution, sample_shot_raw, CircuitSpec, IdealDistribution};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w(mask: u32, n: usize) -> PauliZIndex {
        PauliZIndex::new(mask, n).unwrap()
    }

    /// Direct evaluation of the commutation-sign sum over raw records.
    fn f_by_records(d: &DataSet, s: u32) -> f64 {
        let total: i64 = d
            .records()
            .map(|r| {
                let comm = 1 - 2 * ((s & r.q).count_ones() & 1) as i64;
                let sx = 1 - 2 * ((s & r.x).count_ones() & 1) as i64;
                comm * sx
            })
            .sum();
        total as f64 / d.len() as f64
    }

    #[test]
    fn estimator_examples() {
        let d = DataSet::from_records(2, [Record { q: 0b10, x: 0b11, t: 0 }, Record { q: 0b00, x: 0b01, t: 1 }]).unwrap();
        assert_eq!(estimator_f(&d, w(0, 2)).unwrap(), 1.0);
        assert_eq!(estimator_f(&d, w(0b11, 2)).unwrap(), -1.0);
        assert_eq!(f_by_records(&d, 0b11), -1.0);

        let ground = DataSet::from_records(3, (0..6).map(|t| Record { q: t as u32, x: t as u32, t })).unwrap();
        for s in 0..8 {
            assert_eq!(estimator_f(&ground, w(s, 3)).unwrap(), 1.0);
        }
        assert!(estimator_f_all(&ground).unwrap().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn uniform_folded_counts_leave_only_identity() {
        let d = DataSet::from_records(2, (0..8).map(|i| Record { q: 0, x: i % 4, t: i as u64 })).unwrap();
        assert_eq!(estimator_f_all(&d).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let d = DataSet::new(2).unwrap();
        assert!(matches!(estimator_f(&d, w(1, 2)), Err(Error::EmptyDataSet)));
        assert!(matches!(estimator_f_all(&d), Err(Error::EmptyDataSet)));
        let d = DataSet::from_records(2, [Record { q: 0, x: 0, t: 0 }]).unwrap();
        assert!(estimator_f(&d, w(1, 3)).is_err());
    }

    proptest! {
        #[test]
        fn batch_equals_pointwise_and_records(n in 1usize..=6, recs in proptest::collection::vec((any::<u32>(), any::<u32>()), 1..200)) {
            let m = (1u32 << n) - 1;
            let d = DataSet::from_records(n, recs.iter().enumerate().map(|(t, &(q, x))| Record { q: q & m, x: x & m, t: t as u64 })).unwrap();
            let all = estimator_f_all(&d).unwrap();
            for s in 0..=m {
                let one = estimator_f(&d, w(s, n)).unwrap();
                prop_assert_eq!(one.to_bits(), all[s as usize].to_bits());
                prop_assert_eq!(one, f_by_records(&d, s));
                prop_assert!((-1.0..=1.0).contains(&one));
                let scaled = one * d.len() as f64;
                prop_assert!((scaled - scaled.round()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn protocol1_noiseless_ground_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let clean = NoiseModel::noiseless(3).unwrap();
        let ground = IdealDistribution::ground(3).unwrap();
        let src = |q, r: &mut ChaCha8Rng| sample_shot_raw(&ground, q, &clean, r);
        let d0 = acquire_data(3, src, &IndexSet::AllX, 100, &mut rng, counter_clock(0)).unwrap();
        let d1 = acquire_data(3, src, &IndexSet::AllX, 100, &mut rng, counter_clock(0)).unwrap();
        for s in 0..8 {
            let est = protocol1_estimate(&d0, &d1, w(s, 3), &EstimateOptions::default()).unwrap();
            assert_eq!(est.value, 1.0);
        }
    }

    #[test]
    fn protocol1_recovers_weight_through_flip_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = NoiseModel::uniform_bit_flip(1, 0.1).unwrap();
        let circ = CircuitSpec::new(vec![1.0], std::f64::consts::PI / 3.0);
        let dist = ideal_distribution(&circ).unwrap();
        let ground = IdealDistribution::ground(1).unwrap();
        let shots = 400_000;
        let d0 = acquire_data(1, |q, r| sample_shot_raw(&ground, q, &noise, r), &IndexSet::AllX, shots, &mut rng, counter_clock(0)).unwrap();
        let d1 = acquire_data(1, |q, r| sample_shot_raw(&dist, q, &noise, r), &IndexSet::AllX, shots, &mut rng, counter_clock(0)).unwrap();
        let est = protocol1_estimate(&d0, &d1, w(1, 1), &EstimateOptions::default()).unwrap();
        let tol = 4.0 / (shots as f64).sqrt();
        assert!((est.numerator - 0.4).abs() < tol);
        assert!((est.lambda_hat - 0.8).abs() < tol);
        assert!((est.value - 0.5).abs() < 3.0 * tol);
        assert!(est.error_bound.unwrap() > (est.value - 0.5).abs());
    }

    #[test]
    fn guard_trips_on_small_lambda() {
        let err = MitigationEstimate::from_parts(w(1, 1), 0.005, 0.01, 100, 100, &EstimateOptions { guard: 0.05, delta: 0.05 });
        assert!(matches!(err, Err(Error::CalibrationTooNoisy { lambda_hat, .. }) if lambda_hat == 0.01));
    }

    #[test]
    fn prep_correction_examples() {
        let v = vec![1.0, 0.5, 0.25, 0.125];
        assert_eq!(prep_correction(&v, &[0.0, 0.0]).unwrap(), v);
        let c = prep_correction(&[1.0, 0.72], &[0.05]).unwrap();
        assert_eq!(c[0], 1.0);
        assert!((c[1] - 0.8).abs() < 1e-15);
        let c = prep_correction(&v, &[0.1, 0.3]).unwrap();
        assert_eq!(c[0], 1.0);
        assert!((c[3] - 0.125 / (0.8 * 0.4)).abs() < 1e-15);
        assert!(matches!(prep_correction(&[1.0, 0.5], &[0.5]), Err(Error::NonInvertiblePrep { qubit: 0 })));
        assert!(prep_correction(&v, &[0.1]).is_err());
    }
}
