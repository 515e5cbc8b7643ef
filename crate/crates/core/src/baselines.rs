//! Reference mitigation methods to compare the twirled estimator against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{LuFactor, Matrix};
use crate::mitigation::Histogram;
use crate::noise::{FlipRates, NoiseModel, MAX_DENSE_QUBITS};
use crate::pauli::{wht_in_place, PauliZIndex};

/// An empirical transition matrix: column `j` holds the outcome frequencies
/// observed after preparing basis state `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibratedMatrix {
    pub a_hat: Matrix,
    pub shots_per_column: usize,
}

impl CalibratedMatrix {
    pub fn n(&self) -> usize {
        self.a_hat.dim().trailing_zeros() as usize
    }

    /// Total shots spent building the matrix.
    pub fn shots(&self) -> u64 {
        (self.a_hat.dim() * self.shots_per_column) as u64
    }

    /// The same JSON document a dense [`NoiseModel`] uses.
    pub fn to_json(&self) -> Result<String> {
        NoiseModel::dense(self.a_hat.clone())?.to_json()
    }

    pub fn from_json(s: &str, shots_per_column: usize) -> Result<Self> {
        let model = NoiseModel::from_json(s)?;
        Ok(CalibratedMatrix {
            a_hat: model.to_dense()?,
            shots_per_column,
        })
    }
}

/// Prepares every basis state `shots_per_column` times under `noise` (with
/// perfect preparation) and records empirical column frequencies.
///
/// Columns are sampled in parallel on independent streams derived from one
/// draw of `rng`, so the result does not depend on the thread count.
pub fn estimate_full_a<R: Rng + ?Sized>(noise: &NoiseModel, shots_per_column: usize, rng: &mut R) -> Result<CalibratedMatrix> {
    let n = noise.n();
    if n > MAX_DENSE_QUBITS {
        return Err(Error::TooLarge {
            what: "full transition-matrix calibration",
            n,
            max: MAX_DENSE_QUBITS,
        });
    }
    if shots_per_column == 0 {
        return Err(Error::InvalidParameter("shots_per_column must be at least 1".into()));
    }
    let dim = 1usize << n;
    let seed: u64 = rng.random();
    let columns: Vec<Vec<(u32, u32)>> = (0..dim)
        .into_par_iter()
        .map(|j| {
            let mut col_rng = ChaCha8Rng::seed_from_u64(seed);
            col_rng.set_stream(j as u64);
            let mut outcomes: Vec<u32> = (0..shots_per_column).map(|_| noise.sample(j as u32, &mut col_rng)).collect();
            outcomes.sort_unstable();
            let mut counts: Vec<(u32, u32)> = Vec::new();
            for x in outcomes {
                match counts.last_mut() {
                    Some((last, c)) if *last == x => *c += 1,
                    _ => counts.push((x, 1)),
                }
            }
            counts
        })
        .collect();
    let mut a_hat = Matrix::zeros(dim);
    let scale = 1.0 / shots_per_column as f64;
    for (j, col) in columns.iter().enumerate() {
        for &(x, c) in col {
            a_hat.set(x as usize, j, c as f64 * scale);
        }
    }
    Ok(CalibratedMatrix { a_hat, shots_per_column })
}

/// `A_hat^{-1} p_tilde` together with how many entries left `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Corrected {
    pub p_hat: Vec<f64>,
    pub out_of_range: usize,
}

impl Corrected {
    /// `<Z^w>` of the corrected (quasi-)distribution for every `w`.
    pub fn weights(&self) -> Vec<f64> {
        let mut v = self.p_hat.clone();
        wht_in_place(&mut v).expect("length is a power of two");
        v
    }

    pub fn weight(&self, w: PauliZIndex) -> f64 {
        self.p_hat
            .iter()
            .enumerate()
            .map(|(x, p)| crate::pauli::sign(w.mask(), x as u32) as f64 * p)
            .sum()
    }
}

/// Factorizes `A_hat` once for repeated corrections.
pub struct InverseMitigator {
    lu: LuFactor,
    n: usize,
}

impl InverseMitigator {
    pub fn new(cal: &CalibratedMatrix) -> Result<Self> {
        Self::from_matrix(&cal.a_hat)
    }

    pub fn from_matrix(a: &Matrix) -> Result<Self> {
        Ok(InverseMitigator {
            lu: a.lu()?,
            n: a.dim().trailing_zeros() as usize,
        })
    }

    pub fn condition_estimate(&self) -> f64 {
        self.lu.condition_estimate()
    }

    /// Applies the raw inverse to a probability vector. No clipping.
    pub fn correct_probabilities(&self, p_tilde: &[f64]) -> Result<Corrected> {
        let p_hat = self.lu.solve(p_tilde)?;
        let out_of_range = p_hat.iter().filter(|&&p| !(-1e-12..=1.0 + 1e-12).contains(&p)).count();
        Ok(Corrected { p_hat, out_of_range })
    }

    pub fn correct(&self, raw: &Histogram) -> Result<Corrected> {
        if raw.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: raw.n(),
            });
        }
        self.correct_probabilities(&raw.frequencies()?)
    }
}

/// Full-inversion estimate of `<Z^w>` from raw (unflipped) counts.
pub fn invert_mitigate(cal: &CalibratedMatrix, raw: &Histogram, w: PauliZIndex) -> Result<f64> {
    Ok(InverseMitigator::new(cal)?.correct(raw)?.weight(w))
}

/// Corrects with the tensor product of per-qubit inverses, which is the exact
/// inverse when the readout noise really is independent per qubit.
///
/// For one qubit the corrected sign of outcome `b` is
/// `(1 + r - s) / (1 - r - s)` for `b = 0` and `-(1 - r + s) / (1 - r - s)` for
/// `b = 1`; the estimate averages the product of these over the qubits in `w`.
/// When `r = s` this reduces to the raw Walsh coefficient divided by
/// `prod (1 - 2r)`.
pub fn bitflip_product_baseline(rates: &[FlipRates], w: PauliZIndex, raw: &Histogram, guard: f64) -> Result<f64> {
    if rates.len() != raw.n() || w.n() != raw.n() {
        return Err(Error::DimensionMismatch {
            expected: raw.n(),
            got: if rates.len() != raw.n() { rates.len() } else { w.n() },
        });
    }
    if raw.is_empty() {
        return Err(Error::EmptyDataSet);
    }
    let support: Vec<usize> = w.0.support().collect();
    let mut g = Vec::with_capacity(support.len());
    for &l in &support {
        let FlipRates { r, s } = rates[l];
        let f = 1.0 - r - s;
        if f.abs() < guard || f == 0.0 {
            return Err(Error::WeakQubitFactor { qubit: l, factor: f, guard });
        }
        g.push([(1.0 + r - s) / f, -(1.0 - r + s) / f]);
    }
    let mut acc = 0.0;
    for (x, c) in raw.iter() {
        let v: f64 = support.iter().zip(&g).map(|(&l, gl)| gl[((x >> l) & 1) as usize]).product();
        acc += v * c as f64;
    }
    Ok(acc / raw.total() as f64)
}

/// Per-qubit flip rates from readouts of the all-zeros and all-ones states.
pub fn estimate_flip_rates<R: Rng + ?Sized>(noise: &NoiseModel, shots_per_state: usize, rng: &mut R) -> Result<Vec<FlipRates>> {
    let n = noise.n();
    if shots_per_state == 0 {
        return Err(Error::InvalidParameter("shots_per_state must be at least 1".into()));
    }
    let ones = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let mut flips0 = vec![0u64; n];
    let mut flips1 = vec![0u64; n];
    for _ in 0..shots_per_state {
        let x0 = noise.sample(0, rng);
        let x1 = noise.sample(ones, rng) ^ ones;
        for l in 0..n {
            flips0[l] += ((x0 >> l) & 1) as u64;
            flips1[l] += ((x1 >> l) & 1) as u64;
        }
    }
    let t = shots_per_state as f64;
    Ok((0..n)
        .map(|l| FlipRates {
            r: flips0[l] as f64 / t,
            s: flips1[l] as f64 / t,
        })
        .collect())
}

/// Plain empirical mean of `(-1)^{<w, x>}`.
pub fn unmitigated_estimate(raw: &Histogram, w: PauliZIndex) -> Result<f64> {
    if raw.is_empty() {
        return Err(Error::EmptyDataSet);
    }
    if w.n() != raw.n() {
        return Err(Error::DimensionMismatch {
            expected: raw.n(),
            got: w.n(),
        });
    }
    Ok(raw.signed_sum(w.mask()) as f64 / raw.total() as f64)
}

/// Where the flip rates for [`bitflip_product_baseline`] come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateSource {
    /// Exact single-qubit marginals of the simulated channel.
    #[default]
    Exact,
    /// Estimated from all-zeros and all-ones readouts.
    Estimated,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{random_stochastic_matrix, PairFlip};
    use crate::state::{ideal_distribution, sample_shot_raw, CircuitSpec, IdealDistribution};

    fn w(mask: u32, n: usize) -> PauliZIndex {
        PauliZIndex::new(mask, n).unwrap()
    }

    fn raw_hist<R: Rng>(dist: &IdealDistribution, noise: &NoiseModel, shots: usize, rng: &mut R) -> Histogram {
        Histogram::from_outcomes(dist.n(), (0..shots).map(|_| sample_shot_raw(dist, 0, noise, rng))).unwrap()
    }

    #[test]
    fn noiseless_calibration_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cal = estimate_full_a(&NoiseModel::noiseless(3).unwrap(), 4, &mut rng).unwrap();
        assert_eq!(cal.a_hat, Matrix::identity(8));
        assert_eq!(cal.shots(), 32);
    }

    #[test]
    fn single_shot_columns_are_indicators() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cal = estimate_full_a(&NoiseModel::uniform_bit_flip(3, 0.3).unwrap(), 1, &mut rng).unwrap();
        for j in 0..8 {
            let col = cal.a_hat.column(j);
            assert_eq!(col.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(col.iter().filter(|&&v| v == 0.0).count(), 7);
        }
    }

    #[test]
    fn calibration_binomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shots = 1_000_000;
        let cal = estimate_full_a(&NoiseModel::uniform_bit_flip(1, 0.1).unwrap(), shots, &mut rng).unwrap();
        let sigma = (0.09f64 / shots as f64).sqrt();
        for (r, c, v) in [(0, 0, 0.9), (1, 0, 0.1), (0, 1, 0.1), (1, 1, 0.9)] {
            assert!((cal.a_hat.get(r, c) - v).abs() < 4.0 * sigma);
        }
        assert!(cal.a_hat.is_left_stochastic(1e-12));
    }

    #[test]
    fn calibration_independent_of_thread_count() {
        let noise = NoiseModel::simulation_preset(6, 4).unwrap();
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| estimate_full_a(&noise, 16, &mut ChaCha8Rng::seed_from_u64(9)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn identity_inverse_gives_unmitigated() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = NoiseModel::uniform_bit_flip(3, 0.1).unwrap();
        let dist = ideal_distribution(&CircuitSpec::new(vec![1.0, 0.5, 2.0], 0.7)).unwrap();
        let h = raw_hist(&dist, &noise, 1000, &mut rng);
        let cal = CalibratedMatrix {
            a_hat: Matrix::identity(8),
            shots_per_column: 1,
        };
        for m in 0..8 {
            let a = invert_mitigate(&cal, &h, w(m, 3)).unwrap();
            let b = unmitigated_estimate(&h, w(m, 3)).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        assert!((invert_mitigate(&cal, &h, w(0, 3)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_inverse_recovers_exact_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for n in [1usize, 3, 5, 8] {
            let alphas: Vec<f64> = (0..n).map(|l| 0.3 + 0.4 * l as f64).collect();
            let circ = CircuitSpec::new(alphas, 1.1);
            let dist = ideal_distribution(&circ).unwrap();
            let p: Vec<f64> = (0..1u32 << n).map(|x| dist.probability(x)).collect();
            let a = if n <= 5 {
                random_stochastic_matrix(1 << n, &mut rng)
            } else {
                NoiseModel::simulation_preset(n, 3).unwrap().to_dense().unwrap()
            };
            let p_tilde = a.mul_vec(&p).unwrap();
            let inv = InverseMitigator::from_matrix(&a).unwrap();
            let weights = inv.correct_probabilities(&p_tilde).unwrap().weights();
            for m in 0..1u32 << n {
                assert!((weights[m as usize] - crate::state::exact_weight(&circ, w(m, n))).abs() < 1e-10, "n={n} w={m}");
            }
        }
    }

    #[test]
    fn singular_calibration_reported() {
        let cal = CalibratedMatrix {
            a_hat: NoiseModel::always_zero(2).unwrap().to_dense().unwrap(),
            shots_per_column: 1,
        };
        let h = Histogram::from_outcomes(2, [0, 0]).unwrap();
        assert!(matches!(invert_mitigate(&cal, &h, w(1, 2)), Err(Error::Singular { .. })));
    }

    /// Exact expectation of the product baseline, by summing over the noisy distribution.
    fn bitflip_expectation(rates: &[FlipRates], noise: &NoiseModel, dist: &IdealDistribution, w_: PauliZIndex) -> f64 {
        let n = noise.n();
        let a = noise.to_dense().unwrap();
        let p: Vec<f64> = (0..1u32 << n).map(|x| dist.probability(x)).collect();
        let pt = a.mul_vec(&p).unwrap();
        // counts scaled so the histogram holds the exact distribution
        let scale = 1e12;
        let counts: Vec<u64> = pt.iter().map(|v| (v * scale).round() as u64).collect();
        let h = Histogram::from_counts(&counts).unwrap();
        bitflip_product_baseline(rates, w_, &h, 0.05).unwrap()
    }

    #[test]
    fn product_noise_exact_rates_unbiased() {
        let rates = vec![FlipRates { r: 0.02, s: 0.07 }, FlipRates { r: 0.05, s: 0.01 }, FlipRates { r: 0.1, s: 0.2 }];
        let noise = NoiseModel::product(rates.clone()).unwrap();
        let circ = CircuitSpec::new(vec![0.4, 1.3, 2.2], 0.9);
        let dist = ideal_distribution(&circ).unwrap();
        for m in 0..8 {
            let got = bitflip_expectation(&rates, &noise, &dist, w(m, 3));
            assert!((got - crate::state::exact_weight(&circ, w(m, 3))).abs() < 1e-9, "w={m}");
        }
    }

    #[test]
    fn asymmetric_rates_differ_from_plain_division() {
        // deterministic |1>, r=0.02, s=0.1: raw <Z> = -(1 - 2s) = -0.8, exact -1
        let rates = [FlipRates { r: 0.02, s: 0.1 }];
        let h = Histogram::from_counts(&[10, 90]).unwrap();
        let v = bitflip_product_baseline(&rates, w(1, 1), &h, 0.05).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
        let naive = unmitigated_estimate(&h, w(1, 1)).unwrap() / rates[0].factor();
        assert!((naive + 1.0).abs() > 0.05);
    }

    #[test]
    fn noiseless_bitflip_is_identity() {
        let h = Histogram::from_counts(&[3, 1, 4, 1, 5, 9, 2, 6]).unwrap();
        let rates = vec![FlipRates::symmetric(0.0); 3];
        for m in 0..8 {
            assert_eq!(bitflip_product_baseline(&rates, w(m, 3), &h, 0.05).unwrap(), unmitigated_estimate(&h, w(m, 3)).unwrap());
        }
    }

    #[test]
    fn correlated_noise_leaves_bias() {
        let base = NoiseModel::product(vec![FlipRates { r: 0.02, s: 0.05 }; 3]).unwrap();
        let noise = NoiseModel::pair_correlated(base, vec![PairFlip { i: 0, j: 1, c: 0.05 }]).unwrap();
        let rates = noise.marginal_flip_rates().unwrap();
        let dist = IdealDistribution::ground(3).unwrap();
        let covered = bitflip_expectation(&rates, &noise, &dist, w(0b011, 3));
        assert!((covered - 1.0).abs() > 0.05);
        let single = bitflip_expectation(&rates, &noise, &dist, w(0b001, 3));
        assert!((single - 1.0).abs() < 1e-9);
    }

    #[test]
    fn weak_factor_trips_guard() {
        let h = Histogram::from_counts(&[1, 1]).unwrap();
        let r = bitflip_product_baseline(&[FlipRates { r: 0.49, s: 0.49 }], w(1, 1), &h, 0.05);
        assert!(matches!(r, Err(Error::WeakQubitFactor { qubit: 0, .. })));
        assert!(bitflip_product_baseline(&[FlipRates { r: 0.49, s: 0.49 }], w(0, 1), &h, 0.05).is_ok());
    }

    #[test]
    fn unmitigated_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let noise = NoiseModel::uniform_bit_flip(1, 0.1).unwrap();
        let h = raw_hist(&IdealDistribution::ground(1).unwrap(), &noise, 200_000, &mut rng);
        assert!((unmitigated_estimate(&h, w(1, 1)).unwrap() - 0.8).abs() < 4.0 * (0.36f64 / 200_000.0).sqrt());
        assert_eq!(unmitigated_estimate(&h, w(0, 1)).unwrap(), 1.0);
        assert!(unmitigated_estimate(&Histogram::new(1).unwrap(), w(0, 1)).is_err());
    }

    #[test]
    fn estimated_rates_converge() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let truth = vec![FlipRates { r: 0.02, s: 0.07 }, FlipRates { r: 0.05, s: 0.01 }];
        let got = estimate_flip_rates(&NoiseModel::product(truth.clone()).unwrap(), 100_000, &mut rng).unwrap();
        for (g, t) in got.iter().zip(&truth) {
            assert!((g.r - t.r).abs() < 0.004 && (g.s - t.s).abs() < 0.004);
        }
    }

    #[test]
    fn calibrated_matrix_json_round_trip() {
        let cal = estimate_full_a(&NoiseModel::uniform_bit_flip(2, 0.2).unwrap(), 8, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let back = CalibratedMatrix::from_json(&cal.to_json().unwrap(), 8).unwrap();
        assert!(back.a_hat.max_abs_diff(&cal.a_hat) < 1e-15);
    }
}
