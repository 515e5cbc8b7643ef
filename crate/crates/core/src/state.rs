//! Ideal outcome distributions for the test circuits and shot generation.
//!
//! The simulated circuit is a product layer of `R_y(alpha_l * theta)` gates on
//! `|0...0>`, optionally with each qubit prepared in `|1>` with probability
//! `prep_error[l]`. Arbitrary small-`n` distributions can be supplied densely.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, MAX_DENSE_QUBITS};
use crate::pauli::{check_qubits, sign, BitString, PauliZIndex};

/// Per-qubit rotation scale used by the default simulation: the first qubit
/// rotates at `3 * theta`, every other qubit at `0.15 * theta`.
pub fn default_alphas(n: usize) -> Vec<f64> {
    (0..n).map(|l| if l == 0 { 3.0 } else { 0.15 }).collect()
}

/// Inclusive uniform grid of `points` angles on `[start, end]`.
pub fn theta_grid(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|i| start + (end - start) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub n: usize,
    pub alphas: Vec<f64>,
    pub theta: f64,
    /// Probability that qubit `l` starts in `|1>`.
    #[serde(default)]
    pub prep_error: Vec<f64>,
}

impl CircuitSpec {
    pub fn new(alphas: Vec<f64>, theta: f64) -> Self {
        CircuitSpec {
            n: alphas.len(),
            prep_error: vec![0.0; alphas.len()],
            alphas,
            theta,
        }
    }

    /// The default rotation layer at angle `theta`.
    pub fn standard(n: usize, theta: f64) -> Self {
        Self::new(default_alphas(n), theta)
    }

    /// The calibration circuit: identity on `|0...0>` with the same preparation error.
    pub fn calibration(&self) -> Self {
        CircuitSpec {
            theta: 0.0,
            ..self.clone()
        }
    }

    pub fn with_prep_error(mut self, prep_error: Vec<f64>) -> Self {
        self.prep_error = prep_error;
        self
    }

    fn prep(&self, l: usize) -> f64 {
        self.prep_error.get(l).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        check_qubits(self.n)?;
        if self.alphas.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: self.alphas.len(),
            });
        }
        if !self.prep_error.is_empty() && self.prep_error.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: self.prep_error.len(),
            });
        }
        if let Some(p) = self.prep_error.iter().find(|p| !(0.0..=0.5).contains(*p)) {
            return Err(Error::InvalidParameter(format!("preparation error {p} outside [0, 1/2]")));
        }
        if !self.theta.is_finite() || self.alphas.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("non-finite rotation angle".into()));
        }
        Ok(())
    }
}

/// Distribution of ideal (noise-free) measurement outcomes.
#[derive(Clone, Debug)]
pub enum IdealDistribution {
    /// Independent qubits with `marginals[l] = P(bit l = 1)`.
    Product { marginals: Vec<f64>, thresholds: Vec<u64> },
    /// Explicit probability vector over all `2^n` outcomes.
    Dense { probs: Vec<f64>, cdf: Vec<f64> },
}

impl IdealDistribution {
    pub fn product(marginals: Vec<f64>) -> Result<Self> {
        check_qubits(marginals.len())?;
        if let Some(p) = marginals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidParameter(format!("marginal probability {p} outside [0, 1]")));
        }
        let thresholds = marginals.iter().map(|p| (p * 4_294_967_296.0).round() as u64).collect();
        Ok(IdealDistribution::Product { marginals, thresholds })
    }

    pub fn dense(probs: Vec<f64>) -> Result<Self> {
        let d = probs.len();
        if !d.is_power_of_two() || d < 2 {
            return Err(Error::NotPowerOfTwo(d));
        }
        let n = d.trailing_zeros() as usize;
        if n > MAX_DENSE_QUBITS {
            return Err(Error::TooLarge {
                what: "dense distribution",
                n,
                max: MAX_DENSE_QUBITS,
            });
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidParameter("negative probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}")));
        }
        let cdf = probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        Ok(IdealDistribution::Dense { probs, cdf })
    }

    /// Point mass on `|0...0>`.
    pub fn ground(n: usize) -> Result<Self> {
        Self::product(vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        match self {
            IdealDistribution::Product { marginals, .. } => marginals.len(),
            IdealDistribution::Dense { probs, .. } => probs.len().trailing_zeros() as usize,
        }
    }

    pub fn probability(&self, x: u32) -> f64 {
        match self {
            IdealDistribution::Product { marginals, .. } => marginals
                .iter()
                .enumerate()
                .map(|(l, p)| if (x >> l) & 1 == 1 { *p } else { 1.0 - p })
                .product(),
            IdealDistribution::Dense { probs, .. } => probs.get(x as usize).copied().unwrap_or(0.0),
        }
    }

    /// Exact `<Z^w>` of this distribution.
    pub fn z_expectation(&self, w: PauliZIndex) -> f64 {
        match self {
            IdealDistribution::Product { marginals, .. } => marginals
                .iter()
                .enumerate()
                .filter(|(l, _)| (w.mask() >> l) & 1 == 1)
                .map(|(_, p)| 1.0 - 2.0 * p)
                .product(),
            IdealDistribution::Dense { probs, .. } => probs
                .iter()
                .enumerate()
                .map(|(x, p)| sign(w.mask(), x as u32) as f64 * p)
                .sum(),
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match self {
            IdealDistribution::Product { thresholds, .. } => {
                let mut y = 0u32;
                for (l, &t) in thresholds.iter().enumerate() {
                    if t != 0 && (rng.next_u32() as u64) < t {
                        y |= 1 << l;
                    }
                }
                y
            }
            IdealDistribution::Dense { probs, cdf } => {
                let u = rng.random::<f64>() * cdf[cdf.len() - 1];
                let x = cdf.partition_point(|&c| c <= u);
                if x < cdf.len() {
                    x as u32
                } else {
                    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u32
                }
            }
        }
    }
}

/// Product distribution with `P(bit l = 1) = a + (1 - 2a) sin^2(alpha_l theta / 2)`,
/// `a` the preparation error of qubit `l`.
pub fn ideal_distribution(c: &CircuitSpec) -> Result<IdealDistribution> {
    c.validate()?;
    let marginals = c
        .alphas
        .iter()
        .enumerate()
        .map(|(l, a)| {
            let half = (a * c.theta / 2.0).sin();
            let prep = c.prep(l);
            (prep + (1.0 - 2.0 * prep) * half * half).clamp(0.0, 1.0)
        })
        .collect();
    IdealDistribution::product(marginals)
}

/// Ground-truth `<Z^w>`: `prod_{l in w} (1 - 2 a_l) cos(alpha_l theta)`.
pub fn exact_weight(c: &CircuitSpec, w: PauliZIndex) -> f64 {
    w.0.support()
        .map(|l| (1.0 - 2.0 * c.prep(l)) * (c.alphas[l] * c.theta).cos())
        .product()
}

/// One shot of the randomized measurement circuit: ideal outcome `y`, flip by
/// `q`, then noisy readout.
#[inline]
pub fn sample_shot_raw<R: Rng + ?Sized>(dist: &IdealDistribution, q: u32, noise: &NoiseModel, rng: &mut R) -> u32 {
    let y = dist.sample(rng);
    noise.sample(y ^ q, rng)
}

pub fn sample_shot<R: Rng + ?Sized>(
    dist: &IdealDistribution,
    q: BitString,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<BitString> {
    let n = dist.n();
    for got in [q.n(), noise.n()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    BitString::new(sample_shot_raw(dist, q.bits(), noise, rng), n)
}
