//! Shot-count planning and error propagation for the ratio estimator.
//!
//! All logarithms are natural. Counts are rounded up.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs shared by the planning functions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsParams {
    pub delta: f64,
    pub epsilon: f64,
    /// Magnitude of the twirled eigenvalue `lambda_w` (a diagonal entry of `M`).
    pub m_ii: f64,
    pub beta: f64,
    pub n: usize,
    pub i_size: usize,
}

impl BoundsParams {
    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        check_epsilon(self.epsilon)?;
        if !(self.m_ii > 0.0 && self.m_ii <= 1.0) {
            return Err(invalid(format!("M_ii = {} outside (0, 1]", self.m_ii)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid(format!("beta = {} must be finite and non-negative", self.beta)));
        }
        if self.i_size == 0 {
            return Err(invalid("target index set must be non-empty".into()));
        }
        Ok(())
    }

    pub fn shots(&self) -> Result<u64> {
        theorem1_shots(self.delta, self.epsilon, self.m_ii)
    }

    pub fn instances(&self) -> Result<u64> {
        theorem2_instances(self.delta, self.epsilon, self.beta, self.n, self.i_size)
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("delta = {delta} outside (0, 1)")))
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 2.0 {
        Ok(())
    } else {
        Err(invalid(format!("epsilon = {epsilon} outside (0, 2]")))
    }
}

fn ceil_count(v: f64) -> Result<u64> {
    if !v.is_finite() || v > u64::MAX as f64 {
        return Err(invalid(format!("bound {v} does not fit in a shot count")));
    }
    Ok(v.ceil().max(1.0) as u64)
}

/// Worst-case error of `x_hat / y_hat` against `x / y` when both numerator and
/// denominator are off by at most `alpha`: `4 alpha / |y|`, valid for
/// `alpha <= |y| / 2`.
pub fn lemma1_ratio_bound(alpha: f64, y: f64) -> Result<f64> {
    let ay = y.abs();
    if !(alpha >= 0.0 && ay <= 1.0 && ay > 0.0 && alpha <= ay / 2.0) {
        return Err(Error::OutsideRatioRegime { alpha, y });
    }
    Ok(4.0 * alpha / ay)
}

/// Shots per data set so the ratio estimate is `epsilon`-accurate with
/// probability `1 - delta`: `32 ln(4/delta) / (M_ii^2 epsilon^2)`.
pub fn theorem1_shots(delta: f64, epsilon: f64, m_ii: f64) -> Result<u64> {
    check_delta(delta)?;
    check_epsilon(epsilon)?;
    let m = m_ii.abs();
    if m == 0.0 || m > 1.0 || m.is_nan() {
        return Err(invalid(format!("M_ii = {m_ii} must satisfy 0 < |M_ii| <= 1")));
    }
    ceil_count(32.0 * (4.0 / delta).ln() / (m * m * epsilon * epsilon))
}

/// Random circuit instances needed to suppress the off-diagonal part of `M`
/// on `i_size` target rows to `epsilon`:
/// `2 (ln(2/delta) + n ln 2 + ln|I|) (1 + beta)^2 / epsilon^2`, or
/// `(ln(2/delta) + ln|I|) / (epsilon^2 / 2)` when `beta = 0`.
pub fn theorem2_instances(delta: f64, epsilon: f64, beta: f64, n: usize, i_size: usize) -> Result<u64> {
    if beta == 0.0 {
        check_instances(delta, epsilon, beta, i_size)?;
        let log_terms = (2.0 / delta).ln() + (i_size as f64).ln();
        return ceil_count(log_terms / (epsilon * epsilon / 2.0));
    }
    theorem2_instances_general(delta, epsilon, beta, n, i_size)
}

/// The general branch of [`theorem2_instances`], also applied at `beta = 0`.
pub fn theorem2_instances_general(delta: f64, epsilon: f64, beta: f64, n: usize, i_size: usize) -> Result<u64> {
    check_instances(delta, epsilon, beta, i_size)?;
    let log_terms = (2.0 / delta).ln() + n as f64 * std::f64::consts::LN_2 + (i_size as f64).ln();
    ceil_count(2.0 * log_terms * (1.0 + beta).powi(2) / (epsilon * epsilon))
}

fn check_instances(delta: f64, epsilon: f64, beta: f64, i_size: usize) -> Result<()> {
    check_delta(delta)?;
    check_epsilon(epsilon)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(invalid(format!("beta = {beta} must be finite and non-negative")));
    }
    if i_size == 0 {
        return Err(invalid("target index set must be non-empty".into()));
    }
    Ok(())
}

/// Two-sided tail `2 exp(-N alpha^2 / 2)` for the mean of `N` values in `[-1, 1]`.
pub fn hoeffding_tail(n: u64, alpha: f64) -> Result<f64> {
    if n == 0 || !(alpha >= 0.0) {
        return Err(invalid(format!("need N >= 1 and alpha >= 0, got N = {n}, alpha = {alpha}")));
    }
    Ok(2.0 * (-0.5 * n as f64 * alpha * alpha).exp())
}

/// Radius `alpha` such that two independent means of `N` samples each are both
/// within `alpha` with probability at least `1 - delta`: `sqrt(2 ln(4/delta) / N)`.
pub fn hoeffding_alpha(n: u64, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    if n == 0 {
        return Err(invalid("need at least one sample".into()));
    }
    Ok((2.0 * (4.0 / delta).ln() / n as f64).sqrt())
}
