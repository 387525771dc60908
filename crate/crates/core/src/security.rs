//! Security parameters, the binary entropy function and sifted-block bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};

/// Default total failure probability.
pub const DEFAULT_EPSILON: f64 = 4e-16;
/// Default error-correction efficiency (leakage relative to the Shannon limit).
pub const DEFAULT_F_EC: f64 = 1.2;
/// Default fraction of sifted pairs disclosed for parameter estimation.
pub const DEFAULT_SAMPLE_FRACTION: f64 = 0.20;

/// Binary Shannon entropy in bits, with `h(0) = h(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "binary entropy argument {x} outside [0, 1]"
        )));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Composable security budget and post-processing constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecurityParams {
    pub epsilon_total: f64,
    pub epsilon_pe: f64,
    pub epsilon_sec: f64,
    pub epsilon_cor: f64,
    pub f_ec: f64,
    pub sample_fraction: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        split_epsilon(DEFAULT_EPSILON).expect("default epsilon is positive")
    }
}

/// Splits `epsilon_total` equally between parameter estimation, secrecy and
/// correctness, with default `f_ec` and sampling fraction.
pub fn split_epsilon(epsilon_total: f64) -> Result<SecurityParams> {
    if !(epsilon_total > 0.0 && epsilon_total.is_finite()) {
        return Err(Error::Domain(format!(
            "epsilon must be positive, got {epsilon_total}"
        )));
    }
    let part = epsilon_total / 3.0;
    Ok(SecurityParams {
        epsilon_total,
        epsilon_pe: part,
        epsilon_sec: part,
        epsilon_cor: part,
        f_ec: DEFAULT_F_EC,
        sample_fraction: DEFAULT_SAMPLE_FRACTION,
    })
}

impl SecurityParams {
    pub fn with_f_ec(mut self, f_ec: f64) -> Self {
        self.f_ec = f_ec;
        self
    }

    pub fn with_sample_fraction(mut self, fraction: f64) -> Self {
        self.sample_fraction = fraction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("epsilon_pe", self.epsilon_pe),
            ("epsilon_sec", self.epsilon_sec),
            ("epsilon_cor", self.epsilon_cor),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(config_err(field, format!("must lie in (0, 1), got {v}")));
            }
        }
        let sum = self.epsilon_pe + self.epsilon_sec + self.epsilon_cor;
        if (sum - self.epsilon_total).abs() > 4.0 * f64::EPSILON * self.epsilon_total {
            return Err(config_err(
                "epsilon_total",
                format!("components sum to {sum}, total is {}", self.epsilon_total),
            ));
        }
        if !(self.f_ec >= 1.0) {
            return Err(config_err(
                "f_ec",
                format!("must be >= 1, got {}", self.f_ec),
            ));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction < 1.0) {
            return Err(config_err(
                "sample_fraction",
                format!("must lie in (0, 1), got {}", self.sample_fraction),
            ));
        }
        Ok(())
    }

    /// Parameter-estimation sample size for `n_total` sifted pairs (round half up).
    pub fn pe_count(&self, n_total: u64) -> u64 {
        (self.sample_fraction * n_total as f64 + 0.5).floor() as u64
    }
}

/// Sifted pairs of one aggregation window and their sampled error statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiftedBlock {
    /// Start of the window, seconds since the stream epoch.
    pub start: f64,
    /// Window length in seconds.
    pub duration: f64,
    /// Sifted pairs, `N`.
    pub n_total: u64,
    /// Pairs disclosed for parameter estimation, `n`.
    pub n_pe: u64,
    /// Pairs left for key generation, `N - n`.
    pub n_key: u64,
    /// Mismatches found in the disclosed sample.
    pub pe_errors: u64,
    /// Observed error rate on the sample.
    pub qber_hat: f64,
}

impl SiftedBlock {
    /// Block whose sample size follows `params.sample_fraction` and whose error
    /// rate is given directly. Used for synthetic blocks in rate curves and
    /// pass extrapolation.
    pub fn synthetic(
        n_total: u64,
        qber_hat: f64,
        duration: f64,
        params: &SecurityParams,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&qber_hat) {
            return Err(Error::Domain(format!("qber {qber_hat} outside [0, 1]")));
        }
        if !(duration >= 0.0) {
            return Err(Error::Domain(format!(
                "duration {duration} must be non-negative"
            )));
        }
        let n_pe = params.pe_count(n_total);
        Ok(Self {
            start: 0.0,
            duration,
            n_total,
            n_pe,
            n_key: n_total - n_pe,
            pe_errors: (qber_hat * n_pe as f64).round() as u64,
            qber_hat,
        })
    }

    /// Block built from measured sample counts.
    pub fn from_sample(
        start: f64,
        duration: f64,
        n_total: u64,
        n_pe: u64,
        pe_errors: u64,
    ) -> Result<Self> {
        if n_pe > n_total {
            return Err(Error::Domain(format!(
                "sample {n_pe} larger than block {n_total}"
            )));
        }
        if pe_errors > n_pe {
            return Err(Error::Domain(format!(
                "{pe_errors} errors in a sample of {n_pe}"
            )));
        }
        let qber_hat = if n_pe == 0 {
            0.0
        } else {
            pe_errors as f64 / n_pe as f64
        };
        Ok(Self {
            start,
            duration,
            n_total,
            n_pe,
            n_key: n_total - n_pe,
            pe_errors,
            qber_hat,
        })
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}
