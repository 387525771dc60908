//! Secret key length in the asymptotic limit and under the sharp finite-key
//! bound with composable epsilon accounting.
//!
//! Finite-key recipe, with `N` sifted pairs of which `n` are disclosed:
//!
//! ```text
//! kappa   = 2/(9n) * ln(1/eps_pe)
//! gamma+  = [3k + (1-2k) x + 3 sqrt(k (k + x - x^2))] / (1 + 4k)
//! Gamma+  = gamma+(x)  for x in [0, (1-2k)/(1+k)],  1 + eps otherwise
//! q_th    = clamp_[0,1] (N Gamma+(p) - n p) / (N - n),  1 if kappa > 1/4
//! S       = max{0, n_key [1 - h(q_th)] - f n_key h(p) - Delta}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::security::{binary_entropy, SecurityParams, SiftedBlock};

/// Largest `kappa` for which the sharp confidence bound holds.
pub const KAPPA_LIMIT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Asymptotic,
    SharpFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub secret_bits: f64,
    /// `secret_bits / duration`; zero for a zero-length block.
    pub rate_bps: f64,
    pub regime: Regime,
    pub q_threshold: Option<f64>,
    pub kappa: Option<f64>,
}

fn rate(bits: f64, duration: f64) -> f64 {
    if duration > 0.0 {
        bits / duration
    } else {
        0.0
    }
}

fn entropy(x: f64) -> f64 {
    binary_entropy(x.clamp(0.0, 1.0)).expect("clamped")
}

/// `S = max{0, n_key [1 - f h(p) - h(p)]}`.
pub fn asymptotic_key_length(block: &SiftedBlock, params: &SecurityParams) -> KeyRateResult {
    let h = entropy(block.qber_hat);
    let bits = (block.n_key as f64 * (1.0 - params.f_ec * h - h)).max(0.0);
    KeyRateResult {
        secret_bits: bits,
        rate_bps: rate(bits, block.duration),
        regime: Regime::Asymptotic,
        q_threshold: None,
        kappa: None,
    }
}

/// `(2 / 9n) ln(1 / eps_pe)`.
pub fn kappa(n: u64, epsilon_pe: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain(
            "kappa needs a sample of at least one pair".into(),
        ));
    }
    if !(epsilon_pe > 0.0 && epsilon_pe <= 1.0) {
        return Err(Error::Domain(format!(
            "epsilon_pe must lie in (0, 1], got {epsilon_pe}"
        )));
    }
    Ok(2.0 / (9.0 * n as f64) * (1.0 / epsilon_pe).ln())
}

/// Upper confidence bound on the error rate of the undisclosed bits.
pub fn gamma_plus(x: f64, kappa: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("gamma+ argument {x} outside [0, 1]")));
    }
    if !(0.0..=KAPPA_LIMIT).contains(&kappa) {
        return Err(Error::Domain(format!("kappa {kappa} outside [0, 1/4]")));
    }
    let root = (kappa * (kappa + x - x * x)).max(0.0).sqrt();
    Ok((3.0 * kappa + (1.0 - 2.0 * kappa) * x + 3.0 * root) / (1.0 + 4.0 * kappa))
}

/// Piecewise interval: `gamma_plus` on `[0, (1-2k)/(1+k)]`, `1 + epsilon` beyond.
pub fn gamma_interval(x: f64, kappa: f64, epsilon: f64) -> Result<f64> {
    let upper = (1.0 - 2.0 * kappa) / (1.0 + kappa);
    if x > upper && x <= 1.0 {
        // argument checks still apply
        gamma_plus(x, kappa)?;
        return Ok(1.0 + epsilon);
    }
    gamma_plus(x, kappa)
}

/// Phase-error threshold for the key-generation bits, clamped to `[0, 1]`.
pub fn sharp_threshold(block: &SiftedBlock, params: &SecurityParams) -> Result<f64> {
    Ok(threshold_and_kappa(block, params)?.0)
}

fn threshold_and_kappa(block: &SiftedBlock, params: &SecurityParams) -> Result<(f64, f64)> {
    let k = kappa(block.n_pe, params.epsilon_pe)?;
    if k > KAPPA_LIMIT || block.n_key == 0 {
        return Ok((1.0, k));
    }
    let n_total = block.n_total as f64;
    let n = block.n_pe as f64;
    let p = block.qber_hat;
    let g = gamma_interval(p, k, params.epsilon_total)?;
    let q = (n_total * g - n * p) / (n_total - n);
    Ok((q.clamp(0.0, 1.0), k))
}

/// Finite-key penalty for privacy amplification and error verification,
/// `6 log2(21 / eps_sec) + log2(2 / eps_cor)` bits.
pub fn finite_key_penalty(params: &SecurityParams) -> f64 {
    6.0 * (21.0 / params.epsilon_sec).log2() + (2.0 / params.epsilon_cor).log2()
}

/// `S = max{0, n_key [1 - h(q_th)] - f n_key h(p) - Delta}`.
pub fn sharp_key_length(block: &SiftedBlock, params: &SecurityParams) -> Result<KeyRateResult> {
    if block.n_pe == 0 {
        // nothing disclosed, nothing certified
        return Ok(KeyRateResult {
            secret_bits: 0.0,
            rate_bps: 0.0,
            regime: Regime::SharpFinite,
            q_threshold: Some(1.0),
            kappa: None,
        });
    }
    let (q, k) = threshold_and_kappa(block, params)?;
    let n_key = block.n_key as f64;
    let raw = n_key * (1.0 - entropy(q))
        - params.f_ec * n_key * entropy(block.qber_hat)
        - finite_key_penalty(params);
    let bits = raw.max(0.0);
    Ok(KeyRateResult {
        secret_bits: bits,
        rate_bps: rate(bits, block.duration),
        regime: Regime::SharpFinite,
        q_threshold: Some(q),
        kappa: Some(k),
    })
}

/// One point of a finite-size rate curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n_total: u64,
    pub duration: f64,
    pub rate_bps: f64,
    pub q_threshold: f64,
}

/// Sharp-bound rate for synthetic blocks of each size in `n_grid`, the block
/// duration being `N / rate_cps`.
pub fn finite_key_curve(
    rate_cps: f64,
    qber: f64,
    params: &SecurityParams,
    n_grid: &[u64],
) -> Result<Vec<CurvePoint>> {
    if !(rate_cps > 0.0) {
        return Err(Error::Domain(format!(
            "sifted rate must be positive, got {rate_cps}"
        )));
    }
    if n_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("block-size grid must be ascending".into()));
    }
    n_grid
        .iter()
        .map(|&n| {
            let duration = n as f64 / rate_cps;
            let block = SiftedBlock::synthetic(n, qber, duration, params)?;
            let r = sharp_key_length(&block, params)?;
            Ok(CurvePoint {
                n_total: n,
                duration,
                rate_bps: r.rate_bps,
                q_threshold: r.q_threshold.unwrap_or(1.0),
            })
        })
        .collect()
}

/// Log-spaced grid from `lo` to `hi` with `per_decade` points per decade.
pub fn log_grid(lo: u64, hi: u64, per_decade: usize) -> Vec<u64> {
    let (a, b) = ((lo.max(1) as f64).log10(), (hi.max(1) as f64).log10());
    let steps = ((b - a) * per_decade as f64).ceil().max(1.0) as usize;
    let mut grid: Vec<u64> = (0..=steps)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / steps as f64).round() as u64)
        .collect();
    grid.dedup();
    grid
}
