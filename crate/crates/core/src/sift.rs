//! Coincidence search, basis sifting, sampled error estimation and block
//! aggregation.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::security::{SecurityParams, SiftedBlock};
use crate::sync::SyncResult;
use crate::types::{Basis, Channel, TimeTagStream, PS_PER_S};

/// Default coincidence half-window, ps.
pub const DEFAULT_COINCIDENCE_WINDOW: i64 = 1_000;
/// Smallest sifted block for which an error estimate is attempted.
pub const MIN_SIFTED_FOR_ESTIMATE: usize = 10;

/// One Alice detection matched with one Bob detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidencePair {
    pub t_alice: u64,
    /// Bob's detection time on Alice's clock, ps (rounded).
    pub t_bob: i64,
    pub ch_alice: Channel,
    pub ch_bob: Channel,
    pub basis_match: bool,
}

/// A matched-basis pair reduced to key bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiftedBit {
    /// Alice detection time, ps.
    pub t: u64,
    pub alice: bool,
    pub bob: bool,
}

impl SiftedBit {
    pub fn is_error(&self) -> bool {
        self.alice != self.bob
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberEstimate {
    pub qber_hat: f64,
    pub n_sampled: u64,
    pub n_errors: u64,
    /// One-sigma binomial half-width.
    pub ci_half_width: f64,
}

impl QberEstimate {
    fn from_counts(n_errors: u64, n_sampled: u64) -> Self {
        let qber_hat = if n_sampled == 0 {
            0.0
        } else {
            n_errors as f64 / n_sampled as f64
        };
        let ci_half_width = if n_sampled == 0 {
            0.0
        } else {
            (qber_hat * (1.0 - qber_hat) / n_sampled as f64).sqrt()
        };
        Self {
            qber_hat,
            n_sampled,
            n_errors,
            ci_half_width,
        }
    }
}

/// Pairs each Alice event with the closest unused Bob event within
/// `±window` ps after mapping Bob onto Alice's clock. Alice events are
/// visited in time order; ties go to the earlier Bob event.
pub fn find_coincidences(
    a: &TimeTagStream,
    b: &TimeTagStream,
    sync: &SyncResult,
    window: i64,
) -> Vec<CoincidencePair> {
    let window = window.max(0);
    // Mapping is monotone for positive clock scale, so order is preserved.
    let bob: Vec<(i64, Channel)> = b
        .events()
        .iter()
        .map(|e| {
            (
                sync.bob_to_alice(e.timestamp as f64).round() as i64,
                e.channel,
            )
        })
        .collect();
    let mut used = vec![false; bob.len()];
    let mut pairs = Vec::new();
    let mut start = 0usize;

    for ea in a.events() {
        let t = ea.timestamp as i64;
        while start < bob.len() && bob[start].0 < t - window {
            start += 1;
        }
        let mut best: Option<(usize, i64)> = None;
        for (j, &(tb, _)) in bob.iter().enumerate().skip(start) {
            if tb > t + window {
                break;
            }
            if used[j] {
                continue;
            }
            let d = (tb - t).abs();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            used[j] = true;
            let (tb, cb) = bob[j];
            pairs.push(CoincidencePair {
                t_alice: ea.timestamp,
                t_bob: tb,
                ch_alice: ea.channel,
                ch_bob: cb,
                basis_match: ea.channel.basis() == cb.basis(),
            });
        }
    }
    pairs
}

fn alice_bit(ch: Channel) -> bool {
    ch.bit()
}

/// Bob's X-basis bit is flipped so that the anti-correlated X outcomes of
/// the |Phi-> state give equal bits on an error-free channel.
fn bob_bit(ch: Channel) -> bool {
    match ch.basis() {
        Basis::Z => ch.bit(),
        Basis::X => !ch.bit(),
    }
}

/// Keeps matched-basis pairs and maps detectors to bits.
pub fn sift(pairs: &[CoincidencePair]) -> Vec<SiftedBit> {
    pairs
        .iter()
        .filter(|p| p.basis_match)
        .map(|p| SiftedBit {
            t: p.t_alice,
            alice: alice_bit(p.ch_alice),
            bob: bob_bit(p.ch_bob),
        })
        .collect()
}

/// Discloses a uniformly random `round(sample_fraction * N)` subset for
/// error estimation and returns the rest as key bits, in original order.
pub fn estimate_qber(
    sifted: &[SiftedBit],
    params: &SecurityParams,
    seed: u64,
) -> Result<(QberEstimate, Vec<SiftedBit>)> {
    if sifted.len() < MIN_SIFTED_FOR_ESTIMATE {
        return Err(Error::InsufficientData {
            available: sifted.len(),
            required: MIN_SIFTED_FOR_ESTIMATE,
        });
    }
    let n = sifted.len();
    let n_pe = params.pe_count(n as u64) as usize;
    let mut rng = seeded(seed);
    let mut disclosed = vec![false; n];
    for i in index::sample(&mut rng, n, n_pe) {
        disclosed[i] = true;
    }
    let n_errors = sifted
        .iter()
        .zip(&disclosed)
        .filter(|(bit, &d)| d && bit.is_error())
        .count() as u64;
    let key = sifted
        .iter()
        .zip(&disclosed)
        .filter(|(_, &d)| !d)
        .map(|(bit, _)| *bit)
        .collect();
    Ok((QberEstimate::from_counts(n_errors, n_pe as u64), key))
}

/// Splits sifted bits into consecutive `block_len`-second blocks starting at
/// `origin` (ps), samples each with seed `master_seed ^ block_index` and
/// returns one [`SiftedBlock`] per block up to `end` (ps). Blocks with too
/// few pairs for an estimate keep their count with an empty sample.
pub fn sift_into_blocks(
    sifted: &[SiftedBit],
    origin: u64,
    end: u64,
    block_len: f64,
    params: &SecurityParams,
    master_seed: u64,
) -> Result<Vec<SiftedBlock>> {
    if !(block_len > 0.0) {
        return Err(Error::Domain(format!(
            "block length must be positive, got {block_len}"
        )));
    }
    let block_ps = block_len * PS_PER_S;
    let n_blocks = (((end.saturating_sub(origin)) as f64 / block_ps).ceil() as usize).max(1);
    let mut blocks = Vec::with_capacity(n_blocks);
    let mut rest = sifted;
    for k in 0..n_blocks {
        let hi = origin as f64 + (k + 1) as f64 * block_ps;
        let cut = rest.partition_point(|s| (s.t as f64) < hi);
        let (this, tail) = rest.split_at(cut);
        rest = tail;
        let start = origin as f64 / PS_PER_S + k as f64 * block_len;
        let duration =
            block_len.min((end as f64 - (origin as f64 + k as f64 * block_ps)) / PS_PER_S);
        let block = match estimate_qber(this, params, derive_seed(master_seed, k as u64)) {
            Ok((est, _)) => SiftedBlock::from_sample(
                start,
                duration,
                this.len() as u64,
                est.n_sampled,
                est.n_errors,
            )?,
            Err(Error::InsufficientData { .. }) => {
                SiftedBlock::from_sample(start, duration, this.len() as u64, 0, 0)?
            }
            Err(e) => return Err(e),
        };
        blocks.push(block);
    }
    Ok(blocks)
}

/// Merges consecutive blocks into windows of `window` seconds measured from
/// the first block's start. Counts are summed and the error rate is the
/// pooled mismatch fraction of all samples.
pub fn aggregate_blocks(blocks: &[SiftedBlock], window: f64) -> Result<Vec<SiftedBlock>> {
    if !(window > 0.0) {
        return Err(Error::Domain(format!(
            "aggregation window must be positive, got {window}"
        )));
    }
    let Some(first) = blocks.first() else {
        return Ok(Vec::new());
    };
    let origin = first.start;
    let mut out: Vec<SiftedBlock> = Vec::new();
    let mut current: Option<(i64, SiftedBlock)> = None;
    for b in blocks {
        // small tolerance so that 300 one-second blocks land in one 300 s window
        let idx = ((b.start - origin) / window + 1e-9).floor() as i64;
        match &mut current {
            Some((ci, acc)) if *ci == idx => {
                acc.duration = b.end() - acc.start;
                acc.n_total += b.n_total;
                acc.n_pe += b.n_pe;
                acc.n_key += b.n_key;
                acc.pe_errors += b.pe_errors;
            }
            _ => {
                if let Some((_, done)) = current.take() {
                    out.push(done);
                }
                current = Some((idx, *b));
            }
        }
    }
    if let Some((_, done)) = current {
        out.push(done);
    }
    for b in &mut out {
        b.qber_hat = if b.n_pe == 0 {
            0.0
        } else {
            b.pe_errors as f64 / b.n_pe as f64
        };
    }
    Ok(out)
}
