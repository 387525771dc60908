//! Offline post-processing chain: synchronise, pair, sift, estimate the
//! error rate per block, aggregate and evaluate key rates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyrate::{asymptotic_key_length, sharp_key_length, KeyRateResult};
use crate::security::{SecurityParams, SiftedBlock};
use crate::sift::{
    aggregate_blocks, find_coincidences, sift, sift_into_blocks, DEFAULT_COINCIDENCE_WINDOW,
};
use crate::sync::{synchronize, SyncParams, SyncResult};
use crate::types::TimeTagStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub sync: SyncParams,
    /// Coincidence half-window, ps.
    pub coincidence_window: i64,
    /// Sampling block length, s.
    pub block_len: f64,
    /// Aggregation window for finite-key evaluation, s.
    pub aggregate_window: f64,
    pub security: SecurityParams,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sync: SyncParams::default(),
            coincidence_window: DEFAULT_COINCIDENCE_WINDOW,
            block_len: 1.0,
            aggregate_window: 300.0,
            security: SecurityParams::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub block: SiftedBlock,
    pub asymptotic: KeyRateResult,
    pub sharp: KeyRateResult,
}

impl BlockReport {
    fn evaluate(block: SiftedBlock, params: &SecurityParams) -> Result<Self> {
        Ok(Self {
            block,
            asymptotic: asymptotic_key_length(&block, params),
            sharp: sharp_key_length(&block, params)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub report: BlockReport,
    /// Unweighted mean of the per-block error rates inside the window.
    pub mean_block_qber: f64,
    /// Sharp bound evaluated with `mean_block_qber` instead of the pooled rate.
    pub sharp_with_mean_block_qber: KeyRateResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub sync: SyncResult,
    pub n_alice: usize,
    pub n_bob: usize,
    pub n_coincidences: usize,
    pub n_sifted: usize,
    /// Span covered by the blocks, s.
    pub duration: f64,
    pub blocks: Vec<BlockReport>,
    pub aggregates: Vec<AggregateReport>,
}

impl PipelineReport {
    pub fn sifted_rate(&self) -> f64 {
        if self.duration > 0.0 {
            self.n_sifted as f64 / self.duration
        } else {
            0.0
        }
    }

    /// Mean and sample standard deviation of the per-block error rates,
    /// over full-length blocks that carried a sample.
    pub fn block_qber_stats(&self) -> (f64, f64) {
        let full = self.blocks.first().map_or(0.0, |b| b.block.duration);
        let q: Vec<f64> = self
            .blocks
            .iter()
            .filter(|b| b.block.n_pe > 0 && b.block.duration >= full - 1e-9)
            .map(|b| b.block.qber_hat)
            .collect();
        mean_std(&q)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn run_pipeline(
    a: &TimeTagStream,
    b: &TimeTagStream,
    config: &PipelineConfig,
) -> Result<PipelineReport> {
    config.security.validate()?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyStream);
    }
    let sync = synchronize(a, b, &config.sync)?;
    let pairs = find_coincidences(a, b, &sync, config.coincidence_window);
    let bits = sift(&pairs);

    let origin = a.first_timestamp().unwrap_or(0);
    let end = a.last_timestamp().unwrap_or(0) + 1;
    let blocks = sift_into_blocks(
        &bits,
        origin,
        end,
        config.block_len,
        &config.security,
        config.seed,
    )?;
    let duration = blocks.iter().map(|b| b.duration).sum();

    let block_reports = blocks
        .iter()
        .map(|b| BlockReport::evaluate(*b, &config.security))
        .collect::<Result<Vec<_>>>()?;

    let mut aggregates = Vec::new();
    for agg in aggregate_blocks(&blocks, config.aggregate_window)? {
        let inside: Vec<f64> = blocks
            .iter()
            .filter(|b| b.start >= agg.start - 1e-9 && b.end() <= agg.end() + 1e-9 && b.n_pe > 0)
            .map(|b| b.qber_hat)
            .collect();
        let (mean_block_qber, _) = mean_std(&inside);
        let alt = SiftedBlock {
            qber_hat: mean_block_qber,
            ..agg
        };
        aggregates.push(AggregateReport {
            report: BlockReport::evaluate(agg, &config.security)?,
            mean_block_qber,
            sharp_with_mean_block_qber: sharp_key_length(&alt, &config.security)?,
        });
    }

    Ok(PipelineReport {
        sync,
        n_alice: a.len(),
        n_bob: b.len(),
        n_coincidences: pairs.len(),
        n_sifted: bits.len(),
        duration,
        blocks: block_reports,
        aggregates,
    })
}
