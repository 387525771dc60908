//! Clock offset and drift recovery between two time-tag streams.
//!
//! Three stages:
//! 1. [`coarse_offset`] bins both streams and locates the circular
//!    cross-correlation peak with an FFT.
//! 2. [`fine_offset`] histograms arrival-time differences around the coarse
//!    lag at fine resolution and refines the peak by its centroid.
//! 3. [`track_drift`] repeats the fine measurement per segment and fits a
//!    linear clock model, iterating from coarse to fine bins.
//!
//! Clock model: `t_bob = offset + t_alice * (1 + drift * 1e-6)`, with
//! `offset` in ps at the Alice-frame epoch and `drift` in ppm.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, DiscreteCDF, Normal, Poisson};

use crate::error::{Error, Result};
use crate::types::{DetectionEvent, TimeTagStream, PS_PER_S};

pub const DEFAULT_COARSE_BIN: i64 = 1_000_000;
pub const DEFAULT_COARSE_SPAN: i64 = 1_000_000_000_000;
pub const DEFAULT_FINE_BIN: i64 = 1_000;
pub const DEFAULT_FINE_WINDOW: i64 = 10_000_000;
pub const DEFAULT_THRESHOLD_SIGMA: f64 = 6.0;
pub const DEFAULT_SEGMENT_S: f64 = 1.0;

/// Half-width, in bins, of the centroid window around the histogram maximum.
const CENTROID_HALF_WIDTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyncParams {
    /// Coarse correlation bin, ps.
    pub coarse_bin: i64,
    /// Largest offset searched by the coarse stage, ps.
    pub coarse_span: i64,
    /// Fine bin, ps.
    pub fine_bin: i64,
    /// Half-width of the fine search around the coarse lag, ps.
    pub fine_window: i64,
    /// Minimum peak significance in standard deviations.
    pub threshold_sigma: f64,
    /// Drift-tracking segment length, s.
    pub segment: f64,
}

impl Default for SyncParams {
    fn default() -> Self {
        Self {
            coarse_bin: DEFAULT_COARSE_BIN,
            coarse_span: DEFAULT_COARSE_SPAN,
            fine_bin: DEFAULT_FINE_BIN,
            fine_window: DEFAULT_FINE_WINDOW,
            threshold_sigma: DEFAULT_THRESHOLD_SIGMA,
            segment: DEFAULT_SEGMENT_S,
        }
    }
}

impl SyncParams {
    pub fn validate(&self) -> Result<()> {
        if self.coarse_bin < 1 || self.fine_bin < 1 {
            return Err(Error::Domain("bin widths must be >= 1 ps".into()));
        }
        if self.coarse_span < self.coarse_bin {
            return Err(Error::Domain(
                "coarse span must be at least one coarse bin".into(),
            ));
        }
        if self.fine_bin > self.coarse_bin {
            return Err(Error::Domain(
                "fine bin must not exceed the coarse bin".into(),
            ));
        }
        if self.fine_window < self.fine_bin {
            return Err(Error::Domain(
                "fine window must be at least one fine bin".into(),
            ));
        }
        if !(self.segment > 0.0) {
            return Err(Error::Domain("segment length must be positive".into()));
        }
        Ok(())
    }
}

/// Recovered clock relation between Bob and Alice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncResult {
    /// Bob minus Alice at the Alice-frame epoch, ps.
    pub offset: f64,
    /// Bob clock rate error, ppm.
    pub drift: f64,
    /// Peak height over the off-peak background, in standard deviations.
    pub peak_significance: f64,
    /// Resolution of the final measurement, ps.
    pub bin_width_fine: i64,
}

impl SyncResult {
    pub fn new(offset: f64, drift: f64) -> Self {
        Self {
            offset,
            drift,
            peak_significance: f64::INFINITY,
            bin_width_fine: 1,
        }
    }

    fn scale(&self) -> f64 {
        1.0 + self.drift * 1e-6
    }

    /// Expected Bob reading for an Alice timestamp.
    pub fn alice_to_bob(&self, t_alice: f64) -> f64 {
        self.offset + t_alice * self.scale()
    }

    /// Bob timestamp expressed on Alice's clock.
    pub fn bob_to_alice(&self, t_bob: f64) -> f64 {
        (t_bob - self.offset) / self.scale()
    }
}

/// Coarse-stage outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarsePeak {
    /// Bob minus Alice, a multiple of the bin width, ps.
    pub offset: i64,
    pub significance: f64,
}

/// Converts a peak count into a one-sided significance. The Poisson tail is
/// used for low background levels, where a Gaussian underestimates false
/// peaks; the empirical spread guards against over-dispersed backgrounds.
fn significance(peak: f64, mean: f64, std: f64) -> f64 {
    if mean <= 0.0 {
        return if peak > 0.0 { f64::INFINITY } else { 0.0 };
    }
    let gauss = (peak - mean) / mean.sqrt();
    let poisson = if peak <= mean {
        gauss
    } else {
        let k = peak.round().max(1.0) as u64;
        let tail = Poisson::new(mean).map(|p| p.sf(k - 1)).unwrap_or(0.0);
        if tail > 0.0 && tail < 0.5 {
            -Normal::standard().inverse_cdf(tail)
        } else {
            gauss
        }
    };
    let empirical = if std > 0.0 {
        (peak - mean) / std
    } else {
        f64::INFINITY
    };
    poisson.min(empirical)
}

fn background_stats(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut n, mut sum, mut sq) = (0.0, 0.0, 0.0);
    for v in values {
        n += 1.0;
        sum += v;
        sq += v * v;
    }
    if n == 0.0 {
        return (0.0, 0.0);
    }
    let mean = sum / n;
    (mean, (sq / n - mean * mean).max(0.0).sqrt())
}

/// Lags on each side of a candidate used for its local background.
const COARSE_BASELINE_HALF_WIDTH: usize = 512;
/// Lags next to a candidate left out of its background, wide enough for a
/// peak smeared by a few ppm of drift over the histogram span.
const COARSE_PEAK_HALF_WIDTH: usize = 16;

/// Sliding mean and spread of the correlation around each lag. Finite
/// streams give a slowly varying overlap baseline, so the background is
/// taken locally rather than over the whole search range.
struct LocalBaseline {
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl LocalBaseline {
    fn new(values: &[f64]) -> Self {
        let mut sum = Vec::with_capacity(values.len() + 1);
        let mut sq = Vec::with_capacity(values.len() + 1);
        let (mut s, mut q) = (0.0, 0.0);
        sum.push(0.0);
        sq.push(0.0);
        for v in values {
            s += v;
            q += v * v;
            sum.push(s);
            sq.push(q);
        }
        Self { sum, sq }
    }

    fn range(&self, lo: usize, hi: usize) -> (f64, f64, f64) {
        (
            (hi - lo) as f64,
            self.sum[hi] - self.sum[lo],
            self.sq[hi] - self.sq[lo],
        )
    }

    /// Mean and standard deviation of the neighbours of lag index `j`.
    fn around(&self, j: usize) -> (f64, f64) {
        let len = self.sum.len() - 1;
        let outer = (
            j.saturating_sub(COARSE_BASELINE_HALF_WIDTH),
            (j + COARSE_BASELINE_HALF_WIDTH + 1).min(len),
        );
        let inner = (
            j.saturating_sub(COARSE_PEAK_HALF_WIDTH),
            (j + COARSE_PEAK_HALF_WIDTH + 1).min(len),
        );
        let (n_o, s_o, q_o) = self.range(outer.0, outer.1);
        let (n_i, s_i, q_i) = self.range(inner.0, inner.1);
        let n = n_o - n_i;
        if n < 1.0 {
            return (0.0, 0.0);
        }
        let mean = (s_o - s_i) / n;
        let var = ((q_o - q_i) / n - mean * mean).max(0.0);
        (mean, var.sqrt())
    }
}

/// Returns the circular cross-correlation lag maximising the overlap of
/// binned event counts within `±search_span`.
pub fn coarse_offset(
    a: &[DetectionEvent],
    b: &[DetectionEvent],
    bin_width: i64,
    search_span: i64,
    threshold_sigma: f64,
) -> Result<CoarsePeak> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyStream);
    }
    if bin_width < 1 || search_span < bin_width {
        return Err(Error::Domain(format!(
            "need bin_width >= 1 and search_span >= bin_width, got {bin_width} and {search_span}"
        )));
    }
    let max_lag = (search_span / bin_width) as usize;
    let m = (2 * max_lag + 2).next_power_of_two().max(16);
    let t0 = a[0].timestamp.min(b[0].timestamp);
    let bin = bin_width as u64;

    let histogram = |events: &[DetectionEvent]| {
        let mut h = vec![Complex::new(0.0f64, 0.0); m];
        for e in events {
            let k = ((e.timestamp - t0) / bin) as usize;
            if k >= m {
                break;
            }
            h[k].re += 1.0;
        }
        h
    };
    let mut ha = histogram(a);
    let mut hb = histogram(b);

    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(m);
    forward.process(&mut ha);
    forward.process(&mut hb);
    for (x, y) in ha.iter().zip(hb.iter_mut()) {
        *y *= x.conj();
    }
    drop(ha);
    planner.plan_fft_inverse(m).process(&mut hb);
    let norm = 1.0 / m as f64;
    // corr[k] = sum_i a_i * b_{i+k}: Bob lags Alice by k bins.
    let corr_at = |lag: i64| -> f64 {
        let idx = lag.rem_euclid(m as i64) as usize;
        (hb[idx].re * norm).round().max(0.0)
    };

    let max_lag = max_lag as i64;
    let values: Vec<f64> = (-max_lag..=max_lag).map(corr_at).collect();
    let baseline = LocalBaseline::new(&values);
    let (mut best, mut best_score) = (0usize, f64::NEG_INFINITY);
    for (j, &v) in values.iter().enumerate() {
        let (mean, _) = baseline.around(j);
        let score = (v - mean) / mean.max(1.0).sqrt();
        let closer = (j as i64 - max_lag).abs() < (best as i64 - max_lag).abs();
        if score > best_score || (score == best_score && closer) {
            best_score = score;
            best = j;
        }
    }
    let (mean, std) = baseline.around(best);
    let sig = significance(values[best], mean, std);
    let best_lag = best as i64 - max_lag;
    if !(sig >= threshold_sigma) {
        return Err(Error::NoPeak {
            significance: sig,
            threshold: threshold_sigma,
        });
    }
    Ok(CoarsePeak {
        offset: best_lag * bin_width,
        significance: sig,
    })
}

/// Peak located in a delay histogram.
#[derive(Debug, Clone, Copy)]
struct PeakFit {
    /// Centroid, in bins from the histogram start.
    position: f64,
    significance: f64,
}

/// Delay histogram plus the sum of the exact delays (in bin units) falling
/// in each bin, so that the centroid is not quantised to bin centres.
struct DelayHistogram {
    counts: Vec<u32>,
    sums: Vec<f64>,
}

fn fit_peak(hist: &DelayHistogram) -> Option<PeakFit> {
    let counts = &hist.counts;
    let (peak_idx, &peak) = counts
        .iter()
        .enumerate()
        .max_by(|(i, x), (j, y)| x.cmp(y).then(j.cmp(i)))?;
    if peak == 0 {
        return None;
    }
    let lo = peak_idx.saturating_sub(CENTROID_HALF_WIDTH);
    let hi = (peak_idx + CENTROID_HALF_WIDTH + 1).min(counts.len());
    let (mean, std) = background_stats(
        counts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i < lo || *i >= hi)
            .map(|(_, &c)| c as f64),
    );
    // background is flat, so its expected delay sum in bin i is mean * (i + 0.5)
    let (mut w, mut wx) = (0.0, 0.0);
    for (i, (&c, &sum)) in counts.iter().zip(&hist.sums).enumerate().take(hi).skip(lo) {
        w += c as f64 - mean;
        wx += sum - mean * (i as f64 + 0.5);
    }
    let position = if w > 0.0 {
        (wx / w).clamp(lo as f64, hi as f64)
    } else {
        peak_idx as f64 + 0.5
    };
    Some(PeakFit {
        position,
        significance: significance(peak as f64, mean, std),
    })
}

/// Histogram of `t_bob - expected(t_alice)` over `[-window, window)` with
/// `bin`-wide bins. The Bob pointer only moves forward, so the cost is linear
/// in the number of events plus matches.
fn delay_histogram(
    a: &[DetectionEvent],
    b: &[DetectionEvent],
    expected: impl Fn(f64) -> f64,
    window: i64,
    bin: i64,
) -> DelayHistogram {
    let nbins = ((2 * window) / bin).max(1) as usize;
    let mut counts = vec![0u32; nbins];
    let mut sums = vec![0.0f64; nbins];
    let w = window as f64;
    let binf = bin as f64;
    let mut start = 0usize;
    for ea in a {
        let centre = expected(ea.timestamp as f64);
        let lo = centre - w;
        while start < b.len() && (b[start].timestamp as f64) < lo {
            start += 1;
        }
        for eb in &b[start..] {
            let d = eb.timestamp as f64 - lo;
            if d >= 2.0 * w {
                break;
            }
            let x = d / binf;
            let k = x as usize;
            if k < nbins {
                counts[k] += 1;
                sums[k] += x;
            }
        }
    }
    DelayHistogram { counts, sums }
}

/// Refines a coarse lag at `fine_bin` resolution within `±window`.
pub fn fine_offset(
    a: &[DetectionEvent],
    b: &[DetectionEvent],
    coarse: i64,
    fine_bin: i64,
    window: i64,
    threshold_sigma: f64,
) -> Result<SyncResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyStream);
    }
    if fine_bin < 1 || window < fine_bin {
        return Err(Error::Domain(format!(
            "need fine_bin >= 1 and window >= fine_bin, got {fine_bin} and {window}"
        )));
    }
    let hist = delay_histogram(a, b, |t| t + coarse as f64, window, fine_bin);
    let no_peak = |significance| Error::NoPeak {
        significance,
        threshold: threshold_sigma,
    };
    let fit = fit_peak(&hist).ok_or_else(|| no_peak(0.0))?;
    if !(fit.significance >= threshold_sigma) {
        return Err(no_peak(fit.significance));
    }
    Ok(SyncResult {
        offset: coarse as f64 - window as f64 + fit.position * fine_bin as f64,
        drift: 0.0,
        peak_significance: fit.significance,
        bin_width_fine: fine_bin,
    })
}

#[derive(Debug, Clone, Copy)]
struct SegmentPoint {
    /// Segment centre relative to the first Alice event, s.
    t: f64,
    /// Measured residual delay, ps.
    residual: f64,
    significance: f64,
}

/// Least-squares line `y = intercept + slope * x`.
fn fit_line(points: &[SegmentPoint]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.t).sum::<f64>() / n;
    let my = points.iter().map(|p| p.residual).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for p in points {
        sxy += (p.t - mx) * (p.residual - my);
        sxx += (p.t - mx) * (p.t - mx);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

fn predict(points: &[SegmentPoint], t: f64) -> f64 {
    match points.len() {
        0 => 0.0,
        1 => points[0].residual,
        _ => {
            let (c, s) = fit_line(points);
            c + s * t
        }
    }
}

/// Measures per-segment offsets relative to `initial` and fits a linear
/// drift. The first pass tracks segments sequentially with wide bins so that
/// an unmodelled drift is followed; later passes shrink the bin by ten each
/// time down to `params.fine_bin`, refitting the full model.
pub fn track_drift(
    a: &[DetectionEvent],
    b: &[DetectionEvent],
    initial: &SyncResult,
    params: &SyncParams,
) -> Result<SyncResult> {
    params.validate()?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyStream);
    }
    let seg_ps = params.segment * PS_PER_S;
    let t_first = a[0].timestamp as f64;
    let span = a[a.len() - 1].timestamp as f64 - t_first;
    let n_seg = ((span / seg_ps).floor() as usize + 1).max(1);

    let segments: Vec<&[DetectionEvent]> = (0..n_seg)
        .map(|k| {
            let lo = (t_first + k as f64 * seg_ps).ceil() as u64;
            let hi = (t_first + (k + 1) as f64 * seg_ps).ceil() as u64;
            crate::types::slice_window(a, lo, hi)
        })
        .collect();

    let mut model = SyncResult {
        bin_width_fine: params.fine_bin,
        ..*initial
    };
    let mut window = 2 * params.fine_window;
    let mut bin = (window / 10).max(params.fine_bin);
    let mut sequential = true;
    let mut finest_passes = 0;

    loop {
        let mut points: Vec<SegmentPoint> = Vec::with_capacity(n_seg);
        for (k, seg) in segments.iter().enumerate() {
            if seg.is_empty() {
                continue;
            }
            let t_mid = (k as f64 + 0.5) * params.segment;
            let shift = if sequential {
                predict(&points, t_mid)
            } else {
                0.0
            };
            let bstart = b.partition_point(|e| {
                (e.timestamp as f64)
                    < model.alice_to_bob(seg[0].timestamp as f64) + shift - window as f64
            });
            let hist = delay_histogram(
                seg,
                &b[bstart..],
                |t| model.alice_to_bob(t) + shift,
                window,
                bin,
            );
            if let Some(fit) = fit_peak(&hist) {
                if fit.significance >= params.threshold_sigma {
                    points.push(SegmentPoint {
                        t: t_mid,
                        residual: shift - window as f64 + fit.position * bin as f64,
                        significance: fit.significance,
                    });
                }
            }
        }
        if points.len() < 2 {
            return Err(Error::InsufficientSegments {
                found: points.len(),
            });
        }
        // residual(t) = c + s * (t_alice - t_first) / 1e12, t in seconds
        let (c, s) = fit_line(&points);
        let slope = s / PS_PER_S;
        model.offset += c - slope * t_first;
        model.drift += slope * 1e6;
        let mut sig: Vec<f64> = points.iter().map(|p| p.significance).collect();
        sig.sort_by(f64::total_cmp);
        model.peak_significance = sig[sig.len() / 2];

        sequential = false;
        if bin == params.fine_bin {
            finest_passes += 1;
            if finest_passes == 2 {
                break;
            }
        }
        let next = (bin / 10).max(params.fine_bin);
        window = (5 * bin).max(50 * next);
        bin = next;
    }
    Ok(model)
}

/// Full synchronisation: coarse search, then drift tracking. Streams
/// shorter than two segments are tracked over four shorter segments; if too
/// few of those lock, a single drift-free fine refinement is used.
pub fn synchronize(
    a: &TimeTagStream,
    b: &TimeTagStream,
    params: &SyncParams,
) -> Result<SyncResult> {
    params.validate()?;
    let (ea, eb) = (a.events(), b.events());
    let coarse = coarse_offset(
        ea,
        eb,
        params.coarse_bin,
        params.coarse_span,
        params.threshold_sigma,
    )?;
    let span = match (a.first_timestamp(), a.last_timestamp()) {
        (Some(f), Some(l)) => (l - f) as f64 / PS_PER_S,
        _ => return Err(Error::EmptyStream),
    };
    let tracking = if span >= 2.0 * params.segment {
        *params
    } else {
        SyncParams {
            segment: (span / 4.0).max(f64::MIN_POSITIVE),
            ..*params
        }
    };
    let initial = SyncResult {
        offset: coarse.offset as f64,
        drift: 0.0,
        peak_significance: coarse.significance,
        bin_width_fine: params.coarse_bin,
    };
    match track_drift(ea, eb, &initial, &tracking) {
        Err(Error::InsufficientSegments { .. }) if span < 2.0 * params.segment => fine_offset(
            ea,
            eb,
            coarse.offset,
            params.fine_bin,
            params.fine_window,
            params.threshold_sigma,
        ),
        other => other,
    }
}

/// Re-expresses Bob's stream on Alice's clock.
pub fn align(b: &TimeTagStream, sync: &SyncResult) -> TimeTagStream {
    let events = b
        .events()
        .iter()
        .filter_map(|e| {
            let t = sync.bob_to_alice(e.timestamp as f64).round();
            (t >= 0.0).then(|| DetectionEvent::new(t as u64, e.channel))
        })
        .collect();
    TimeTagStream::from_unsorted(b.party(), b.epoch_label(), events)
}
