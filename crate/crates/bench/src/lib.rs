//! Shared fixtures for the benchmarks in `benches/`.

use entlink_core::{generate_pair_streams, CorrelationModel, SimConfig, TimeTagStream};

/// Calibrated stream pair with a 3 ms offset and 5 ppm drift.
pub fn calibrated_streams(duration: f64) -> (TimeTagStream, TimeTagStream) {
    let cfg = SimConfig {
        duration,
        clock_offset: 3_000_000_000,
        clock_drift: 5.0,
        ..SimConfig::calibrated()
    };
    generate_pair_streams(&cfg, CorrelationModel::phi_minus()).expect("valid config")
}
