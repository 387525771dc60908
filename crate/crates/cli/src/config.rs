//! Run configuration: TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use entlink_core::orbitpass::{
    DEFAULT_ALTITUDE_KM, DEFAULT_MIN_ELEVATION_DEG, DEFAULT_TIME_STEP_S,
};
use entlink_core::security::{DEFAULT_EPSILON, DEFAULT_F_EC, DEFAULT_SAMPLE_FRACTION};
use entlink_core::sift::DEFAULT_COINCIDENCE_WINDOW;
use entlink_core::sim::{CALIBRATED_QBER, CALIBRATED_SIFTED_RATE};
use entlink_core::{BeamParams, PassLink, PipelineConfig, SecurityParams, SimConfig, SyncParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::tagfile::TagFormat;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "ENTLINK_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    pub alice: Option<PathBuf>,
    pub bob: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Format of time-tag files written by `simulate`.
    pub tag_format: TagFormat,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            alice: None,
            bob: None,
            out_dir: PathBuf::from("out"),
            tag_format: TagFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub pair_rate: f64,
    pub arm_transmittance_a: f64,
    pub arm_transmittance_b: f64,
    pub intrinsic_qber: f64,
    pub background_rate_per_channel: f64,
    pub timing_jitter_sigma: f64,
    pub clock_offset: i64,
    pub clock_drift: f64,
    pub duration: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let c = SimConfig::calibrated();
        Self {
            pair_rate: c.pair_rate,
            arm_transmittance_a: c.arm_transmittance_a,
            arm_transmittance_b: c.arm_transmittance_b,
            intrinsic_qber: c.intrinsic_qber,
            background_rate_per_channel: c.background_rate_per_channel,
            timing_jitter_sigma: c.timing_jitter_sigma,
            clock_offset: c.clock_offset,
            clock_drift: c.clock_drift,
            duration: c.duration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiftSection {
    /// Coincidence half-window, ps.
    pub coincidence_window: i64,
    /// s
    pub block_len: f64,
    /// s
    pub aggregate_window: f64,
    pub sample_fraction: f64,
}

impl Default for SiftSection {
    fn default() -> Self {
        Self {
            coincidence_window: DEFAULT_COINCIDENCE_WINDOW,
            block_len: 1.0,
            aggregate_window: 300.0,
            sample_fraction: DEFAULT_SAMPLE_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeyrateSection {
    pub epsilon: f64,
    pub f_ec: f64,
    /// Sifted pairs per second for the finite-size curve.
    pub rate_cps: f64,
    pub qber: f64,
    pub n_min: u64,
    pub n_max: u64,
    pub points_per_decade: usize,
}

impl Default for KeyrateSection {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            f_ec: DEFAULT_F_EC,
            rate_cps: CALIBRATED_SIFTED_RATE,
            qber: CALIBRATED_QBER,
            n_min: 1_000,
            n_max: 10_000_000_000,
            points_per_decade: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    /// m
    pub wavelength: f64,
    /// m
    pub waist_radius: f64,
    pub m_squared: f64,
    /// m
    pub receiver_radius: f64,
    pub extra_loss_db: f64,
    /// Sifted pairs per second without geometric loss.
    pub baseline_rate: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        let l = PassLink::default();
        Self {
            wavelength: l.beam.wavelength,
            waist_radius: l.beam.waist_radius,
            m_squared: l.beam.m_squared,
            receiver_radius: l.receiver_radius,
            extra_loss_db: l.extra_loss_db,
            baseline_rate: l.baseline_rate,
        }
    }
}

impl LinkSection {
    pub fn pass_link(&self) -> PassLink {
        PassLink {
            beam: BeamParams {
                wavelength: self.wavelength,
                waist_radius: self.waist_radius,
                m_squared: self.m_squared,
            },
            receiver_radius: self.receiver_radius,
            extra_loss_db: self.extra_loss_db,
            baseline_rate: self.baseline_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PassEntry {
    pub label: String,
    pub max_elevation_deg: f64,
}

/// Picks the altitude at which one reference pass collects a given number
/// of sifted pairs, instead of using `altitude_km`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AltitudeCalibration {
    pub max_elevation_deg: f64,
    pub sifted_counts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassSection {
    pub altitude_km: f64,
    pub min_elevation_deg: f64,
    pub time_step_s: f64,
    pub qber: f64,
    pub calibrate: Option<AltitudeCalibration>,
    pub passes: Vec<PassEntry>,
}

impl Default for PassSection {
    fn default() -> Self {
        let passes = [
            ("10 April, 00:14", 76.0),
            ("11 April, 23:38", 47.0),
            ("12 April, 23:21", 32.0),
            ("16 April, 00:01", 80.0),
            ("16 April, 23:43", 52.0),
        ]
        .into_iter()
        .map(|(label, el)| PassEntry {
            label: label.to_string(),
            max_elevation_deg: el,
        })
        .collect();
        Self {
            altitude_km: DEFAULT_ALTITUDE_KM,
            min_elevation_deg: DEFAULT_MIN_ELEVATION_DEG,
            time_step_s: DEFAULT_TIME_STEP_S,
            qber: CALIBRATED_QBER,
            calibrate: None,
            passes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Report format.
    pub format: ReportFormat,
    pub io: IoConfig,
    pub simulate: SimulateSection,
    pub sync: SyncParams,
    pub sift: SiftSection,
    pub keyrate: KeyrateSection,
    pub link: LinkSection,
    pub pass: PassSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            format: ReportFormat::Csv,
            io: IoConfig::default(),
            simulate: SimulateSection::default(),
            sync: SyncParams::default(),
            sift: SiftSection::default(),
            keyrate: KeyrateSection::default(),
            link: LinkSection::default(),
            pass: PassSection::default(),
        }
    }
}

impl RunConfig {
    /// Reads a TOML config, or the `config` field of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let is_json = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            #[derive(Deserialize)]
            struct Replay {
                config: RunConfig,
            }
            serde_json::from_str::<Replay>(&text)
                .map(|r| r.config)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable")
    }

    pub fn security(&self) -> Result<SecurityParams, CliError> {
        let p = entlink_core::split_epsilon(self.keyrate.epsilon)?
            .with_f_ec(self.keyrate.f_ec)
            .with_sample_fraction(self.sift.sample_fraction);
        p.validate()?;
        Ok(p)
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.simulate;
        SimConfig {
            pair_rate: s.pair_rate,
            arm_transmittance_a: s.arm_transmittance_a,
            arm_transmittance_b: s.arm_transmittance_b,
            intrinsic_qber: s.intrinsic_qber,
            background_rate_per_channel: s.background_rate_per_channel,
            timing_jitter_sigma: s.timing_jitter_sigma,
            clock_offset: s.clock_offset,
            clock_drift: s.clock_drift,
            duration: s.duration,
            seed: self.seed,
        }
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig, CliError> {
        Ok(PipelineConfig {
            sync: self.sync,
            coincidence_window: self.sift.coincidence_window,
            block_len: self.sift.block_len,
            aggregate_window: self.sift.aggregate_window,
            security: self.security()?,
            seed: self.seed,
        })
    }
}
