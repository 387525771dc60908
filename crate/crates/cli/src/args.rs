//! Command-line flags. Every flag mirrors a config key and, when given,
//! overrides the value from the config file.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{AltitudeCalibration, PassEntry, ReportFormat, RunConfig, CONFIG_ENV};
use crate::tagfile::TagFormat;

#[derive(Debug, Parser)]
#[command(
    name = "entlink",
    version,
    about = "Entanglement-based QKD post-processing"
)]
pub struct Cli {
    /// TOML config file, or a run manifest to replay.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report format.
    #[arg(long, global = true, value_enum)]
    pub format: Option<ReportFormat>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a correlated Alice/Bob time-tag pair.
    Simulate(SimulateArgs),
    /// Synchronise, sift and evaluate key rates for two time-tag files.
    Pipeline(PipelineArgs),
    /// Finite-size key-rate curve over a range of block sizes.
    Keyrate(KeyrateArgs),
    /// Expected key per satellite pass.
    Pass(PassArgs),
    /// Convert a time-tag file between binary and CSV.
    Convert {
        input: PathBuf,
        /// Output path; `.csv` selects CSV, anything else binary.
        output: PathBuf,
    },
    /// Print the effective configuration as TOML.
    ShowConfig,
}

#[derive(Debug, Args, Default)]
pub struct SimulateArgs {
    #[arg(long)]
    pub pair_rate: Option<f64>,
    #[arg(long)]
    pub arm_transmittance_a: Option<f64>,
    #[arg(long)]
    pub arm_transmittance_b: Option<f64>,
    #[arg(long)]
    pub intrinsic_qber: Option<f64>,
    #[arg(long)]
    pub background_rate_per_channel: Option<f64>,
    /// ps
    #[arg(long)]
    pub timing_jitter_sigma: Option<f64>,
    /// ps
    #[arg(long, allow_hyphen_values = true)]
    pub clock_offset: Option<i64>,
    /// ppm
    #[arg(long, allow_hyphen_values = true)]
    pub clock_drift: Option<f64>,
    /// s
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, value_enum)]
    pub tag_format: Option<TagFormat>,
}

#[derive(Debug, Args, Default)]
pub struct SecurityArgs {
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub f_ec: Option<f64>,
    #[arg(long)]
    pub sample_fraction: Option<f64>,
}

#[derive(Debug, Args, Default)]
pub struct PipelineArgs {
    #[arg(long)]
    pub alice: Option<PathBuf>,
    #[arg(long)]
    pub bob: Option<PathBuf>,
    /// Coincidence half-window, ps.
    #[arg(long)]
    pub coincidence_window: Option<i64>,
    /// s
    #[arg(long)]
    pub block_len: Option<f64>,
    /// s
    #[arg(long)]
    pub aggregate_window: Option<f64>,
    #[arg(long)]
    pub coarse_bin: Option<i64>,
    #[arg(long)]
    pub coarse_span: Option<i64>,
    #[arg(long)]
    pub fine_bin: Option<i64>,
    #[arg(long)]
    pub fine_window: Option<i64>,
    #[arg(long)]
    pub threshold_sigma: Option<f64>,
    /// Drift-tracking segment, s.
    #[arg(long)]
    pub segment: Option<f64>,
    #[command(flatten)]
    pub security: SecurityArgs,
}

#[derive(Debug, Args, Default)]
pub struct KeyrateArgs {
    #[arg(long)]
    pub rate_cps: Option<f64>,
    #[arg(long)]
    pub qber: Option<f64>,
    #[arg(long)]
    pub n_min: Option<u64>,
    #[arg(long)]
    pub n_max: Option<u64>,
    #[arg(long)]
    pub points_per_decade: Option<usize>,
    #[command(flatten)]
    pub security: SecurityArgs,
}

#[derive(Debug, Args, Default)]
pub struct PassArgs {
    #[arg(long)]
    pub altitude_km: Option<f64>,
    #[arg(long)]
    pub min_elevation_deg: Option<f64>,
    #[arg(long)]
    pub time_step_s: Option<f64>,
    #[arg(long)]
    pub qber: Option<f64>,
    /// Maximum elevations to evaluate; replaces the configured pass list.
    #[arg(long, value_delimiter = ',')]
    pub elevation: Vec<f64>,
    /// Fit the altitude so the pass at this maximum elevation collects
    /// `--calibrate-counts` sifted pairs.
    #[arg(long, requires = "calibrate_counts")]
    pub calibrate_elevation: Option<f64>,
    #[arg(long, requires = "calibrate_elevation")]
    pub calibrate_counts: Option<f64>,
    #[arg(long)]
    pub wavelength: Option<f64>,
    #[arg(long)]
    pub waist_radius: Option<f64>,
    #[arg(long)]
    pub m_squared: Option<f64>,
    #[arg(long)]
    pub receiver_radius: Option<f64>,
    #[arg(long)]
    pub extra_loss_db: Option<f64>,
    #[arg(long)]
    pub baseline_rate: Option<f64>,
    #[command(flatten)]
    pub security: SecurityArgs,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl SecurityArgs {
    fn apply(&self, c: &mut RunConfig) {
        set(&mut c.keyrate.epsilon, self.epsilon);
        set(&mut c.keyrate.f_ec, self.f_ec);
        set(&mut c.sift.sample_fraction, self.sample_fraction);
    }
}

impl Cli {
    /// Applies global and subcommand flags on top of `c`.
    pub fn apply(&self, c: &mut RunConfig) {
        set(&mut c.seed, self.seed);
        set(&mut c.format, self.format);
        set(&mut c.io.out_dir, self.out_dir.clone());
        match &self.command {
            Command::Simulate(a) => {
                let s = &mut c.simulate;
                set(&mut s.pair_rate, a.pair_rate);
                set(&mut s.arm_transmittance_a, a.arm_transmittance_a);
                set(&mut s.arm_transmittance_b, a.arm_transmittance_b);
                set(&mut s.intrinsic_qber, a.intrinsic_qber);
                set(
                    &mut s.background_rate_per_channel,
                    a.background_rate_per_channel,
                );
                set(&mut s.timing_jitter_sigma, a.timing_jitter_sigma);
                set(&mut s.clock_offset, a.clock_offset);
                set(&mut s.clock_drift, a.clock_drift);
                set(&mut s.duration, a.duration);
                set(&mut c.io.tag_format, a.tag_format);
            }
            Command::Pipeline(a) => {
                if a.alice.is_some() {
                    c.io.alice = a.alice.clone();
                }
                if a.bob.is_some() {
                    c.io.bob = a.bob.clone();
                }
                set(&mut c.sift.coincidence_window, a.coincidence_window);
                set(&mut c.sift.block_len, a.block_len);
                set(&mut c.sift.aggregate_window, a.aggregate_window);
                set(&mut c.sync.coarse_bin, a.coarse_bin);
                set(&mut c.sync.coarse_span, a.coarse_span);
                set(&mut c.sync.fine_bin, a.fine_bin);
                set(&mut c.sync.fine_window, a.fine_window);
                set(&mut c.sync.threshold_sigma, a.threshold_sigma);
                set(&mut c.sync.segment, a.segment);
                a.security.apply(c);
            }
            Command::Keyrate(a) => {
                let k = &mut c.keyrate;
                set(&mut k.rate_cps, a.rate_cps);
                set(&mut k.qber, a.qber);
                set(&mut k.n_min, a.n_min);
                set(&mut k.n_max, a.n_max);
                set(&mut k.points_per_decade, a.points_per_decade);
                a.security.apply(c);
            }
            Command::Pass(a) => {
                let p = &mut c.pass;
                set(&mut p.altitude_km, a.altitude_km);
                set(&mut p.min_elevation_deg, a.min_elevation_deg);
                set(&mut p.time_step_s, a.time_step_s);
                set(&mut p.qber, a.qber);
                if !a.elevation.is_empty() {
                    p.passes = a
                        .elevation
                        .iter()
                        .enumerate()
                        .map(|(i, &el)| PassEntry {
                            label: format!("pass-{}", i + 1),
                            max_elevation_deg: el,
                        })
                        .collect();
                }
                if let (Some(el), Some(n)) = (a.calibrate_elevation, a.calibrate_counts) {
                    p.calibrate = Some(AltitudeCalibration {
                        max_elevation_deg: el,
                        sifted_counts: n,
                    });
                }
                let l = &mut c.link;
                set(&mut l.wavelength, a.wavelength);
                set(&mut l.waist_radius, a.waist_radius);
                set(&mut l.m_squared, a.m_squared);
                set(&mut l.receiver_radius, a.receiver_radius);
                set(&mut l.extra_loss_db, a.extra_loss_db);
                set(&mut l.baseline_rate, a.baseline_rate);
                a.security.apply(c);
            }
            Command::Convert { .. } | Command::ShowConfig => {}
        }
    }
}
