//! Satellite pass geometry for a circular orbit over a non-rotating Earth,
//! and extrapolation of a terrestrial sifted rate to per-pass key yields.
//!
//! For a pass whose closest approach has Earth central angle `beta`, the
//! central angle between station and sub-satellite point at time `t` from
//! closest approach is `cos(lambda) = cos(beta) cos(omega t)`, with `omega`
//! the orbital angular rate. Elevation follows from
//! `tan(el) = (cos(lambda) - Re/(Re+h)) / sin(lambda)`.
//!
//! Externally propagated tracks can be used instead through
//! [`PassTrack::from_table`].

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::keyrate::{sharp_key_length, KeyRateResult};
use crate::linkbudget::{beam_radius_at, collection_loss_db, db_to_transmittance, BeamParams};
use crate::security::{SecurityParams, SiftedBlock};

pub const EARTH_RADIUS_KM: f64 = 6371.0;
/// Earth's gravitational parameter, km^3/s^2.
pub const EARTH_MU: f64 = 398_600.441_8;
pub const DEFAULT_ALTITUDE_KM: f64 = 500.0;
pub const DEFAULT_MIN_ELEVATION_DEG: f64 = 20.0;
pub const DEFAULT_TIME_STEP_S: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassConfig {
    pub altitude_km: f64,
    pub max_elevation_deg: f64,
    /// Link is considered up at or above this elevation.
    pub min_elevation_deg: f64,
    pub time_step_s: f64,
}

impl PassConfig {
    pub fn new(max_elevation_deg: f64) -> Self {
        Self {
            altitude_km: DEFAULT_ALTITUDE_KM,
            max_elevation_deg,
            min_elevation_deg: DEFAULT_MIN_ELEVATION_DEG,
            time_step_s: DEFAULT_TIME_STEP_S,
        }
    }

    pub fn with_altitude(mut self, altitude_km: f64) -> Self {
        self.altitude_km = altitude_km;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.altitude_km > 0.0) {
            return Err(config_err("altitude_km", "must be positive"));
        }
        if !(self.max_elevation_deg <= 90.0) {
            return Err(config_err("max_elevation_deg", "must be at most 90"));
        }
        if !(self.min_elevation_deg >= 0.0 && self.min_elevation_deg < 90.0) {
            return Err(config_err("min_elevation_deg", "must lie in [0, 90)"));
        }
        if !(self.time_step_s > 0.0) {
            return Err(config_err("time_step_s", "must be positive"));
        }
        if self.max_elevation_deg < self.min_elevation_deg {
            return Err(Error::NoVisibility {
                max_elevation: self.max_elevation_deg,
                min_elevation: self.min_elevation_deg,
            });
        }
        Ok(())
    }

    /// Orbital angular rate, rad/s.
    pub fn angular_rate(&self) -> f64 {
        let r = EARTH_RADIUS_KM + self.altitude_km;
        (EARTH_MU / (r * r * r)).sqrt()
    }
}

/// Line-of-sight distance from the station to a satellite at `altitude_km`
/// seen at `elevation_deg`.
pub fn slant_range(elevation_deg: f64, altitude_km: f64) -> f64 {
    let e = elevation_deg.to_radians();
    let r = EARTH_RADIUS_KM + altitude_km;
    let c = EARTH_RADIUS_KM * e.cos();
    (r * r - c * c).sqrt() - EARTH_RADIUS_KM * e.sin()
}

/// Earth central angle between station and sub-satellite point at a given elevation.
pub fn central_angle(elevation_deg: f64, altitude_km: f64) -> f64 {
    let e = elevation_deg.to_radians();
    let rho = EARTH_RADIUS_KM / (EARTH_RADIUS_KM + altitude_km);
    (rho * e.cos()).acos() - e
}

/// Elevation for a given central angle.
pub fn elevation_at(central_angle: f64, altitude_km: f64) -> f64 {
    let rho = EARTH_RADIUS_KM / (EARTH_RADIUS_KM + altitude_km);
    (central_angle.cos() - rho)
        .atan2(central_angle.sin())
        .to_degrees()
}

/// Gate-to-gate visibility time from the closed form, s.
pub fn pass_duration(config: &PassConfig) -> Result<f64> {
    config.validate()?;
    let beta = central_angle(config.max_elevation_deg, config.altitude_km);
    let gate = central_angle(config.min_elevation_deg, config.altitude_km);
    let c = (gate.cos() / beta.cos()).clamp(-1.0, 1.0);
    Ok(2.0 * c.acos() / config.angular_rate())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    /// s since the first sample
    pub t: f64,
    pub elevation: f64,
}

/// Uniformly sampled elevation track.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassTrack {
    pub points: Vec<TrackPoint>,
    pub time_step: f64,
}

impl PassTrack {
    /// Wraps an externally computed `(t, elevation)` table. Times must be
    /// ascending with a constant step.
    pub fn from_table(points: Vec<TrackPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Domain("a track needs at least two samples".into()));
        }
        let step = points[1].t - points[0].t;
        if !(step > 0.0) {
            return Err(Error::Domain("track times must be ascending".into()));
        }
        for w in points.windows(2) {
            if ((w[1].t - w[0].t) - step).abs() > 1e-6 * step.max(1.0) {
                return Err(Error::Domain(
                    "track samples must be uniformly spaced".into(),
                ));
            }
        }
        Ok(Self {
            points,
            time_step: step,
        })
    }
}

/// Elevation samples at `time_step` while the satellite is above the gate,
/// symmetric about closest approach.
pub fn elevation_profile(config: &PassConfig) -> Result<PassTrack> {
    let half = pass_duration(config)? / 2.0;
    let beta = central_angle(config.max_elevation_deg, config.altitude_km);
    let omega = config.angular_rate();
    let k_half = (half / config.time_step_s + 1e-9).floor() as i64;
    let points = (-k_half..=k_half)
        .map(|k| {
            let dt = k as f64 * config.time_step_s;
            let lambda = (beta.cos() * (omega * dt).cos()).clamp(-1.0, 1.0).acos();
            TrackPoint {
                t: (k + k_half) as f64 * config.time_step_s,
                elevation: elevation_at(lambda, config.altitude_km),
            }
        })
        .collect();
    Ok(PassTrack {
        points,
        time_step: config.time_step_s,
    })
}

/// Link constants for extrapolating a terrestrial rate to orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassLink {
    pub beam: BeamParams,
    /// m
    pub receiver_radius: f64,
    /// dB on top of the geometric loss
    pub extra_loss_db: f64,
    /// Sifted pairs per second measured on a link with negligible geometric loss.
    pub baseline_rate: f64,
}

impl Default for PassLink {
    fn default() -> Self {
        Self {
            beam: BeamParams::cubesat_downlink(),
            receiver_radius: 0.4,
            extra_loss_db: 6.0,
            baseline_rate: 24_665.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassSample {
    pub t: f64,
    pub elevation: f64,
    pub slant_range: f64,
    pub loss_db: f64,
    pub sifted_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassProfile {
    pub samples: Vec<PassSample>,
    /// Span of the gated samples, s.
    pub duration: f64,
    /// Sum of `sifted_rate * time_step`.
    pub integrated_sifted: f64,
    pub time_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassOutcome {
    pub profile: PassProfile,
    /// Integrated sifted pairs rounded to a whole block size.
    pub n_total: u64,
    pub key: KeyRateResult,
}

/// Scales `link.baseline_rate` by the loss along the track, integrates the
/// sifted pairs above `min_elevation_deg` and evaluates the sharp finite-key
/// bound on the result, holding the error rate at `qber`.
pub fn extrapolate_pass(
    track: &PassTrack,
    altitude_km: f64,
    min_elevation_deg: f64,
    link: &PassLink,
    qber: f64,
    params: &SecurityParams,
) -> Result<PassOutcome> {
    link.beam.validate()?;
    if !(link.baseline_rate >= 0.0) {
        return Err(config_err("baseline_rate", "must be >= 0"));
    }
    let samples: Vec<PassSample> = track
        .points
        .iter()
        .filter(|p| p.elevation >= min_elevation_deg)
        .map(|p| {
            let range_km = slant_range(p.elevation, altitude_km);
            let loss_db = collection_loss_db(
                beam_radius_at(&link.beam, range_km * 1e3),
                link.receiver_radius,
            ) + link.extra_loss_db;
            PassSample {
                t: p.t,
                elevation: p.elevation,
                slant_range: range_km,
                loss_db,
                sifted_rate: link.baseline_rate * db_to_transmittance(loss_db),
            }
        })
        .collect();
    let duration = match (samples.first(), samples.last()) {
        (Some(f), Some(l)) => l.t - f.t,
        _ => 0.0,
    };
    let integrated_sifted: f64 = samples
        .iter()
        .map(|s| s.sifted_rate * track.time_step)
        .sum();
    let n_total = integrated_sifted.round() as u64;
    let block = SiftedBlock::synthetic(n_total, qber, duration, params)?;
    let key = sharp_key_length(&block, params)?;
    Ok(PassOutcome {
        profile: PassProfile {
            samples,
            duration,
            integrated_sifted,
            time_step: track.time_step,
        },
        n_total,
        key,
    })
}

/// Generates the pass for `config` and extrapolates it.
pub fn evaluate_pass(
    config: &PassConfig,
    link: &PassLink,
    qber: f64,
    params: &SecurityParams,
) -> Result<PassOutcome> {
    let track = elevation_profile(config)?;
    extrapolate_pass(
        &track,
        config.altitude_km,
        config.min_elevation_deg,
        link,
        qber,
        params,
    )
}

/// Circular-orbit altitude at which the pass described by `config` collects
/// `target_counts` sifted pairs, found by bisection over 200 to 2000 km.
/// Integrated counts fall monotonically with altitude over this range.
pub fn altitude_for_counts(
    target_counts: f64,
    config: &PassConfig,
    link: &PassLink,
) -> Result<f64> {
    let params = SecurityParams::default();
    let counts = |alt: f64| -> Result<f64> {
        Ok(
            evaluate_pass(&config.with_altitude(alt), link, 0.0, &params)?
                .profile
                .integrated_sifted,
        )
    };
    let (mut lo, mut hi) = (200.0, 2000.0);
    if !(counts(lo)? >= target_counts && counts(hi)? <= target_counts) {
        return Err(Error::Domain(format!(
            "{target_counts} counts not reachable between {lo} and {hi} km"
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if counts(mid)? > target_counts {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slant_range_values() {
        assert!((slant_range(90.0, 500.0) - 500.0).abs() < 1e-9);
        // mpmath: 1192.7971987277241, 2573.1303892340940
        assert!((slant_range(20.0, 500.0) - 1_192.797_198_727_724).abs() < 1e-8);
        assert!((slant_range(0.0, 500.0) - 2_573.130_389_234_094).abs() < 1e-8);
    }

    #[test]
    fn slant_range_law_of_cosines() {
        for el in [5.0, 20.0, 45.0, 70.0] {
            let d = slant_range(el, 500.0);
            let lambda = central_angle(el, 500.0);
            let r = EARTH_RADIUS_KM + 500.0;
            let d2 = EARTH_RADIUS_KM.powi(2) + r * r - 2.0 * EARTH_RADIUS_KM * r * lambda.cos();
            assert!((d - d2.sqrt()).abs() < 1e-6, "{el}");
            assert!((elevation_at(lambda, 500.0) - el).abs() < 1e-9);
        }
    }

    #[test]
    fn below_gate_has_no_visibility() {
        let err = elevation_profile(&PassConfig::new(10.0)).unwrap_err();
        assert!(matches!(err, Error::NoVisibility { .. }));
    }

    #[test]
    fn zenith_pass_peaks_at_ninety() {
        let track = elevation_profile(&PassConfig::new(90.0)).unwrap();
        let peak = track
            .points
            .iter()
            .map(|p| p.elevation)
            .fold(f64::MIN, f64::max);
        assert!((peak - 90.0).abs() < 1e-9);
        assert!(track.points.iter().all(|p| p.elevation >= 20.0));
    }

    #[test]
    fn zero_baseline_gives_nothing() {
        let link = PassLink {
            baseline_rate: 0.0,
            ..PassLink::default()
        };
        let out = evaluate_pass(
            &PassConfig::new(80.0),
            &link,
            0.0478,
            &SecurityParams::default(),
        )
        .unwrap();
        assert_eq!(out.n_total, 0);
        assert_eq!(out.key.rate_bps, 0.0);
    }

    #[test]
    fn table_hook() {
        let pts: Vec<TrackPoint> = (0..5)
            .map(|i| TrackPoint {
                t: i as f64 * 2.0,
                elevation: 30.0,
            })
            .collect();
        let track = PassTrack::from_table(pts.clone()).unwrap();
        assert_eq!(track.time_step, 2.0);
        let out = extrapolate_pass(
            &track,
            500.0,
            20.0,
            &PassLink::default(),
            0.0478,
            &SecurityParams::default(),
        )
        .unwrap();
        assert_eq!(out.profile.samples.len(), 5);
        assert_eq!(out.profile.duration, 8.0);
        let mut uneven = pts;
        uneven[3].t = 6.5;
        assert!(PassTrack::from_table(uneven).is_err());
    }
}
