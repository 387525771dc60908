//! Free-space optical loss: Gaussian beam spreading, truncation by a
//! circular receiver aperture and a flat margin for tracking and atmosphere.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

/// Transmit beam at its waist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    /// m
    pub wavelength: f64,
    /// 1/e^2 intensity radius at the transmitter, m.
    pub waist_radius: f64,
    pub m_squared: f64,
}

impl BeamParams {
    /// 780 nm downlink from an 8 cm aperture (4 cm waist) with M^2 = 1.6.
    pub fn cubesat_downlink() -> Self {
        Self {
            wavelength: 780e-9,
            waist_radius: 0.04,
            m_squared: 1.6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > 0.0) {
            return Err(config_err("wavelength", "must be positive"));
        }
        if !(self.waist_radius > 0.0) {
            return Err(config_err("waist_radius", "must be positive"));
        }
        if !(self.m_squared >= 1.0) {
            return Err(config_err(
                "m_squared",
                format!("must be >= 1, got {}", self.m_squared),
            ));
        }
        Ok(())
    }

    /// Rayleigh range of the embedded beam, `pi w0^2 / (M^2 lambda)`, m.
    pub fn rayleigh_range(&self) -> f64 {
        PI * self.waist_radius * self.waist_radius / (self.m_squared * self.wavelength)
    }

    /// Far-field half-angle divergence, rad.
    pub fn divergence(&self) -> f64 {
        self.m_squared * self.wavelength / (PI * self.waist_radius)
    }
}

impl Default for BeamParams {
    fn default() -> Self {
        Self::cubesat_downlink()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    /// m
    pub range: f64,
    /// m
    pub receiver_radius: f64,
    /// Tracking and atmospheric margin, dB.
    pub extra_loss_db: f64,
}

impl LinkGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0) {
            return Err(config_err("range", "must be positive"));
        }
        if !(self.receiver_radius > 0.0) {
            return Err(config_err("receiver_radius", "must be positive"));
        }
        if !(self.extra_loss_db >= 0.0) {
            return Err(config_err("extra_loss_db", "must be >= 0"));
        }
        Ok(())
    }
}

/// 1/e^2 radius after propagating `range` metres.
pub fn beam_radius_at(beam: &BeamParams, range: f64) -> f64 {
    let w0 = beam.waist_radius;
    let spread = beam.m_squared * beam.wavelength * range / (PI * w0 * w0);
    w0 * (1.0 + spread * spread).sqrt()
}

/// Fraction of a Gaussian beam of radius `spot_radius` inside a centred
/// circular aperture of radius `receiver_radius`.
pub fn collection_efficiency(spot_radius: f64, receiver_radius: f64) -> f64 {
    let ratio = receiver_radius / spot_radius;
    -(-2.0 * ratio * ratio).exp_m1()
}

pub fn collection_loss_db(spot_radius: f64, receiver_radius: f64) -> f64 {
    transmittance_to_db(collection_efficiency(spot_radius, receiver_radius))
}

pub fn total_loss_db(beam: &BeamParams, geometry: &LinkGeometry) -> f64 {
    collection_loss_db(
        beam_radius_at(beam, geometry.range),
        geometry.receiver_radius,
    ) + geometry.extra_loss_db
}

pub fn db_to_transmittance(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

pub fn transmittance_to_db(t: f64) -> f64 {
    -10.0 * t.log10()
}

/// One row of a loss-versus-range table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRow {
    pub range_m: f64,
    pub spot_radius_m: f64,
    pub collection_loss_db: f64,
    pub total_loss_db: f64,
}

pub fn loss_table(
    beam: &BeamParams,
    receiver_radius: f64,
    extra_loss_db: f64,
    ranges: &[f64],
) -> Vec<LossRow> {
    ranges
        .iter()
        .map(|&range| {
            let w = beam_radius_at(beam, range);
            let coll = collection_loss_db(w, receiver_radius);
            LossRow {
                range_m: range,
                spot_radius_m: w,
                collection_loss_db: coll,
                total_loss_db: coll + extra_loss_db,
            }
        })
        .collect()
}
