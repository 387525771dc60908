//! Post-processing toolkit for entanglement-based (BBM92) quantum key
//! distribution.
//!
//! The crate covers the classical chain from raw time tags to a secret key
//! length: clock synchronisation ([`sync`]), coincidence sifting and error
//! estimation ([`sift`]), asymptotic and sharp finite-key rates
//! ([`keyrate`]). It also models a satellite downlink: Gaussian-beam loss
//! ([`linkbudget`]) and circular-orbit pass geometry ([`orbitpass`]). A
//! seeded Monte Carlo source ([`sim`]) stands in for laboratory data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod keyrate;
pub mod linkbudget;
pub mod orbitpass;
pub mod pipeline;
pub mod rng;
pub mod security;
pub mod sift;
pub mod sim;
pub mod sync;
pub mod types;

pub use error::{Error, Result};
pub use keyrate::{KeyRateResult, Regime};
pub use linkbudget::{BeamParams, LinkGeometry};
pub use orbitpass::{PassConfig, PassLink, PassOutcome, PassProfile};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineReport};
pub use security::{binary_entropy, split_epsilon, SecurityParams, SiftedBlock};
pub use sift::{CoincidencePair, QberEstimate, SiftedBit};
pub use sim::{generate_pair_streams, CorrelationModel, SimConfig};
pub use sync::{SyncParams, SyncResult};
pub use types::{Basis, Channel, DetectionEvent, Party, TimeTagStream};
