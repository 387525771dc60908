//! Shared domain types.
//!
//! Unit conventions used throughout the crate:
//! timestamps and offsets in integer picoseconds, durations in seconds,
//! losses in dB, angles in degrees, orbital distances in km and optical
//! distances in metres.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;

/// Measurement basis of a passive four-detector polarization analyser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Rectilinear, H/V.
    Z,
    /// Diagonal, D/A.
    X,
}

/// One of the four single-photon detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Channel {
    H = 0,
    V = 1,
    D = 2,
    A = 3,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::H, Channel::V, Channel::D, Channel::A];

    pub fn basis(self) -> Basis {
        match self {
            Channel::H | Channel::V => Basis::Z,
            Channel::D | Channel::A => Basis::X,
        }
    }

    /// Detector for outcome `bit` in `basis` (H/D are 0, V/A are 1).
    pub fn from_basis_bit(basis: Basis, bit: bool) -> Self {
        match (basis, bit) {
            (Basis::Z, false) => Channel::H,
            (Basis::Z, true) => Channel::V,
            (Basis::X, false) => Channel::D,
            (Basis::X, true) => Channel::A,
        }
    }

    /// Outcome bit in the detector's own basis (H/D are 0, V/A are 1).
    pub fn bit(self) -> bool {
        matches!(self, Channel::V | Channel::A)
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Channel::H),
            1 => Some(Channel::V),
            2 => Some(Channel::D),
            3 => Some(Channel::A),
            _ => None,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Channel::H => 'H',
            Channel::V => 'V',
            Channel::D => 'D',
            Channel::A => 'A',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_uppercase() {
            'H' => Some(Channel::H),
            'V' => Some(Channel::V),
            'D' => Some(Channel::D),
            'A' => Some(Channel::A),
            _ => None,
        }
    }
}

/// A single detection: picoseconds since the stream epoch plus the detector that fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub timestamp: u64,
    pub channel: Channel,
}

impl DetectionEvent {
    pub fn new(timestamp: u64, channel: Channel) -> Self {
        Self { timestamp, channel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

impl std::fmt::Display for Party {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Party::Alice => f.write_str("alice"),
            Party::Bob => f.write_str("bob"),
        }
    }
}

/// Time-ordered detections recorded by one party's time tagger.
///
/// Events are sorted by `(timestamp, channel)` and contain no duplicate
/// `(timestamp, channel)` pairs. The constructors enforce this; the event
/// vector is not publicly mutable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    party: Party,
    epoch_label: String,
    events: Vec<DetectionEvent>,
}

impl TimeTagStream {
    /// Builds a stream from events that must already be ordered and duplicate free.
    pub fn new(
        party: Party,
        epoch_label: impl Into<String>,
        events: Vec<DetectionEvent>,
    ) -> Result<Self> {
        if let Some(i) = events.windows(2).position(|w| w[1] <= w[0]) {
            let (p, q) = (events[i], events[i + 1]);
            let what = if p == q {
                "duplicate event"
            } else {
                "timestamps out of order"
            };
            return Err(Error::InvalidStream(format!(
                "{what} at index {}: {} ps ({:?}) then {} ps ({:?})",
                i + 1,
                p.timestamp,
                p.channel,
                q.timestamp,
                q.channel
            )));
        }
        Ok(Self {
            party,
            epoch_label: epoch_label.into(),
            events,
        })
    }

    /// Sorts and deduplicates arbitrary events.
    pub fn from_unsorted(
        party: Party,
        epoch_label: impl Into<String>,
        mut events: Vec<DetectionEvent>,
    ) -> Self {
        events.sort_unstable();
        events.dedup();
        Self {
            party,
            epoch_label: epoch_label.into(),
            events,
        }
    }

    pub fn empty(party: Party, epoch_label: impl Into<String>) -> Self {
        Self::from_unsorted(party, epoch_label, Vec::new())
    }

    pub fn party(&self) -> Party {
        self.party
    }

    pub fn epoch_label(&self) -> &str {
        &self.epoch_label
    }

    pub fn events(&self) -> &[DetectionEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<DetectionEvent> {
        self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn first_timestamp(&self) -> Option<u64> {
        self.events.first().map(|e| e.timestamp)
    }

    pub fn last_timestamp(&self) -> Option<u64> {
        self.events.last().map(|e| e.timestamp)
    }

    /// Events with `start <= timestamp < end`.
    pub fn window(&self, start: u64, end: u64) -> &[DetectionEvent] {
        slice_window(&self.events, start, end)
    }

    /// Detection counts per channel, indexed by channel code.
    pub fn channel_counts(&self) -> [u64; 4] {
        let mut counts = [0u64; 4];
        for e in &self.events {
            counts[e.channel.code() as usize] += 1;
        }
        counts
    }
}

/// Sub-slice of sorted `events` with `start <= timestamp < end`.
pub fn slice_window(events: &[DetectionEvent], start: u64, end: u64) -> &[DetectionEvent] {
    let lo = events.partition_point(|e| e.timestamp < start);
    let hi = events.partition_point(|e| e.timestamp < end);
    &events[lo..hi.max(lo)]
}

pub fn ps_to_s(ps: f64) -> f64 {
    ps / PS_PER_S
}

pub fn s_to_ps(s: f64) -> f64 {
    s * PS_PER_S
}
