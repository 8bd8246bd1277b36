//! Sensor-domain types shared across the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tactile sensor family mounted on the fingertips.
///
/// The two variants differ in array size and rates:
///
/// * `BioTac` — 19 electrodes; electrodes, pressure and temperature sampled
///   at 100 Hz; the AC pressure channel acquired at 2.2 kHz and delivered as
///   a batch of 22 samples inside each 100 Hz frame.
/// * `BioTacSp` — 22 electrodes; electrodes and DC pressure at 1 kHz,
///   temperature lags behind; the AC channel acquired near 4.5 kHz and
///   delivered as 5 samples per 1 kHz frame (the nominal 4.545 kHz stream
///   does not divide the frame rate evenly, so the simulator rounds the
///   batch up to 5 and synthesizes at exactly 5 kHz).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SensorVariant {
    #[serde(rename = "biotac")]
    BioTac,
    #[serde(rename = "biotac_sp")]
    BioTacSp,
}

impl SensorVariant {
    pub fn electrode_count(self) -> usize {
        match self {
            SensorVariant::BioTac => 19,
            SensorVariant::BioTacSp => 22,
        }
    }

    /// Frame rate of the full sensor record (electrodes + pressures), Hz.
    pub fn frame_rate_hz(self) -> f64 {
        match self {
            SensorVariant::BioTac => 100.0,
            SensorVariant::BioTacSp => 1000.0,
        }
    }

    /// Number of AC-pressure samples delivered inside one frame.
    pub fn p_ac_batch(self) -> usize {
        match self {
            SensorVariant::BioTac => 22,
            SensorVariant::BioTacSp => 5,
        }
    }

    /// Effective sample rate of the concatenated AC stream, Hz.
    pub fn p_ac_rate_hz(self) -> f64 {
        self.frame_rate_hz() * self.p_ac_batch() as f64
    }

    /// Physics ticks (at `dt`) between successive sensor frames.
    pub fn ticks_per_frame(self, dt: f64) -> usize {
        let ticks = 1.0 / (self.frame_rate_hz() * dt);
        ticks.round().max(1.0) as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SensorVariant::BioTac => "biotac",
            SensorVariant::BioTacSp => "biotac_sp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "biotac" => Ok(SensorVariant::BioTac),
            "biotac_sp" => Ok(SensorVariant::BioTacSp),
            other => Err(Error::validation(format!(
                "unknown sensor variant '{other}' (expected 'biotac' or 'biotac_sp')"
            ))),
        }
    }
}

/// Contact condition of one fingertip, as predicted or labeled.
///
/// The discriminant order is the tie-break order for classifier argmax:
/// when probabilities tie exactly, the earlier class wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "slip")]
    Slip = 0,
    #[serde(rename = "contact")]
    Contact = 1,
    #[serde(rename = "no_contact")]
    NoContact = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Slip, Label::Contact, Label::NoContact];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Slip => "slip",
            Label::Contact => "contact",
            Label::NoContact => "no_contact",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "slip" => Ok(Label::Slip),
            "contact" => Ok(Label::Contact),
            "no_contact" => Ok(Label::NoContact),
            other => Err(Error::validation(format!("unknown label '{other}'"))),
        }
    }
}

/// One sensor frame from one fingertip.
///
/// `t` counts sensor frames from the start of the stream (not physics
/// ticks). `p_ac` holds the within-frame batch of the high-rate pressure
/// channel; its length and the electrode count are fixed by `variant`.
/// Values are raw sensor units including the per-trial offset; grounding
/// (baseline subtraction) happens downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorFrame {
    pub t: u64,
    pub finger: usize,
    pub variant: SensorVariant,
    pub p_dc: f64,
    pub p_ac: Vec<f64>,
    pub electrodes: Vec<f64>,
    pub t_dc: f64,
    pub t_ac: f64,
}

impl SensorFrame {
    /// Check array lengths against the variant. Frames constructed by the
    /// simulator always pass; frames deserialized from disk might not.
    pub fn validate(&self) -> Result<()> {
        if self.p_ac.len() != self.variant.p_ac_batch() {
            return Err(Error::validation(format!(
                "frame t={} finger={}: p_ac batch {} does not match variant {} (expected {})",
                self.t,
                self.finger,
                self.p_ac.len(),
                self.variant.name(),
                self.variant.p_ac_batch()
            )));
        }
        if self.electrodes.len() != self.variant.electrode_count() {
            return Err(Error::validation(format!(
                "frame t={} finger={}: {} electrodes does not match variant {} (expected {})",
                self.t,
                self.finger,
                self.electrodes.len(),
                self.variant.name(),
                self.variant.electrode_count()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_geometry_is_fixed() {
        assert_eq!(SensorVariant::BioTac.electrode_count(), 19);
        assert_eq!(SensorVariant::BioTac.p_ac_batch(), 22);
        assert_eq!(SensorVariant::BioTac.frame_rate_hz(), 100.0);
        assert_eq!(SensorVariant::BioTacSp.electrode_count(), 22);
        assert_eq!(SensorVariant::BioTacSp.p_ac_batch(), 5);
        assert_eq!(SensorVariant::BioTacSp.frame_rate_hz(), 1000.0);
    }

    #[test]
    fn ticks_per_frame_at_default_dt() {
        assert_eq!(SensorVariant::BioTac.ticks_per_frame(0.001), 10);
        assert_eq!(SensorVariant::BioTacSp.ticks_per_frame(0.001), 1);
    }

    #[test]
    fn label_tie_break_order() {
        assert_eq!(Label::Slip.index(), 0);
        assert_eq!(Label::Contact.index(), 1);
        assert_eq!(Label::NoContact.index(), 2);
    }

    #[test]
    fn label_serde_names() {
        assert_eq!(serde_json::to_string(&Label::NoContact).unwrap(), "\"no_contact\"");
        assert_eq!(Label::parse("slip").unwrap(), Label::Slip);
        assert!(Label::parse("sliding").is_err());
    }

    #[test]
    fn frame_validation_catches_mismatched_arrays() {
        let frame = SensorFrame {
            t: 0,
            finger: 0,
            variant: SensorVariant::BioTac,
            p_dc: 0.0,
            p_ac: vec![0.0; 5],
            electrodes: vec![0.0; 19],
            t_dc: 25.0,
            t_ac: 0.0,
        };
        assert!(frame.validate().is_err());
    }
}
