//! Synthetic fingertip tactile sensing.
//!
//! Each fingertip produces, per frame:
//!
//! * `p_dc` — a slow pressure channel: proportional to normal force on top
//!   of a large per-stream resting offset, plus noise. Consumers ground it
//!   against a contact-free reference before thresholding.
//! * `p_ac` — a short batch of high-rate vibration samples. At rest it is
//!   white noise at a fixed floor; sliding contact injects high-frequency
//!   energy that grows with slip speed and normal force, and contact
//!   make/break adds a decaying transient burst.
//! * `electrodes` — an impedance array with per-stream offsets, a smooth
//!   spatial bump that scales with normal force, and a small odd-symmetric
//!   deflection under tangential load.
//! * `t_dc` / `t_ac` — slow and fast thermal channels, carried for schema
//!   completeness (near-constant here).
//!
//! A [`SensorSim`] owns one finger's stream: its private RNG, resting
//! offsets, and transient state. Two sims built from the same seeded RNG
//! replay identical streams for identical contact histories.

use rand::RngExt;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::physics::ContactState;
use crate::types::{SensorFrame, SensorVariant};

/// Pressure units per newton of normal force on `p_dc`.
pub const GAIN_DC_UNITS_PER_N: f64 = 10.0;

/// Grounded `p_dc` above this is treated as contact by the auto-labeler and
/// the controllers' force estimate (0.6 N equivalent — roughly 7 sigma of
/// grounded sensor noise, so a re-approaching finger parks at a touch well
/// below any object's deformation budget).
pub const CONTACT_THRESHOLD_UNITS: f64 = 6.0;

/// Vibration floor amplitude at rest.
const AC_FLOOR: f64 = 1.0;

/// Extra vibration amplitude per (m/s of slip x N of normal force).
const AC_SLIP_GAIN: f64 = 400.0;

/// Transient burst amplitude added on contact make/break.
const TRANSIENT_AMP: f64 = 8.0;

/// Transient burst decay time constant, seconds.
const TRANSIENT_TAU_S: f64 = 0.005;

const DC_NOISE: f64 = 0.6;
const ELECTRODE_GAIN_UNITS_PER_N: f64 = 3.0;
const ELECTRODE_ASYM_UNITS_PER_N: f64 = 2.0;
const ELECTRODE_NOISE: f64 = 0.5;
const T_DC_MEAN: f64 = 25.0;

/// One finger's tactile stream.
#[derive(Debug, Clone)]
pub struct SensorSim {
    variant: SensorVariant,
    finger: usize,
    rng: ChaCha8Rng,
    /// Resting `p_dc` level for this stream (electronics offset).
    baseline: f64,
    electrode_offsets: Vec<f64>,
    /// Center of the spatial sensitivity bump, in electrode index units.
    profile_center: f64,
    /// Remaining make/break transient amplitude.
    transient: f64,
    prev_in_contact: bool,
    /// Latent sample for the high-passed (first-difference) vibration term.
    prev_latent: f64,
    frame_index: u64,
}

impl SensorSim {
    /// Build a stream; all per-stream offsets are drawn from `rng` up
    /// front, in a fixed order.
    pub fn new(variant: SensorVariant, finger: usize, mut rng: ChaCha8Rng) -> SensorSim {
        let baseline = rng.random_range(1800.0..2200.0);
        let count = variant.electrode_count();
        let electrode_offsets = (0..count)
            .map(|_| rng.random_range(-20.0..20.0))
            .collect();
        let profile_center = rng.random_range(0.0..count as f64);
        let prev_latent = {
            let unit = Normal::new(0.0, 1.0).unwrap();
            unit.sample(&mut rng)
        };
        SensorSim {
            variant,
            finger,
            rng,
            baseline,
            electrode_offsets,
            profile_center,
            transient: 0.0,
            prev_in_contact: false,
            prev_latent,
            frame_index: 0,
        }
    }

    pub fn variant(&self) -> SensorVariant {
        self.variant
    }

    /// Resting `p_dc` level (useful for tests; real consumers ground
    /// against an observed contact-free frame instead).
    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    /// Produce the next frame from this tick's contact state.
    pub fn sample(&mut self, contact: &ContactState) -> SensorFrame {
        let unit = Normal::new(0.0, 1.0).unwrap();
        let force = contact.normal_force_n.max(0.0);

        let p_dc =
            self.baseline + GAIN_DC_UNITS_PER_N * force + DC_NOISE * unit.sample(&mut self.rng);

        if contact.in_contact != self.prev_in_contact {
            self.transient += TRANSIENT_AMP;
            self.prev_in_contact = contact.in_contact;
        }
        let batch = self.variant.p_ac_batch();
        let sample_rate = self.variant.p_ac_rate_hz();
        let decay = (-1.0 / (sample_rate * TRANSIENT_TAU_S)).exp();
        // Choose the extra high-frequency amplitude so the total RMS is the
        // floor plus a term linear in slip power.
        let slip_power = contact.slip_speed_mps.abs() * force;
        let target_rms = AC_FLOOR + AC_SLIP_GAIN * slip_power;
        let diff_amp = (target_rms * target_rms - AC_FLOOR * AC_FLOOR).max(0.0).sqrt();
        let mut p_ac = Vec::with_capacity(batch);
        for _ in 0..batch {
            let floor = AC_FLOOR * unit.sample(&mut self.rng);
            let latent = unit.sample(&mut self.rng);
            // First difference of a white latent: zero mean, unit variance,
            // spectrum tilted to the top of the band.
            let high_passed = (latent - self.prev_latent) / std::f64::consts::SQRT_2;
            self.prev_latent = latent;
            let burst = self.transient * unit.sample(&mut self.rng);
            self.transient *= decay;
            p_ac.push(floor + diff_amp * high_passed + burst);
        }

        let count = self.variant.electrode_count();
        let half_span = (count as f64 - 1.0) / 2.0;
        let sigma = count as f64 / 4.0;
        let electrodes = (0..count)
            .map(|e| {
                let x = e as f64;
                let bump = (-((x - self.profile_center) * (x - self.profile_center))
                    / (2.0 * sigma * sigma))
                    .exp();
                let asym = if half_span > 0.0 {
                    (x - half_span) / half_span
                } else {
                    0.0
                };
                self.electrode_offsets[e]
                    + ELECTRODE_GAIN_UNITS_PER_N * force * bump
                    + ELECTRODE_ASYM_UNITS_PER_N * contact.tangential_load_n * asym
                    + ELECTRODE_NOISE * unit.sample(&mut self.rng)
            })
            .collect();

        let t_dc = T_DC_MEAN + 0.05 * unit.sample(&mut self.rng);
        let t_ac = 0.02 * unit.sample(&mut self.rng);

        let frame = SensorFrame {
            t: self.frame_index,
            finger: self.finger,
            variant: self.variant,
            p_dc,
            p_ac,
            electrodes,
            t_dc,
            t_ac,
        };
        self.frame_index += 1;
        frame
    }
}
