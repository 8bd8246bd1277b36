//! Run configuration: defaults, TOML loading, validation.
//!
//! Every entry point (CLI subcommands, library calls, Python bindings) takes
//! a [`RunConfig`]. A config file is plain TOML mirroring the struct layout;
//! any omitted key falls back to the default, so a file may contain only the
//! keys it overrides. The CLI looks for a file given via `--config`, then the
//! `GRIPSIM_CONFIG` environment variable, then uses built-in defaults.
//!
//! ```toml
//! [run]
//! seed = 42
//! dt = 0.001
//! variant = "biotac"          # or "biotac_sp"
//! object = "ball"             # ball | box | tuna_can | plastic_cup
//! finger_count = 2
//! duration_s = 15.0
//!
//! [controller]
//! speed_exponent = 1.5        # exponential gain on the slip statistic
//! base_speed_mps = 0.01       # approach speed at statistic 0
//! step_on_slip = 0.3          # statistic increment per slip prediction
//! step_on_contact = 0.6       # statistic decrement per contact prediction
//! stat_min = -6.0
//! stat_max = 0.5
//!
//! [classifier]
//! window_frames = 10          # frames per feature window
//! horizon_frames = 3          # prediction horizon, frames ahead
//! learning_rate = 0.1
//! epochs = 500
//! l2 = 1e-4
//!
//! [datagen]
//! trial_duration_s = 30.0
//! trials_per_combo = 3        # trials per (object, pressure target)
//!
//! [harness]
//! initial_grip_n = 1.5        # per-finger force when the grip is handed over
//! baseline_s = 0.2            # contact-free lead-in used for sensor grounding
//! support_s = 0.3             # external support after grip engage, before release
//! disturbance = "pulses"      # disturbance schedule: "none" | "pulses"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::SensorVariant;

pub const MAX_FINGERS: usize = 5;

/// Environment variable consulted when no `--config` path is given.
pub const CONFIG_ENV_VAR: &str = "GRIPSIM_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Physics tick, seconds.
    pub dt: f64,
    pub variant: SensorVariant,
    /// Object id for single runs (`simulate`): ball | box | tuna_can | plastic_cup.
    pub object: String,
    pub finger_count: usize,
    /// Closed-loop run length, seconds of simulated time.
    pub duration_s: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 42,
            dt: 0.001,
            variant: SensorVariant::BioTac,
            object: "ball".to_string(),
            finger_count: 2,
            duration_s: 15.0,
        }
    }
}

/// Per-finger controller gains. The controller integrates slip/contact
/// predictions into a bounded statistic `l` and commands the approach speed
/// `base_speed_mps * exp(speed_exponent * l)`.
///
/// The statistic bounds double as anti-windup clamps: `stat_max` caps how
/// hard a slipping grip can accelerate its force ramp, `stat_min` bounds how
/// long a calm grip takes to wake up again (and keeps the idle creep speed
/// `base * exp(exponent * stat_min)` negligible).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub speed_exponent: f64,
    pub base_speed_mps: f64,
    pub step_on_slip: f64,
    pub step_on_contact: f64,
    pub stat_min: f64,
    pub stat_max: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        ControllerSection {
            speed_exponent: 1.5,
            base_speed_mps: 0.01,
            step_on_slip: 0.3,
            step_on_contact: 0.6,
            stat_min: -6.0,
            stat_max: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    /// Sliding-window length in sensor frames.
    pub window_frames: usize,
    /// How many frames ahead the label is predicted.
    pub horizon_frames: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        ClassifierSection {
            window_frames: 10,
            horizon_frames: 3,
            learning_rate: 0.1,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatagenSection {
    pub trial_duration_s: f64,
    pub trials_per_combo: usize,
}

impl Default for DatagenSection {
    fn default() -> Self {
        DatagenSection {
            trial_duration_s: 30.0,
            trials_per_combo: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessSection {
    /// Per-finger normal force preloaded when the grip is handed over, N.
    pub initial_grip_n: f64,
    /// Contact-free lead-in for capturing grounding baselines, seconds.
    pub baseline_s: f64,
    /// External support (grip handover) duration after engage, seconds.
    pub support_s: f64,
    /// Disturbance schedule name: "none" or "pulses".
    pub disturbance: String,
}

impl Default for HarnessSection {
    fn default() -> Self {
        HarnessSection {
            initial_grip_n: 1.5,
            baseline_s: 0.2,
            support_s: 0.3,
            disturbance: "pulses".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub controller: ControllerSection,
    pub classifier: ClassifierSection,
    pub datagen: DatagenSection,
    pub harness: HarnessSection,
}

impl RunConfig {
    /// Parse and validate a TOML config file.
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Resolve a config from an optional explicit path, falling back to the
    /// `GRIPSIM_CONFIG` environment variable, then to defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<RunConfig> {
        if let Some(p) = explicit {
            return RunConfig::load(p);
        }
        if let Ok(p) = std::env::var(CONFIG_ENV_VAR) {
            if !p.is_empty() {
                return RunConfig::load(Path::new(&p));
            }
        }
        Ok(RunConfig::default())
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.run;
        if !(r.dt > 0.0 && r.dt.is_finite()) {
            return Err(Error::validation(format!("run.dt must be > 0 (got {})", r.dt)));
        }
        if r.finger_count < 1 || r.finger_count > MAX_FINGERS {
            return Err(Error::validation(format!(
                "run.finger_count must be in 1..={MAX_FINGERS} (got {})",
                r.finger_count
            )));
        }
        if !(r.duration_s > 0.0) {
            return Err(Error::validation(format!(
                "run.duration_s must be > 0 (got {})",
                r.duration_s
            )));
        }
        let c = &self.controller;
        for (name, v) in [
            ("controller.speed_exponent", c.speed_exponent),
            ("controller.base_speed_mps", c.base_speed_mps),
            ("controller.step_on_slip", c.step_on_slip),
            ("controller.step_on_contact", c.step_on_contact),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{name} must be > 0 (got {v})")));
            }
        }
        if !(c.stat_min <= 0.0 && 0.0 <= c.stat_max) {
            return Err(Error::validation(format!(
                "controller statistic bounds must bracket 0 (got [{}, {}])",
                c.stat_min, c.stat_max
            )));
        }
        let k = &self.classifier;
        if k.window_frames < 2 {
            return Err(Error::validation(format!(
                "classifier.window_frames must be >= 2 (got {})",
                k.window_frames
            )));
        }
        if k.horizon_frames < 1 {
            return Err(Error::validation(format!(
                "classifier.horizon_frames must be >= 1 (got {})",
                k.horizon_frames
            )));
        }
        if !(k.learning_rate > 0.0) || k.epochs == 0 || !(k.l2 >= 0.0) {
            return Err(Error::validation(
                "classifier learning_rate must be > 0, epochs >= 1, l2 >= 0".to_string(),
            ));
        }
        let d = &self.datagen;
        let min_frames = (k.window_frames + k.horizon_frames) as f64;
        let frames = d.trial_duration_s * self.run.variant.frame_rate_hz();
        if frames <= min_frames {
            return Err(Error::validation(format!(
                "datagen.trial_duration_s {} yields {frames:.0} frames, too short for a {}-frame window plus {}-frame horizon",
                d.trial_duration_s, k.window_frames, k.horizon_frames
            )));
        }
        if d.trials_per_combo == 0 {
            return Err(Error::validation("datagen.trials_per_combo must be >= 1".to_string()));
        }
        let h = &self.harness;
        if !(h.initial_grip_n > 0.0) {
            return Err(Error::validation(format!(
                "harness.initial_grip_n must be > 0 (got {})",
                h.initial_grip_n
            )));
        }
        if h.baseline_s < 0.0 || h.support_s < 0.0 {
            return Err(Error::validation(
                "harness.baseline_s and harness.support_s must be >= 0".to_string(),
            ));
        }
        if h.disturbance != "none" && h.disturbance != "pulses" {
            return Err(Error::validation(format!(
                "harness.disturbance must be 'none' or 'pulses' (got '{}')",
                h.disturbance
            )));
        }
        Ok(())
    }
}
