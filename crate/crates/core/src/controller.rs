//! Independent per-finger grip control.
//!
//! Each finger runs its own [`FingerController`]: a sliding window of its
//! own sensor frames, the shared (read-only) slip model, and a leaky slip
//! statistic `l`. Per frame:
//!
//! * predicted **slip** raises `l` by `step_on_slip`,
//! * predicted **contact** lowers `l` by `step_on_contact`,
//! * predicted **no_contact** leaves `l` unchanged,
//!
//! with `l` clamped to `[stat_min, stat_max]`. The commanded advance speed
//! is `base_speed * exp(speed_exponent * l)` — strictly positive, so a
//! finger never retreats; grip force only relaxes through the object's own
//! compliance as other fingers yield. The clamp bounds the top speed and
//! keeps a long quiet stretch from winding `l` so far down that the finger
//! could not re-engage promptly.
//!
//! Controllers never see another finger's frames; coordination emerges
//! mechanically through the object.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::classifier::SlipModel;
use crate::config::ControllerSection;
use crate::error::{Error, Result};
use crate::features;
use crate::types::{Label, SensorFrame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerParams {
    /// Exponent on the slip statistic in the velocity law.
    pub speed_exponent: f64,
    /// Advance speed at `l = 0`, m/s.
    pub base_speed_mps: f64,
    pub step_on_slip: f64,
    pub step_on_contact: f64,
    pub stat_min: f64,
    pub stat_max: f64,
}

impl From<&ControllerSection> for ControllerParams {
    fn from(c: &ControllerSection) -> ControllerParams {
        ControllerParams {
            speed_exponent: c.speed_exponent,
            base_speed_mps: c.base_speed_mps,
            step_on_slip: c.step_on_slip,
            step_on_contact: c.step_on_contact,
            stat_min: c.stat_min,
            stat_max: c.stat_max,
        }
    }
}

/// The bare statistic/velocity law, separate from windowing and prediction
/// so its arithmetic can be pinned exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipStatistic {
    params: ControllerParams,
    value: f64,
}

impl SlipStatistic {
    pub fn new(params: ControllerParams) -> SlipStatistic {
        SlipStatistic { params, value: 0.0 }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    /// Integrate one predicted label.
    pub fn update(&mut self, predicted: Label) {
        match predicted {
            Label::Slip => self.value += self.params.step_on_slip,
            Label::Contact => self.value -= self.params.step_on_contact,
            Label::NoContact => {}
        }
        self.value = self.value.clamp(self.params.stat_min, self.params.stat_max);
    }

    /// Commanded advance speed, m/s. Exactly `base_speed` at `l = 0`, and
    /// strictly positive everywhere.
    pub fn velocity_mps(&self) -> f64 {
        self.params.base_speed_mps * (self.params.speed_exponent * self.value).exp()
    }
}

/// What a controller decided for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDecision {
    /// None until the frame window has filled.
    pub prediction: Option<Label>,
    pub stat: f64,
    /// Commanded advance speed along the finger's own axis, m/s. Zero
    /// while the controller is inactive.
    pub advance_mps: f64,
}

/// One finger's controller. Feed it that finger's frames, in order, one
/// per tick.
#[derive(Debug, Clone)]
pub struct FingerController {
    finger: usize,
    model: Arc<SlipModel>,
    window_frames: usize,
    window: VecDeque<SensorFrame>,
    /// Grounding reference: the first observed frame's `p_dc` (the run
    /// protocol guarantees fingers start off the surface).
    baseline: Option<f64>,
    stat: SlipStatistic,
    active: bool,
    /// How many frames of each foreign finger id were (incorrectly)
    /// offered; stays all-zero in a correct wiring.
    frames_seen: u64,
}

impl FingerController {
    pub fn new(
        finger: usize,
        model: Arc<SlipModel>,
        window_frames: usize,
        params: ControllerParams,
    ) -> Result<FingerController> {
        if window_frames < 2 {
            return Err(Error::validation(
                "controller window must be at least 2 frames".to_string(),
            ));
        }
        Ok(FingerController {
            finger,
            model,
            window_frames,
            window: VecDeque::with_capacity(window_frames),
            baseline: None,
            stat: SlipStatistic::new(params),
            active: false,
            frames_seen: 0,
        })
    }

    pub fn finger(&self) -> usize {
        self.finger
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    pub fn stat(&self) -> f64 {
        self.stat.value()
    }

    /// While inactive the controller observes frames and predicts, but the
    /// statistic stays frozen and the commanded speed is zero (the hand is
    /// externally supported). Activate at handover.
    pub fn set_active(&mut self, active: bool) {
        self.active = active;
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    /// Observe this finger's next frame and decide a command.
    pub fn step(&mut self, frame: SensorFrame) -> Result<ControlDecision> {
        if frame.finger != self.finger {
            return Err(Error::validation(format!(
                "controller for finger {} was offered a frame from finger {}",
                self.finger, frame.finger
            )));
        }
        frame.validate()?;
        self.model
            .expect_layout(&features::layout_id(frame.variant, self.window_frames))?;
        if let Some(last) = self.window.back() {
            if frame.t != last.t + 1 {
                return Err(Error::validation(format!(
                    "controller frames must be consecutive: got t={} after t={}",
                    frame.t, last.t
                )));
            }
        }
        if self.baseline.is_none() {
            self.baseline = Some(frame.p_dc);
        }
        self.frames_seen += 1;
        if self.window.len() == self.window_frames {
            self.window.pop_front();
        }
        self.window.push_back(frame);

        let prediction = if self.window.len() == self.window_frames {
            let frames = self.window.make_contiguous();
            let feats = features::extract(frames, self.baseline.expect("set on first frame"))?;
            Some(self.model.predict(&feats)?)
        } else {
            None
        };

        if self.active {
            if let Some(p) = prediction {
                self.stat.update(p);
            }
            Ok(ControlDecision {
                prediction,
                stat: self.stat.value(),
                advance_mps: self.stat.velocity_mps(),
            })
        } else {
            Ok(ControlDecision {
                prediction,
                stat: self.stat.value(),
                advance_mps: 0.0,
            })
        }
    }
}

/// Textbook PID on a pressure error, used by the data-collection rig to
/// servo each finger to a target grip pressure. Output is an advance speed
/// (m/s); the integral term is clamped to avoid windup while the finger is
/// still approaching.
#[derive(Debug, Clone, Copy)]
pub struct PressurePid {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    integral: f64,
    prev_err: Option<f64>,
    integral_limit: f64,
}

impl PressurePid {
    pub fn new(kp: f64, ki: f64, kd: f64) -> PressurePid {
        PressurePid {
            kp,
            ki,
            kd,
            integral: 0.0,
            prev_err: None,
            integral_limit: 0.05,
        }
    }

    /// Update with the current error (target - measured) and the frame
    /// period; returns the commanded speed.
    pub fn update(&mut self, err: f64, dt: f64) -> f64 {
        self.integral = (self.integral + self.ki * err * dt)
            .clamp(-self.integral_limit, self.integral_limit);
        let deriv = match self.prev_err {
            Some(prev) => (err - prev) / dt,
            None => 0.0,
        };
        self.prev_err = Some(err);
        self.kp * err + self.integral + self.kd * deriv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{ModelMeta, Normalizer, SlipModel};
    use crate::features::FEATURE_DIM;
    use crate::types::SensorVariant;

    fn params() -> ControllerParams {
        ControllerParams {
            speed_exponent: 1.5,
            base_speed_mps: 0.03,
            step_on_slip: 0.3,
            step_on_contact: 0.6,
            stat_min: -6.0,
            stat_max: 0.8,
        }
    }

    /// A model whose bias forces a constant prediction, for driving the
    /// controller deterministically.
    fn constant_model(always: Label, window: usize) -> Arc<SlipModel> {
        let mut bias = vec![0.0; 3];
        bias[always.index()] = 10.0;
        Arc::new(SlipModel {
            layout: features::layout_id(SensorVariant::BioTac, window),
            normalizer: Normalizer {
                mean: vec![0.0; FEATURE_DIM],
                std: vec![1.0; FEATURE_DIM],
            },
            weights: vec![vec![0.0; FEATURE_DIM]; 3],
            bias,
            meta: ModelMeta {
                window_frames: window,
                horizon_frames: 3,
                n_train: 0,
                class_counts: [0; 3],
                learning_rate: 0.1,
                epochs: 0,
                l2: 0.0,
                final_loss: 0.0,
            },
        })
    }

    fn frame(t: u64, finger: usize) -> SensorFrame {
        SensorFrame {
            t,
            finger,
            variant: SensorVariant::BioTac,
            p_dc: 2000.0,
            p_ac: vec![0.0; 22],
            electrodes: vec![0.0; 19],
            t_dc: 25.0,
            t_ac: 0.0,
        }
    }

    #[test]
    fn statistic_and_velocity_match_hand_arithmetic() {
        let mut s = SlipStatistic::new(params());
        // At l = 0 the commanded speed is the base speed, exactly.
        assert_eq!(s.velocity_mps(), 0.03);

        s.update(Label::Slip);
        assert_eq!(s.value(), 0.3);
        assert_eq!(s.velocity_mps(), 0.03 * (1.5f64 * 0.3).exp());

        s.update(Label::Slip);
        assert!((s.value() - 0.6).abs() < 1e-15);

        // no_contact leaves the statistic alone.
        s.update(Label::NoContact);
        assert!((s.value() - 0.6).abs() < 1e-15);

        // contact steps down by 0.6.
        s.update(Label::Contact);
        assert!(s.value().abs() < 1e-15);

        // The upper clamp caps the climb...
        for _ in 0..10 {
            s.update(Label::Slip);
        }
        assert_eq!(s.value(), 0.8);
        // ...and the lower clamp bounds the fall; speed stays positive.
        for _ in 0..100 {
            s.update(Label::Contact);
        }
        assert_eq!(s.value(), -6.0);
        assert!(s.velocity_mps() > 0.0);
    }

    #[test]
    fn always_slip_model_ramps_to_capped_speed() {
        let window = 5;
        let model = constant_model(Label::Slip, window);
        let mut ctl = FingerController::new(0, model, window, params()).unwrap();
        ctl.set_active(true);
        let mut last = None;
        for t in 0..40 {
            last = Some(ctl.step(frame(t, 0)).unwrap());
        }
        let d = last.unwrap();
        assert_eq!(d.prediction, Some(Label::Slip));
        assert_eq!(d.stat, 0.8);
        let cap = 0.03 * (1.5f64 * 0.8).exp();
        assert!((d.advance_mps - cap).abs() < 1e-15);
    }

    #[test]
    fn window_must_fill_before_predictions_start() {
        let window = 10;
        let model = constant_model(Label::Contact, window);
        let mut ctl = FingerController::new(1, model, window, params()).unwrap();
        ctl.set_active(true);
        for t in 0..9 {
            let d = ctl.step(frame(t, 1)).unwrap();
            assert_eq!(d.prediction, None);
            assert_eq!(d.stat, 0.0, "stat must not move before predictions");
        }
        let d = ctl.step(frame(9, 1)).unwrap();
        assert_eq!(d.prediction, Some(Label::Contact));
        assert!(d.stat < 0.0);
    }

    #[test]
    fn inactive_controller_predicts_but_commands_zero() {
        let window = 5;
        let model = constant_model(Label::Slip, window);
        let mut ctl = FingerController::new(0, model, window, params()).unwrap();
        for t in 0..20 {
            let d = ctl.step(frame(t, 0)).unwrap();
            assert_eq!(d.advance_mps, 0.0);
            assert_eq!(d.stat, 0.0);
            if t >= 4 {
                assert_eq!(d.prediction, Some(Label::Slip));
            }
        }
        // Handover: statistic starts integrating from zero.
        ctl.set_active(true);
        let d = ctl.step(frame(20, 0)).unwrap();
        assert_eq!(d.stat, 0.3);
        assert!(d.advance_mps > 0.0);
    }

    #[test]
    fn foreign_finger_frames_are_rejected() {
        let model = constant_model(Label::Slip, 5);
        let mut ctl = FingerController::new(0, model, 5, params()).unwrap();
        let err = ctl.step(frame(0, 3)).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("finger 3"));
    }

    #[test]
    fn gapped_frames_are_rejected() {
        let model = constant_model(Label::Slip, 5);
        let mut ctl = FingerController::new(0, model, 5, params()).unwrap();
        ctl.step(frame(0, 0)).unwrap();
        let err = ctl.step(frame(2, 0)).unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let model = constant_model(Label::Slip, 5);
        let mut ctl = FingerController::new(0, model, 7, params()).unwrap();
        let err = ctl.step(frame(0, 0)).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("layout"));
    }

    /// Control-law oracle: with a plant where force is stiffness times
    /// advance and pressure is 10 units per newton, the PID must settle to
    /// the target within 2 s and hold +/- 2 units.
    #[test]
    fn pid_settles_on_pressure_target() {
        let mut pid = PressurePid::new(0.002, 0.02, 0.0);
        let stiffness = 1500.0;
        let dt = 0.01;
        let target = 50.0;
        let mut advance = 0.0_f64;
        let mut history = Vec::new();
        for _ in 0..300 {
            let pressure = 10.0 * stiffness * advance.max(0.0);
            let v = pid.update(target - pressure, dt);
            advance += v * dt;
            history.push(pressure);
        }
        for (i, p) in history.iter().enumerate() {
            if i as f64 * dt >= 2.0 {
                assert!((p - target).abs() < 2.0, "t={} pressure {p}", i as f64 * dt);
            }
        }
    }
}
