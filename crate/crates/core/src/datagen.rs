//! Scripted data-collection campaigns.
//!
//! A campaign rigidly mounts one object and probes it with three fingers
//! (the thumb site and the two squarely opposing sites). Each trial runs
//! the same per-finger schedule:
//!
//! 1. **idle** — parked off the surface (contact-free frames; the first
//!    frame grounds the stream's pressure baseline),
//! 2. **approach** — advance at constant speed until the grounded pressure
//!    crosses the contact threshold,
//! 3. **servo** — a PID drives grounded pressure to the trial's setpoint,
//! 4. **survey** — the servo keeps holding the setpoint while a seeded
//!    script alternates between resting and dragging the fingertip across
//!    the surface at random speeds, producing genuine slip at a known
//!    force.
//!
//! Frames are labeled by the same rule an offline labeler would use on
//! real recordings: grounded pressure at or below the contact threshold is
//! `no_contact`; otherwise fingertip travel beyond a displacement
//! threshold over a short look-back window is `slip`, else `contact`. The
//! simulator's ground-truth flags are stored alongside for auditing the
//! labeler itself.

use std::fs;
use std::path::Path;

use rand::RngExt;
use rand_chacha::ChaCha8Rng;

use crate::controller::PressurePid;
use crate::dataset::{self, ManifestRow, Record};
use crate::error::{Error, Result};
use crate::features;
use crate::physics::{object_by_id, FingerCommand, World};
use crate::rng::fork;
use crate::sensor::{SensorSim, CONTACT_THRESHOLD_UNITS};
use crate::types::{Label, SensorVariant};
use crate::vec2::Vec2;

/// Parked idle stretch at the start of every trial, s.
const IDLE_S: f64 = 2.0;
/// Approach speed toward the surface, m/s.
const APPROACH_MPS: f64 = 0.010;
/// Gap the fingers start from (set by the rig), m.
const START_GAP_M: f64 = 0.005;
/// Pressure-servo settling stretch before surveying starts, s.
const SERVO_S: f64 = 2.0;
/// Length of one survey segment (hold or drag), s.
const SEGMENT_S: f64 = 1.0;
/// Probability a survey segment is a hold rather than a drag.
const HOLD_PROB: f64 = 0.45;
/// Drag speed range during survey segments, m/s. The low end sits just
/// above the displacement labeler's floor so the classifier learns to see
/// slip all the way down to near-latching speeds.
const DRAG_SPEED_RANGE: (f64, f64) = (0.003, 0.040);
/// Per-segment scaling of the pressure setpoint. A reactive controller
/// raises pressure *while* the surface is still moving, so slip has to
/// co-occur with rising and falling pressure in training too — a survey
/// that only drags at held pressure teaches the model that a climbing
/// signal means a firm hold.
const TARGET_SCALE_RANGE: (f64, f64) = (0.6, 1.4);
/// Scaled setpoints stay inside the sensor's useful band, sensor units.
const TARGET_CLAMP_UNITS: (f64, f64) = (12.0, 95.0);
/// Look-back horizon of the displacement labeler, s.
const LABEL_WINDOW_S: f64 = 0.06;
/// Tangential travel over the look-back window that counts as slip, m
/// (1 mm/s sustained).
const DISPLACEMENT_THRESHOLD_M: f64 = 0.00006;
/// Ground-truth slip flag threshold on contact slip speed, m/s.
const GT_SLIP_SPEED_MPS: f64 = 1e-4;
/// Pressure-servo PID gains (m/s per unit, per unit-second, per unit/s).
const PID_GAINS: (f64, f64, f64) = (0.002, 0.02, 0.0);

/// Sites probed during collection: the thumb and the two opposing pads.
const RIG_SITES: [usize; 3] = [0, 1, 2];

/// Grip-pressure setpoints visited by every campaign, sensor units.
pub const TARGET_PRESSURES: [f64; 3] = [20.0, 50.0, 80.0];

/// Objects used to fit models; the remaining catalog objects are reserved
/// for generalization runs.
pub const TRAIN_OBJECTS: [&str; 2] = ["ball", "box"];

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub seed: u64,
    pub variant: SensorVariant,
    pub dt: f64,
    pub trial_duration_s: f64,
    pub trials_per_combo: usize,
    pub objects: Vec<String>,
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::validation("dt must be > 0".to_string()));
        }
        let min_duration = IDLE_S + START_GAP_M / APPROACH_MPS + SERVO_S + SEGMENT_S;
        if self.trial_duration_s < min_duration {
            return Err(Error::validation(format!(
                "trial_duration_s {} leaves no survey time (need >= {min_duration})",
                self.trial_duration_s
            )));
        }
        if self.trials_per_combo == 0 {
            return Err(Error::validation("trials_per_combo must be >= 1".to_string()));
        }
        if self.objects.is_empty() {
            return Err(Error::validation("campaign needs at least one object".to_string()));
        }
        for o in &self.objects {
            object_by_id(o)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Idle,
    Approach,
    Servo { since_s: f64 },
    Survey,
}

/// One finger's scripted state within a trial.
struct FingerScript {
    phase: Phase,
    pid: PressurePid,
    survey: ChaCha8Rng,
    segment_ends_at_s: f64,
    tangential_mps: f64,
    target_scale: f64,
    baseline: Option<f64>,
    /// Recent tangential coordinates, newest last, for the displacement
    /// labeler.
    tangent_history: Vec<f64>,
}

impl FingerScript {
    fn new(survey: ChaCha8Rng) -> FingerScript {
        FingerScript {
            phase: Phase::Idle,
            pid: PressurePid::new(PID_GAINS.0, PID_GAINS.1, PID_GAINS.2),
            survey,
            segment_ends_at_s: 0.0,
            tangential_mps: 0.0,
            target_scale: 1.0,
            baseline: None,
            tangent_history: Vec::new(),
        }
    }

    /// Decide this frame's command from the previous frame's sensor
    /// reading (the script is causal in sensor data).
    fn command(
        &mut self,
        now_s: f64,
        frame_dt: f64,
        grounded_p_dc: Option<f64>,
        target_pressure: f64,
    ) -> FingerCommand {
        match self.phase {
            Phase::Idle => {
                if now_s >= IDLE_S {
                    self.phase = Phase::Approach;
                }
            }
            Phase::Approach => {
                if grounded_p_dc.is_some_and(|p| p > CONTACT_THRESHOLD_UNITS) {
                    self.phase = Phase::Servo { since_s: now_s };
                }
            }
            Phase::Servo { since_s } => {
                if now_s - since_s >= SERVO_S {
                    self.phase = Phase::Survey;
                    self.segment_ends_at_s = now_s; // draw a segment immediately
                }
            }
            Phase::Survey => {}
        }
        if self.phase == Phase::Survey && now_s >= self.segment_ends_at_s {
            self.segment_ends_at_s = now_s + SEGMENT_S;
            // Fixed draw order keeps the stream reproducible.
            let hold = self.survey.random_bool(HOLD_PROB);
            let speed = self
                .survey
                .random_range(DRAG_SPEED_RANGE.0..DRAG_SPEED_RANGE.1);
            let positive = self.survey.random_bool(0.5);
            self.target_scale = self
                .survey
                .random_range(TARGET_SCALE_RANGE.0..TARGET_SCALE_RANGE.1);
            self.tangential_mps = if hold {
                0.0
            } else if positive {
                speed
            } else {
                -speed
            };
        }

        match self.phase {
            Phase::Idle => FingerCommand::default(),
            Phase::Approach => FingerCommand {
                advance_mps: APPROACH_MPS,
                tangential_mps: 0.0,
            },
            Phase::Servo { .. } => FingerCommand {
                advance_mps: self
                    .pid
                    .update(target_pressure - grounded_p_dc.unwrap_or(0.0), frame_dt),
                tangential_mps: 0.0,
            },
            Phase::Survey => {
                let setpoint = (target_pressure * self.target_scale)
                    .clamp(TARGET_CLAMP_UNITS.0, TARGET_CLAMP_UNITS.1);
                FingerCommand {
                    advance_mps: self
                        .pid
                        .update(setpoint - grounded_p_dc.unwrap_or(0.0), frame_dt),
                    tangential_mps: self.tangential_mps,
                }
            }
        }
    }
}

/// Auto-label one frame from sensor-visible quantities only.
fn auto_label(grounded_p_dc: f64, tangent_history: &[f64], frames_back: usize) -> Label {
    if grounded_p_dc <= CONTACT_THRESHOLD_UNITS {
        return Label::NoContact;
    }
    let n = tangent_history.len();
    if n > frames_back {
        let then = tangent_history[n - 1 - frames_back];
        let now = tangent_history[n - 1];
        if (now - then).abs() > DISPLACEMENT_THRESHOLD_M {
            return Label::Slip;
        }
    }
    Label::Contact
}

/// Run one trial; returns one record stream per rig finger.
pub fn run_trial(
    cfg: &CampaignConfig,
    object_id: &str,
    target_pressure: f64,
    trial_id: &str,
) -> Result<Vec<Vec<Record>>> {
    let object = object_by_id(object_id)?;
    let mut world = World::fixed_rig(object, &RIG_SITES)?;
    let ticks_per_frame = cfg.variant.ticks_per_frame(cfg.dt);
    let frame_dt = 1.0 / cfg.variant.frame_rate_hz();
    let total_frames = (cfg.trial_duration_s * cfg.variant.frame_rate_hz()).round() as usize;
    let frames_back = (LABEL_WINDOW_S * cfg.variant.frame_rate_hz()).round() as usize;

    let mut sensors: Vec<SensorSim> = RIG_SITES
        .iter()
        .enumerate()
        .map(|(i, _)| {
            SensorSim::new(
                cfg.variant,
                i,
                fork(cfg.seed, &format!("trial/{trial_id}/finger{i}/sensor")),
            )
        })
        .collect();
    let mut scripts: Vec<FingerScript> = RIG_SITES
        .iter()
        .enumerate()
        .map(|(i, _)| {
            FingerScript::new(fork(cfg.seed, &format!("trial/{trial_id}/finger{i}/survey")))
        })
        .collect();
    let mut streams: Vec<Vec<Record>> = vec![Vec::with_capacity(total_frames); RIG_SITES.len()];

    // Last sampled grounded pressure per finger; None until the first frame.
    let mut last_grounded: Vec<Option<f64>> = vec![None; RIG_SITES.len()];

    for frame_idx in 0..total_frames {
        let now_s = frame_idx as f64 * frame_dt;
        let commands: Vec<FingerCommand> = scripts
            .iter_mut()
            .enumerate()
            .map(|(i, s)| s.command(now_s, frame_dt, last_grounded[i], target_pressure))
            .collect();

        let mut outcome = None;
        for _ in 0..ticks_per_frame {
            outcome = Some(world.step(&commands, Vec2::ZERO, cfg.dt)?);
        }
        let outcome = outcome.expect("at least one tick per frame");

        for (i, contact) in outcome.contacts.iter().enumerate() {
            let frame = sensors[i].sample(contact);
            let script = &mut scripts[i];
            if script.baseline.is_none() {
                script.baseline = Some(frame.p_dc);
            }
            let grounded = frame.p_dc - script.baseline.expect("baseline just set");
            last_grounded[i] = Some(grounded);

            let tangent = contact.fingertip_pos.dot(contact.contact_normal.perp());
            script.tangent_history.push(tangent);

            let label = auto_label(grounded, &script.tangent_history, frames_back);
            let gt_slip = contact.in_contact && contact.slip_speed_mps > GT_SLIP_SPEED_MPS;
            let pos = [contact.fingertip_pos.x, contact.fingertip_pos.y];
            streams[i].push(Record::from_parts(
                frame,
                contact.in_contact,
                gt_slip,
                label,
                pos,
            ));
        }
    }
    Ok(streams)
}

/// Run every trial of the campaign and write the dataset under `out_dir`
/// (`manifest.csv` plus `trials/*.jsonl`). Returns the manifest rows.
pub fn run_campaign(cfg: &CampaignConfig, out_dir: &Path) -> Result<Vec<ManifestRow>> {
    cfg.validate()?;
    let trials_dir = out_dir.join("trials");
    fs::create_dir_all(&trials_dir).map_err(|e| Error::io(&trials_dir, e))?;

    let mut rows = Vec::new();
    for object in &cfg.objects {
        for &pressure in TARGET_PRESSURES.iter() {
            for repeat in 0..cfg.trials_per_combo {
                let trial_id = format!("{object}_p{pressure}_r{repeat}");
                let streams = run_trial(cfg, object, pressure, &trial_id)?;
                for (finger, records) in streams.iter().enumerate() {
                    let file = format!("trials/{trial_id}_f{finger}.jsonl");
                    dataset::write_jsonl(&out_dir.join(&file), records.iter())?;
                    let count = |l: Label| {
                        records.iter().filter(|r| r.auto_label == l).count()
                    };
                    rows.push(ManifestRow {
                        trial_id: trial_id.clone(),
                        object: object.clone(),
                        target_pressure: pressure,
                        repeat,
                        finger,
                        file,
                        frames: records.len(),
                        slip_frames: count(Label::Slip),
                        contact_frames: count(Label::Contact),
                        no_contact_frames: count(Label::NoContact),
                    });
                }
            }
        }
    }
    dataset::write_manifest(&out_dir.join("manifest.csv"), &rows)?;
    Ok(rows)
}

/// Load the streams named by `indices` into feature/label rows for
/// training or evaluation.
pub fn build_rows(
    dataset_dir: &Path,
    manifest: &[ManifestRow],
    indices: &[usize],
    window: usize,
    horizon: usize,
) -> Result<Vec<(Vec<f64>, Label)>> {
    let mut out = Vec::new();
    for &i in indices {
        let row = manifest.get(i).ok_or_else(|| {
            Error::validation(format!("manifest has no row {i} ({} rows)", manifest.len()))
        })?;
        let records = dataset::read_jsonl(&dataset_dir.join(&row.file))?;
        out.extend(dataset::training_rows(&records, window, horizon)?);
    }
    Ok(out)
}

/// The feature-layout id a campaign's streams imply.
pub fn campaign_layout(variant: SensorVariant, window: usize) -> String {
    features::layout_id(variant, window)
}
