//! Closed-loop runs: grip stabilization, partner scenarios, and the
//! generalization sweep; plus train/eval orchestration over datasets.
//!
//! # Run protocol
//!
//! Every stabilization run follows the same schedule:
//!
//! 1. **baseline** (`baseline_s`) — fingers parked off the surface while an
//!    external support holds the object against gravity. Sensors stream;
//!    each controller grounds its pressure baseline on its first frame.
//! 2. **engage** — fingertips snap to a uniform initial grip force; the
//!    support stays on. Controllers observe (their windows fill with real
//!    contact frames) but stay inactive: statistics frozen at zero,
//!    commands ignored.
//! 3. **release** — the support vanishes, controllers activate, and from
//!    here the grip lives or dies by per-finger slip control alone.
//!    Optional disturbance pulses hit at fixed offsets after release.
//!
//! A run is **dropped** when the object moves more than the drop budget
//! from its pose at release. Controllers are fed strictly their own
//! finger's frames, in a configurable per-frame order; an audit matrix
//! records exactly which finger's frames each controller consumed. Since
//! controllers share no state, any tick order must produce bit-identical
//! results — a property the test suite exercises.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classifier::{self, EvalReport, SlipModel, ThresholdBaseline, TrainConfig};
use crate::config::RunConfig;
use crate::controller::{ControlDecision, ControllerParams, FingerController};
use crate::datagen;
use crate::dataset;
use crate::error::{Error, Result};
use crate::features;
use crate::physics::{object_by_id, FingerCommand, World, DROP_DISPLACEMENT_M, GRAVITY_MPS2};
use crate::rng::fork;
use crate::sensor::SensorSim;
use crate::types::{Label, SensorVariant};
use crate::vec2::Vec2;

/// Fraction of finger-trials held out of training.
pub const TEST_FRACTION: f64 = 0.2;

/// Length of the end-of-run window used for settled statistics, s.
pub const SETTLE_WINDOW_S: f64 = 3.0;

/// Parked fingertip gap during the baseline phase, m.
const PARK_GAP_M: f64 = 0.003;

/// Object slide speed above which a frame counts as slipping.
const SLIP_EPS_MPS: f64 = 1e-4;

/// Disturbance pulse timing (offsets after release) and scale.
const PULSE_1_S: (f64, f64) = (3.0, 3.5);
const PULSE_2_S: (f64, f64) = (6.0, 6.5);
const PULSE_SCALE: f64 = 0.4;

// ---------------------------------------------------------------------
// Training orchestration
// ---------------------------------------------------------------------

/// Everything `train` produces besides the saved model file.
#[derive(Debug, Clone)]
pub struct TrainedArtifacts {
    pub model: SlipModel,
    pub heldout: EvalReport,
    pub baseline: ThresholdBaseline,
    pub baseline_heldout: EvalReport,
    pub n_train_rows: usize,
    pub n_heldout_rows: usize,
    pub train_trials: Vec<String>,
    pub heldout_trials: Vec<String>,
}

/// The collection campaign a config implies: training objects only.
pub fn default_campaign(cfg: &RunConfig) -> datagen::CampaignConfig {
    datagen::CampaignConfig {
        seed: cfg.run.seed,
        variant: cfg.run.variant,
        dt: cfg.run.dt,
        trial_duration_s: cfg.datagen.trial_duration_s,
        trials_per_combo: cfg.datagen.trials_per_combo,
        objects: datagen::TRAIN_OBJECTS.iter().map(|s| s.to_string()).collect(),
    }
}

/// Split a dataset by finger-trial, fit the model on the training side,
/// and evaluate both it and the trivial pressure-threshold baseline on the
/// held-out side.
pub fn train_from_dataset(dataset_dir: &Path, cfg: &RunConfig) -> Result<TrainedArtifacts> {
    cfg.validate()?;
    let manifest = dataset::read_manifest(&dataset_dir.join("manifest.csv"))?;
    let window = cfg.classifier.window_frames;
    let horizon = cfg.classifier.horizon_frames;
    let (mut train_idx, mut test_idx) =
        dataset::split_finger_trials(manifest.len(), TEST_FRACTION, cfg.run.seed)?;
    train_idx.sort_unstable();
    test_idx.sort_unstable();

    let train_rows = datagen::build_rows(dataset_dir, &manifest, &train_idx, window, horizon)?;
    let test_rows = datagen::build_rows(dataset_dir, &manifest, &test_idx, window, horizon)?;

    // The dataset's variant comes from its streams; make sure it matches
    // the config so the layout id is honest.
    let first = dataset::read_jsonl(&dataset_dir.join(&manifest[0].file))?;
    let variant = first
        .first()
        .map(|r| r.variant)
        .ok_or_else(|| Error::validation("dataset stream is empty".to_string()))?;
    if variant != cfg.run.variant {
        return Err(Error::validation(format!(
            "dataset was recorded with variant '{}' but the config says '{}'",
            variant.name(),
            cfg.run.variant.name()
        )));
    }

    let layout = features::layout_id(variant, window);
    let model = classifier::train(
        &train_rows,
        &layout,
        window,
        horizon,
        TrainConfig {
            learning_rate: cfg.classifier.learning_rate,
            epochs: cfg.classifier.epochs,
            l2: cfg.classifier.l2,
        },
    )?;
    let heldout = classifier::evaluate(|x| model.predict(x), &test_rows)?;
    let baseline = classifier::fit_baseline(&train_rows, 0)?;
    let baseline_heldout = classifier::evaluate(|x| baseline.predict(x), &test_rows)?;

    let trial_names = |idx: &[usize]| {
        idx.iter()
            .map(|&i| format!("{}_f{}", manifest[i].trial_id, manifest[i].finger))
            .collect()
    };
    Ok(TrainedArtifacts {
        model,
        heldout,
        baseline,
        baseline_heldout,
        n_train_rows: train_rows.len(),
        n_heldout_rows: test_rows.len(),
        train_trials: trial_names(&train_idx),
        heldout_trials: trial_names(&test_idx),
    })
}

// ---------------------------------------------------------------------
// Stabilization runs
// ---------------------------------------------------------------------

/// Scripted opposing pad used in two-sided scenarios. All variants hold
/// position between schedule points, so the pad acts as a passive spring
/// wall — it never servos against the robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartnerScenario {
    /// Intrusion fixed at engage time to push with `force_n` at the engage
    /// pose.
    ConstantPush { force_n: f64 },
    /// Intrusion ramps from zero force (at the engage pose) to `to_n` over
    /// `over_s` seconds after release.
    RampPush { to_n: f64, over_s: f64 },
    /// Pushes with `force_n` until `after_s` seconds past release, then
    /// backs off by `retreat_m` over `over_s` seconds and holds there.
    PushThenWithdraw {
        force_n: f64,
        after_s: f64,
        retreat_m: f64,
        over_s: f64,
    },
}

/// One finger's slice of a trace row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FingerTrace {
    pub force_n: f64,
    pub stat: f64,
    pub command_mps: f64,
    pub prediction: Option<Label>,
    pub slipping: bool,
}

/// One sensor frame's worth of run state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_s: f64,
    pub object_pos: [f64; 2],
    pub slide_speed_mps: f64,
    pub partner_force_n: Option<f64>,
    pub fingers: Vec<FingerTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettledStats {
    pub window_s: f64,
    pub per_finger_mean_force_n: Vec<f64>,
    /// Mean settled force divided by the minimum stabilizing force for
    /// this object and finger count (1.0 = the theoretical floor).
    pub force_ratio_vs_min: f64,
    /// Fraction of settled frames where the object was sliding.
    pub slip_fraction: f64,
}

/// Which finger's frames each controller consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    /// `frames_routed[controller][source_finger]` — off-diagonal entries
    /// would be cross-finger reads.
    pub frames_routed: Vec<Vec<u64>>,
    pub cross_finger_reads: u64,
    pub controller_order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub trace: Vec<TraceRow>,
    pub released_at_s: f64,
    pub dropped_at_s: Option<f64>,
    /// Peak displacement from the release pose, m.
    pub max_displacement_m: f64,
    /// Peak per-finger normal force from engage onward, N.
    pub peak_force_n: f64,
    pub settled: Option<SettledStats>,
    pub audit: AuditSummary,
}

pub struct StabilizationRun {
    pub config: RunConfig,
    pub model: Arc<SlipModel>,
    /// Per-frame controller tick order; identity when None. Any
    /// permutation must produce identical results.
    pub controller_order: Option<Vec<usize>>,
    pub partner: Option<PartnerScenario>,
}

fn disturbance_at(kind: &str, mass_kg: f64, since_release_s: f64) -> Vec2 {
    if kind != "pulses" || since_release_s < 0.0 {
        return Vec2::ZERO;
    }
    let a = PULSE_SCALE * mass_kg * GRAVITY_MPS2;
    if (PULSE_1_S.0..PULSE_1_S.1).contains(&since_release_s) {
        Vec2::new(a, 0.0)
    } else if (PULSE_2_S.0..PULSE_2_S.1).contains(&since_release_s) {
        Vec2::new(0.0, -a)
    } else {
        Vec2::ZERO
    }
}

pub fn run_stabilization(run: &StabilizationRun) -> Result<RunResult> {
    let cfg = &run.config;
    cfg.validate()?;
    let object = object_by_id(&cfg.run.object)?;
    let variant = cfg.run.variant;
    let window = run.model.meta.window_frames;
    run.model.expect_layout(&features::layout_id(variant, window))?;

    let n = cfg.run.finger_count;
    let mut world = World::grip(object.clone(), n)?;
    if run.partner.is_some() {
        if n != 1 {
            return Err(Error::validation(
                "partner scenarios drive a single robot finger".to_string(),
            ));
        }
        world.attach_partner(1)?;
    }
    world.park_fingers(PARK_GAP_M);

    let order: Vec<usize> = run
        .controller_order
        .clone()
        .unwrap_or_else(|| (0..n).collect());
    {
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (0..n).collect::<Vec<_>>() {
            return Err(Error::validation(format!(
                "controller_order must be a permutation of 0..{n} (got {order:?})"
            )));
        }
    }

    let params = ControllerParams::from(&cfg.controller);
    let mut controllers: Vec<FingerController> = (0..n)
        .map(|i| FingerController::new(i, run.model.clone(), window, params))
        .collect::<Result<_>>()?;
    let mut sensors: Vec<SensorSim> = (0..n)
        .map(|i| {
            SensorSim::new(
                variant,
                i,
                fork(cfg.run.seed, &format!("run/finger{i}/sensor")),
            )
        })
        .collect();

    let rate = variant.frame_rate_hz();
    let frame_dt = 1.0 / rate;
    let ticks_per_frame = variant.ticks_per_frame(cfg.run.dt);
    let total_frames = (cfg.run.duration_s * rate).round() as usize;
    let engage_frame = (cfg.harness.baseline_s * rate).round() as usize;
    let release_frame = ((cfg.harness.baseline_s + cfg.harness.support_s) * rate).round() as usize;
    if engage_frame < 1 {
        return Err(Error::validation(
            "baseline_s must cover at least one sensor frame".to_string(),
        ));
    }
    if release_frame <= engage_frame || total_frames <= release_frame {
        return Err(Error::validation(format!(
            "schedule does not fit the run: engage at frame {engage_frame}, release at \
             {release_frame}, total {total_frames}"
        )));
    }
    let release_t = release_frame as f64 * frame_dt;

    let mass = object.mass_kg;
    let stiffness = object.stiffness_n_per_m;
    let support = Vec2::new(0.0, mass * GRAVITY_MPS2);
    // Partner intrusion schedule is grounded at the engage pose.
    let partner_normal = world.partner_site_normal();
    let mut partner_ground = 0.0;

    let mut commands = vec![FingerCommand::default(); n];
    let mut audit = vec![vec![0u64; n]; n];
    let mut trace: Vec<TraceRow> = Vec::with_capacity(total_frames);
    let mut released = false;
    let mut pos_release = Vec2::ZERO;
    let mut dropped_at = None;
    let mut max_disp = 0.0_f64;
    let mut peak_force = 0.0_f64;

    for frame_idx in 0..total_frames {
        let t = frame_idx as f64 * frame_dt;

        if frame_idx == engage_frame {
            world.engage_grip(cfg.harness.initial_grip_n);
            if let (Some(scenario), Some(np)) = (&run.partner, partner_normal) {
                partner_ground = world.object_pos().dot(np);
                let f0 = match scenario {
                    PartnerScenario::ConstantPush { force_n } => *force_n,
                    PartnerScenario::RampPush { .. } => 0.0,
                    PartnerScenario::PushThenWithdraw { force_n, .. } => *force_n,
                };
                world.set_partner_intrusion(f0 / stiffness + partner_ground);
            }
        }
        if frame_idx == release_frame {
            released = true;
            pos_release = world.object_pos();
            for c in controllers.iter_mut() {
                c.set_active(true);
            }
        }
        if frame_idx >= engage_frame {
            match &run.partner {
                Some(PartnerScenario::RampPush { to_n, over_s }) => {
                    let progress = ((t - release_t) / over_s).clamp(0.0, 1.0);
                    world.set_partner_intrusion(progress * to_n / stiffness + partner_ground);
                }
                Some(PartnerScenario::PushThenWithdraw {
                    force_n,
                    after_s,
                    retreat_m,
                    over_s,
                }) => {
                    let progress = ((t - (release_t + after_s)) / over_s).clamp(0.0, 1.0);
                    world.set_partner_intrusion(
                        force_n / stiffness + partner_ground - progress * retreat_m,
                    );
                }
                Some(PartnerScenario::ConstantPush { .. }) | None => {}
            }
        }

        let external = if released {
            disturbance_at(&cfg.harness.disturbance, mass, t - release_t)
        } else {
            support
        };
        let mut outcome = None;
        for _ in 0..ticks_per_frame {
            outcome = Some(world.step(&commands, external, cfg.run.dt)?);
        }
        let outcome = outcome.expect("at least one tick per frame");

        let mut decisions: Vec<Option<ControlDecision>> = vec![None; n];
        for &i in &order {
            let frame = sensors[i].sample(&outcome.contacts[i]);
            audit[i][frame.finger] += 1;
            decisions[i] = Some(controllers[i].step(frame)?);
        }
        let fingers: Vec<FingerTrace> = (0..n)
            .map(|i| {
                let d = decisions[i].expect("every controller ticked");
                commands[i] = FingerCommand {
                    advance_mps: d.advance_mps,
                    tangential_mps: 0.0,
                };
                FingerTrace {
                    force_n: outcome.contacts[i].normal_force_n,
                    stat: d.stat,
                    command_mps: d.advance_mps,
                    prediction: d.prediction,
                    slipping: outcome.contacts[i].slip_speed_mps > SLIP_EPS_MPS,
                }
            })
            .collect();
        let partner_force_n = run.partner.as_ref().map(|_| world.partner_force_n());
        trace.push(TraceRow {
            t_s: t,
            object_pos: [outcome.object_pos.x, outcome.object_pos.y],
            slide_speed_mps: outcome.slide_speed_mps,
            partner_force_n,
            fingers,
        });

        if frame_idx >= engage_frame {
            for c in &outcome.contacts {
                peak_force = peak_force.max(c.normal_force_n);
            }
        }
        if released {
            let disp = (outcome.object_pos - pos_release).norm();
            max_disp = max_disp.max(disp);
            if disp > DROP_DISPLACEMENT_M {
                dropped_at = Some(t);
                break;
            }
        }
    }

    let cross_finger_reads = audit
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &c)| c)
                .sum::<u64>()
        })
        .sum();

    let settled = if dropped_at.is_none() {
        let settle_start = (cfg.run.duration_s - SETTLE_WINDOW_S).max(release_t);
        let rows: Vec<&TraceRow> = trace.iter().filter(|r| r.t_s >= settle_start).collect();
        if rows.is_empty() {
            None
        } else {
            let mut per_finger = vec![0.0; n];
            let mut slipping = 0usize;
            for r in &rows {
                for (i, f) in r.fingers.iter().enumerate() {
                    per_finger[i] += f.force_n;
                }
                if r.slide_speed_mps > SLIP_EPS_MPS {
                    slipping += 1;
                }
            }
            for f in per_finger.iter_mut() {
                *f /= rows.len() as f64;
            }
            let mean = per_finger.iter().sum::<f64>() / n as f64;
            let floor =
                crate::physics::min_stabilizing_force(object.friction_mu, n, object.weight())?;
            Some(SettledStats {
                window_s: cfg.run.duration_s - settle_start,
                per_finger_mean_force_n: per_finger,
                force_ratio_vs_min: mean / floor,
                slip_fraction: slipping as f64 / rows.len() as f64,
            })
        }
    } else {
        None
    };

    Ok(RunResult {
        trace,
        released_at_s: release_t,
        dropped_at_s: dropped_at,
        max_displacement_m: max_disp,
        peak_force_n: peak_force,
        settled,
        audit: AuditSummary {
            frames_routed: audit,
            cross_finger_reads,
            controller_order: order,
        },
    })
}

/// Two-sided scenario entry point: one robot finger holds an object
/// against the scripted pad in `run.partner`. Thin wrapper that insists a
/// partner is actually configured; everything else follows
/// [`run_stabilization`].
pub fn run_partner_stabilization(run: &StabilizationRun) -> Result<RunResult> {
    if run.partner.is_none() {
        return Err(Error::validation(
            "partner runs need a partner scenario".to_string(),
        ));
    }
    run_stabilization(run)
}

// ---------------------------------------------------------------------
// Generalization sweep
// ---------------------------------------------------------------------

/// Sensor variant used for a grip of `n` fingers: the five-finger hand
/// carries the faster, denser array.
pub fn variant_for_fingers(n: usize) -> SensorVariant {
    if n >= 5 {
        SensorVariant::BioTacSp
    } else {
        SensorVariant::BioTac
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub finger_counts: Vec<usize>,
    pub objects: Vec<String>,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    /// Full grid: every finger count, every catalog object, three seeds.
    pub fn default_grid(seed: u64) -> SweepSpec {
        SweepSpec {
            finger_counts: vec![2, 3, 4, 5],
            objects: crate::physics::object_catalog()
                .into_iter()
                .map(|o| o.id)
                .collect(),
            seeds: vec![seed, seed + 1, seed + 2],
        }
    }
}

/// One model per sensor variant, trained on that variant's own campaign.
/// A variant's slot may stay empty if the grid never uses it.
pub struct SweepModels {
    pub biotac: Option<Arc<SlipModel>>,
    pub biotac_sp: Option<Arc<SlipModel>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub finger_count: usize,
    pub object: String,
    pub seed: u64,
    pub variant: String,
    /// Prediction horizon of the model that drove this cell, frames.
    pub tau_f: usize,
    pub dropped: bool,
    pub max_displacement_m: f64,
    pub peak_force_n: f64,
    pub deformation_budget_n: f64,
    pub within_deformation_budget: bool,
    pub settled_mean_force_n: Option<f64>,
    pub settled_force_ratio: Option<f64>,
    pub settled_slip_fraction: Option<f64>,
}

/// Run the whole grid with the per-variant models. Cell order is fixed:
/// finger counts, then objects, then seeds.
pub fn run_sweep(
    base: &RunConfig,
    spec: &SweepSpec,
    models: &SweepModels,
) -> Result<Vec<SweepCell>> {
    if spec.finger_counts.is_empty() || spec.objects.is_empty() || spec.seeds.is_empty() {
        return Err(Error::validation(
            "sweep needs at least one finger count, object, and seed".to_string(),
        ));
    }
    let mut cells = Vec::new();
    for &fingers in &spec.finger_counts {
        let variant = variant_for_fingers(fingers);
        let model = match variant {
            SensorVariant::BioTac => models.biotac.clone(),
            SensorVariant::BioTacSp => models.biotac_sp.clone(),
        }
        .ok_or_else(|| {
            Error::validation(format!(
                "sweep includes {fingers}-finger cells but no model for the {} sensor was given",
                variant.name()
            ))
        })?;
        for object in &spec.objects {
            let budget = object_by_id(object)?.deformation_budget_n();
            for &seed in &spec.seeds {
                let mut cfg = base.clone();
                cfg.run.seed = seed;
                cfg.run.variant = variant;
                cfg.run.object = object.clone();
                cfg.run.finger_count = fingers;
                let result = run_stabilization(&StabilizationRun {
                    config: cfg,
                    model: model.clone(),
                    controller_order: None,
                    partner: None,
                })?;
                cells.push(SweepCell {
                    finger_count: fingers,
                    object: object.clone(),
                    seed,
                    variant: variant.name().to_string(),
                    tau_f: model.meta.horizon_frames,
                    dropped: result.dropped_at_s.is_some(),
                    max_displacement_m: result.max_displacement_m,
                    peak_force_n: result.peak_force_n,
                    deformation_budget_n: budget,
                    within_deformation_budget: result.peak_force_n < budget,
                    settled_mean_force_n: result.settled.as_ref().map(|s| {
                        s.per_finger_mean_force_n.iter().sum::<f64>()
                            / s.per_finger_mean_force_n.len() as f64
                    }),
                    settled_force_ratio: result.settled.as_ref().map(|s| s.force_ratio_vs_min),
                    settled_slip_fraction: result.settled.as_ref().map(|s| s.slip_fraction),
                });
            }
        }
    }
    Ok(cells)
}

/// Render sweep cells as a CSV document (header + one row per cell).
/// Formatting is fixed so identical cells always produce identical bytes.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from(
        "finger_count,object,seed,variant,tau_f,success,dropped,max_displacement_m,\
         peak_force_n,deformation_budget_n,within_deformation_budget,\
         settled_mean_force_n,settled_force_ratio,settled_slip_fraction\n",
    );
    for c in cells {
        let success = !c.dropped && c.max_displacement_m < DROP_DISPLACEMENT_M;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{},{},{}\n",
            c.finger_count,
            c.object,
            c.seed,
            c.variant,
            c.tau_f,
            success,
            c.dropped,
            c.max_displacement_m,
            c.peak_force_n,
            c.deformation_budget_n,
            c.within_deformation_budget,
            opt(c.settled_mean_force_n),
            opt(c.settled_force_ratio),
            opt(c.settled_slip_fraction),
        ));
    }
    out
}
