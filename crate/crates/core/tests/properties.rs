//! Randomized invariants: the friction law the physics must honor under
//! arbitrary commands, the controller's clamp/monotonicity guarantees,
//! feature-extraction purity, and window/label alignment in dataset
//! assembly.

use proptest::prelude::*;

use gripsim::controller::{ControllerParams, SlipStatistic};
use gripsim::dataset::{self, Record};
use gripsim::features;
use gripsim::physics::{object_catalog, FingerCommand, StepOutcome, World};
use gripsim::types::{Label, SensorFrame, SensorVariant};
use gripsim::vec2::Vec2;

// ---------------------------------------------------------------------
// Coulomb consistency: a contact reports more tangential load than its
// friction limit exactly when it slips.
// ---------------------------------------------------------------------

fn assert_coulomb(outcome: &StepOutcome, mu: f64) {
    for c in &outcome.contacts {
        prop_assert_ok(c.normal_force_n >= 0.0, "normal force must be >= 0");
        prop_assert_ok(
            (c.contact_normal.norm() - 1.0).abs() < 1e-9,
            "contact normal must stay unit length",
        );
        if !c.in_contact {
            prop_assert_ok(c.normal_force_n == 0.0, "no contact, no normal force");
            prop_assert_ok(c.tangential_load_n == 0.0, "no contact, no tangential load");
            prop_assert_ok(c.slip_speed_mps == 0.0, "no contact, no slip");
            continue;
        }
        let limit = mu * c.normal_force_n;
        if c.slip_speed_mps > 0.0 {
            prop_assert_ok(
                c.tangential_load_n.abs() > limit,
                "a slipping contact must be past its friction limit",
            );
        } else {
            prop_assert_ok(
                c.tangential_load_n.abs() <= limit + 1e-9,
                "a static contact must hold within its friction limit",
            );
        }
    }
}

/// On a free object the slide is rigid-body motion: every slipping
/// contact must report the same speed.
fn assert_shared_slide(outcome: &StepOutcome) {
    let speeds: Vec<f64> = outcome
        .contacts
        .iter()
        .filter(|c| c.slip_speed_mps > 0.0)
        .map(|c| c.slip_speed_mps)
        .collect();
    if let Some(&first) = speeds.first() {
        for &s in &speeds {
            prop_assert_ok((s - first).abs() < 1e-12, "slide speed must be shared");
        }
    }
}

/// proptest's macros only work inside `proptest!`; this keeps the helper
/// usable from plain fns called within the generated tests.
fn prop_assert_ok(cond: bool, msg: &str) {
    assert!(cond, "{msg}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn coulomb_holds_on_free_grips(
        object_idx in 0..4usize,
        fingers in 1..=5usize,
        preload_n in 0.1..4.0f64,
        segments in prop::collection::vec(
            (
                prop::collection::vec((-0.02..0.04f64, -0.01..0.01f64), 5),
                (-1.5..1.5f64, -1.5..1.5f64),
            ),
            1..5,
        ),
    ) {
        let object = object_catalog().swap_remove(object_idx);
        let mu = object.friction_mu;
        let mut world = World::grip(object, fingers).unwrap();
        world.engage_grip(preload_n);
        let dt = 0.001;
        for (cmds, pulse) in &segments {
            let commands: Vec<FingerCommand> = cmds[..fingers]
                .iter()
                .map(|&(a, t)| FingerCommand { advance_mps: a, tangential_mps: t })
                .collect();
            let external = Vec2::new(pulse.0, pulse.1);
            for _ in 0..40 {
                let outcome = world.step(&commands, external, dt).unwrap();
                assert_coulomb(&outcome, mu);
                assert_shared_slide(&outcome);
            }
        }
    }

    #[test]
    fn coulomb_holds_on_the_fixed_rig(
        object_idx in 0..4usize,
        sites in prop::sample::subsequence(vec![0usize, 1, 2, 3, 4], 1..=5),
        segments in prop::collection::vec(
            prop::collection::vec((0.0..0.08f64, -0.05..0.05f64), 5),
            1..4,
        ),
    ) {
        let object = object_catalog().swap_remove(object_idx);
        let mu = object.friction_mu;
        let mut world = World::fixed_rig(object, &sites).unwrap();
        let dt = 0.001;
        for cmds in &segments {
            let commands: Vec<FingerCommand> = cmds[..sites.len()]
                .iter()
                .map(|&(a, t)| FingerCommand { advance_mps: a, tangential_mps: t })
                .collect();
            for _ in 0..60 {
                let outcome = world.step(&commands, Vec2::ZERO, dt).unwrap();
                assert_coulomb(&outcome, mu);
                // The rig holds the object: it must never move.
                prop_assert!(outcome.object_pos == Vec2::ZERO);
            }
        }
    }
}

// ---------------------------------------------------------------------
// Controller law: clamped statistic, positive speed, monotone response.
// ---------------------------------------------------------------------

fn label_seq() -> impl Strategy<Value = Vec<Label>> {
    prop::collection::vec(0..3usize, 1..200)
        .prop_map(|v| v.into_iter().map(|i| Label::from_index(i).unwrap()).collect())
}

fn params_strategy() -> impl Strategy<Value = ControllerParams> {
    (
        0.1..3.0f64,
        1e-4..0.05f64,
        1e-3..1.0f64,
        1e-3..1.0f64,
        -8.0..0.0f64,
        0.0..3.0f64,
    )
        .prop_map(
            |(speed_exponent, base_speed_mps, step_on_slip, step_on_contact, stat_min, stat_max)| {
                ControllerParams {
                    speed_exponent,
                    base_speed_mps,
                    step_on_slip,
                    step_on_contact,
                    stat_min,
                    stat_max,
                }
            },
        )
}

proptest! {
    #[test]
    fn statistic_stays_clamped_and_speed_positive(
        params in params_strategy(),
        labels in label_seq(),
    ) {
        let mut s = SlipStatistic::new(params);
        prop_assert_eq!(s.velocity_mps(), params.base_speed_mps);
        for label in labels {
            s.update(label);
            prop_assert!(s.value() >= params.stat_min && s.value() <= params.stat_max);
            prop_assert!(s.velocity_mps() > 0.0);
        }
    }

    #[test]
    fn uniform_predictions_move_speed_monotonically(
        params in params_strategy(),
        steps in 1..100usize,
    ) {
        // All-slip: non-decreasing. All-contact: non-increasing.
        let mut up = SlipStatistic::new(params);
        let mut down = SlipStatistic::new(params);
        let mut last_up = up.velocity_mps();
        let mut last_down = down.velocity_mps();
        for _ in 0..steps {
            up.update(Label::Slip);
            down.update(Label::Contact);
            prop_assert!(up.velocity_mps() >= last_up);
            prop_assert!(down.velocity_mps() <= last_down);
            last_up = up.velocity_mps();
            last_down = down.velocity_mps();
        }
    }
}

// ---------------------------------------------------------------------
// Feature extraction: pure, independent of absolute frame time, and
// invariant to the per-trial pressure baseline shifting with its signal.
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
struct WindowCase {
    frames: Vec<SensorFrame>,
    baseline: f64,
    offset: f64,
    t_shift: u64,
}

fn window_case() -> impl Strategy<Value = WindowCase> {
    (
        prop::bool::ANY,
        3..16usize,
        0..10_000u64,
        1..1000u64,
        1900.0..2100.0f64,
        -500.0..500.0f64,
    )
        .prop_flat_map(|(sp, len, t0, t_shift, baseline, offset)| {
            let variant = if sp { SensorVariant::BioTacSp } else { SensorVariant::BioTac };
            let per_frame = (
                1900.0..2400.0f64,
                prop::collection::vec(-30.0..30.0f64, variant.p_ac_batch()),
                prop::collection::vec(-50.0..50.0f64, variant.electrode_count()),
            );
            prop::collection::vec(per_frame, len).prop_map(move |rows| {
                let frames = rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, (p_dc, p_ac, electrodes))| SensorFrame {
                        t: t0 + i as u64,
                        finger: 0,
                        variant,
                        p_dc,
                        p_ac,
                        electrodes,
                        t_dc: 25.0,
                        t_ac: 0.0,
                    })
                    .collect();
                WindowCase { frames, baseline, offset, t_shift }
            })
        })
}

proptest! {
    #[test]
    fn extraction_is_pure_and_time_translation_invariant(case in window_case()) {
        let a = features::extract(&case.frames, case.baseline).unwrap();
        let b = features::extract(&case.frames, case.baseline).unwrap();
        prop_assert_eq!(&a, &b, "same window, same features, bit for bit");
        prop_assert_eq!(a.len(), features::FEATURE_DIM);
        prop_assert!(a.iter().all(|v| v.is_finite()));

        // Shifting absolute frame indices changes nothing.
        let shifted: Vec<SensorFrame> = case
            .frames
            .iter()
            .map(|f| SensorFrame { t: f.t + case.t_shift, ..f.clone() })
            .collect();
        let c = features::extract(&shifted, case.baseline).unwrap();
        prop_assert_eq!(&a, &c, "absolute time must not leak into features");
    }

    #[test]
    fn grounding_absorbs_constant_pressure_offsets(case in window_case()) {
        let a = features::extract(&case.frames, case.baseline).unwrap();
        let lifted: Vec<SensorFrame> = case
            .frames
            .iter()
            .map(|f| SensorFrame { p_dc: f.p_dc + case.offset, ..f.clone() })
            .collect();
        let b = features::extract(&lifted, case.baseline + case.offset).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(
                (x - y).abs() <= 1e-6 * (1.0 + x.abs()),
                "offset leaked: {} vs {}", x, y
            );
        }
    }
}

// ---------------------------------------------------------------------
// Dataset assembly: sliding-window count and future-label alignment.
// ---------------------------------------------------------------------

fn synth_record(t: u64, label: Label) -> Record {
    Record {
        t,
        finger: 0,
        variant: SensorVariant::BioTac,
        p_dc: 2000.0 + (t % 17) as f64 * 3.0,
        p_ac: vec![0.25; 22],
        electrodes: vec![0.5; 19],
        t_dc: 25.0,
        t_ac: 0.0,
        gt_contact: label != Label::NoContact,
        gt_slip: label == Label::Slip,
        auto_label: label,
        pos: [0.03, 0.0],
    }
}

proptest! {
    #[test]
    fn training_rows_count_and_label_offsets(
        window in 2..12usize,
        horizon in 1..6usize,
        extra in 1..40usize,
        label_picks in prop::collection::vec(0..3usize, 60),
    ) {
        let len = window + horizon + extra;
        let records: Vec<Record> = (0..len)
            .map(|i| synth_record(i as u64, Label::from_index(label_picks[i % 60] ).unwrap()))
            .collect();
        let rows = dataset::training_rows(&records, window, horizon).unwrap();
        prop_assert_eq!(rows.len(), len - window - horizon + 1);
        for (i, (feats, label)) in rows.iter().enumerate() {
            prop_assert_eq!(feats.len(), features::FEATURE_DIM);
            // The window covering [i, i+window) predicts the label at the
            // window end plus the horizon.
            prop_assert_eq!(*label, records[i + window - 1 + horizon].auto_label);
        }
    }

    #[test]
    fn split_covers_everything_once(
        n in 2..400usize,
        seed in 0..u64::MAX,
        fraction in 0.05..0.8f64,
    ) {
        let (train, test) = dataset::split_finger_trials(n, fraction, seed).unwrap();
        prop_assert!(!train.is_empty() && !test.is_empty());
        let mut all: Vec<usize> = train.iter().chain(test.iter()).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        // Same seed, same split.
        let again = dataset::split_finger_trials(n, fraction, seed).unwrap();
        prop_assert_eq!((train, test), again);
    }
}
