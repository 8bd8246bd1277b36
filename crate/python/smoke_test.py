#!/usr/bin/env python3
"""Smoke test for the gripsim_py extension module.

Builds the cdylib with cargo, loads it, and drives a miniature
end-to-end pipeline: collect a small dataset, train a slip classifier,
predict with it, and run one closed-loop stabilization trial.

Usage: python3 python/smoke_test.py
"""

import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def build_extension(stage_dir: Path) -> None:
    """Compile the extension and stage it under an importable name."""
    subprocess.run(["cargo", "build", "-p", "gripsim-py"], cwd=ROOT, check=True)
    debug = ROOT / "target" / "debug"
    for name in ("libgripsim_py.so", "libgripsim_py.dylib", "gripsim_py.dll"):
        src = debug / name
        if src.exists():
            suffix = ".pyd" if name.endswith(".dll") else ".so"
            shutil.copy2(src, stage_dir / f"gripsim_py{suffix}")
            return
    raise FileNotFoundError(f"no gripsim_py cdylib found under {debug}")


def check_force_floor(gp) -> None:
    # A symmetric 2-finger grip on a 0.5 kg object at mu=0.5 needs
    # |load| / (n * mu) = 4.905 N per finger.
    f = gp.min_stabilizing_force(0.5, 2, (0.0, -0.5 * 9.81))
    assert abs(f - 4.905) < 1e-9, f
    # Validation errors surface as ValueError.
    try:
        gp.min_stabilizing_force(0.0, 2, (0.0, -1.0))
    except ValueError:
        pass
    else:
        raise AssertionError("mu=0 should be rejected")


def check_statistic_law(gp) -> None:
    s = gp.SlipStatistic()  # defaults
    assert s.value == 0.0
    assert s.velocity_mps == 0.01  # base speed exactly at l = 0
    s.update("slip")
    assert abs(s.value - 0.3) < 1e-12
    assert abs(s.velocity_mps - 0.01 * math.exp(1.5 * 0.3)) < 1e-15
    s.update("no_contact")
    assert abs(s.value - 0.3) < 1e-12  # inert
    s.update("contact")
    assert abs(s.value - (-0.3)) < 1e-12
    for _ in range(50):
        s.update("contact")
    assert s.value == -6.0  # clamped at stat_min
    assert s.velocity_mps > 0.0  # never retreats

    tight = gp.SlipStatistic(step_on_slip=1.0, stat_max=0.5)
    tight.update("slip")
    assert tight.value == 0.5  # clamped at stat_max


def check_catalog(gp) -> None:
    cat = gp.object_catalog()
    ids = [o["id"] for o in cat]
    assert ids == ["ball", "box", "tuna_can", "plastic_cup"], ids
    for o in cat:
        assert o["mass_kg"] > 0 and o["friction_mu"] > 0
        assert o["deformation_budget_n"] > 0


def check_pipeline(gp, tmp: Path) -> None:
    data = tmp / "data"
    n_streams = gp.collect_dataset(
        data, seed=42, trial_duration_s=8.0, trials_per_combo=1
    )
    # 2 training objects x 3 target pressures x 1 repeat, 3 fingers each.
    assert n_streams == 18, n_streams
    assert (data / "manifest.csv").exists()

    model_path = tmp / "model.json"
    stats = gp.train(data, model_path, seed=42, tau_f=3, epochs=150)
    assert stats["n_train_rows"] > 0 and stats["n_heldout_rows"] > 0
    assert stats["accuracy"] > 0.7, stats
    assert stats["slip_recall"] > 0.5, stats
    assert 0.0 <= stats["baseline_accuracy"] <= 1.0

    model = gp.SlipModel.load(model_path)
    assert model.variant == "biotac"
    assert model.window_frames == 10 and model.horizon_frames == 3
    assert model.feature_dim > 0
    label = model.predict([0.0] * model.feature_dim)
    assert label in ("slip", "contact", "no_contact"), label
    try:
        model.predict([0.0] * (model.feature_dim + 1))
    except ValueError:
        pass
    else:
        raise AssertionError("wrong feature length should be rejected")

    run = gp.simulate(model, "ball", 2, disturbance="none", seed=42, duration_s=6.0)
    assert run["dropped_at_s"] is None, run
    assert run["max_displacement_m"] < 0.030, run
    assert run["peak_force_n"] > 0.0
    assert run["cross_finger_reads"] == 0
    forces = run["settled_mean_force_n"]
    assert forces is not None and len(forces) == 2
    floor = gp.min_stabilizing_force(0.5, 2, (0.0, -0.5 * 9.81))
    assert all(f >= floor for f in forces), (forces, floor)

    try:
        gp.simulate(model, "ball", 6)
    except ValueError:
        pass
    else:
        raise AssertionError("6 fingers should be rejected")


def main() -> None:
    with tempfile.TemporaryDirectory(prefix="gripsim_py_") as tmp_name:
        tmp = Path(tmp_name)
        stage = tmp / "stage"
        stage.mkdir()
        build_extension(stage)
        sys.path.insert(0, str(stage))
        import gripsim_py as gp

        check_force_floor(gp)
        check_statistic_law(gp)
        check_catalog(gp)
        check_pipeline(gp, tmp)
    print("smoke test passed")


if __name__ == "__main__":
    main()
