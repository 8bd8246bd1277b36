//! Python bindings for the grip-stabilization library.
//!
//! Exposes the pipeline's main operations — dataset collection, classifier
//! training, model prediction, and closed-loop grip simulation — plus the
//! bare slip-statistic/velocity law and the force floor used throughout.
//!
//! Errors map to `ValueError` for validation problems (bad names, bad
//! bounds, mismatched schemas) and `RuntimeError` for I/O or solver
//! failures, mirroring the CLI's exit codes 1 and 2.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gripsim::classifier::SlipModel;
use gripsim::config::RunConfig;
use gripsim::controller::{ControllerParams, SlipStatistic};
use gripsim::types::{Label, SensorVariant};
use gripsim::vec2::Vec2;
use gripsim::{cli, datagen, harness, physics};

fn to_py(err: gripsim::error::Error) -> PyErr {
    if err.is_validation() {
        PyValueError::new_err(err.to_string())
    } else {
        PyRuntimeError::new_err(err.to_string())
    }
}

/// Smallest uniform per-finger normal force that keeps a symmetric grip
/// static under the given load vector (newtons).
#[pyfunction]
fn min_stabilizing_force(friction_mu: f64, finger_count: usize, load: (f64, f64)) -> PyResult<f64> {
    physics::min_stabilizing_force(friction_mu, finger_count, Vec2::new(load.0, load.1))
        .map_err(to_py)
}

/// The graspable-object catalog as a list of dicts
/// (id, mass_kg, friction_mu, stiffness_n_per_m, deformation_budget_n).
#[pyfunction]
fn object_catalog(py: Python<'_>) -> PyResult<Vec<Bound<'_, PyDict>>> {
    physics::object_catalog()
        .into_iter()
        .map(|o| {
            let d = PyDict::new(py);
            d.set_item("id", &o.id)?;
            d.set_item("mass_kg", o.mass_kg)?;
            d.set_item("friction_mu", o.friction_mu)?;
            d.set_item("stiffness_n_per_m", o.stiffness_n_per_m)?;
            d.set_item("deformation_budget_n", o.deformation_budget_n())?;
            Ok(d)
        })
        .collect()
}

/// The leaky slip statistic and its exponential velocity law.
///
/// `update(label)` integrates one predicted label ("slip" raises the
/// statistic, "contact" lowers it, "no_contact" leaves it alone, always
/// clamped to [stat_min, stat_max]); `velocity_mps` is
/// `base_speed_mps * exp(speed_exponent * value)` — strictly positive, so
/// a finger advances but never retreats.
#[pyclass(name = "SlipStatistic")]
struct PySlipStatistic {
    inner: SlipStatistic,
}

#[pymethods]
impl PySlipStatistic {
    #[new]
    #[pyo3(signature = (*, speed_exponent = 1.5, base_speed_mps = 0.01,
                        step_on_slip = 0.3, step_on_contact = 0.6,
                        stat_min = -6.0, stat_max = 0.5))]
    fn new(
        speed_exponent: f64,
        base_speed_mps: f64,
        step_on_slip: f64,
        step_on_contact: f64,
        stat_min: f64,
        stat_max: f64,
    ) -> PySlipStatistic {
        PySlipStatistic {
            inner: SlipStatistic::new(ControllerParams {
                speed_exponent,
                base_speed_mps,
                step_on_slip,
                step_on_contact,
                stat_min,
                stat_max,
            }),
        }
    }

    /// Integrate one predicted label: "slip", "contact", or "no_contact".
    fn update(&mut self, label: &str) -> PyResult<()> {
        self.inner.update(Label::parse(label).map_err(to_py)?);
        Ok(())
    }

    #[getter]
    fn value(&self) -> f64 {
        self.inner.value()
    }

    #[getter]
    fn velocity_mps(&self) -> f64 {
        self.inner.velocity_mps()
    }
}

/// A trained per-finger slip classifier (multinomial logistic regression
/// over windowed tactile features).
#[pyclass(name = "SlipModel")]
struct PySlipModel {
    inner: Arc<SlipModel>,
}

#[pymethods]
impl PySlipModel {
    /// Load a model saved by `train` (JSON).
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<PySlipModel> {
        Ok(PySlipModel { inner: Arc::new(SlipModel::load(&path).map_err(to_py)?) })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    /// Predict the label for one feature vector: "slip", "contact", or
    /// "no_contact".
    fn predict(&self, features: Vec<f64>) -> PyResult<&'static str> {
        Ok(self.inner.predict(&features).map_err(to_py)?.name())
    }

    /// Feature layout id this model was trained for.
    #[getter]
    fn layout(&self) -> String {
        self.inner.layout.clone()
    }

    /// Sensor variant this model expects ("biotac" or "biotac_sp").
    #[getter]
    fn variant(&self) -> PyResult<&'static str> {
        Ok(cli::model_variant(&self.inner).map_err(to_py)?.name())
    }

    /// Length of the feature vectors this model consumes.
    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.weights.first().map(|w| w.len()).unwrap_or(0)
    }

    #[getter]
    fn window_frames(&self) -> usize {
        self.inner.meta.window_frames
    }

    #[getter]
    fn horizon_frames(&self) -> usize {
        self.inner.meta.horizon_frames
    }
}

fn apply_common(
    cfg: &mut RunConfig,
    seed: Option<u64>,
    variant: Option<&str>,
) -> PyResult<()> {
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    if let Some(v) = variant {
        cfg.run.variant = SensorVariant::parse(v).map_err(to_py)?;
    }
    Ok(())
}

/// Run a scripted slip/grasp data-collection campaign over the training
/// objects and write one JSONL stream per finger-trial plus a
/// `manifest.csv` into `out_dir`. Returns the number of streams written.
#[pyfunction]
#[pyo3(signature = (out_dir, *, seed = None, variant = None,
                    trial_duration_s = None, trials_per_combo = None))]
fn collect_dataset(
    out_dir: PathBuf,
    seed: Option<u64>,
    variant: Option<&str>,
    trial_duration_s: Option<f64>,
    trials_per_combo: Option<usize>,
) -> PyResult<usize> {
    let mut cfg = RunConfig::default();
    apply_common(&mut cfg, seed, variant)?;
    if let Some(d) = trial_duration_s {
        cfg.datagen.trial_duration_s = d;
    }
    if let Some(n) = trials_per_combo {
        cfg.datagen.trials_per_combo = n;
    }
    cfg.validate().map_err(to_py)?;
    let campaign = harness::default_campaign(&cfg);
    let manifest = datagen::run_campaign(&campaign, &out_dir).map_err(to_py)?;
    Ok(manifest.len())
}

/// Train a slip classifier on a collected dataset, save it to
/// `model_path`, and return held-out metrics as a dict (accuracy,
/// slip_recall, baseline_accuracy, n_train_rows, n_heldout_rows).
#[pyfunction]
#[pyo3(signature = (data_dir, model_path, *, seed = None, variant = None,
                    tau_f = None, epochs = None))]
fn train<'py>(
    py: Python<'py>,
    data_dir: PathBuf,
    model_path: PathBuf,
    seed: Option<u64>,
    variant: Option<&str>,
    tau_f: Option<usize>,
    epochs: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = RunConfig::default();
    apply_common(&mut cfg, seed, variant)?;
    if let Some(t) = tau_f {
        cfg.classifier.horizon_frames = t;
    }
    if let Some(e) = epochs {
        cfg.classifier.epochs = e;
    }
    cfg.validate().map_err(to_py)?;
    let artifacts = harness::train_from_dataset(&data_dir, &cfg).map_err(to_py)?;
    if let Some(parent) = model_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| gripsim::error::Error::io(parent, e))
            .map_err(to_py)?;
    }
    artifacts.model.save(&model_path).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("accuracy", artifacts.heldout.accuracy)?;
    d.set_item("slip_recall", artifacts.heldout.recall[Label::Slip.index()])?;
    d.set_item("baseline_accuracy", artifacts.baseline_heldout.accuracy)?;
    d.set_item("n_train_rows", artifacts.n_train_rows)?;
    d.set_item("n_heldout_rows", artifacts.n_heldout_rows)?;
    Ok(d)
}

/// Run one closed-loop stabilization trial (controllers are per-finger
/// and never read another finger's frames) and return a summary dict.
#[pyfunction]
#[pyo3(signature = (model, object, fingers, *, disturbance = "pulses",
                    seed = None, duration_s = None))]
fn simulate<'py>(
    py: Python<'py>,
    model: &PySlipModel,
    object: &str,
    fingers: usize,
    disturbance: &str,
    seed: Option<u64>,
    duration_s: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = RunConfig::default();
    apply_common(&mut cfg, seed, None)?;
    if let Some(d) = duration_s {
        cfg.run.duration_s = d;
    }
    cfg.run.object = object.to_string();
    cfg.run.finger_count = fingers;
    cfg.run.variant = cli::model_variant(&model.inner).map_err(to_py)?;
    cfg.harness.disturbance = disturbance.to_string();
    cfg.validate().map_err(to_py)?;
    let result = harness::run_stabilization(&harness::StabilizationRun {
        config: cfg,
        model: Arc::clone(&model.inner),
        controller_order: None,
        partner: None,
    })
    .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("released_at_s", result.released_at_s)?;
    d.set_item("dropped_at_s", result.dropped_at_s)?;
    d.set_item("max_displacement_m", result.max_displacement_m)?;
    d.set_item("peak_force_n", result.peak_force_n)?;
    d.set_item("cross_finger_reads", result.audit.cross_finger_reads)?;
    match &result.settled {
        Some(s) => {
            d.set_item("settled_mean_force_n", s.per_finger_mean_force_n.clone())?;
            d.set_item("settled_slip_fraction", s.slip_fraction)?;
            d.set_item("settled_force_ratio_vs_min", s.force_ratio_vs_min)?;
        }
        None => {
            d.set_item("settled_mean_force_n", py.None())?;
            d.set_item("settled_slip_fraction", py.None())?;
            d.set_item("settled_force_ratio_vs_min", py.None())?;
        }
    }
    Ok(d)
}

#[pymodule]
fn gripsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(min_stabilizing_force, m)?)?;
    m.add_function(wrap_pyfunction!(object_catalog, m)?)?;
    m.add_function(wrap_pyfunction!(collect_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_class::<PySlipStatistic>()?;
    m.add_class::<PySlipModel>()?;
    Ok(())
}
