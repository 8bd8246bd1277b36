//! Command-line pipeline: collect → train → eval → simulate → sweep →
//! report. Every subcommand is a pure function of its flags, the config
//! file, and the seed; outputs land under caller-supplied paths.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::classifier::SlipModel;
use crate::config::{RunConfig, MAX_FINGERS};
use crate::dataset;
use crate::datagen;
use crate::error::{Error, Result};
use crate::features;
use crate::harness::{
    self, PartnerScenario, StabilizationRun, SweepModels, SweepSpec,
};
use crate::report;
use crate::types::SensorVariant;

#[derive(Debug, Parser)]
#[command(
    name = "gripsim",
    about = "Tactile grip stabilization pipeline: collect data, train a slip classifier, run closed-loop grips",
    version
)]
pub struct Cli {
    /// Config TOML; falls back to the GRIPSIM_CONFIG env var, then to
    /// built-in defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scripted data-collection campaign into a dataset directory.
    Collect {
        /// Output dataset directory (created if missing).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Train a slip classifier from a collected dataset.
    Train {
        /// Dataset directory produced by `collect`.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Output model file (JSON).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Prediction horizon in frames; defaults to the config value.
        #[arg(long = "tau-f", value_name = "FRAMES")]
        tau_f: Option<usize>,
    },
    /// Score a model on a dataset split and write a per-class metrics CSV.
    Eval {
        /// Model file from `train`.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Dataset directory produced by `collect`.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Output metrics CSV.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Which rows to score: the held-out fifth of trials ("heldout"),
        /// the training rest ("train"), or everything ("all").
        #[arg(long, default_value = "heldout")]
        split: String,
    },
    /// Run one closed-loop stabilization and write run.json + trace.csv.
    Simulate {
        /// Model file from `train`.
        #[arg(long, value_name = "FILE")]
        model: PathBuf,
        /// Object to grip (see the catalog in the README).
        #[arg(long)]
        object: String,
        /// Number of fingers, 1..=5.
        #[arg(long)]
        fingers: usize,
        /// Disturbance schedule: "none" or "pulses".
        #[arg(long, default_value = "pulses")]
        disturbance: String,
        /// Output directory (created if missing).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Run a grid of stabilization runs and write one CSV row per cell.
    Sweep {
        /// Grid TOML: axes plus model paths (see the README).
        #[arg(long, value_name = "FILE")]
        grid: PathBuf,
        /// Output sweep CSV.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Render a markdown report from previously produced artifacts.
    Report {
        /// Directory holding collect/eval/simulate/sweep outputs.
        #[arg(long = "in", value_name = "DIR")]
        in_dir: PathBuf,
        /// Output markdown file; aggregate CSVs land next to it.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
}

/// Exit code for an error: 1 for validation problems (bad flags, bad
/// bounds, mismatched schemas), 2 for runtime failures (I/O, parsing).
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        1
    } else {
        2
    }
}

/// Run one parsed invocation. Prints a one-line summary per subcommand.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::resolve(cli.config.as_deref())?;
    match cli.command {
        Command::Collect { out } => collect(&cfg, &out),
        Command::Train { data, out, tau_f } => train(&cfg, &data, &out, tau_f),
        Command::Eval { model, data, out, split } => eval(&cfg, &model, &data, &out, &split),
        Command::Simulate { model, object, fingers, disturbance, out } => {
            simulate(&cfg, &model, &object, fingers, &disturbance, &out)
        }
        Command::Sweep { grid, out } => sweep(&cfg, &grid, &out),
        Command::Report { in_dir, out } => render_report(&in_dir, &out),
    }
}

fn collect(cfg: &RunConfig, out: &Path) -> Result<()> {
    cfg.validate()?;
    let campaign = harness::default_campaign(cfg);
    let manifest = datagen::run_campaign(&campaign, out)?;
    let trials: std::collections::BTreeSet<&str> =
        manifest.iter().map(|r| r.trial_id.as_str()).collect();
    println!(
        "collected {} trials ({} finger-trial streams) into {}",
        trials.len(),
        manifest.len(),
        out.display()
    );
    Ok(())
}

fn train(cfg: &RunConfig, data: &Path, out: &Path, tau_f: Option<usize>) -> Result<()> {
    let mut cfg = cfg.clone();
    if let Some(t) = tau_f {
        cfg.classifier.horizon_frames = t;
    }
    cfg.validate()?;
    let artifacts = harness::train_from_dataset(data, &cfg)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    artifacts.model.save(out)?;
    println!(
        "trained on {} rows (heldout {}): accuracy {:.4}, slip recall {:.4}; baseline accuracy {:.4}; model -> {}",
        artifacts.n_train_rows,
        artifacts.n_heldout_rows,
        artifacts.heldout.accuracy,
        artifacts.heldout.recall[crate::types::Label::Slip.index()],
        artifacts.baseline_heldout.accuracy,
        out.display()
    );
    Ok(())
}

fn eval(cfg: &RunConfig, model_path: &Path, data: &Path, out: &Path, split: &str) -> Result<()> {
    let model = SlipModel::load(model_path)?;
    let variant = model_variant(&model)?;
    let manifest = dataset::read_manifest(&data.join("manifest.csv"))?;
    if manifest.is_empty() {
        return Err(Error::validation(format!(
            "dataset manifest at {} lists no streams",
            data.join("manifest.csv").display()
        )));
    }
    // The dataset must carry the sensor the model was trained on.
    let first = dataset::read_jsonl(&data.join(&manifest[0].file))?;
    let data_variant = first
        .first()
        .map(|r| r.variant)
        .ok_or_else(|| Error::validation("dataset stream is empty".to_string()))?;
    if data_variant != variant {
        return Err(Error::validation(format!(
            "model expects the {} sensor but the dataset was recorded with {}",
            variant.name(),
            data_variant.name()
        )));
    }
    let (train_idx, heldout_idx) = dataset::split_finger_trials(
        manifest.len(),
        harness::TEST_FRACTION,
        cfg.run.seed,
    )?;
    let indices: Vec<usize> = match split {
        "heldout" => heldout_idx,
        "train" => train_idx,
        "all" => (0..manifest.len()).collect(),
        other => {
            return Err(Error::validation(format!(
                "split must be one of heldout, train, all (got '{other}')"
            )))
        }
    };
    let mut indices = indices;
    indices.sort_unstable();
    let rows = datagen::build_rows(
        data,
        &manifest,
        &indices,
        model.meta.window_frames,
        model.meta.horizon_frames,
    )?;
    let eval = crate::classifier::evaluate(|f| model.predict(f), &rows)?;
    let csv = report::metrics_csv(&eval);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(out, &csv).map_err(|e| Error::io(out, e))?;
    println!(
        "evaluated {} rows ({split} split): accuracy {:.4}, slip recall {:.4}; metrics -> {}",
        eval.n,
        eval.accuracy,
        eval.recall[crate::types::Label::Slip.index()],
        out.display()
    );
    Ok(())
}

fn simulate(
    cfg: &RunConfig,
    model_path: &Path,
    object: &str,
    fingers: usize,
    disturbance: &str,
    out: &Path,
) -> Result<()> {
    if fingers < 1 || fingers > MAX_FINGERS {
        return Err(Error::validation(format!(
            "finger count must be in 1..={MAX_FINGERS} (got {fingers})"
        )));
    }
    let model = Arc::new(SlipModel::load(model_path)?);
    let mut cfg = cfg.clone();
    cfg.run.object = object.to_string();
    cfg.run.finger_count = fingers;
    cfg.run.variant = model_variant(&model)?;
    cfg.harness.disturbance = disturbance.to_string();
    cfg.validate()?;
    let result = harness::run_stabilization(&StabilizationRun {
        config: cfg.clone(),
        model,
        controller_order: None,
        partner: None,
    })?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    report::RunArtifact::from_run(&cfg, "solo", &result).save(&out.join("run.json"))?;
    std::fs::write(out.join("trace.csv"), report::trace_csv(&result))
        .map_err(|e| Error::io(out.join("trace.csv"), e))?;
    println!(
        "simulated {object} with {fingers} fingers: dropped {}, max displacement {:.1} mm, peak force {:.2} N; outputs -> {}",
        result.dropped_at_s.map(|t| format!("at {t:.2} s")).unwrap_or_else(|| "no".to_string()),
        result.max_displacement_m * 1000.0,
        result.peak_force_n,
        out.display()
    );
    Ok(())
}

/// Grid file for `sweep`: axes default to the full catalog grid; model
/// paths are required for whichever sensor variants the axes touch.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    finger_counts: Option<Vec<usize>>,
    objects: Option<Vec<String>>,
    seeds: Option<Vec<u64>>,
    model_biotac: Option<PathBuf>,
    model_biotac_sp: Option<PathBuf>,
}

fn sweep(cfg: &RunConfig, grid_path: &Path, out: &Path) -> Result<()> {
    cfg.validate()?;
    let text = std::fs::read_to_string(grid_path).map_err(|e| Error::io(grid_path, e))?;
    let grid: GridFile =
        toml::from_str(&text).map_err(|e| Error::parse(grid_path, e.to_string()))?;
    let defaults = SweepSpec::default_grid(cfg.run.seed);
    let spec = SweepSpec {
        finger_counts: grid.finger_counts.unwrap_or(defaults.finger_counts),
        objects: grid.objects.unwrap_or(defaults.objects),
        seeds: grid.seeds.unwrap_or(defaults.seeds),
    };
    // Resolve model paths relative to the grid file's directory.
    let base = grid_path.parent().unwrap_or(Path::new(""));
    let load = |p: &PathBuf| -> Result<Arc<SlipModel>> {
        let path = if p.is_absolute() { p.clone() } else { base.join(p) };
        Ok(Arc::new(SlipModel::load(&path)?))
    };
    let models = SweepModels {
        biotac: grid.model_biotac.as_ref().map(&load).transpose()?,
        biotac_sp: grid.model_biotac_sp.as_ref().map(&load).transpose()?,
    };
    let cells = harness::run_sweep(cfg, &spec, &models)?;
    let csv = harness::sweep_csv(&cells);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(out, &csv).map_err(|e| Error::io(out, e))?;
    let ok = cells
        .iter()
        .filter(|c| !c.dropped && c.max_displacement_m < crate::physics::DROP_DISPLACEMENT_M)
        .count();
    println!(
        "swept {} cells: {} succeeded ({:.1}%); csv -> {}",
        cells.len(),
        ok,
        100.0 * ok as f64 / cells.len() as f64,
        out.display()
    );
    Ok(())
}

fn render_report(in_dir: &Path, out: &Path) -> Result<()> {
    let bundle = report::build_report(in_dir)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(out, &bundle.markdown).map_err(|e| Error::io(out, e))?;
    let dir = out.parent().unwrap_or(Path::new(""));
    for (name, csv) in &bundle.aggregates {
        let path = dir.join(name);
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    }
    println!(
        "report -> {} (+{} aggregate CSVs)",
        out.display(),
        bundle.aggregates.len()
    );
    Ok(())
}

/// Infer which sensor variant a model was trained for from its layout id.
pub fn model_variant(model: &SlipModel) -> Result<SensorVariant> {
    for variant in [SensorVariant::BioTac, SensorVariant::BioTacSp] {
        if model.layout == features::layout_id(variant, model.meta.window_frames) {
            return Ok(variant);
        }
    }
    Err(Error::validation(format!(
        "model layout '{}' does not match any known sensor variant",
        model.layout
    )))
}

/// A partner scenario by name, for harness-level callers.
pub fn partner_scenario(name: &str) -> Result<PartnerScenario> {
    match name {
        "constant" => Ok(PartnerScenario::ConstantPush { force_n: 3.0 }),
        "ramp" => Ok(PartnerScenario::RampPush { to_n: 6.0, over_s: 10.0 }),
        "withdraw" => Ok(PartnerScenario::PushThenWithdraw {
            force_n: 3.0,
            after_s: 5.0,
            retreat_m: 0.003,
            over_s: 0.5,
        }),
        other => Err(Error::validation(format!(
            "unknown partner scenario '{other}' (expected constant, ramp, or withdraw)"
        ))),
    }
}
