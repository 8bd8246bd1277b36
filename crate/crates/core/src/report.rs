//! Markdown report assembly from pipeline artifacts.
//!
//! Everything here reads files the other stages wrote — dataset
//! manifests, metrics tables, run summaries, sweep grids — and renders
//! them into one document plus plot-ready aggregate CSVs. Nothing is
//! recomputed: if a number is not in an artifact, it is not in the
//! report.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::EvalReport;
use crate::config::RunConfig;
use crate::dataset;
use crate::error::{Error, Result};
use crate::harness::{RunResult, SettledStats};
use crate::types::Label;

/// Disk summary of one closed-loop run: the config that produced it plus
/// the outcome. The frame-by-frame trace lives in a sibling CSV, so this
/// file stays small enough to skim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub config: RunConfig,
    /// Scenario tag: "solo" or a partner description.
    pub scenario: String,
    pub released_at_s: f64,
    pub dropped_at_s: Option<f64>,
    pub max_displacement_m: f64,
    pub peak_force_n: f64,
    pub settled: Option<SettledStats>,
    pub cross_finger_reads: u64,
}

impl RunArtifact {
    pub fn from_run(config: &RunConfig, scenario: &str, result: &RunResult) -> RunArtifact {
        RunArtifact {
            config: config.clone(),
            scenario: scenario.to_string(),
            released_at_s: result.released_at_s,
            dropped_at_s: result.dropped_at_s,
            max_displacement_m: result.max_displacement_m,
            peak_force_n: result.peak_force_n,
            settled: result.settled.clone(),
            cross_finger_reads: result.audit.cross_finger_reads,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::runtime(format!("serializing run summary: {e}")))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<RunArtifact> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

/// Render a run's trace as a plot-ready CSV: one row per sensor frame,
/// one column group per finger. Fixed formatting keeps identical runs
/// byte-identical on disk.
pub fn trace_csv(result: &RunResult) -> String {
    let n = result.trace.first().map(|r| r.fingers.len()).unwrap_or(0);
    let mut out = String::from("t_s,object_x_m,object_y_m,slide_speed_mps,partner_force_n");
    for i in 0..n {
        out.push_str(&format!(
            ",f{i}_force_n,f{i}_stat,f{i}_command_mps,f{i}_prediction,f{i}_slipping"
        ));
    }
    out.push('\n');
    for row in &result.trace {
        out.push_str(&format!(
            "{:.4},{:.6},{:.6},{:.6},{}",
            row.t_s,
            row.object_pos[0],
            row.object_pos[1],
            row.slide_speed_mps,
            row.partner_force_n
                .map(|f| format!("{f:.6}"))
                .unwrap_or_default(),
        ));
        for f in &row.fingers {
            out.push_str(&format!(
                ",{:.6},{:.6},{:.6},{},{}",
                f.force_n,
                f.stat,
                f.command_mps,
                f.prediction.map(|p| p.name()).unwrap_or(""),
                f.slipping,
            ));
        }
        out.push('\n');
    }
    out
}

/// Render classifier metrics as a CSV with exactly one row per class.
/// Precision/recall/F1 come straight from the confusion matrix.
pub fn metrics_csv(report: &EvalReport) -> String {
    let mut out = String::from("class,precision,recall,f1,support,overall_accuracy,n\n");
    for class in [Label::Slip, Label::Contact, Label::NoContact] {
        let i = class.index();
        let support: usize = report.confusion[i].iter().sum();
        let predicted: usize = report.confusion.iter().map(|row| row[i]).sum();
        let hit = report.confusion[i][i] as f64;
        let precision = if predicted > 0 { hit / predicted as f64 } else { 0.0 };
        let recall = report.recall[i];
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{},{:.6},{}\n",
            class.name(),
            precision,
            recall,
            f1,
            support,
            report.accuracy,
            report.n,
        ));
    }
    out
}

/// The assembled report: one markdown document plus any derived
/// plot-ready CSVs (filename stem, contents).
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub markdown: String,
    pub aggregates: Vec<(String, String)>,
}

/// Walk `in_dir` for artifacts by naming convention and render them.
///
/// Recognized inputs: `manifest.csv` (dataset inventory), `*metrics*.csv`
/// (classifier evaluation), `run*.json` (run summaries), `sweep*.csv`
/// (grid results). Paths are sorted so the document layout is stable.
pub fn build_report(in_dir: &Path) -> Result<ReportBundle> {
    let mut manifests = Vec::new();
    let mut metrics = Vec::new();
    let mut runs = Vec::new();
    let mut sweeps = Vec::new();
    let mut stack = vec![in_dir.to_path_buf()];
    let mut files: Vec<PathBuf> = Vec::new();
    while let Some(dir) = stack.pop() {
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files.sort();
    for path in files {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        let rel = path
            .strip_prefix(in_dir)
            .unwrap_or(&path)
            .to_string_lossy()
            .into_owned();
        if name == "manifest.csv" {
            manifests.push((rel, dataset::read_manifest(&path)?));
        } else if name.ends_with(".csv") && name.contains("metrics") {
            metrics.push((rel, fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?));
        } else if name.starts_with("run") && name.ends_with(".json") {
            runs.push((rel, RunArtifact::load(&path)?));
        } else if name.starts_with("sweep") && name.ends_with(".csv") {
            sweeps.push((rel, fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?));
        }
    }
    if manifests.is_empty() && metrics.is_empty() && runs.is_empty() && sweeps.is_empty() {
        return Err(Error::validation(format!(
            "no artifacts found under {} (expected manifest.csv, *metrics*.csv, run*.json, or sweep*.csv)",
            in_dir.display()
        )));
    }

    let mut md = String::from("# Grip stabilization report\n");
    let mut aggregates = Vec::new();

    for (rel, rows) in &manifests {
        let trials: std::collections::BTreeSet<&str> =
            rows.iter().map(|r| r.trial_id.as_str()).collect();
        let frames: usize = rows.iter().map(|r| r.frames).sum();
        let slip: usize = rows.iter().map(|r| r.slip_frames).sum();
        let contact: usize = rows.iter().map(|r| r.contact_frames).sum();
        let none: usize = rows.iter().map(|r| r.no_contact_frames).sum();
        md.push_str(&format!(
            "\n## Dataset `{rel}`\n\n\
             - {} trials, {} finger-trial streams, {} frames\n\
             - label mix: slip {:.3}, contact {:.3}, no_contact {:.3}\n",
            trials.len(),
            rows.len(),
            frames,
            slip as f64 / frames as f64,
            contact as f64 / frames as f64,
            none as f64 / frames as f64,
        ));
        md.push_str("\n| object | pressure | trials | frames | slip share |\n|---|---|---|---|---|\n");
        let mut combos: Vec<(String, String)> = rows
            .iter()
            .map(|r| (r.object.clone(), format!("{}", r.target_pressure)))
            .collect();
        combos.sort();
        combos.dedup();
        for (object, pressure) in combos {
            let cell: Vec<_> = rows
                .iter()
                .filter(|r| r.object == object && format!("{}", r.target_pressure) == pressure)
                .collect();
            let f: usize = cell.iter().map(|r| r.frames).sum();
            let s: usize = cell.iter().map(|r| r.slip_frames).sum();
            md.push_str(&format!(
                "| {object} | {pressure} | {} | {f} | {:.3} |\n",
                cell.len(),
                s as f64 / f as f64
            ));
        }
    }

    for (rel, text) in &metrics {
        md.push_str(&format!("\n## Classifier metrics `{rel}`\n\n"));
        md.push_str(&csv_to_md_table(text));
    }

    for (rel, run) in &runs {
        md.push_str(&format!(
            "\n## Run `{rel}`\n\n\
             - scenario: {}, object: {}, fingers: {}, sensor: {}, seed: {}\n\
             - released at {:.2} s; dropped: {}; max displacement {:.1} mm; peak force {:.2} N\n",
            run.scenario,
            run.config.run.object,
            run.config.run.finger_count,
            run.config.run.variant.name(),
            run.config.run.seed,
            run.released_at_s,
            run.dropped_at_s
                .map(|t| format!("yes, at {t:.2} s"))
                .unwrap_or_else(|| "no".to_string()),
            run.max_displacement_m * 1000.0,
            run.peak_force_n,
        ));
        if let Some(s) = &run.settled {
            let forces: Vec<String> =
                s.per_finger_mean_force_n.iter().map(|f| format!("{f:.2}")).collect();
            md.push_str(&format!(
                "- settled (last {:.1} s): per-finger force [{}] N, {:.2}x the minimum stabilizing force, slip fraction {:.4}\n",
                s.window_s,
                forces.join(", "),
                s.force_ratio_vs_min,
                s.slip_fraction,
            ));
        }
    }

    for (rel, text) in &sweeps {
        md.push_str(&format!("\n## Sweep `{rel}`\n\n"));
        md.push_str(&csv_to_md_table(text));
        let (agg_csv, success_rate) = sweep_success_rates(text)?;
        md.push_str(&format!(
            "\nOverall success rate: {:.1}% (success = no drop and displacement under the drop threshold).\n",
            success_rate * 100.0
        ));
        let stem = rel.replace(['/', '\\'], "_").replace(".csv", "");
        aggregates.push((format!("{stem}_success_rates.csv"), agg_csv));
    }

    Ok(ReportBundle { markdown: md, aggregates })
}

/// Render one of our own CSVs (no quoting, no embedded commas) as a
/// markdown table.
fn csv_to_md_table(text: &str) -> String {
    let mut out = String::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
        if i == 0 {
            out.push_str(&format!("|{}\n", "---|".repeat(cells.len())));
        }
    }
    out
}

/// Aggregate a sweep CSV into success rates per (finger_count, object):
/// the plot-ready companion for the generalization table.
fn sweep_success_rates(text: &str) -> Result<(String, f64)> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::validation("sweep CSV is empty".to_string()))?
        .split(',')
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::validation(format!("sweep CSV lacks a '{name}' column")))
    };
    let (c_fingers, c_object, c_success) = (col("finger_count")?, col("object")?, col("success")?);
    let c_ratio = col("settled_force_ratio")?;
    let mut groups: std::collections::BTreeMap<(String, String), (usize, usize, Vec<f64>)> =
        std::collections::BTreeMap::new();
    let mut total = 0usize;
    let mut passed = 0usize;
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        let key = (cells[c_fingers].to_string(), cells[c_object].to_string());
        let entry = groups.entry(key).or_default();
        entry.0 += 1;
        total += 1;
        if cells[c_success] == "true" {
            entry.1 += 1;
            passed += 1;
        }
        if let Ok(r) = cells[c_ratio].parse::<f64>() {
            entry.2.push(r);
        }
    }
    if total == 0 {
        return Err(Error::validation("sweep CSV has no data rows".to_string()));
    }
    let mut out = String::from("finger_count,object,runs,success_rate,mean_settled_force_ratio\n");
    for ((fingers, object), (runs, ok, ratios)) in groups {
        let mean_ratio = if ratios.is_empty() {
            String::new()
        } else {
            format!("{:.6}", ratios.iter().sum::<f64>() / ratios.len() as f64)
        };
        out.push_str(&format!(
            "{fingers},{object},{runs},{:.6},{mean_ratio}\n",
            ok as f64 / runs as f64
        ));
    }
    Ok((out, passed as f64 / total as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_csv_has_three_class_rows_and_consistent_precision() {
        // Confusion rows are actual classes: slip mostly recognized,
        // contact sometimes confused with slip.
        let report = EvalReport {
            n: 100,
            accuracy: 0.85,
            recall: [0.9, 0.8, 1.0],
            confusion: [[45, 5, 0], [8, 32, 0], [0, 0, 10]],
        };
        let csv = metrics_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        let slip: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(slip[0], "slip");
        // precision for slip = 45 / (45 + 8), rounded to the CSV's six
        // decimals
        let expected = 45.0 / 53.0;
        assert!((slip[1].parse::<f64>().unwrap() - expected).abs() < 5e-7);
        assert_eq!(slip[4], "50");
    }

    #[test]
    fn sweep_aggregation_counts_successes_by_cell() {
        let csv = "finger_count,object,seed,variant,tau_f,success,dropped,max_displacement_m,peak_force_n,deformation_budget_n,within_deformation_budget,settled_mean_force_n,settled_force_ratio,settled_slip_fraction\n\
                   2,ball,1,biotac,3,true,false,0.005,6.0,7.5,true,5.9,1.2,0.0\n\
                   2,ball,2,biotac,3,false,true,0.031,6.0,7.5,true,,,\n\
                   3,box,1,biotac,3,true,false,0.002,4.0,10.0,true,3.9,1.4,0.0\n";
        let (agg, rate) = sweep_success_rates(csv).unwrap();
        assert!((rate - 2.0 / 3.0).abs() < 1e-9);
        let lines: Vec<&str> = agg.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("2,ball,2,0.5"));
        assert!(lines[2].starts_with("3,box,1,1.0"));
    }

    #[test]
    fn empty_directory_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = build_report(dir.path()).unwrap_err();
        assert!(err.is_validation(), "got {err}");
    }
}
