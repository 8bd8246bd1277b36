//! On-disk dataset format and training-set assembly.
//!
//! A data-collection campaign produces:
//!
//! * one JSONL file per finger-trial (`trials/<trial_id>_f<finger>.jsonl`),
//!   one [`Record`] per frame, in time order;
//! * one `manifest.csv` with a row per finger-trial summarizing where its
//!   file lives and how its labels are distributed.
//!
//! Records carry the raw sensor frame, the simulator's ground-truth contact
//! and slip flags (for auditing the auto-labeler), the auto label actually
//! used for training, and the fingertip position.
//!
//! All writes are sequential and field order is fixed, so identical inputs
//! produce byte-identical files.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features;
use crate::rng::fork;
use crate::types::{Label, SensorFrame, SensorVariant};

/// One frame of one finger-trial stream, as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: u64,
    pub finger: usize,
    pub variant: SensorVariant,
    pub p_dc: f64,
    pub p_ac: Vec<f64>,
    pub electrodes: Vec<f64>,
    pub t_dc: f64,
    pub t_ac: f64,
    /// Simulator truth: was the finger touching the surface this frame.
    pub gt_contact: bool,
    /// Simulator truth: was the contact slipping this frame.
    pub gt_slip: bool,
    /// Label assigned by the pressure/displacement auto-labeler; training
    /// targets come from this column.
    pub auto_label: Label,
    /// Fingertip position, m.
    pub pos: [f64; 2],
}

impl Record {
    pub fn from_parts(
        frame: SensorFrame,
        gt_contact: bool,
        gt_slip: bool,
        auto_label: Label,
        pos: [f64; 2],
    ) -> Record {
        Record {
            t: frame.t,
            finger: frame.finger,
            variant: frame.variant,
            p_dc: frame.p_dc,
            p_ac: frame.p_ac,
            electrodes: frame.electrodes,
            t_dc: frame.t_dc,
            t_ac: frame.t_ac,
            gt_contact,
            gt_slip,
            auto_label,
            pos,
        }
    }

    pub fn frame(&self) -> SensorFrame {
        SensorFrame {
            t: self.t,
            finger: self.finger,
            variant: self.variant,
            p_dc: self.p_dc,
            p_ac: self.p_ac.clone(),
            electrodes: self.electrodes.clone(),
            t_dc: self.t_dc,
            t_ac: self.t_ac,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.frame().validate()
    }
}

pub fn write_jsonl<'a>(path: &Path, records: impl Iterator<Item = &'a Record>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)
            .map_err(|e| Error::runtime(format!("serializing record: {e}")))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<Record>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?;
        rec.validate()
            .map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// One manifest row = one finger-trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub trial_id: String,
    pub object: String,
    /// Grip-pressure setpoint of the trial's servo phase, sensor units.
    pub target_pressure: f64,
    pub repeat: usize,
    pub finger: usize,
    /// Path of the stream file, relative to the manifest.
    pub file: String,
    pub frames: usize,
    pub slip_frames: usize,
    pub contact_frames: usize,
    pub no_contact_frames: usize,
}

const MANIFEST_HEADER: &str =
    "trial_id,object,target_pressure,repeat,finger,file,frames,slip_frames,contact_frames,no_contact_frames";

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{MANIFEST_HEADER}").map_err(|e| Error::io(path, e))?;
    for r in rows {
        for text in [&r.trial_id, &r.object, &r.file] {
            if text.contains(',') || text.contains('\n') {
                return Err(Error::validation(format!(
                    "manifest fields must not contain commas or newlines: {text:?}"
                )));
            }
        }
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.trial_id,
            r.object,
            r.target_pressure,
            r.repeat,
            r.finger,
            r.file,
            r.frames,
            r.slip_frames,
            r.contact_frames,
            r.no_contact_frames
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == MANIFEST_HEADER => {}
        other => {
            return Err(Error::parse(
                path,
                format!("unexpected manifest header: {:?}", other.map(|(_, h)| h)),
            ))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 10 {
            return Err(Error::parse(
                path,
                format!("line {}: expected 10 fields, got {}", i + 1, parts.len()),
            ));
        }
        let field = |j: usize, name: &str| -> Result<&str> {
            parts
                .get(j)
                .copied()
                .ok_or_else(|| Error::parse(path, format!("line {}: missing {name}", i + 1)))
        };
        let parse_num = |j: usize, name: &str| -> Result<f64> {
            field(j, name)?.parse::<f64>().map_err(|e| {
                Error::parse(path, format!("line {}: bad {name}: {e}", i + 1))
            })
        };
        let parse_int = |j: usize, name: &str| -> Result<usize> {
            field(j, name)?.parse::<usize>().map_err(|e| {
                Error::parse(path, format!("line {}: bad {name}: {e}", i + 1))
            })
        };
        rows.push(ManifestRow {
            trial_id: field(0, "trial_id")?.to_string(),
            object: field(1, "object")?.to_string(),
            target_pressure: parse_num(2, "target_pressure")?,
            repeat: parse_int(3, "repeat")?,
            finger: parse_int(4, "finger")?,
            file: field(5, "file")?.to_string(),
            frames: parse_int(6, "frames")?,
            slip_frames: parse_int(7, "slip_frames")?,
            contact_frames: parse_int(8, "contact_frames")?,
            no_contact_frames: parse_int(9, "no_contact_frames")?,
        });
    }
    Ok(rows)
}

/// Deterministically split finger-trials into train/test index sets,
/// holding out `test_fraction` (at least one row each side when possible).
pub fn split_finger_trials(
    n_rows: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_rows == 0 {
        return Err(Error::validation("cannot split an empty manifest".to_string()));
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::validation(format!(
            "test_fraction must be in [0, 1) (got {test_fraction})"
        )));
    }
    let mut idx: Vec<usize> = (0..n_rows).collect();
    let mut rng = fork(seed, "dataset/split");
    idx.shuffle(&mut rng);
    let mut n_test = ((n_rows as f64) * test_fraction).round() as usize;
    if test_fraction > 0.0 {
        n_test = n_test.clamp(1, n_rows - 1);
    }
    let test: Vec<usize> = idx[..n_test].to_vec();
    let train: Vec<usize> = idx[n_test..].to_vec();
    Ok((train, test))
}

/// Grounding reference for one stored stream: its first frame (trials start
/// with the finger parked off the surface). Matches what the controller
/// does online.
pub fn stream_baseline(records: &[Record]) -> Result<f64> {
    records
        .first()
        .map(|r| r.p_dc)
        .ok_or_else(|| Error::validation("empty stream".to_string()))
}

/// Pair each window of `window` frames with the auto label `horizon` frames
/// past the window's end: the classifier learns to predict slightly into
/// the future. A stream of `n` frames yields `n - window - horizon + 1`
/// rows.
pub fn training_rows(
    records: &[Record],
    window: usize,
    horizon: usize,
) -> Result<Vec<(Vec<f64>, Label)>> {
    if window < 2 || horizon < 1 {
        return Err(Error::validation(
            "need window >= 2 and horizon >= 1".to_string(),
        ));
    }
    if records.len() < window + horizon {
        return Err(Error::validation(format!(
            "stream of {} frames is too short for window {window} + horizon {horizon}",
            records.len()
        )));
    }
    let baseline = stream_baseline(records)?;
    let frames: Vec<SensorFrame> = records.iter().map(|r| r.frame()).collect();
    let mut rows = Vec::with_capacity(records.len() - window - horizon + 1);
    for start in 0..=(records.len() - window - horizon) {
        let feats = features::extract(&frames[start..start + window], baseline)?;
        let label = records[start + window - 1 + horizon].auto_label;
        rows.push((feats, label));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: u64, label: Label) -> Record {
        Record {
            t,
            finger: 0,
            variant: SensorVariant::BioTac,
            p_dc: 2000.0 + t as f64,
            p_ac: vec![0.5; 22],
            electrodes: vec![1.0; 19],
            t_dc: 25.0,
            t_ac: 0.0,
            gt_contact: label != Label::NoContact,
            gt_slip: label == Label::Slip,
            auto_label: label,
            pos: [0.03, 0.0],
        }
    }

    #[test]
    fn jsonl_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stream.jsonl");
        let records: Vec<Record> = (0..20)
            .map(|t| record(t, if t % 3 == 0 { Label::Slip } else { Label::Contact }))
            .collect();
        write_jsonl(&path, records.iter()).unwrap();
        let back = read_jsonl(&path).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn jsonl_parse_errors_carry_path_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        fs::write(&path, "{\"t\": 0, \"nope\": 1}\n").unwrap();
        let err = read_jsonl(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.jsonl") && msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        let rows = vec![ManifestRow {
            trial_id: "ball_p20_r0".to_string(),
            object: "ball".to_string(),
            target_pressure: 20.0,
            repeat: 0,
            finger: 2,
            file: "trials/ball_p20_r0_f2.jsonl".to_string(),
            frames: 3000,
            slip_frames: 400,
            contact_frames: 1800,
            no_contact_frames: 800,
        }];
        write_manifest(&path, &rows).unwrap();
        assert_eq!(read_manifest(&path).unwrap(), rows);
    }

    #[test]
    fn manifest_rejects_malformed_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.csv");
        fs::write(&path, format!("{MANIFEST_HEADER}\nonly,three,fields\n")).unwrap();
        assert!(read_manifest(&path).is_err());
    }

    #[test]
    fn split_is_deterministic_disjoint_and_sized() {
        let (train_a, test_a) = split_finger_trials(54, 0.2, 42).unwrap();
        let (train_b, test_b) = split_finger_trials(54, 0.2, 42).unwrap();
        assert_eq!(train_a, train_b);
        assert_eq!(test_a, test_b);
        assert_eq!(test_a.len(), 11); // round(54 * 0.2)
        assert_eq!(train_a.len() + test_a.len(), 54);
        for i in &test_a {
            assert!(!train_a.contains(i));
        }
        let (_, test_c) = split_finger_trials(54, 0.2, 43).unwrap();
        assert_ne!(test_a, test_c, "different seeds should split differently");
    }

    #[test]
    fn training_rows_count_and_alignment() {
        // Label encodes its own frame index so alignment is checkable.
        let n = 100;
        let window = 10;
        let horizon = 3;
        let records: Vec<Record> = (0..n)
            .map(|t| {
                record(
                    t,
                    if t % 2 == 0 { Label::Slip } else { Label::NoContact },
                )
            })
            .collect();
        let rows = training_rows(&records, window, horizon).unwrap();
        assert_eq!(rows.len(), (n as usize) - window - horizon + 1);
        for (start, (_, label)) in rows.iter().enumerate() {
            let target_t = start as u64 + window as u64 - 1 + horizon as u64;
            let expected = if target_t % 2 == 0 {
                Label::Slip
            } else {
                Label::NoContact
            };
            assert_eq!(*label, expected, "window at {start}");
        }
    }

    #[test]
    fn training_rows_reject_short_streams() {
        let records: Vec<Record> = (0..10).map(|t| record(t, Label::Contact)).collect();
        assert!(training_rows(&records, 10, 3).unwrap_err().is_validation());
    }
}
