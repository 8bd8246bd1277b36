//! Slip prediction: 3-class multinomial logistic regression.
//!
//! The model maps one standardized feature vector to {slip, contact,
//! no_contact}. Training is deterministic: zero initialization, full-batch
//! gradient descent with a fixed epoch count, and Kahan-compensated
//! gradient accumulation so the result is insensitive (to ~1e-9q) to the
//! order of training rows. Class imbalance is handled with inverse-
//! frequency example weights rather than resampling, which keeps the
//! procedure free of RNG draws.
//!
//! A trained model carries its feature-layout id and the standardizer it
//! was fit with; prediction refuses inputs of the wrong shape and loading
//! validates dimensions, so a model can never be silently applied to
//! windows it was not trained for.
//!
//! [`loss_and_grad`] — the exact objective and gradient used by training —
//! is public so verification code can difference it numerically.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Label;

/// Per-slot standardization fitted on training rows. Slots with no variance
/// standardize to exactly 0 so they carry no information downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    /// Population standard deviation per slot; 0 marks a degenerate slot.
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Normalizer> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::validation(
                "cannot fit a normalizer on empty data".to_string(),
            ));
        }
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for row in rows {
            if row.len() != dim {
                return Err(Error::validation(
                    "feature rows have inconsistent lengths".to_string(),
                ));
            }
            for (m, &x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((v, &m), &x) in var.iter_mut().zip(&mean).zip(row) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s < 1e-12 {
                    0.0
                } else {
                    s
                }
            })
            .collect();
        Ok(Normalizer { mean, std })
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&x, (&m, &s))| if s > 0.0 { (x - m) / s } else { 0.0 })
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Training hyperparameters (full-batch gradient descent).
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

/// Provenance and bookkeeping stored inside a saved model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub window_frames: usize,
    pub horizon_frames: usize,
    pub n_train: usize,
    pub class_counts: [usize; 3],
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlipModel {
    /// Feature layout id this model was trained for.
    pub layout: String,
    pub normalizer: Normalizer,
    /// One weight row per class, class order = [`Label::ALL`].
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub meta: ModelMeta,
}

impl SlipModel {
    pub fn expect_layout(&self, layout: &str) -> Result<()> {
        if self.layout != layout {
            return Err(Error::validation(format!(
                "model was trained for feature layout '{}', input has '{layout}'",
                self.layout
            )));
        }
        Ok(())
    }

    fn logits(&self, standardized: &[f64]) -> [f64; 3] {
        let mut z = [0.0; 3];
        for (c, zc) in z.iter_mut().enumerate() {
            *zc = self.bias[c]
                + self.weights[c]
                    .iter()
                    .zip(standardized)
                    .map(|(w, x)| w * x)
                    .sum::<f64>();
        }
        z
    }

    /// Class probabilities for a raw (unstandardized) feature vector.
    pub fn probabilities(&self, features: &[f64]) -> Result<[f64; 3]> {
        if features.len() != self.normalizer.dim() {
            return Err(Error::validation(format!(
                "expected {} features, got {}",
                self.normalizer.dim(),
                features.len()
            )));
        }
        let z = self.logits(&self.normalizer.apply(features));
        Ok(softmax(z))
    }

    /// Predicted class; ties resolve to the lowest class index
    /// (slip before contact before no_contact).
    pub fn predict(&self, features: &[f64]) -> Result<Label> {
        let p = self.probabilities(features)?;
        let mut best = 0;
        for c in 1..3 {
            if p[c] > p[best] {
                best = c;
            }
        }
        Ok(Label::from_index(best).expect("argmax in range"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::runtime(format!("serializing model: {e}")))?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(json.as_bytes()).map_err(|e| Error::io(path, e))?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SlipModel> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: SlipModel =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.normalizer.dim();
        if dim == 0
            || self.normalizer.std.len() != dim
            || self.weights.len() != 3
            || self.bias.len() != 3
            || self.weights.iter().any(|r| r.len() != dim)
        {
            return Err(Error::validation(
                "model has inconsistent dimensions".to_string(),
            ));
        }
        let finite = self
            .weights
            .iter()
            .flatten()
            .chain(self.bias.iter())
            .chain(self.normalizer.mean.iter())
            .chain(self.normalizer.std.iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::validation(
                "model contains non-finite parameters".to_string(),
            ));
        }
        Ok(())
    }
}

fn softmax(z: [f64; 3]) -> [f64; 3] {
    let m = z[0].max(z[1]).max(z[2]);
    let e = [(z[0] - m).exp(), (z[1] - m).exp(), (z[2] - m).exp()];
    let s = e[0] + e[1] + e[2];
    [e[0] / s, e[1] / s, e[2] / s]
}

/// Inverse-frequency class weights `n / (3 * n_c)`; errors if any class is
/// absent, since its weight (and recall) would be undefined.
pub fn class_weights(labels: impl Iterator<Item = Label>) -> Result<([f64; 3], [usize; 3])> {
    let mut counts = [0usize; 3];
    let mut n = 0usize;
    for l in labels {
        counts[l.index()] += 1;
        n += 1;
    }
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt == 0 {
            return Err(Error::validation(format!(
                "training data has no '{}' examples",
                Label::from_index(c).unwrap().name()
            )));
        }
    }
    let w = [
        n as f64 / (3.0 * counts[0] as f64),
        n as f64 / (3.0 * counts[1] as f64),
        n as f64 / (3.0 * counts[2] as f64),
    ];
    Ok((w, counts))
}

struct Kahan {
    sum: f64,
    c: f64,
}

impl Kahan {
    fn new() -> Kahan {
        Kahan { sum: 0.0, c: 0.0 }
    }
    fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Weighted cross-entropy with L2 on weights (not bias), and its exact
/// gradient. Rows must already be standardized. Returns
/// `(loss, d_weights, d_bias)`.
pub fn loss_and_grad(
    weights: &[Vec<f64>],
    bias: &[f64],
    rows: &[(Vec<f64>, Label)],
    class_w: &[f64; 3],
    l2: f64,
) -> (f64, Vec<Vec<f64>>, Vec<f64>) {
    let dim = weights[0].len();
    let n = rows.len() as f64;
    let mut loss = Kahan::new();
    let mut gw: Vec<Vec<Kahan>> = (0..3)
        .map(|_| (0..dim).map(|_| Kahan::new()).collect())
        .collect();
    let mut gb: Vec<Kahan> = (0..3).map(|_| Kahan::new()).collect();

    for (x, y) in rows {
        let mut z = [0.0; 3];
        for (c, zc) in z.iter_mut().enumerate() {
            *zc = bias[c]
                + weights[c].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        let m = z[0].max(z[1]).max(z[2]);
        let log_sum = ((z[0] - m).exp() + (z[1] - m).exp() + (z[2] - m).exp()).ln() + m;
        let wy = class_w[y.index()];
        loss.add(wy * (log_sum - z[y.index()]) / n);
        for c in 0..3 {
            let p = (z[c] - log_sum).exp();
            let indicator = if c == y.index() { 1.0 } else { 0.0 };
            let g = wy * (p - indicator) / n;
            gb[c].add(g);
            for (slot, &xv) in gw[c].iter_mut().zip(x) {
                slot.add(g * xv);
            }
        }
    }

    let mut total_loss = loss.sum;
    let d_weights: Vec<Vec<f64>> = gw
        .iter()
        .enumerate()
        .map(|(c, row)| {
            row.iter()
                .enumerate()
                .map(|(j, k)| {
                    total_loss += 0.5 * l2 * weights[c][j] * weights[c][j];
                    k.sum + l2 * weights[c][j]
                })
                .collect()
        })
        .collect();
    let d_bias: Vec<f64> = gb.iter().map(|k| k.sum).collect();
    (total_loss, d_weights, d_bias)
}

/// Fit the model on raw feature rows. Deterministic: zero init, full-batch
/// descent, fixed epoch count.
pub fn train(
    rows: &[(Vec<f64>, Label)],
    layout: &str,
    window_frames: usize,
    horizon_frames: usize,
    cfg: TrainConfig,
) -> Result<SlipModel> {
    if rows.is_empty() {
        return Err(Error::validation("no training rows".to_string()));
    }
    if !(cfg.learning_rate > 0.0) || cfg.epochs == 0 || cfg.l2 < 0.0 {
        return Err(Error::validation(
            "training needs learning_rate > 0, epochs >= 1, l2 >= 0".to_string(),
        ));
    }
    let (class_w, class_counts) = class_weights(rows.iter().map(|(_, y)| *y))?;
    let raw: Vec<Vec<f64>> = rows.iter().map(|(x, _)| x.clone()).collect();
    let normalizer = Normalizer::fit(&raw)?;
    let dim = normalizer.dim();
    let standardized: Vec<(Vec<f64>, Label)> = rows
        .iter()
        .map(|(x, y)| (normalizer.apply(x), *y))
        .collect();

    let mut weights = vec![vec![0.0; dim]; 3];
    let mut bias = vec![0.0; 3];
    let mut final_loss = f64::INFINITY;
    for _ in 0..cfg.epochs {
        let (loss, dw, db) = loss_and_grad(&weights, &bias, &standardized, &class_w, cfg.l2);
        final_loss = loss;
        for c in 0..3 {
            for j in 0..dim {
                weights[c][j] -= cfg.learning_rate * dw[c][j];
            }
            bias[c] -= cfg.learning_rate * db[c];
        }
        if !final_loss.is_finite() {
            return Err(Error::runtime(format!(
                "training diverged (loss {final_loss}); lower the learning rate"
            )));
        }
    }

    Ok(SlipModel {
        layout: layout.to_string(),
        normalizer,
        weights,
        bias,
        meta: ModelMeta {
            window_frames,
            horizon_frames,
            n_train: rows.len(),
            class_counts,
            learning_rate: cfg.learning_rate,
            epochs: cfg.epochs,
            l2: cfg.l2,
            final_loss,
        },
    })
}

/// Accuracy, per-class recall, and the confusion matrix
/// (`confusion[true][predicted]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy: f64,
    pub recall: [f64; 3],
    pub confusion: [[usize; 3]; 3],
}

pub fn evaluate<F>(mut predict: F, rows: &[(Vec<f64>, Label)]) -> Result<EvalReport>
where
    F: FnMut(&[f64]) -> Result<Label>,
{
    if rows.is_empty() {
        return Err(Error::validation("no evaluation rows".to_string()));
    }
    let mut confusion = [[0usize; 3]; 3];
    for (x, y) in rows {
        let p = predict(x)?;
        confusion[y.index()][p.index()] += 1;
    }
    let correct: usize = (0..3).map(|c| confusion[c][c]).sum();
    let recall = std::array::from_fn(|c| {
        let row: usize = confusion[c].iter().sum();
        if row == 0 {
            f64::NAN
        } else {
            confusion[c][c] as f64 / row as f64
        }
    });
    Ok(EvalReport {
        n: rows.len(),
        accuracy: correct as f64 / rows.len() as f64,
        recall,
        confusion,
    })
}

/// Trivial reference classifier: two thresholds on a single feature slot
/// (the window-mean pressure), classes assigned to the three intervals by
/// exhaustive search over the six permutations. It can tell "pressed" from
/// "not pressed" but has no access to vibration, which is the point: the
/// learned model must beat it decisively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdBaseline {
    pub slot: usize,
    pub lo: f64,
    pub hi: f64,
    /// Class for values below `lo`, between, and at-or-above `hi`.
    pub classes: [Label; 3],
}

impl ThresholdBaseline {
    pub fn predict(&self, features: &[f64]) -> Result<Label> {
        let v = *features.get(self.slot).ok_or_else(|| {
            Error::validation(format!("baseline expects at least {} slots", self.slot + 1))
        })?;
        Ok(if v < self.lo {
            self.classes[0]
        } else if v < self.hi {
            self.classes[1]
        } else {
            self.classes[2]
        })
    }
}

/// Fit the threshold baseline on slot `slot` by grid search over value
/// quantiles and class permutations, maximizing training accuracy.
pub fn fit_baseline(rows: &[(Vec<f64>, Label)], slot: usize) -> Result<ThresholdBaseline> {
    if rows.is_empty() {
        return Err(Error::validation("no rows to fit the baseline".to_string()));
    }
    let mut values: Vec<f64> = rows
        .iter()
        .map(|(x, _)| {
            x.get(slot).copied().ok_or_else(|| {
                Error::validation(format!("baseline expects at least {} slots", slot + 1))
            })
        })
        .collect::<Result<_>>()?;
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
    let quantiles: Vec<f64> = (0..=32)
        .map(|i| values[(i * (values.len() - 1)) / 32])
        .collect();
    // Candidate cuts: the quantiles themselves, midpoints between adjacent
    // quantiles (so a cut can land inside a wide value gap), and a sentinel
    // above the maximum so an interval can be empty.
    let mut candidates = Vec::with_capacity(quantiles.len() * 2 + 1);
    for (i, &q) in quantiles.iter().enumerate() {
        candidates.push(q);
        if i + 1 < quantiles.len() {
            candidates.push(0.5 * (q + quantiles[i + 1]));
        }
    }
    candidates.push(values[values.len() - 1] + 1.0);
    candidates.dedup();

    let perms: [[Label; 3]; 6] = {
        use Label::*;
        [
            [Slip, Contact, NoContact],
            [Slip, NoContact, Contact],
            [Contact, Slip, NoContact],
            [Contact, NoContact, Slip],
            [NoContact, Slip, Contact],
            [NoContact, Contact, Slip],
        ]
    };

    let mut best: Option<(usize, ThresholdBaseline)> = None;
    for (i, &lo) in candidates.iter().enumerate() {
        for &hi in candidates[i..].iter() {
            for classes in perms {
                let b = ThresholdBaseline {
                    slot,
                    lo,
                    hi,
                    classes,
                };
                let correct = rows
                    .iter()
                    .filter(|(x, y)| b.predict(x).map(|p| p == *y).unwrap_or(false))
                    .count();
                let better = match &best {
                    None => true,
                    Some((c, _)) => correct > *c,
                };
                if better {
                    best = Some((correct, b));
                }
            }
        }
    }
    Ok(best.expect("candidates nonempty").1)
}
