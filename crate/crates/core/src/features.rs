//! Windowed tactile features.
//!
//! A classifier input is one fixed-length vector summarizing a short,
//! contiguous window of one finger's frames. The layout is frozen at ten
//! slots (see [`slot_names`]); a layout id string couples trained models to
//! the sensor variant and window length they were fit for.
//!
//! Extraction is a pure function of the window plus the stream's grounding
//! reference (a contact-free `p_dc` level observed earlier in the same
//! stream): adding a constant resting offset to both leaves every feature
//! unchanged.

use std::cell::RefCell;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::sensor::CONTACT_THRESHOLD_UNITS;
use crate::types::{SensorFrame, SensorVariant};

pub const FEATURE_DIM: usize = 10;

/// Slot order is part of the model format; never reorder.
pub fn slot_names() -> [&'static str; FEATURE_DIM] {
    [
        "p_dc_mean",
        "p_dc_slope_per_s",
        "p_ac_rms",
        "p_ac_rms_delta",
        "band_energy_low",
        "band_energy_mid",
        "band_energy_high",
        "electrode_mean_delta",
        "electrode_spatial_var",
        "contact_fraction",
    ]
}

/// Identifier coupling a trained model to the exact input shape it expects.
pub fn layout_id(variant: SensorVariant, window_frames: usize) -> String {
    format!("tactile-v1/{}/w{}", variant.name(), window_frames)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn mean(xs: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    xs.sum::<f64>() / n as f64
}

fn rms(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Hann-windowed power split into low/mid/high thirds of the positive
/// spectrum (DC excluded), compressed with `ln(1 + energy)`.
fn band_energies(samples: &[f64]) -> [f64; 3] {
    let n = samples.len();
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let w = 0.5
                * (1.0
                    - (2.0 * std::f64::consts::PI * i as f64 / (n as f64 - 1.0)).cos());
            Complex::new(x * w, 0.0)
        })
        .collect();
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(n);
        fft.process(&mut buf);
    });
    let half = n / 2;
    let mut bands = [0.0; 3];
    for k in 1..=half {
        let idx = (((k - 1) * 3) / half).min(2);
        bands[idx] += buf[k].norm_sqr() / n as f64;
    }
    [bands[0].ln_1p(), bands[1].ln_1p(), bands[2].ln_1p()]
}

fn check_window(frames: &[SensorFrame]) -> Result<()> {
    if frames.len() < 2 {
        return Err(Error::validation(format!(
            "feature window needs at least 2 frames (got {})",
            frames.len()
        )));
    }
    let first = &frames[0];
    for (i, f) in frames.iter().enumerate() {
        f.validate()?;
        if f.finger != first.finger {
            return Err(Error::validation(format!(
                "feature window mixes fingers {} and {}",
                first.finger, f.finger
            )));
        }
        if f.variant != first.variant {
            return Err(Error::validation(
                "feature window mixes sensor variants".to_string(),
            ));
        }
        if f.t != first.t + i as u64 {
            return Err(Error::validation(format!(
                "feature window must be contiguous: frame {i} has t={} (expected {})",
                f.t,
                first.t + i as u64
            )));
        }
    }
    Ok(())
}

/// Summarize one contiguous window of a single finger's frames.
///
/// `baseline` is the stream's contact-free `p_dc` reference; `p_dc` enters
/// every feature only as `p_dc - baseline`.
pub fn extract(frames: &[SensorFrame], baseline: f64) -> Result<Vec<f64>> {
    check_window(frames)?;
    let n = frames.len();
    let rate = frames[0].variant.frame_rate_hz();

    let grounded: Vec<f64> = frames.iter().map(|f| f.p_dc - baseline).collect();
    let dc_mean = mean(grounded.iter().copied(), n);

    // Least-squares slope of grounded p_dc against time in seconds.
    let xbar = (n as f64 - 1.0) / 2.0;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &y) in grounded.iter().enumerate() {
        let dx = i as f64 - xbar;
        num += dx * (y - dc_mean);
        den += dx * dx;
    }
    let dc_slope = (num / den) * rate;

    let all_ac: Vec<f64> = frames.iter().flat_map(|f| f.p_ac.iter().copied()).collect();
    let ac_rms = rms(&all_ac);
    let mid = n / 2;
    let first_ac: Vec<f64> = frames[..mid]
        .iter()
        .flat_map(|f| f.p_ac.iter().copied())
        .collect();
    let second_ac: Vec<f64> = frames[mid..]
        .iter()
        .flat_map(|f| f.p_ac.iter().copied())
        .collect();
    let ac_rms_delta = rms(&second_ac) - rms(&first_ac);

    let bands = band_energies(&all_ac);

    let e_mean = |f: &SensorFrame| mean(f.electrodes.iter().copied(), f.electrodes.len());
    let electrode_delta = e_mean(&frames[n - 1]) - e_mean(&frames[0]);
    let electrode_var = mean(
        frames.iter().map(|f| {
            let m = e_mean(f);
            mean(
                f.electrodes.iter().map(|&x| (x - m) * (x - m)),
                f.electrodes.len(),
            )
        }),
        n,
    );

    let contact_fraction =
        grounded.iter().filter(|&&g| g > CONTACT_THRESHOLD_UNITS).count() as f64 / n as f64;

    Ok(vec![
        dc_mean,
        dc_slope,
        ac_rms,
        ac_rms_delta,
        bands[0],
        bands[1],
        bands[2],
        electrode_delta,
        electrode_var,
        contact_fraction,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(t: u64, p_dc: f64, p_ac: Vec<f64>, electrodes: Vec<f64>) -> SensorFrame {
        SensorFrame {
            t,
            finger: 0,
            variant: SensorVariant::BioTac,
            p_dc,
            p_ac,
            electrodes,
            t_dc: 25.0,
            t_ac: 0.0,
        }
    }

    fn quiet_window(n: usize) -> Vec<SensorFrame> {
        (0..n)
            .map(|i| frame(i as u64, 2000.0, vec![0.0; 22], vec![1.0; 19]))
            .collect()
    }

    #[test]
    fn layout_is_ten_named_slots() {
        assert_eq!(slot_names().len(), FEATURE_DIM);
        assert_eq!(
            layout_id(SensorVariant::BioTac, 10),
            "tactile-v1/biotac/w10"
        );
        assert_eq!(
            layout_id(SensorVariant::BioTacSp, 4),
            "tactile-v1/biotac_sp/w4"
        );
    }

    #[test]
    fn grounding_cancels_resting_offset() {
        let a = extract(&quiet_window(10), 2000.0).unwrap();
        let shifted: Vec<SensorFrame> = quiet_window(10)
            .into_iter()
            .map(|mut f| {
                f.p_dc += 137.5;
                f
            })
            .collect();
        let b = extract(&shifted, 2000.0 + 137.5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn slope_recovers_linear_ramp() {
        // 3 units per frame at 100 Hz = 300 units/s.
        let frames: Vec<SensorFrame> = (0..10)
            .map(|i| frame(i, 2000.0 + 3.0 * i as f64, vec![0.0; 22], vec![0.0; 19]))
            .collect();
        let f = extract(&frames, 2000.0).unwrap();
        assert!((f[1] - 300.0).abs() < 1e-9, "slope {}", f[1]);
    }

    #[test]
    fn rms_delta_sees_onset_in_second_half() {
        let frames: Vec<SensorFrame> = (0..10)
            .map(|i| {
                let amp = if i >= 5 { 4.0 } else { 1.0 };
                let p_ac = (0..22)
                    .map(|j| if j % 2 == 0 { amp } else { -amp })
                    .collect();
                frame(i, 2000.0, p_ac, vec![0.0; 19])
            })
            .collect();
        let f = extract(&frames, 2000.0).unwrap();
        assert!((f[2] - ((16.0 + 1.0) / 2.0f64).sqrt()).abs() < 1e-9);
        assert!((f[3] - 3.0).abs() < 1e-9, "rms delta {}", f[3]);
    }

    #[test]
    fn alternating_signal_lands_in_high_band() {
        // +A,-A alternation is the Nyquist tone: all energy in the top
        // third. A slow full-window sine lands in the bottom third.
        let n = 10;
        let fast: Vec<SensorFrame> = (0..n)
            .map(|i| {
                let p_ac = (0..22)
                    .map(|j| if (i * 22 + j) % 2 == 0 { 2.0 } else { -2.0 })
                    .collect();
                frame(i as u64, 2000.0, p_ac, vec![0.0; 19])
            })
            .collect();
        let ff = extract(&fast, 2000.0).unwrap();
        assert!(ff[6] > ff[4] + 1.0, "high {} vs low {}", ff[6], ff[4]);

        let total = (n * 22) as f64;
        let slow: Vec<SensorFrame> = (0..n)
            .map(|i| {
                let p_ac = (0..22)
                    .map(|j| {
                        let s = (i * 22 + j) as f64;
                        2.0 * (2.0 * std::f64::consts::PI * 2.0 * s / total).sin()
                    })
                    .collect();
                frame(i as u64, 2000.0, p_ac, vec![0.0; 19])
            })
            .collect();
        let fs = extract(&slow, 2000.0).unwrap();
        assert!(fs[4] > fs[6] + 1.0, "low {} vs high {}", fs[4], fs[6]);
    }

    #[test]
    fn electrode_slots_track_shape_changes() {
        let mut frames = quiet_window(10);
        // Last frame: electrode mean up by 2, and spread out.
        frames[9].electrodes = (0..19).map(|e| 3.0 + if e < 9 { -2.0 } else { 2.0 }).collect();
        let f = extract(&frames, 2000.0).unwrap();
        assert!(f[7] > 1.5, "mean delta {}", f[7]);
        assert!(f[8] > 0.1, "spatial var {}", f[8]);
    }

    #[test]
    fn contact_fraction_counts_thresholded_frames() {
        let mut frames = quiet_window(10);
        for f in frames.iter_mut().take(4) {
            f.p_dc = 2000.0 + 50.0;
        }
        let f = extract(&frames, 2000.0).unwrap();
        assert!((f[9] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn window_validation_rejects_gaps_and_mixes() {
        let mut frames = quiet_window(10);
        frames[5].t = 99;
        assert!(extract(&frames, 2000.0).unwrap_err().is_validation());

        let mut frames = quiet_window(10);
        frames[3].finger = 1;
        assert!(extract(&frames, 2000.0).unwrap_err().is_validation());

        assert!(extract(&quiet_window(1), 2000.0).unwrap_err().is_validation());
    }

    #[test]
    fn extract_is_pure() {
        let w = quiet_window(10);
        assert_eq!(extract(&w, 2000.0).unwrap(), extract(&w, 2000.0).unwrap());
    }
}
