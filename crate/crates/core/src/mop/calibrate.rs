use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::detect::{find_onset, MopConfig};
use super::entropy::entropy_series;
use crate::error::{LoadError, MopError};
use crate::model::Episode;
use crate::stats::quantile_sorted;

pub const DEFAULT_THETA_GRID: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
pub const DEFAULT_DELTA_GRID: [f64; 3] = [0.2, 0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct F1Calibration {
    pub theta: f64,
    pub delta: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

fn score(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    (f1, precision, recall)
}

/// Grid search for the (θ, δ) pair maximizing F1 of detection against labels.
/// Ties go to the lower θ, then the lower δ.
pub fn calibrate_mop_f1(
    labeled: &[(&Episode, bool)],
    thetas: &[f64],
    deltas: &[f64],
    window: usize,
) -> Result<F1Calibration, MopError> {
    if !labeled.iter().any(|(_, m)| *m) {
        return Err(MopError::NoPositiveLabels);
    }
    if labeled.iter().all(|(_, m)| *m) {
        return Err(MopError::NoNegativeLabels);
    }
    if thetas.is_empty() || deltas.is_empty() {
        return Err(MopError::EmptyGrid);
    }
    let mut thetas = thetas.to_vec();
    let mut deltas = deltas.to_vec();
    thetas.sort_by(f64::total_cmp);
    deltas.sort_by(f64::total_cmp);
    let prepared: Vec<(Vec<(u32, f64)>, bool, bool)> = labeled
        .iter()
        .map(|(ep, m)| {
            let tools = ep.tools();
            (entropy_series(&tools, window), tools.len() < 2 * window, *m)
        })
        .collect();

    let mut best: Option<F1Calibration> = None;
    for &theta in &thetas {
        for &delta in &deltas {
            let config = MopConfig { window, theta, delta };
            config.validate()?;
            let (mut tp, mut fp, mut fn_) = (0, 0, 0);
            for (series, too_short, label) in &prepared {
                let hit = !too_short && find_onset(series, &config).is_some();
                match (hit, label) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
            let (f1, precision, recall) = score(tp, fp, fn_);
            if best.is_none_or(|b| f1 > b.f1) {
                best = Some(F1Calibration {
                    theta,
                    delta,
                    f1,
                    precision,
                    recall,
                    true_positives: tp,
                    false_positives: fp,
                    false_negatives: fn_,
                });
            }
        }
    }
    Ok(best.expect("grid is nonempty"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineCalibration {
    pub theta: f64,
    pub delta: f64,
    pub percentile: f64,
    /// Baseline episodes long enough to contribute.
    pub episodes_used: usize,
}

/// θ from a percentile (type-7 interpolation) of per-episode maximum window
/// entropy over a baseline; δ is 0. Episodes shorter than two windows are skipped.
pub fn calibrate_mop_baseline(baseline: &[&Episode], percentile: f64, window: usize) -> Result<BaselineCalibration, MopError> {
    if baseline.is_empty() {
        return Err(MopError::EmptyBaseline);
    }
    if !(0.0..=1.0).contains(&percentile) {
        return Err(MopError::Config(format!("percentile {percentile} outside [0, 1]")));
    }
    if window < 2 {
        return Err(MopError::Config(format!("window must be at least 2, got {window}")));
    }
    let mut maxima: Vec<f64> = baseline
        .iter()
        .filter(|ep| ep.steps.len() >= 2 * window)
        .map(|ep| {
            entropy_series(&ep.tools(), window)
                .iter()
                .map(|p| p.1)
                .fold(0.0, f64::max)
        })
        .collect();
    if maxima.is_empty() {
        return Err(MopError::BaselineTooShort { min_len: 2 * window });
    }
    maxima.sort_by(f64::total_cmp);
    Ok(BaselineCalibration {
        theta: quantile_sorted(&maxima, percentile),
        delta: 0.0,
        percentile,
        episodes_used: maxima.len(),
    })
}

#[derive(Deserialize)]
struct LabelLine {
    episode_id: String,
    meltdown: bool,
}

/// Reads newline-delimited `{"episode_id": ..., "meltdown": bool}` records.
pub fn load_labels<R: BufRead>(reader: R) -> Result<BTreeMap<String, bool>, LoadError> {
    let mut labels = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LabelLine = serde_json::from_str(&line).map_err(|e| LoadError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        labels.insert(rec.episode_id, rec.meltdown);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_scoring() {
        assert_eq!(score(0, 0, 5), (0.0, 0.0, 0.0));
        let (f1, p, r) = score(8, 2, 2);
        assert!((p - 0.8).abs() < 1e-12 && (r - 0.8).abs() < 1e-12 && (f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn labels_file() {
        let text = "{\"episode_id\":\"a\",\"meltdown\":true}\n\n{\"episode_id\":\"b\",\"meltdown\":false}\n";
        let l = load_labels(text.as_bytes()).unwrap();
        assert_eq!(l.len(), 2);
        assert!(l["a"] && !l["b"]);
        assert!(load_labels("{\"episode_id\":1}".as_bytes()).is_err());
    }
}
