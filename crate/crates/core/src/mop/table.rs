use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::MopError;
use crate::model::{Bucket, Scaffold};
use crate::stats::ols_slope;

/// Median onset is withheld for cells with fewer events than this.
pub const MIN_EVENTS_FOR_MEDIAN: usize = 5;

/// Detection outcome of one episode with its grouping keys.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MopObservation {
    pub model_id: String,
    pub scaffold: Scaffold,
    pub bucket: Bucket,
    pub onset_step: Option<u32>,
    pub too_short: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeltdownCell {
    pub model_id: String,
    pub scaffold: Scaffold,
    pub bucket: Bucket,
    pub n_episodes: usize,
    pub n_events: usize,
    pub n_too_short: usize,
    /// Fraction of the cell's episodes with an onset.
    pub rate: f64,
    /// Lower median onset step; `None` when suppressed.
    pub median_onset: Option<u32>,
}

/// Meltdown rate and median onset per (model, scaffold, bucket).
pub fn meltdown_table(observations: &[MopObservation]) -> Vec<MeltdownCell> {
    let mut cells: BTreeMap<(&str, Scaffold, Bucket), (usize, usize, Vec<u32>)> = BTreeMap::new();
    for o in observations {
        let c = cells.entry((o.model_id.as_str(), o.scaffold, o.bucket)).or_default();
        c.0 += 1;
        if o.too_short {
            c.1 += 1;
        }
        if let Some(t) = o.onset_step {
            c.2.push(t);
        }
    }
    cells
        .into_iter()
        .map(|((model, scaffold, bucket), (n, short, mut onsets))| {
            onsets.sort_unstable();
            let n_events = onsets.len();
            MeltdownCell {
                model_id: model.to_string(),
                scaffold,
                bucket,
                n_episodes: n,
                n_events,
                n_too_short: short,
                rate: n_events as f64 / n as f64,
                median_onset: (n_events >= MIN_EVENTS_FOR_MEDIAN).then(|| onsets[(n_events - 1) / 2]),
            }
        })
        .collect()
}

/// Least-squares slope of `H(t)` over the `lookback` steps before `onset`.
pub fn entropy_precursor(series: &[(u32, f64)], onset: u32, lookback: u32) -> Result<f64, MopError> {
    if lookback < 2 {
        return Err(MopError::Config(format!("lookback must be at least 2, got {lookback}")));
    }
    let first = series.first().map(|p| p.0).unwrap_or(u32::MAX);
    let from = onset.checked_sub(lookback).ok_or(MopError::InsufficientLookback {
        from: 0,
        first: first as usize,
    })?;
    if from < first {
        return Err(MopError::InsufficientLookback {
            from: from as usize,
            first: first as usize,
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = series
        .iter()
        .filter(|p| p.0 >= from && p.0 < onset)
        .map(|p| (p.0 as f64, p.1))
        .unzip();
    if x.len() < 2 {
        return Err(MopError::InsufficientLookback {
            from: from as usize,
            first: first as usize,
        });
    }
    Ok(ols_slope(&x, &y).unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(bucket: Bucket, onset: Option<u32>) -> MopObservation {
        MopObservation {
            model_id: "m".into(),
            scaffold: Scaffold::React,
            bucket,
            onset_step: onset,
            too_short: false,
        }
    }

    #[test]
    fn suppression_and_lower_median() {
        let mut o: Vec<_> = [12, 20, 15, 30].iter().map(|&t| obs(Bucket::Long, Some(t))).collect();
        o.push(obs(Bucket::Long, None));
        let t = meltdown_table(&o);
        assert_eq!(t[0].n_events, 4);
        assert_eq!(t[0].median_onset, None);
        assert!((t[0].rate - 0.8).abs() < 1e-12);

        o.push(obs(Bucket::Long, Some(40)));
        o.push(obs(Bucket::Long, Some(11)));
        let t = meltdown_table(&o);
        // sorted 11 12 15 20 30 40: lower median is 15
        assert_eq!(t[0].median_onset, Some(15));
    }

    #[test]
    fn empty_cell() {
        let t = meltdown_table(&[obs(Bucket::Short, None)]);
        assert_eq!((t[0].rate, t[0].median_onset, t[0].n_events), (0.0, None, 0));
    }

    #[test]
    fn precursor_slopes() {
        let rising: Vec<(u32, f64)> = (5..20).map(|t| (t, t as f64 * 0.1)).collect();
        assert!(entropy_precursor(&rising, 15, 5).unwrap() > 0.0);
        let flat: Vec<(u32, f64)> = (5..20).map(|t| (t, 1.0)).collect();
        assert_eq!(entropy_precursor(&flat, 15, 5).unwrap(), 0.0);
        assert!(matches!(entropy_precursor(&flat, 8, 5), Err(MopError::InsufficientLookback { .. })));
    }
}
