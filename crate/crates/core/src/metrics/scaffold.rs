use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::pass::TaskOutcomeGroup;
use crate::model::{Bucket, Scaffold};

/// Deltas within this band (inclusive) are labeled neutral.
pub const NEUTRAL_BAND: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaLabel {
    Helps,
    Neutral,
    Hurts,
}

impl fmt::Display for DeltaLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeltaLabel::Helps => "helps",
            DeltaLabel::Neutral => "neutral",
            DeltaLabel::Hurts => "hurts",
        })
    }
}

pub fn delta_label(delta: f64) -> DeltaLabel {
    // The tolerance keeps a delta that is 0.03 in decimal but not in binary inside the band.
    if delta.abs() <= NEUTRAL_BAND + 1e-9 {
        DeltaLabel::Neutral
    } else if delta > 0.0 {
        DeltaLabel::Helps
    } else {
        DeltaLabel::Hurts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaffoldDelta {
    pub model_id: String,
    pub react: f64,
    pub memory: f64,
    /// memory minus react.
    pub delta: f64,
    pub label: DeltaLabel,
    pub n_react: usize,
    pub n_memory: usize,
}

/// Memory-vs-plain scaffold comparison on mean GDS over the selected buckets.
/// Models lacking either scaffold there are skipped and named in the warnings.
pub fn scaffold_delta(groups: &[TaskOutcomeGroup], buckets: &BTreeSet<Bucket>) -> (Vec<ScaffoldDelta>, Vec<String>) {
    let mut sums: BTreeMap<&str, BTreeMap<Scaffold, (f64, usize)>> = BTreeMap::new();
    for g in groups {
        let entry = sums.entry(g.model_id.as_str()).or_default();
        if !buckets.contains(&g.bucket) {
            continue;
        }
        let cell = entry.entry(g.scaffold).or_default();
        for r in &g.repeats {
            cell.0 += r.gds;
            cell.1 += 1;
        }
    }
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for (model, by) in sums {
        match (by.get(&Scaffold::React), by.get(&Scaffold::Memory)) {
            (Some(&(rs, rn)), Some(&(ms, mn))) if rn > 0 && mn > 0 => {
                let react = rs / rn as f64;
                let memory = ms / mn as f64;
                let delta = memory - react;
                rows.push(ScaffoldDelta {
                    model_id: model.to_string(),
                    react,
                    memory,
                    delta,
                    label: delta_label(delta),
                    n_react: rn,
                    n_memory: mn,
                });
            }
            _ => warnings.push(format!("{model}: both scaffolds needed for a delta; skipped")),
        }
    }
    (rows, warnings)
}
