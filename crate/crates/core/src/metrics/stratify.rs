use std::collections::BTreeMap;

use serde::Serialize;

use super::curve::Metric;
use super::pass::{pass_pow_k, TaskOutcomeGroup};
use crate::error::MetricError;
use crate::model::{Bucket, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub value: f64,
    /// Episodes behind the cell.
    pub n: usize,
}

/// One domain across the duration buckets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainRow {
    pub domain: Domain,
    pub cells: BTreeMap<Bucket, Cell>,
    /// very_long minus short; `None` when either end is missing.
    pub drop: Option<f64>,
}

/// Domain × bucket table of a metric.
pub fn domain_stratify(groups: &[TaskOutcomeGroup], metric: Metric) -> Result<Vec<DomainRow>, MetricError> {
    if groups.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut split: BTreeMap<Domain, BTreeMap<Bucket, Vec<&TaskOutcomeGroup>>> = BTreeMap::new();
    for g in groups {
        split.entry(g.domain).or_default().entry(g.bucket).or_default().push(g);
    }
    let mut rows = Vec::new();
    for (domain, buckets) in split {
        let mut cells = BTreeMap::new();
        for (bucket, gs) in buckets {
            let n: usize = gs.iter().map(|g| g.k()).sum();
            let value = match metric {
                Metric::Pass1 => gs.iter().map(|g| g.passes()).sum::<usize>() as f64 / n as f64,
                Metric::Gds => gs.iter().flat_map(|g| g.repeats.iter().map(|r| r.gds)).sum::<f64>() / n as f64,
                Metric::PassK => {
                    let owned: Vec<TaskOutcomeGroup> = gs.iter().map(|&g| g.clone()).collect();
                    pass_pow_k(&owned)?.value
                }
            };
            cells.insert(bucket, Cell { value, n });
        }
        let drop = match (cells.get(&Bucket::Short), cells.get(&Bucket::VeryLong)) {
            (Some(s), Some(v)) => Some(v.value - s.value),
            _ => None,
        };
        rows.push(DomainRow { domain, cells, drop });
    }
    Ok(rows)
}
