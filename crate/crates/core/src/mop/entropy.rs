use std::collections::{BTreeMap, HashMap};

use crate::error::MopError;
use crate::model::ToolStep;

/// Shannon entropy in bits of a window given its tool counts.
///
/// Counts are sorted before summation so the result does not depend on map
/// iteration order.
pub fn entropy_from_counts<I: IntoIterator<Item = usize>>(counts: I) -> f64 {
    let mut counts: Vec<usize> = counts.into_iter().filter(|&c| c > 0).collect();
    counts.sort_unstable();
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    -counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Entropy in bits of a distribution; zero-probability entries contribute nothing.
pub fn window_entropy(dist: &BTreeMap<String, f64>) -> f64 {
    let mut ps: Vec<f64> = dist.values().copied().filter(|&p| p > 0.0).collect();
    ps.sort_by(f64::total_cmp);
    -ps.iter().map(|p| p * p.log2()).sum::<f64>()
}

/// Relative tool frequencies over the trailing window of `w` calls ending at
/// 1-based step `t`, i.e. steps `t-w+1..=t`.
pub fn window_distribution(trajectory: &[ToolStep], t: usize, w: usize) -> Result<BTreeMap<String, f64>, MopError> {
    if w == 0 || t < w {
        return Err(MopError::WindowNotFull { t, w });
    }
    if t > trajectory.len() {
        return Err(MopError::StepOutOfRange {
            t,
            len: trajectory.len(),
        });
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for step in &trajectory[t - w..t] {
        *counts.entry(step.tool.clone()).or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(tool, c)| (tool, c as f64 / w as f64))
        .collect())
}

/// Window entropy at every step `t` in `w..=len`, maintained incrementally.
pub fn entropy_series(tools: &[&str], w: usize) -> Vec<(u32, f64)> {
    if w == 0 || tools.len() < w {
        return Vec::new();
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut series = Vec::with_capacity(tools.len() + 1 - w);
    for (i, &tool) in tools.iter().enumerate() {
        *counts.entry(tool).or_default() += 1;
        if i >= w {
            let out = tools[i - w];
            let c = counts.get_mut(out).expect("tool in window");
            *c -= 1;
            if *c == 0 {
                counts.remove(out);
            }
        }
        if i + 1 >= w {
            series.push(((i + 1) as u32, entropy_from_counts(counts.values().copied())));
        }
    }
    series
}

/// Same series as [`entropy_series`], recounting every window from scratch.
pub fn entropy_series_recount(tools: &[&str], w: usize) -> Vec<(u32, f64)> {
    if w == 0 || tools.len() < w {
        return Vec::new();
    }
    (w..=tools.len())
        .map(|t| {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for &tool in &tools[t - w..t] {
                *counts.entry(tool).or_default() += 1;
            }
            (t as u32, entropy_from_counts(counts.into_values()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn steps(tools: &[&str]) -> Vec<ToolStep> {
        tools
            .iter()
            .enumerate()
            .map(|(i, t)| ToolStep::new(i as u32 + 1, *t, &json!({})))
            .collect()
    }

    #[test]
    fn counting() {
        let traj = steps(&["read", "write", "read", "search", "read"]);
        let d = window_distribution(&traj, 5, 5).unwrap();
        assert!((d["read"] - 0.6).abs() < 1e-12);
        assert!((d["write"] - 0.2).abs() < 1e-12);
        assert!((d["search"] - 0.2).abs() < 1e-12);
        assert!((d.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_must_be_full() {
        let traj = steps(&["a", "b", "c"]);
        assert!(matches!(window_distribution(&traj, 2, 3), Err(MopError::WindowNotFull { .. })));
        assert!(matches!(window_distribution(&traj, 4, 3), Err(MopError::StepOutOfRange { .. })));
    }

    #[test]
    fn known_entropies() {
        assert_eq!(entropy_from_counts([5]), 0.0);
        assert!((entropy_from_counts([1, 1, 1, 1, 1]) - 5f64.log2()).abs() < 1e-12);
        let d: BTreeMap<String, f64> = [("a".to_string(), 0.6), ("b".to_string(), 0.4)].into();
        assert!((window_entropy(&d) - 0.970_950_594).abs() < 1e-8);
    }

    #[test]
    fn series_starts_at_first_full_window() {
        let s = entropy_series(&["a", "a", "b", "c"], 3);
        assert_eq!(s.iter().map(|p| p.0).collect::<Vec<_>>(), vec![3, 4]);
        assert!(entropy_series(&["a"], 3).is_empty());
    }
}
