use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{LoadError, ReportError};
use crate::model::Episode;

/// Prices per million tokens, in whatever currency the file uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingEntry {
    pub model_id: String,
    pub input_per_million: f64,
    pub output_per_million: f64,
}

/// Reads newline-delimited pricing records.
pub fn load_pricing<R: BufRead>(reader: R) -> Result<Vec<PricingEntry>, LoadError> {
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| LoadError::Malformed { line: i + 1, message };
        let e: PricingEntry = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        if !(e.input_per_million >= 0.0 && e.output_per_million >= 0.0) {
            return Err(malformed(format!("negative price for {}", e.model_id)));
        }
        if !seen.insert(e.model_id.clone()) {
            return Err(malformed(format!("duplicate pricing for {}", e.model_id)));
        }
        entries.push(e);
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeCost {
    pub episode_id: String,
    pub model_id: String,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ModelCost {
    pub episodes: usize,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub per_episode: Vec<EpisodeCost>,
    pub per_model: BTreeMap<String, ModelCost>,
    /// Sum of per-episode costs in input order.
    pub total: f64,
}

/// Cost of each episode, `Σ (tokens_in · in_price + tokens_out · out_price) / 1e6`
/// over its steps, then per model and overall. Sums run in input order at full precision.
pub fn compute_cost<'a>(
    episodes: impl IntoIterator<Item = &'a Episode>,
    pricing: &[PricingEntry],
) -> Result<CostReport, ReportError> {
    let prices: BTreeMap<&str, &PricingEntry> = pricing.iter().map(|p| (p.model_id.as_str(), p)).collect();
    let episodes: Vec<&Episode> = episodes.into_iter().collect();
    let missing: BTreeSet<String> = episodes
        .iter()
        .filter(|e| !prices.contains_key(e.model_id.as_str()))
        .map(|e| e.model_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(ReportError::MissingPricing(missing.into_iter().collect()));
    }
    let mut per_episode = Vec::with_capacity(episodes.len());
    let mut per_model: BTreeMap<String, ModelCost> = BTreeMap::new();
    let mut total = 0.0;
    for e in episodes {
        let p = prices[e.model_id.as_str()];
        let cost: f64 = e
            .steps
            .iter()
            .map(|s| (s.tokens_in as f64 * p.input_per_million + s.tokens_out as f64 * p.output_per_million) / 1e6)
            .sum();
        let tokens_in = e.steps.iter().map(|s| s.tokens_in).sum();
        let tokens_out = e.steps.iter().map(|s| s.tokens_out).sum();
        let m = per_model.entry(e.model_id.clone()).or_default();
        m.episodes += 1;
        m.tokens_in += tokens_in;
        m.tokens_out += tokens_out;
        m.cost += cost;
        total += cost;
        per_episode.push(EpisodeCost {
            episode_id: e.episode_id.clone(),
            model_id: e.model_id.clone(),
            tokens_in,
            tokens_out,
            cost,
        });
    }
    Ok(CostReport {
        per_episode,
        per_model,
        total,
    })
}
