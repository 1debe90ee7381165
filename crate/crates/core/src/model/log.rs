use std::collections::HashSet;
use std::io::{self, BufRead};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::episode::{Episode, MAX_NUDGES, MAX_STEPS};

/// Tolerance for `passed ⇔ evaluator_score = 1`.
pub const SCORE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub code: String,
    pub message: String,
}

impl Issue {
    pub fn new(code: &str, message: impl Into<String>) -> Issue {
        Issue {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

/// Problems found with one log record. Any error excludes the episode from
/// analysis; warnings never do.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub episode_id: String,
    pub line: Option<usize>,
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn new(episode_id: impl Into<String>, line: Option<usize>) -> ValidationReport {
        ValidationReport {
            episode_id: episode_id.into(),
            line,
            errors: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn is_error(&self) -> bool {
        !self.errors.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }
}

/// Result of reading an episode log.
#[derive(Debug, Clone, Default)]
pub struct EpisodeLog {
    /// Valid episodes in input order.
    pub episodes: Vec<Episode>,
    pub reports: Vec<ValidationReport>,
    /// Non-blank lines read.
    pub lines: usize,
    pub duplicates_dropped: usize,
    /// Records excluded because of validation errors.
    pub rejected: usize,
}

impl EpisodeLog {
    /// Appends another log, applying the same first-wins deduplication across both.
    pub fn merge(&mut self, other: EpisodeLog) {
        let mut seen: HashSet<String> = self.episodes.iter().map(|e| e.episode_id.clone()).collect();
        self.lines += other.lines;
        self.rejected += other.rejected;
        self.duplicates_dropped += other.duplicates_dropped;
        self.reports.extend(other.reports);
        for ep in other.episodes {
            if seen.insert(ep.episode_id.clone()) {
                self.episodes.push(ep);
            } else {
                self.duplicates_dropped += 1;
                let mut report = ValidationReport::new(ep.episode_id, None);
                report.warnings.push(Issue::new("duplicate", "duplicate dropped"));
                self.reports.push(report);
            }
        }
    }
}

/// Checks an episode's self-contained invariants.
pub fn validate_episode(ep: &Episode, report: &mut ValidationReport) {
    if !(0.0..=1.0).contains(&ep.evaluator_score) {
        report.errors.push(Issue::new(
            "score_range",
            format!("evaluator_score {} outside [0, 1]", ep.evaluator_score),
        ));
    }
    let full = (ep.evaluator_score - 1.0).abs() <= SCORE_TOLERANCE;
    if ep.passed != full {
        report.errors.push(Issue::new(
            "pass_score",
            format!(
                "pass/score inconsistency: passed={} evaluator_score={}",
                ep.passed, ep.evaluator_score
            ),
        ));
    }
    if ep.steps.len() > MAX_STEPS {
        report.errors.push(Issue::new(
            "step_limit",
            format!("{} steps exceeds the {MAX_STEPS}-step maximum", ep.steps.len()),
        ));
    }
    if let Some((pos, step)) = ep
        .steps
        .iter()
        .enumerate()
        .find(|(i, s)| s.index as usize != i + 1)
    {
        report.errors.push(Issue::new(
            "step_index",
            format!("step at position {} has index {}", pos + 1, step.index),
        ));
    }
    if ep.nudges_used > MAX_NUDGES {
        report.errors.push(Issue::new(
            "nudges",
            format!("nudges_used {} exceeds {MAX_NUDGES}", ep.nudges_used),
        ));
    }
    if ep.repeat_index == 0 {
        report
            .errors
            .push(Issue::new("repeat_index", "repeat_index is 1-based"));
    }
    if ep.episode_id.is_empty() {
        report.errors.push(Issue::new("episode_id", "empty episode_id"));
    }
    if let Some(step) = ep
        .steps
        .iter()
        .find(|s| !s.timestamp.is_empty() && chrono::DateTime::parse_from_rfc3339(&s.timestamp).is_err())
    {
        report.warnings.push(Issue::new(
            "timestamp",
            format!("step {} timestamp {:?} is not RFC 3339", step.index, step.timestamp),
        ));
    }
}

fn parse_line(text: &str) -> Result<Episode, String> {
    let value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if let Some(v) = value.get("schema_version") {
        if v.as_str() != Some("1") {
            return Err(format!("unsupported schema_version {v}"));
        }
    }
    let mut ep: Episode = serde_json::from_value(value).map_err(|e| e.to_string())?;
    ep.extra.shift_remove("schema_version");
    Ok(ep)
}

fn line_id(text: &str) -> Option<String> {
    serde_json::from_str::<Value>(text)
        .ok()?
        .get("episode_id")?
        .as_str()
        .map(str::to_string)
}

/// Reads a newline-delimited episode log in a single pass.
///
/// Every non-blank line ends up as a valid episode, a rejected record with an
/// error report, or a dropped duplicate with a warning report. Duplicate ids
/// keep the first occurrence.
pub fn parse_episode_log<R: BufRead>(reader: R) -> io::Result<EpisodeLog> {
    let mut log = EpisodeLog::default();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        log.lines += 1;
        let ep = match parse_line(&line) {
            Ok(ep) => ep,
            Err(message) => {
                let id = line_id(&line).unwrap_or_else(|| format!("<line {line_no}>"));
                let mut report = ValidationReport::new(id, Some(line_no));
                report.errors.push(Issue::new("malformed", message));
                log.rejected += 1;
                log.reports.push(report);
                continue;
            }
        };
        if !seen.insert(ep.episode_id.clone()) {
            let mut report = ValidationReport::new(ep.episode_id, Some(line_no));
            report.warnings.push(Issue::new("duplicate", "duplicate dropped"));
            log.duplicates_dropped += 1;
            log.reports.push(report);
            continue;
        }
        let mut report = ValidationReport::new(ep.episode_id.clone(), Some(line_no));
        validate_episode(&ep, &mut report);
        if report.is_error() {
            log.rejected += 1;
        } else {
            log.episodes.push(ep);
        }
        if !report.is_empty() {
            log.reports.push(report);
        }
    }
    Ok(log)
}
