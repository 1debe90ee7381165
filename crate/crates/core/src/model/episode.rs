use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Maximum steps per episode accepted by validation.
pub const MAX_STEPS: usize = 70;

/// Maximum corrective nudges per episode.
pub const MAX_NUDGES: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaffold {
    /// Plain reason-act-observe loop.
    React,
    /// Loop with an episodic scratchpad.
    Memory,
}

impl Scaffold {
    pub const ALL: [Scaffold; 2] = [Scaffold::React, Scaffold::Memory];

    pub fn as_str(self) -> &'static str {
        match self {
            Scaffold::React => "react",
            Scaffold::Memory => "memory",
        }
    }
}

impl fmt::Display for Scaffold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scaffold {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "react" => Ok(Scaffold::React),
            "memory" | "mem" => Ok(Scaffold::Memory),
            other => Err(format!("unknown scaffold {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Finished,
    StepLimit,
    BudgetExceeded,
    LoopDetected,
    /// Harness or provider failure; excluded from every metric denominator.
    InfraError,
}

/// Renders a JSON value with lexicographically sorted keys and no
/// insignificant whitespace, so equal argument sets compare equal as strings.
pub fn canonical_json(value: &Value) -> String {
    let mut out = String::new();
    write_canonical(value, &mut out);
    out
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(key.clone()).to_string());
                out.push(':');
                write_canonical(&map[key], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

/// Canonicalizes an argument rendering if it parses as JSON; otherwise keeps it verbatim.
pub fn canonicalize_args(raw: &str) -> String {
    match serde_json::from_str::<Value>(raw) {
        Ok(v) => canonical_json(&v),
        Err(_) => raw.to_string(),
    }
}

/// One tool call and its bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawToolStep")]
pub struct ToolStep {
    /// 1-based position within the episode.
    pub index: u32,
    pub tool: String,
    pub args_canonical: String,
    pub result_chars: u64,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub timestamp: String,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl ToolStep {
    pub fn new(index: u32, tool: impl Into<String>, args: &Value) -> ToolStep {
        ToolStep {
            index,
            tool: tool.into(),
            args_canonical: canonical_json(args),
            result_chars: 0,
            tokens_in: 0,
            tokens_out: 0,
            timestamp: String::new(),
            extra: Map::new(),
        }
    }
}

#[derive(Deserialize)]
struct RawToolStep {
    index: u32,
    tool: String,
    #[serde(default)]
    args_canonical: Option<String>,
    #[serde(default)]
    args: Option<Value>,
    #[serde(default)]
    result_chars: u64,
    #[serde(default)]
    tokens_in: u64,
    #[serde(default)]
    tokens_out: u64,
    #[serde(default)]
    timestamp: String,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

impl From<RawToolStep> for ToolStep {
    fn from(raw: RawToolStep) -> ToolStep {
        let mut extra = raw.extra;
        let args_canonical = match (raw.args_canonical, raw.args) {
            (Some(s), args) => {
                if let Some(a) = args {
                    extra.insert("args".into(), a);
                }
                canonicalize_args(&s)
            }
            (None, Some(a)) => {
                let s = canonical_json(&a);
                extra.insert("args".into(), a);
                s
            }
            (None, None) => "{}".into(),
        };
        ToolStep {
            index: raw.index,
            tool: raw.tool,
            args_canonical,
            result_chars: raw.result_chars,
            tokens_in: raw.tokens_in,
            tokens_out: raw.tokens_out,
            timestamp: raw.timestamp,
            extra,
        }
    }
}

/// One agent run on one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub episode_id: String,
    pub task_id: String,
    pub model_id: String,
    pub scaffold: Scaffold,
    pub repeat_index: u32,
    pub steps: Vec<ToolStep>,
    #[serde(default)]
    pub nudges_used: u32,
    pub termination: Termination,
    pub subtask_outcomes: Vec<bool>,
    pub evaluator_score: f64,
    pub passed: bool,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Episode {
    pub fn is_infra_error(&self) -> bool {
        self.termination == Termination::InfraError
    }

    pub fn tools(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.tool.as_str()).collect()
    }

    pub fn total_tokens_in(&self) -> u64 {
        self.steps.iter().map(|s| s.tokens_in).sum()
    }
}

/// Renders one episode-log record, `schema_version` first.
pub fn episode_line(episode: &Episode) -> String {
    let mut value = serde_json::to_value(episode).expect("episode serializes");
    if let Value::Object(map) = &mut value {
        map.shift_insert(0, "schema_version".into(), "1".into());
    }
    value.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn canonical_sorts_nested_keys() {
        let a = json!({"b": 1, "a": {"y": [1, {"k": 2, "j": 1}], "x": "s"}});
        assert_eq!(canonical_json(&a), r#"{"a":{"x":"s","y":[1,{"j":1,"k":2}]},"b":1}"#);
    }

    #[test]
    fn canonicalize_keeps_non_json_verbatim() {
        assert_eq!(canonicalize_args("path=/tmp/x"), "path=/tmp/x");
        assert_eq!(canonicalize_args(r#"{ "b":2, "a":1 }"#), r#"{"a":1,"b":2}"#);
    }

    #[test]
    fn raw_args_become_canonical() {
        let step: ToolStep = serde_json::from_value(json!({
            "index": 1, "tool": "read_file", "args": {"path": "a.py", "limit": 10},
            "tokens_in": 5, "tokens_out": 2, "timestamp": "2025-01-01T00:00:00Z"
        }))
        .unwrap();
        assert_eq!(step.args_canonical, r#"{"limit":10,"path":"a.py"}"#);
        assert!(step.extra.contains_key("args"));
    }

    #[test]
    fn scaffold_parse() {
        assert_eq!("mem".parse::<Scaffold>().unwrap(), Scaffold::Memory);
        assert!("other".parse::<Scaffold>().is_err());
    }
}
