//! The full-study fixture: a log whose cells reproduce the published tables,
//! built from the cell targets under `tests/fixtures`.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use agent_reliability::model::{episode_line, registry_line, Study};
use agent_reliability::sim::{build_study, parse_cell_targets, parse_meltdown_targets, BlueprintOptions, SyntheticStudy};

/// Resolves from either crate that includes this module.
pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

pub fn fixture_study() -> SyntheticStudy {
    let dir = fixture_dir();
    let cells = parse_cell_targets(&fs::read_to_string(dir.join("full_study_cells.csv")).unwrap()).unwrap();
    let melts = parse_meltdown_targets(&fs::read_to_string(dir.join("full_study_meltdowns.csv")).unwrap()).unwrap();
    build_study(&cells, &melts, &BlueprintOptions::default()).unwrap()
}

pub fn assemble(s: &SyntheticStudy) -> Study {
    s.study()
}

/// Writes `registry.jsonl` and `episodes.jsonl` into `dir`.
pub fn write_study(s: &SyntheticStudy, dir: &Path) -> (PathBuf, PathBuf) {
    let registry = dir.join("registry.jsonl");
    let episodes = dir.join("episodes.jsonl");
    let lines = |v: Vec<String>| v.into_iter().map(|l| l + "\n").collect::<String>();
    fs::write(&registry, lines(s.tasks.iter().map(registry_line).collect())).unwrap();
    fs::write(&episodes, lines(s.episodes.iter().map(episode_line).collect())).unwrap();
    (registry, episodes)
}
