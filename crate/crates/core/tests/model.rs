use agent_reliability::model::{
    episode_gds, episode_line, load_task_registry, parse_episode_log, registry_line, Bucket, Domain, Episode,
    EpisodeLog, Scaffold, Study, Subtask, TaskSpec, Termination, ToolStep,
};
use agent_reliability::LoadError;
use proptest::prelude::*;
use serde_json::{json, Map, Value};

fn task(id: &str, weights: &[f64]) -> TaskSpec {
    TaskSpec {
        task_id: id.into(),
        domain: Domain::SE,
        bucket: Bucket::Medium,
        human_minutes_estimate: 20.0,
        agent_steps_estimate: 12,
        subtasks: weights
            .iter()
            .enumerate()
            .map(|(i, &w)| Subtask {
                subtask_id: format!("s{}", i + 1),
                weight: w,
                description: String::new(),
            })
            .collect(),
    }
}

fn episode(id: &str, task_id: &str, outcomes: Vec<bool>, passed: bool) -> Episode {
    Episode {
        episode_id: id.into(),
        task_id: task_id.into(),
        model_id: "m".into(),
        scaffold: Scaffold::React,
        repeat_index: 1,
        steps: vec![ToolStep::new(1, "read_file", &json!({"path": "a"}))],
        nudges_used: 0,
        termination: Termination::Finished,
        subtask_outcomes: outcomes,
        evaluator_score: if passed { 1.0 } else { 0.4 },
        passed,
        extra: Map::new(),
    }
}

#[test]
fn registry_root_cause_weights() {
    let line = registry_line(&task("SE-M-01", &[0.25, 0.35, 0.20, 0.20]));
    let reg = load_task_registry(line.as_bytes()).unwrap();
    assert_eq!(reg.get("SE-M-01").unwrap().subtasks.len(), 4);
    assert!(reg.warnings.is_empty());
}

#[test]
fn registry_single_subtask_warns() {
    let line = registry_line(&task("SE-M-02", &[1.0]));
    let reg = load_task_registry(line.as_bytes()).unwrap();
    assert_eq!(reg.len(), 1);
    assert_eq!(reg.warnings.len(), 1);
    assert!(reg.warnings[0].message.starts_with("subtask count outside 3–6"));
}

#[test]
fn registry_duplicate_id() {
    let line = registry_line(&task("SE-M-01", &[0.5, 0.3, 0.2]));
    let text = format!("{line}\n{line}\n");
    assert!(matches!(
        load_task_registry(text.as_bytes()),
        Err(LoadError::DuplicateTask { line: 2, .. })
    ));
}

#[test]
fn registry_weights_as_decimal_strings() {
    let text = r#"{"task_id":"DP-S-01","domain":"DP","bucket":"short","human_minutes_estimate":4,"agent_steps_estimate":6,"subtasks":[{"subtask_id":"a","weight":"0.1"},{"subtask_id":"b","weight":"0.2"},{"subtask_id":"c","weight":"0.7"}]}"#;
    let reg = load_task_registry(text.as_bytes()).unwrap();
    assert_eq!(reg.get("DP-S-01").unwrap().subtasks[2].weight, 0.7);
}

#[test]
fn registry_bad_weight_sum() {
    let line = registry_line(&task("SE-M-01", &[0.5, 0.3, 0.3]));
    assert!(matches!(load_task_registry(line.as_bytes()), Err(LoadError::WeightSum { .. })));
}

#[test]
fn gds_examples() {
    let t = task("SE-M-01", &[0.25, 0.35, 0.20, 0.20]);
    let g = episode_gds(&episode("e", "SE-M-01", vec![true, true, false, true], false), &t).unwrap();
    assert!((g - 0.80).abs() < 1e-12);
    assert_eq!(episode_gds(&episode("e", "SE-M-01", vec![false; 4], false), &t).unwrap(), 0.0);
    let full = episode_gds(&episode("e", "SE-M-01", vec![true; 4], true), &t).unwrap();
    assert!((full - 1.0).abs() < 1e-12);
}

#[test]
fn log_examples() {
    let t = "SE-M-01";
    let lines: Vec<String> = (0..3)
        .map(|i| episode_line(&episode(&format!("e{i}"), t, vec![true; 4], true)))
        .collect();
    let log = parse_episode_log(lines.join("\n").as_bytes()).unwrap();
    assert_eq!(log.episodes.len(), 3);
    assert!(log.reports.iter().all(|r| !r.is_error()));

    let mut bad = episode("bad", t, vec![true; 4], true);
    bad.evaluator_score = 0.8;
    let log = parse_episode_log(episode_line(&bad).as_bytes()).unwrap();
    assert!(log.episodes.is_empty());
    assert!(log.reports[0].errors[0].message.starts_with("pass/score inconsistency"));

    let dup = format!("{}\n{}", lines[0], lines[0]);
    let log = parse_episode_log(dup.as_bytes()).unwrap();
    assert_eq!(log.episodes.len(), 1);
    assert_eq!(log.reports[0].warnings[0].message, "duplicate dropped");
}

#[test]
fn infra_errors_kept_but_excluded() {
    let reg = load_task_registry(registry_line(&task("SE-M-01", &[0.25, 0.35, 0.20, 0.20])).as_bytes()).unwrap();
    let mut infra = episode("i", "SE-M-01", vec![false; 4], false);
    infra.termination = Termination::InfraError;
    infra.evaluator_score = 0.0;
    let ok = episode("o", "SE-M-01", vec![true; 4], true);
    let text = [episode_line(&infra), episode_line(&ok)].join("\n");
    let study = Study::assemble(reg, parse_episode_log(text.as_bytes()).unwrap());
    assert_eq!(study.episodes.len(), 2);
    assert_eq!(study.records().len(), 1);
    assert_eq!(study.counts.infra_excluded, 1);
    assert_eq!(study.counts.unaccounted(), 0);
}

#[test]
fn unknown_task_and_outcome_mismatch_are_errors() {
    let reg = load_task_registry(registry_line(&task("SE-M-01", &[0.25, 0.35, 0.20, 0.20])).as_bytes()).unwrap();
    let text = [
        episode_line(&episode("a", "SE-M-99", vec![true; 4], true)),
        episode_line(&episode("b", "SE-M-01", vec![true; 3], true)),
    ]
    .join("\n");
    let study = Study::assemble(reg, parse_episode_log(text.as_bytes()).unwrap());
    assert!(study.records().is_empty());
    assert_eq!(study.counts.validation_errors, 2);
    let codes: Vec<&str> = study.reports.iter().map(|r| r.errors[0].code.as_str()).collect();
    assert_eq!(codes, ["unknown_task", "outcome_length"]);
}

fn arb_weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1u32..100, 1..8).prop_map(|raw| {
        let total: u32 = raw.iter().sum();
        raw.iter().map(|&r| r as f64 / total as f64).collect()
    })
}

fn arb_args() -> impl Strategy<Value = Value> {
    prop::collection::btree_map("[a-z]{1,6}", prop_oneof![any::<i32>().prop_map(Value::from), "[a-z ]{0,8}".prop_map(Value::from)], 0..4)
        .prop_map(|m| Value::Object(m.into_iter().collect()))
}

prop_compose! {
    fn arb_episode()(
        id in "[a-z0-9-]{1,12}",
        tools in prop::collection::vec(("[a-z_]{3,10}", arb_args(), 0u64..5000, 0u64..500), 0..20),
        outcomes in prop::collection::vec(any::<bool>(), 1..7),
        passed in any::<bool>(),
        partial in 0.0f64..0.999,
        nudges in 0u32..=3,
        repeat in 1u32..5,
        tag in prop::option::of("[a-z]{1,5}"),
    ) -> Episode {
        let mut extra = Map::new();
        if let Some(t) = tag {
            extra.insert("run_tag".into(), Value::from(t));
        }
        Episode {
            episode_id: id,
            task_id: "T".into(),
            model_id: "model".into(),
            scaffold: Scaffold::Memory,
            repeat_index: repeat,
            steps: tools
                .into_iter()
                .enumerate()
                .map(|(i, (tool, args, tin, tout))| {
                    let mut s = ToolStep::new(i as u32 + 1, tool, &args);
                    s.tokens_in = tin;
                    s.tokens_out = tout;
                    s.timestamp = "2025-06-01T12:00:00Z".into();
                    s
                })
                .collect(),
            nudges_used: nudges,
            termination: Termination::StepLimit,
            subtask_outcomes: outcomes,
            evaluator_score: if passed { 1.0 } else { partial },
            passed,
            extra,
        }
    }
}

proptest! {
    #[test]
    fn gds_bounded(weights in arb_weights(), seed in any::<u64>()) {
        let t = task("T", &weights);
        let outcomes: Vec<bool> = (0..weights.len()).map(|i| (seed >> (i % 64)) & 1 == 1).collect();
        let all = outcomes.iter().all(|&o| o);
        let g = episode_gds(&episode("e", "T", outcomes, false), &t).unwrap();
        prop_assert!((-1e-12..=1.0 + 1e-9).contains(&g));
        if all {
            prop_assert!((g - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn episode_round_trip(ep in arb_episode()) {
        let line = episode_line(&ep);
        let once = parse_episode_log(line.as_bytes()).unwrap();
        prop_assert_eq!(once.episodes.len(), 1);
        let again = parse_episode_log(episode_line(&once.episodes[0]).as_bytes()).unwrap();
        prop_assert_eq!(&once.episodes, &again.episodes);
        prop_assert_eq!(&once.episodes[0], &ep);
    }

    #[test]
    fn dedup_idempotent(eps in prop::collection::vec(arb_episode(), 0..12)) {
        let text: String = eps.iter().map(|e| episode_line(e) + "\n").collect();
        let once = parse_episode_log(text.as_bytes()).unwrap();
        let twice = parse_episode_log(format!("{text}{text}").as_bytes()).unwrap();
        prop_assert_eq!(&once.episodes, &twice.episodes);
        let mut merged = EpisodeLog::default();
        merged.merge(parse_episode_log(text.as_bytes()).unwrap());
        merged.merge(parse_episode_log(text.as_bytes()).unwrap());
        prop_assert_eq!(&once.episodes, &merged.episodes);
    }

    #[test]
    fn every_line_accounted(kinds in prop::collection::vec(0u8..6, 0..40)) {
        let reg = load_task_registry(registry_line(&task("T", &[0.2, 0.3, 0.5])).as_bytes()).unwrap();
        let mut lines = Vec::new();
        for (i, k) in kinds.iter().enumerate() {
            let mut ep = episode(&format!("e{i}"), "T", vec![true, false, true], false);
            match k {
                0 => {}
                1 => ep.termination = Termination::InfraError,
                2 => ep.evaluator_score = 1.0,
                3 => ep.task_id = "missing".into(),
                4 => ep.episode_id = "e0".into(),
                _ => {
                    lines.push("{not json".to_string());
                    continue;
                }
            }
            lines.push(episode_line(&ep));
        }
        let study = Study::assemble(reg, parse_episode_log(lines.join("\n").as_bytes()).unwrap());
        prop_assert_eq!(study.counts.lines, kinds.len());
        prop_assert_eq!(study.counts.unaccounted(), 0);
        prop_assert_eq!(study.records().len(), study.counts.analyzed);
    }
}
