use std::collections::{BTreeMap, HashMap};

use agent_reliability::model::{Bucket, Episode, Scaffold, ToolStep};
use agent_reliability::mop::*;
use agent_reliability::sim::{generate_trajectory, trajectory_corpus, CorpusSpec, TrajectoryProfile};
use agent_reliability::MopError;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

const TOOLS: [&str; 7] = [
    "read_file",
    "write_file",
    "list_directory",
    "run_command",
    "web_search",
    "fetch_url",
    "finish",
];

fn tools_of(steps: &[ToolStep]) -> Vec<&str> {
    steps.iter().map(|s| s.tool.as_str()).collect()
}

/// Entropy of a slice, counted from scratch.
fn brute_entropy(window: &[&str]) -> f64 {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in window {
        *counts.entry(t).or_default() += 1;
    }
    let n = window.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn random_tools(rng: &mut ChaCha8Rng, pool: usize, len: usize) -> Vec<&'static str> {
    (0..len).map(|_| TOOLS[rng.random_range(0..pool)]).collect()
}

fn onset(tools: &[&str], config: &MopConfig) -> Option<u32> {
    detect_mop(tools, config).unwrap().0
}

#[test]
fn entropy_identities() {
    assert_eq!(entropy_from_counts([5]), 0.0);
    assert!((entropy_from_counts([1; 5]) - 5f64.log2()).abs() < 1e-9);
    assert!((entropy_from_counts([1; 5]) - 2.3219).abs() < 1e-4);
    let dist: BTreeMap<String, f64> = [("a".to_string(), 0.6), ("b".to_string(), 0.4)].into();
    assert!((window_entropy(&dist) - 0.9710).abs() < 1e-4);
}

#[test]
fn window_distribution_is_trailing() {
    let steps: Vec<ToolStep> = ["a", "a", "b", "c", "c", "c"]
        .iter()
        .enumerate()
        .map(|(i, t)| ToolStep::new(i as u32 + 1, *t, &json!({})))
        .collect();
    let d = window_distribution(&steps, 6, 4).unwrap();
    assert_eq!(d.len(), 2);
    assert!((d["b"] - 0.25).abs() < 1e-12 && (d["c"] - 0.75).abs() < 1e-12);
    assert_eq!(window_distribution(&steps, 3, 4), Err(MopError::WindowNotFull { t: 3, w: 4 }));
    assert!(matches!(window_distribution(&steps, 7, 4), Err(MopError::StepOutOfRange { .. })));
}

#[test]
fn incremental_counts_match_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..10_000 {
        let len = rng.random_range(5..=70);
        let w = rng.random_range(2..=7).min(len);
        let pool = rng.random_range(1..=7);
        let tools = random_tools(&mut rng, pool, len);
        let fast = entropy_series(&tools, w);
        let slow = entropy_series_recount(&tools, w);
        assert_eq!(fast.len(), slow.len());
        for (a, b) in fast.iter().zip(&slow) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-12, "{tools:?} w={w}");
        }
    }
}

#[test]
fn zero_thresholds_match_brute_force_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let config = MopConfig {
        window: 5,
        theta: 0.0,
        delta: 0.0,
    };
    let w = config.window;
    for _ in 0..5000 {
        let len = rng.random_range(2 * w..=40);
        let pool = rng.random_range(1..=4);
        let tools = random_tools(&mut rng, pool, len);
        let h = |t: usize| brute_entropy(&tools[t - w..t]);
        let expected = (2 * w..=len).find(|&t| h(t) > 0.0 && h(t) > h(t - w)).map(|t| t as u32);
        assert_eq!(onset(&tools, &config), expected, "{tools:?}");
    }
}

#[test]
fn short_trajectories_are_flagged() {
    let (onset, too_short, _) = detect_mop(&TOOLS[..6], &MopConfig::default()).unwrap();
    assert_eq!(onset, None);
    assert!(too_short);
    let bad = MopConfig {
        window: 1,
        ..MopConfig::default()
    };
    assert!(matches!(detect_mop(&TOOLS, &bad), Err(MopError::Config(_))));
}

fn spiral_hits(start: usize, seeds: u64) -> u64 {
    let config = MopConfig::default();
    (0..seeds)
        .filter(|&seed| {
            let t = generate_trajectory(&TrajectoryProfile::spiral(start), 40, seed).unwrap();
            matches!(onset(&tools_of(&t), &config), Some(s) if (start as u32 + 1..=start as u32 + 9).contains(&s))
        })
        .count() as u64
}

#[test]
fn spiral_onset_follows_start() {
    for start in [15, 20] {
        let hits = spiral_hits(start, 1000);
        assert!(hits >= 950, "spiral_start {start}: {hits}/1000");
    }
}

#[test]
fn rote_and_coherent_never_trigger() {
    let config = MopConfig::default();
    for seed in 0..1000 {
        for profile in [TrajectoryProfile::rote(), TrajectoryProfile::coherent()] {
            let t = generate_trajectory(&profile, 40, seed).unwrap();
            assert_eq!(onset(&tools_of(&t), &config), None, "{:?} seed {seed}", profile.kind);
        }
    }
}

fn corpus(rote: usize, coherent: usize, spiral: usize, seed: u64) -> (Vec<Episode>, BTreeMap<String, bool>) {
    let (study, labels) = trajectory_corpus(&CorpusSpec {
        rote,
        coherent,
        spiral,
        length: 40,
        spiral_start: 20,
        seed,
    })
    .unwrap();
    (study.episodes, labels)
}

fn labeled<'a>(episodes: &'a [Episode], labels: &BTreeMap<String, bool>) -> Vec<(&'a Episode, bool)> {
    episodes.iter().map(|e| (e, labels[&e.episode_id])).collect()
}

#[test]
fn f1_calibration_on_spiral_and_rote() {
    let (episodes, labels) = corpus(25, 0, 25, 1);
    let set = labeled(&episodes, &labels);
    assert_eq!(set.len(), 50);
    let best = calibrate_mop_f1(&set, &DEFAULT_THETA_GRID, &DEFAULT_DELTA_GRID, 5).unwrap();
    assert!(best.f1 >= 0.95, "{best:?}");
}

#[test]
fn f1_calibration_separates_coherent_work() {
    let (episodes, labels) = corpus(0, 25, 25, 2);
    let best = calibrate_mop_f1(&labeled(&episodes, &labels), &DEFAULT_THETA_GRID, &DEFAULT_DELTA_GRID, 5).unwrap();
    assert!(best.f1 >= 0.9, "{best:?}");
    assert!(best.theta >= 1.0);
}

#[test]
fn f1_calibration_edge_cases() {
    let (episodes, labels) = corpus(3, 0, 3, 3);
    let negatives: Vec<_> = episodes.iter().filter(|e| !labels[&e.episode_id]).map(|e| (e, false)).collect();
    assert_eq!(calibrate_mop_f1(&negatives, &DEFAULT_THETA_GRID, &DEFAULT_DELTA_GRID, 5), Err(MopError::NoPositiveLabels));

    let set = labeled(&episodes, &labels);
    let one = calibrate_mop_f1(&set, &[1.5], &[0.2], 5).unwrap();
    assert_eq!((one.theta, one.delta), (1.5, 0.2));
    assert_eq!(one.true_positives + one.false_negatives, 3);
    assert_eq!(calibrate_mop_f1(&set, &[], &[0.2], 5), Err(MopError::EmptyGrid));
}

#[test]
fn baseline_calibration_edges() {
    let (episodes, _) = corpus(10, 0, 0, 4);
    let refs: Vec<&Episode> = episodes.iter().collect();
    assert_eq!(calibrate_mop_baseline(&refs, 0.95, 5).unwrap().theta, 0.0);
    assert_eq!(calibrate_mop_baseline(&[], 0.95, 5), Err(MopError::EmptyBaseline));

    let (episodes, _) = corpus(0, 40, 0, 5);
    let refs: Vec<&Episode> = episodes.iter().collect();
    let top = calibrate_mop_baseline(&refs, 1.0, 5).unwrap();
    let config = MopConfig {
        window: 5,
        theta: top.theta,
        delta: top.delta,
    };
    let maxima: Vec<f64> = refs.iter().map(|e| detect_episode(e, &config).unwrap().max_entropy).collect();
    assert_eq!(top.theta, maxima.iter().copied().fold(0.0, f64::max));
    assert!(refs.iter().all(|e| detect_episode(e, &config).unwrap().onset_step.is_none()));
}

/// Exact distribution of a coherent trajectory's maximum window entropy (w = 5).
///
/// Phases have i.i.d. lengths uniform on 3..=6 and each phase's tool differs
/// from the previous one, uniform over the other six. A 5-call window spans
/// three phases only when the middle phase has length 3, so the only tool
/// coincidence that matters is phase i+2 reusing phase i's tool, which happens
/// with probability 1/6 independently per phase.
fn coherent_max_entropy_distribution(len: usize) -> BTreeMap<u64, f64> {
    fn max_entropy(phases: &[usize], labels: &[usize], len: usize) -> f64 {
        let mut tools = Vec::new();
        for (p, &l) in phases.iter().enumerate() {
            tools.extend(std::iter::repeat_n(TOOLS[labels[p]], l));
        }
        tools.truncate(len);
        (5..=len).map(|t| brute_entropy(&tools[t - 5..t])).fold(0.0, f64::max)
    }
    fn walk(phases: &mut Vec<usize>, covered: usize, weight: f64, len: usize, out: &mut BTreeMap<u64, f64>) {
        if covered >= len {
            // Middle phases of length 3 whose 1+3+1 window fits inside the trajectory.
            let mut start = 0;
            let mut triples = 0;
            for (i, &l) in phases.iter().enumerate() {
                if i > 0 && i + 1 < phases.len() && l == 3 && start + 4 <= len {
                    triples += 1;
                }
                start += l;
            }
            let same: Vec<usize> = (0..phases.len()).map(|i| i % 2).collect();
            let distinct: Vec<usize> = (0..phases.len()).map(|i| i % 7).collect();
            let all_same = (1.0f64 / 6.0).powi(triples);
            for (labels, p) in [(same, all_same), (distinct, 1.0 - all_same)] {
                if p > 0.0 {
                    let h = max_entropy(phases, &labels, len);
                    *out.entry((h * 1e6).round() as u64).or_default() += weight * p;
                }
            }
            return;
        }
        for l in 3..=6 {
            phases.push(l);
            walk(phases, covered + l, weight / 4.0, len, out);
            phases.pop();
        }
    }
    let mut out = BTreeMap::new();
    walk(&mut Vec::new(), 0, 1.0, len, &mut out);
    out
}

#[test]
fn coherent_baseline_matches_enumeration() {
    let dist = coherent_max_entropy_distribution(20);
    assert!((dist.values().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(dist.keys().all(|&k| k <= 1_371_000));
    let analytic_p95 = {
        let mut acc = 0.0;
        *dist
            .iter()
            .find(|(_, &p)| {
                acc += p;
                acc >= 0.95
            })
            .unwrap()
            .0 as f64
            / 1e6
    };

    let (study, _) = trajectory_corpus(&CorpusSpec {
        rote: 0,
        coherent: 2000,
        spiral: 0,
        length: 20,
        spiral_start: 0,
        seed: 9,
    })
    .unwrap();
    let refs: Vec<&Episode> = study.episodes.iter().collect();
    let fitted = calibrate_mop_baseline(&refs, 0.95, 5).unwrap();
    assert_eq!(fitted.episodes_used, 2000);
    assert!((fitted.theta - analytic_p95).abs() <= 0.1, "{} vs {analytic_p95}", fitted.theta);

    // The whole distribution, not just one quantile.
    let mut observed: BTreeMap<u64, usize> = BTreeMap::new();
    for e in &refs {
        let m = detect_episode(e, &MopConfig::default()).unwrap().max_entropy;
        *observed.entry((m * 1e6).round() as u64).or_default() += 1;
    }
    for (k, &p) in &dist {
        let got = *observed.get(k).unwrap_or(&0) as f64 / 2000.0;
        let sd = (p * (1.0 - p) / 2000.0).sqrt();
        assert!((got - p).abs() <= 3.0 * sd + 1e-9, "H = {}: {got} vs {p}", *k as f64 / 1e6);
    }
    assert!(observed.keys().all(|k| dist.contains_key(k)));
}

fn obs(bucket: Bucket, onset_step: Option<u32>) -> MopObservation {
    MopObservation {
        model_id: "m".into(),
        scaffold: Scaffold::React,
        bucket,
        onset_step,
        too_short: false,
    }
}

#[test]
fn meltdown_table_suppression_and_order() {
    let mut rows: Vec<_> = [10, 18, 12, 20, 14, 16].iter().map(|&t| obs(Bucket::VeryLong, Some(t))).collect();
    rows.extend((0..4).map(|_| obs(Bucket::VeryLong, None)));
    rows.extend([11, 13, 15, 17].iter().map(|&t| obs(Bucket::Long, Some(t))));
    let table = meltdown_table(&rows);
    let long = table.iter().find(|c| c.bucket == Bucket::Long).unwrap();
    assert_eq!((long.n_events, long.median_onset), (4, None));
    let very_long = table.iter().find(|c| c.bucket == Bucket::VeryLong).unwrap();
    assert_eq!(very_long.n_events, 6);
    assert_eq!(very_long.median_onset, Some(14));
    assert!((very_long.rate - 0.6).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        rows.shuffle(&mut rng);
        assert_eq!(meltdown_table(&rows), table);
    }
}

#[test]
fn precursor_examples() {
    let rising: Vec<(u32, f64)> = (5..30).map(|t| (t, t as f64 * 0.1)).collect();
    assert!((entropy_precursor(&rising, 20, 5).unwrap() - 0.1).abs() < 1e-12);
    let flat: Vec<(u32, f64)> = (5..30).map(|t| (t, 0.7)).collect();
    assert_eq!(entropy_precursor(&flat, 20, 5).unwrap(), 0.0);
    assert!(matches!(entropy_precursor(&flat, 8, 5), Err(MopError::InsufficientLookback { .. })));
}

#[test]
fn spiral_precursor_slope_is_positive() {
    let config = MopConfig::default();
    let slopes: Vec<f64> = (0..1000)
        .filter_map(|seed| {
            let t = generate_trajectory(&TrajectoryProfile::spiral(20), 40, seed).unwrap();
            let (onset, _, series) = detect_mop(&tools_of(&t), &config).unwrap();
            entropy_precursor(&series, onset?, 5).ok()
        })
        .collect();
    assert!(slopes.len() >= 950);
    let n = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / n;
    let sd = (slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean > 3.0 * sd / n.sqrt(), "mean {mean}, sd {sd}");
}

fn step(i: u32, tool: &str, args: serde_json::Value) -> ToolStep {
    ToolStep::new(i, tool, &args)
}

#[test]
fn guard_examples() {
    let looping: Vec<ToolStep> = (1..=8)
        .map(|i| {
            if i % 2 == 0 {
                step(i, "run_command", json!({"cmd": "pytest"}))
            } else {
                step(i, "read_file", json!({"path": format!("src/{i}.py")}))
            }
        })
        .collect();
    assert_eq!(loop_trigger(&looping, 3, 6), Some(6));

    let distinct: Vec<ToolStep> = (1..=30).map(|i| step(i, "read_file", json!({"path": i}))).collect();
    assert_eq!(loop_trigger(&distinct, 3, 6), None);

    let heavy: Vec<ToolStep> = (1..=5)
        .map(|i| {
            let mut s = step(i, "web_search", json!({"q": i}));
            s.tokens_in = 50_000;
            s
        })
        .collect();
    assert_eq!(budget_trigger(&heavy, 120_000), Some(3));
}

#[test]
fn replay_reads_nudges_and_defaults() {
    let (episodes, _) = corpus(1, 0, 0, 0);
    let mut ep = episodes[0].clone();
    ep.nudges_used = 3;
    let r = replay_guards(&ep, &GuardConfig::default());
    assert!(r.nudge_exhausted);
    // Rote trajectories repeat one (tool, args) pair, so the third call trips the loop guard.
    assert_eq!(r.loop_trigger_step, Some(3));
}

fn render(pairs: &[(String, i64)]) -> String {
    let body: Vec<String> = pairs.iter().map(|(k, v)| format!("\"{k}\":{v}")).collect();
    format!("{{{}}}", body.join(","))
}

proptest! {
    #[test]
    fn loop_guard_ignores_key_order(
        calls in prop::collection::vec((0usize..3, prop::collection::btree_map("[a-e]", 0i64..3, 1..4)), 3..25),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let build = |shuffle: bool, rng: &mut ChaCha8Rng| -> Vec<ToolStep> {
            calls
                .iter()
                .enumerate()
                .map(|(i, (tool, args))| {
                    let mut pairs: Vec<(String, i64)> = args.iter().map(|(k, v)| (k.clone(), *v)).collect();
                    if shuffle {
                        pairs.shuffle(rng);
                    }
                    let mut s = ToolStep::new(i as u32 + 1, TOOLS[*tool], &json!({}));
                    s.args_canonical = render(&pairs);
                    s
                })
                .collect()
        };
        let sorted = build(false, &mut rng);
        let shuffled = build(true, &mut rng);
        prop_assert_eq!(loop_trigger(&sorted, 3, 6), loop_trigger(&shuffled, 3, 6));
    }

    #[test]
    fn raising_theta_never_advances_onset(
        tools in prop::collection::vec(0usize..7, 10..60),
        lo in 0.0f64..2.5,
        bump in 0.0f64..1.0,
        delta in -0.5f64..1.0,
    ) {
        let tools: Vec<&str> = tools.into_iter().map(|i| TOOLS[i]).collect();
        let low = MopConfig { window: 5, theta: lo, delta };
        let high = MopConfig { theta: lo + bump, ..low };
        match (onset(&tools, &low), onset(&tools, &high)) {
            (None, Some(_)) => prop_assert!(false, "higher theta created an onset"),
            (Some(a), Some(b)) => prop_assert!(b >= a),
            _ => {}
        }
    }

    #[test]
    fn window_entropy_is_bounded(tools in prop::collection::vec(0usize..7, 5..40), w in 2usize..8) {
        let tools: Vec<&str> = tools.into_iter().map(|i| TOOLS[i]).collect();
        prop_assume!(w <= tools.len());
        for (t, h) in entropy_series(&tools, w) {
            let window = &tools[t as usize - w..t as usize];
            let mut distinct = window.to_vec();
            distinct.sort_unstable();
            distinct.dedup();
            prop_assert!(h >= 0.0 && h <= (distinct.len().min(w) as f64).log2() + 1e-12);
            prop_assert_eq!(h == 0.0, distinct.len() == 1);
        }
    }
}
