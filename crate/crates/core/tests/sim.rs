use agent_reliability::model::Bucket;
use agent_reliability::sim::*;
use agent_reliability::SimError;

fn moments(xs: &[usize]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<usize>() as f64 / n;
    let m2 = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|&x| (x as f64 - mean).powi(4)).sum::<f64>() / n;
    (mean, m2, m4)
}

/// Sample variance with its large-sample standard error from the fourth central moment.
fn variance_with_se(xs: &[usize]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (_, m2, m4) = moments(xs);
    let var = m2 * n / (n - 1.0);
    (var, ((m4 - m2 * m2) / n).sqrt())
}

fn all_success(steps: &[Vec<bool>]) -> f64 {
    steps.iter().filter(|e| e.iter().all(|&f| !f)).count() as f64 / steps.len() as f64
}

#[test]
fn failure_count_variance_grid() {
    let mut checked = 0;
    for eps in [0.05, 0.1, 0.3] {
        for rho in [0.0, 0.2, 0.5] {
            for t in [5, 20] {
                let steps = simulate_steps(&SimConfig::exchangeable(eps, rho, t, 100_000, 31)).unwrap();
                let (var, se) = variance_with_se(&failure_counts(&steps));
                let expected = predicted_failcount_variance(eps, rho, t);
                assert!(
                    (var - expected).abs() <= 3.0 * se,
                    "eps={eps} rho={rho} T={t}: {var} vs {expected} (se {se})"
                );
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 18);
}

#[test]
fn formula_examples() {
    assert!((predicted_failcount_variance(0.1, 0.0, 10) - 0.9).abs() < 1e-12);
    assert!((predicted_failcount_variance(0.1, 0.5, 10) - 1.35).abs() < 1e-12);
    for rho in [0.0, 0.3, 1.0] {
        assert!((predicted_failcount_variance(0.2, rho, 1) - 0.16).abs() < 1e-12);
    }
    assert!((predicted_success_bound(0.1, 0.5, 10) - 0.294).abs() < 5e-4);
    assert!((predicted_success_bound(0.1, 0.0, 10) - (-1.0f64).exp()).abs() < 1e-12);
    assert!((predicted_success_bound(0.3, 0.8, 1) - (-0.3f64).exp()).abs() < 1e-12);
}

#[test]
fn exchangeable_success_at_least_iid() {
    let (eps, t, n) = (0.1, 10, 100_000);
    let iid = 0.9f64.powi(t as i32);
    let sd = (iid * (1.0 - iid) / n as f64).sqrt();
    for rho in [0.2, 0.5] {
        let s = all_success(&simulate_steps(&SimConfig::exchangeable(eps, rho, t, n, 8)).unwrap());
        assert!(s >= iid - 3.0 * sd, "rho={rho}: {s} vs {iid}");
        assert!(s > iid, "rho={rho}");
    }
}

#[test]
fn hazard_decays_faster_than_geometric() {
    let (eps, t, n) = (0.05, 10, 100_000);
    let geo = 0.95f64.powi(t as i32);
    let sd = (geo * (1.0 - geo) / n as f64).sqrt();
    let s = all_success(&simulate_steps(&SimConfig::hazard(eps, 0.1, t, n, 12)).unwrap());
    assert!(s < geo - 3.0 * sd, "{s} vs {geo}");
}

#[test]
fn zero_hazard_growth_is_iid() {
    let a = failure_counts(&simulate_steps(&SimConfig::iid(0.1, 20, 20_000, 1)).unwrap());
    let b = failure_counts(&simulate_steps(&SimConfig::hazard(0.1, 0.0, 20, 20_000, 2)).unwrap());
    // Two-sample Kolmogorov-Smirnov at alpha = 0.01.
    let cdf = |xs: &[usize], k: usize| xs.iter().filter(|&&x| x <= k).count() as f64 / xs.len() as f64;
    let d = (0..=20).map(|k| (cdf(&a, k) - cdf(&b, k)).abs()).fold(0.0, f64::max);
    let n = a.len() as f64;
    let critical = 1.628 * (2.0 / n).sqrt();
    assert!(d < critical, "D = {d}, critical {critical}");
}

#[test]
fn markov_curve_peaks_at_inverse_epsilon() {
    let c = markov_variance_curve(0.1, 1..=50).unwrap();
    assert_eq!(c.argmax, 10);
    let diffs: Vec<f64> = c.points.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let turn = diffs.iter().position(|&d| d < -1e-15).unwrap();
    assert!(diffs[..turn].iter().all(|&d| d >= -1e-15));
    assert!(diffs[turn..].iter().all(|&d| d < 0.0));
    assert_eq!(markov_variance_curve(0.5, 1..=1).unwrap().points, vec![(1, 0.5)]);
    assert!(markov_variance_curve(0.0, 1..=5).is_err());
}

#[test]
fn simulations_are_reproducible() {
    let config = SimConfig::exchangeable(0.2, 0.4, 15, 5000, 77);
    assert_eq!(simulate_steps(&config).unwrap(), simulate_steps(&config).unwrap());
    let spec = AgentStudySpec::new(Bucket::ALL.map(|b| (b, 0.6)), 12, 3, 5);
    assert_eq!(simulate_agent_study(&spec).unwrap(), simulate_agent_study(&spec).unwrap());
    let a = generate_trajectory(&TrajectoryProfile::spiral(15), 40, 3).unwrap();
    assert_eq!(a, generate_trajectory(&TrajectoryProfile::spiral(15), 40, 3).unwrap());
}

#[test]
fn certain_success_study() {
    let spec = AgentStudySpec::new(Bucket::ALL.map(|b| (b, 1.0)), 33, 3, 0);
    let s = simulate_agent_study(&spec).unwrap();
    assert_eq!(s.episodes.len(), 4 * 33 * 3);
    assert!(s.episodes.iter().all(|e| e.passed && e.evaluator_score == 1.0));
}

#[test]
fn infeasible_parameters_rejected() {
    assert!(matches!(
        simulate_steps(&SimConfig::exchangeable(0.6, 1.0, 5, 10, 0)),
        Err(SimError::Infeasible(_))
    ));
    assert!(simulate_steps(&SimConfig::hazard(0.2, 0.5, 10, 10, 0)).is_err());
    let bad = AgentStudySpec::new([(Bucket::Short, 1.2)], 3, 1, 0);
    assert!(simulate_agent_study(&bad).is_err());
}

#[test]
fn spiral_prefix_is_coherent() {
    for seed in 0..100 {
        let t = generate_trajectory(&TrajectoryProfile::spiral(15), 40, seed).unwrap();
        let tools: Vec<&str> = t[..15].iter().map(|s| s.tool.as_str()).collect();
        let runs: Vec<usize> = tools.chunk_by(|a, b| a == b).map(<[_]>::len).collect();
        assert!(runs[..runs.len() - 1].iter().all(|&r| r >= MIN_PHASE_LEN));
    }
}
