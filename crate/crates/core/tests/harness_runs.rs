use godm::greedy::Method;
use godm::harness::{run_experiment, sweep_budget, AlphaSpec, BudgetSpec, ExperimentConfig, GraphSource, BENEFIT_CROSS_CHECK};
use godm::ingest::{SyntheticSpec, WeightDist};

fn synthetic_config(n: usize, negative_prob: f64, seed: u64) -> ExperimentConfig {
    let spec = SyntheticSpec { n, edge_prob: 5.0 / n as f64, negative_prob, weights: WeightDist::default(), seed };
    ExperimentConfig::new("synthetic", GraphSource::Synthetic(spec))
}

#[test]
fn greedy_beats_rand_on_average() {
    let mut cfg = synthetic_config(200, 0.3, 1);
    cfg.methods = vec![Method::Greedy, Method::Rand];
    cfg.repetitions = 5;
    cfg.budget = BudgetSpec::Values(vec![20.0]);
    let report = run_experiment(&cfg).unwrap();
    let greedy = report.mean_benefit("adjusted:0.5", Method::Greedy, 20.0).unwrap();
    let rand = report.mean_benefit("adjusted:0.5", Method::Rand, 20.0).unwrap();
    assert!(greedy > rand, "{greedy} vs {rand}");
    for row in &report.rows {
        assert!((row.benefit - row.linear_benefit).abs() <= BENEFIT_CROSS_CHECK);
    }
}

#[test]
fn zero_budget_grid() {
    let mut cfg = synthetic_config(50, 0.3, 2);
    cfg.methods = vec![Method::Greedy];
    cfg.repetitions = 2;
    cfg.budget = BudgetSpec::Values(vec![0.0]);
    let report = sweep_budget(&cfg).unwrap();
    assert!(report.rows.iter().all(|r| r.benefit.abs() <= 1e-12 && r.spent == 0.0));
}

#[test]
fn greedy_sweep_monotone_and_concave() {
    let mut cfg = synthetic_config(120, 0.3, 3);
    cfg.methods = vec![Method::Greedy];
    cfg.repetitions = 3;
    cfg.alpha = vec![AlphaSpec::Adjusted { q: 0.5 }, AlphaSpec::Fixed { alpha: 0.5 }];
    cfg.budget = BudgetSpec::Values(vec![1.0, 2.0, 4.0, 8.0]);
    let report = sweep_budget(&cfg).unwrap();
    for seed in cfg.seeds() {
        for alpha in &cfg.alpha {
            let rows: Vec<_> = report.rows.iter().filter(|r| r.seed == seed && r.alpha == alpha.to_string()).collect();
            for w in rows.windows(2) {
                assert!(w[1].mu > w[0].mu);
                assert!(w[1].p_after >= w[0].p_after - 1e-9);
                assert!(w[1].unit_benefit <= w[0].unit_benefit + 1e-9);
            }
        }
    }
}

#[test]
fn sweep_rejects_unsorted_grid() {
    let mut cfg = synthetic_config(20, 0.0, 4);
    cfg.budget = BudgetSpec::Values(vec![2.0, 1.0]);
    assert!(sweep_budget(&cfg).is_err());
}

#[test]
fn fixed_alpha_direction_on_positive_graph() {
    let mut cfg = synthetic_config(300, 0.0, 5);
    cfg.methods = vec![Method::Greedy];
    cfg.repetitions = 4;
    cfg.alpha = ["fixed:2/3", "fixed:1/2", "fixed:1/3", "fixed:1/4"].iter().map(|s| s.parse().unwrap()).collect();
    cfg.budget = BudgetSpec::Values(vec![30.0]);
    let report = run_experiment(&cfg).unwrap();
    let b: Vec<f64> = cfg.alpha.iter().map(|a| report.mean_benefit(&a.to_string(), Method::Greedy, 30.0).unwrap()).collect();
    assert!(b[0] <= b[1] && b[1] <= b[2], "{b:?}");
}
