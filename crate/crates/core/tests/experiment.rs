mod common;

use common::*;
use mlas_core::experiment::{
    batch_vs_sequential, cost_ratio_sweep, run_experiment, single_vs_multi_comparison,
};
use mlas_core::output::write_experiment;
use mlas_core::{BatchMode, Execution, Stopping};

#[test]
fn one_seed_bands_coincide_and_counts_add_up() {
    let p = sine_quadratic();
    let mut cfg = quick_experiment(&p, vec![6, 3], Stopping::Iterations { iterations: 6 }, vec![3]);
    cfg.sampler.exploration_interval = 0;
    let r = run_experiment(&p, &cfg).unwrap();
    assert_eq!(r.level_counts[0].iter().sum::<usize>(), 6);
    assert!(r.curve.windows(2).all(|w| w[0].cost < w[1].cost));
    for b in &r.curve {
        assert_eq!(b.q05, b.median);
        assert_eq!(b.q95, b.median);
    }
    assert_eq!(r.curve[0].cost, 0.0);
    assert_eq!(r.curve[0].median, r.seeds[0].initial_nrmse());
}

#[test]
fn bands_bracket_median() {
    let p = sine_quadratic();
    let cfg = quick_experiment(&p, vec![6, 3], Stopping::Budget { budget: 12.0 }, vec![0, 1, 2]);
    let r = run_experiment(&p, &cfg).unwrap();
    for b in &r.curve {
        assert!(b.q05 <= b.median && b.median <= b.q95);
    }
}

#[test]
fn parallel_seeds_match_sequential() {
    let p = sine_quadratic();
    let mut cfg = quick_experiment(&p, vec![6, 3], Stopping::Iterations { iterations: 3 }, vec![0, 1]);
    let a = run_experiment(&p, &cfg).unwrap();
    cfg.seed_execution = Execution::Parallel;
    cfg.sampler.execution = Execution::Parallel;
    cfg.sampler.search.execution = Execution::Parallel;
    let b = run_experiment(&p, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn result_files_are_reproducible() {
    let p = sine_quadratic();
    let cfg = quick_experiment(&p, vec![6, 3], Stopping::Iterations { iterations: 3 }, vec![7, 8]);
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let r = run_experiment(&p, &cfg).unwrap();
        write_experiment(d.path(), &r, 2, &cfg).unwrap();
    }
    for name in ["runlog_7.csv", "runlog_8.csv", "summary.json", "curve.csv", "level_counts.csv"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{name} differs");
    }
    let csv = std::fs::read_to_string(dirs[0].path().join("runlog_7.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 1 + 3);
}

#[test]
fn sweep_single_ratio_bounds() {
    let p = sine_quadratic();
    let cfg = quick_experiment(&p, vec![6, 3], Stopping::Iterations { iterations: 1 }, vec![0]);
    let rows = cost_ratio_sweep(&p, &cfg, &[1.0], 5).unwrap();
    assert_eq!(rows.len(), 1);
    assert!((0.0..=5.0).contains(&rows[0].top_level_count.median));
    assert!(cost_ratio_sweep(&p, &cfg, &[], 5).is_err());
    assert!(cost_ratio_sweep(&p, &cfg, &[0.5], 5).is_err());
}

#[test]
fn single_vs_multi_shares_checkpoints() {
    let p = sine_quadratic();
    let cfg = quick_experiment(&p, vec![6, 3], Stopping::Budget { budget: 20.0 }, vec![0, 1]);
    let c = single_vs_multi_comparison(&p, &cfg).unwrap();
    assert_eq!(c.points.first().unwrap().cost, 0.0);
    assert_eq!(c.points.last().unwrap().cost, 20.0);
    let start = &c.points[0];
    assert_eq!(start.multi_median, mlas_core::metrics::median(&c.multi.initial_nrmse()));
    assert!(c.multi.seeds.iter().all(|s| s.log.total_cost() <= 20.0 + 1e-9));
}

#[test]
fn batch_comparison_runs_both_arms() {
    let p = sine_quadratic();
    let cfg = quick_experiment(&p, vec![6, 3], Stopping::Budget { budget: 15.0 }, vec![0]);
    let b = batch_vs_sequential(&p, &cfg, 3, BatchMode::Mixed).unwrap();
    assert!(b.sequential.seeds[0].log.records.iter().all(|r| r.round == r.iteration));
    assert!(b.batch.seeds[0].log.records.len() >= 2);
    assert!(b.final_median_gap().is_finite());
    let curves = b.curves(1.0);
    assert!(curves.iter().all(|(s, t)| s.cost == t.cost));
}
