mod common;

use common::*;
use mlas_core::sampler::{self, batch_mixed, batch_same_level, cost_weight, level_proposals, propose, RunLog, TestSet};
use mlas_core::{BatchMode, Error, Result, Simulator, Stopping};

fn grid_test_set(problem: &mlas_core::TestProblem) -> TestSet {
    TestSet::new(mlas_core::metrics::test_grid(2, 12), |x| problem.truth(x))
}

fn assert_cost_accounting(log: &RunLog, costs: &[f64]) {
    let mut cum = 0.0;
    for r in &log.records {
        assert_eq!(r.cost_step, cost_weight(costs, r.level));
        cum += r.cost_step;
        assert!((r.cost_cum - cum).abs() < 1e-9);
    }
    let by_level: f64 = log.level_counts().iter().enumerate().map(|(i, &n)| n as f64 * cost_weight(costs, i + 1)).sum();
    assert!((log.total_cost() - by_level).abs() < 1e-9);
}

fn assert_no_duplicates(em: &mlas_core::MultiLevelEmulator) {
    for l in em.levels() {
        for (i, a) in l.x.iter().enumerate() {
            for b in &l.x[..i] {
                assert_ne!(a, b, "duplicate design point at level {}", l.level);
            }
        }
    }
}

#[test]
fn propose_matches_best_weighted_level() {
    let p = sine_quadratic();
    let em = emulator(&p, &[6, 3], 11);
    let cfg = quick_sampler(Stopping::Iterations { iterations: 1 });
    let pick = propose(&em, &cfg, 5).unwrap();
    let all = level_proposals(&em, &cfg, 5).unwrap();
    assert_eq!(all.len(), 2);
    let best = all.iter().map(|q| q.weighted_pei).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(pick.weighted_pei, best);
    assert_eq!(pick.cost_charged, cost_weight(em.costs(), pick.level));
    assert!((pick.weighted_pei - pick.raw_pei / pick.cost_charged).abs() < 1e-15);
}

#[test]
fn single_point_batches_equal_propose() {
    let p = three_level();
    let em = emulator(&p, &[6, 3, 2], 4);
    let cfg = quick_sampler(Stopping::Iterations { iterations: 1 });
    let single = propose(&em, &cfg, 9).unwrap();
    assert_eq!(batch_same_level(&em, &cfg, 1, 9).unwrap(), vec![single.clone()]);
    assert_eq!(batch_mixed(&em, &cfg, 1, 9).unwrap(), vec![single]);
}

#[test]
fn same_level_batch_is_distinct_and_single_level() {
    let p = sine_quadratic();
    let em = emulator(&p, &[6, 3], 2);
    let cfg = quick_sampler(Stopping::Iterations { iterations: 1 });
    let batch = batch_same_level(&em, &cfg, 4, 1).unwrap();
    assert_eq!(batch.len(), 4);
    assert!(batch.iter().all(|b| b.level == batch[0].level));
    for (i, a) in batch.iter().enumerate() {
        for b in &batch[..i] {
            assert_ne!(a.x, b.x);
        }
        assert!(!em.level(a.level).unwrap().x.contains(&a.x));
    }
}

#[test]
fn mixed_batch_costs_add_up() {
    let p = sine_quadratic();
    let em = emulator(&p, &[6, 3], 8);
    let cfg = quick_sampler(Stopping::Iterations { iterations: 1 });
    let batch = batch_mixed(&em, &cfg, 5, 3).unwrap();
    assert_eq!(batch.len(), 5);
    let total: f64 = batch.iter().map(|b| b.cost_charged).sum();
    let expected: f64 = batch.iter().map(|b| cost_weight(em.costs(), b.level)).sum();
    assert_eq!(total, expected);
}

#[test]
fn budget_run_accounts_costs_and_stops() {
    let p = sine_quadratic();
    let mut em = emulator(&p, &[6, 3], 21);
    let mut cfg = quick_sampler(Stopping::Budget { budget: 30.0 });
    cfg.exploration_interval = 4;
    let log = sampler::run(&mut em, &cfg, &p, None).unwrap();
    assert_cost_accounting(&log, em.costs());
    assert!(log.total_cost() <= 30.0 + 1e-9);
    assert!(30.0 - log.total_cost() < em.costs()[0]);
    assert_no_duplicates(&em);
    assert_eq!(log.initial_nrmse, None);
}

#[test]
fn budget_below_cheapest_step_is_rejected() {
    let p = sine_quadratic();
    let mut em = emulator(&p, &[6, 3], 1);
    let cfg = quick_sampler(Stopping::Budget { budget: 0.5 });
    assert!(matches!(sampler::run(&mut em, &cfg, &p, None), Err(Error::BudgetTooSmall { .. })));
}

#[test]
fn exploration_round_robin_over_upper_levels() {
    let p = three_level();
    let mut em = emulator(&p, &[6, 3, 2], 6);
    let mut cfg = quick_sampler(Stopping::Iterations { iterations: 9 });
    cfg.exploration_interval = 3;
    let log = sampler::run(&mut em, &cfg, &p, None).unwrap();
    let explored: Vec<usize> = log.records.iter().filter(|r| r.exploration).map(|r| r.level).collect();
    assert_eq!(explored, vec![2, 3, 2]);
    assert!(log.records.iter().filter(|r| r.exploration).all(|r| r.raw_pei == 0.0));
    assert_cost_accounting(&log, em.costs());
    assert_no_duplicates(&em);
}

#[test]
fn exploration_disabled_means_no_flags() {
    let p = sine_quadratic();
    let mut em = emulator(&p, &[6, 3], 6);
    let mut cfg = quick_sampler(Stopping::Iterations { iterations: 6 });
    cfg.exploration_interval = 0;
    let log = sampler::run(&mut em, &cfg, &p, None).unwrap();
    assert_eq!(log.records.len(), 6);
    assert!(log.records.iter().all(|r| !r.exploration));
}

#[test]
fn batch_runs_with_unit_size_reproduce_sequential_log() {
    let p = sine_quadratic();
    let ts = grid_test_set(&p);
    let mut cfg = quick_sampler(Stopping::Iterations { iterations: 5 });
    cfg.exploration_interval = 3;
    let run_with = |mode| {
        let mut c = cfg.clone();
        c.batch_mode = mode;
        let mut em = emulator(&p, &[6, 3], 17);
        sampler::run(&mut em, &c, &p, Some(&ts)).unwrap()
    };
    let seq = run_with(BatchMode::Sequential);
    assert_eq!(run_with(BatchMode::SameLevel), seq);
    assert_eq!(run_with(BatchMode::Mixed), seq);
}

#[test]
fn batch_run_records_share_rounds() {
    let p = sine_quadratic();
    let mut em = emulator(&p, &[6, 3], 5);
    let mut cfg = quick_sampler(Stopping::Iterations { iterations: 7 });
    cfg.batch_size = 3;
    cfg.batch_mode = BatchMode::SameLevel;
    cfg.exploration_interval = 0;
    let log = sampler::run(&mut em, &cfg, &p, None).unwrap();
    assert_eq!(log.records.len(), 7);
    let rounds: Vec<usize> = log.records.iter().map(|r| r.round).collect();
    assert_eq!(rounds, vec![1, 1, 1, 2, 2, 2, 3]);
    assert_no_duplicates(&em);
}

#[test]
fn nrmse_threshold_stops_early() {
    let p = sine_quadratic();
    let ts = grid_test_set(&p);
    let mut em = emulator(&p, &[6, 3], 3);
    let cfg = quick_sampler(Stopping::NrmseThreshold { target: 10.0, max_iterations: 20 });
    let log = sampler::run(&mut em, &cfg, &p, Some(&ts)).unwrap();
    assert!(log.records.is_empty());
    let cfg = quick_sampler(Stopping::NrmseThreshold { target: 1e-9, max_iterations: 3 });
    let log = sampler::run(&mut em, &cfg, &p, Some(&ts)).unwrap();
    assert_eq!(log.records.len(), 3);
}

struct Failing<'a>(&'a mlas_core::TestProblem);

impl Simulator for Failing<'_> {
    fn levels(&self) -> usize {
        self.0.num_levels()
    }
    fn dim(&self) -> usize {
        self.0.dim
    }
    fn evaluate(&self, level: usize, _x: &[f64]) -> Result<f64> {
        Err(Error::Simulator { level, message: "solver diverged".into() })
    }
}

#[test]
fn simulator_failure_leaves_state_untouched() {
    let p = sine_quadratic();
    let mut em = emulator(&p, &[6, 3], 12);
    let before = em.levels().to_vec();
    let cfg = quick_sampler(Stopping::Iterations { iterations: 3 });
    let mut log = RunLog::new(2);
    let err = sampler::step(&mut em, &cfg, &mut log, &Failing(&p), None).unwrap_err();
    assert!(matches!(err, Error::Simulator { .. }));
    assert_eq!(em.levels(), &before[..]);
    assert!(log.records.is_empty());
    let err = sampler::run(&mut em, &cfg, &Failing(&p), None).unwrap_err();
    assert!(err.to_string().starts_with("iteration 1:"), "{err}");
}

#[test]
fn runs_are_deterministic() {
    let p = sine_quadratic();
    let ts = grid_test_set(&p);
    let cfg = quick_sampler(Stopping::Iterations { iterations: 4 });
    let go = || {
        let mut em = emulator(&p, &[6, 3], 40);
        sampler::run(&mut em, &cfg, &p, Some(&ts)).unwrap()
    };
    assert_eq!(go(), go());
}
