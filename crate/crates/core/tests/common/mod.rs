#![allow(dead_code)]

use mlas_core::design::{self, DesignOptions};
use mlas_core::experiment::ExperimentConfig;
use mlas_core::problems::{find_problem, TestProblem};
use mlas_core::{FitOptions, MultiLevelEmulator, SamplerConfig, SearchOptions, Stopping, SurfaceOptions};

pub fn quick_fit() -> FitOptions {
    FitOptions { n_starts: 3, max_evals: 120, ftol: 1e-8 }
}

pub fn quick_search() -> SearchOptions {
    SearchOptions { candidates_per_dim: 100, n_refine: 2, refine_evals: 40, ..Default::default() }
}

pub fn quick_surface() -> SurfaceOptions {
    SurfaceOptions { fit: quick_fit(), ..Default::default() }
}

pub fn quick_design() -> DesignOptions {
    DesignOptions { lhc_restarts: 10, fit: quick_fit(), surface: quick_surface(), search: quick_search(), ..Default::default() }
}

pub fn quick_sampler(stopping: Stopping) -> SamplerConfig {
    let mut s = SamplerConfig::new(stopping);
    s.surface = quick_surface();
    s.search = quick_search();
    s
}

pub fn quick_experiment(problem: &TestProblem, sizes: Vec<usize>, stopping: Stopping, seeds: Vec<u64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(problem, sizes, stopping, seeds);
    cfg.emulator.fit = quick_fit();
    cfg.sampler = quick_sampler(stopping);
    cfg.design = quick_design();
    cfg.grid_per_axis = 15;
    cfg
}

pub fn sine_quadratic() -> TestProblem {
    find_problem("sine-quadratic-2d").unwrap()
}

pub fn three_level() -> TestProblem {
    find_problem("sine-quadratic-3level-2d").unwrap()
}

/// An emulator built from the standard initial design recipe.
pub fn emulator(problem: &TestProblem, sizes: &[usize], seed: u64) -> MultiLevelEmulator {
    let init = design::initial_designs(problem, sizes, &problem.default_costs, seed, &quick_design()).unwrap();
    let mut cfg = mlas_core::EmulatorConfig::new(problem.default_costs.clone());
    cfg.fit = quick_fit();
    cfg.seed = seed;
    MultiLevelEmulator::new(cfg, init.levels).unwrap()
}
