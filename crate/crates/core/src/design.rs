//! Initial designs: maximin Latin hypercubes for level 1, single-level
//! ES-LOO picks for the upper levels.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::emulator::LevelInput;
use crate::error::{Error, Result};
use crate::esloo::{self, SearchOptions, SurfaceOptions};
use crate::gp::{self, FitOptions, MeanMode};
use crate::problems::Simulator;
use crate::seed;

pub const DEFAULT_LHC_RESTARTS: usize = 100;

pub fn min_pairwise_distance(pts: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in 0..i {
            let d: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d);
        }
    }
    best.sqrt()
}

fn random_lhc(n: usize, p: usize, rng: &mut seed::Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; p]; n];
    for d in 0..p {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        for (pt, bin) in pts.iter_mut().zip(perm) {
            pt[d] = (bin as f64 + rng.gen::<f64>()) / n as f64;
        }
    }
    pts
}

/// Best of `restarts` random Latin hypercubes by minimum pairwise distance.
pub fn maximin_lhc(n: usize, p: usize, seed: u64, restarts: usize) -> Result<Vec<Vec<f64>>> {
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: n });
    }
    let mut rng = seed::rng(seed);
    let mut best = random_lhc(n, p, &mut rng);
    let mut best_d = min_pairwise_distance(&best);
    for _ in 1..restarts.max(1) {
        let cand = random_lhc(n, p, &mut rng);
        let d = min_pairwise_distance(&cand);
        if d > best_d {
            best = cand;
            best_d = d;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignOptions {
    pub lhc_restarts: usize,
    pub fit: FitOptions,
    pub nugget: f64,
    pub surface: SurfaceOptions,
    pub search: SearchOptions,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            lhc_restarts: DEFAULT_LHC_RESTARTS,
            fit: FitOptions::default(),
            nugget: gp::DEFAULT_NUGGET,
            surface: SurfaceOptions::default(),
            search: SearchOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDesign {
    pub levels: Vec<LevelInput>,
    /// Cost of every simulator run made to build the design.
    pub setup_cost: f64,
}

/// Level 1: maximin LHC of `sizes[0]` points. Level `l > 1`: `sizes[l-1]`
/// sequential single-level PEI picks on a GP of level `l-1`'s outputs, with
/// each pick added to the repulsion set (no new lower-level runs feed that
/// GP). Both `f^(l)` and `f^(l-1)` are then run at the picks.
pub fn initial_designs(
    sim: &dyn Simulator,
    sizes: &[usize],
    costs: &[f64],
    seed_: u64,
    opts: &DesignOptions,
) -> Result<InitialDesign> {
    let nl = sim.levels();
    if sizes.len() != nl || costs.len() != nl {
        return Err(Error::InvalidConfig(format!("initial: expected {nl} level sizes and costs")));
    }
    if sizes[0] < 2 {
        return Err(Error::InvalidConfig("initial: level 1 needs at least 2 points".into()));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidConfig("initial: every level needs at least 1 point".into()));
    }
    let p = sim.dim();
    let x1 = maximin_lhc(sizes[0], p, seed::derive(seed_, &[1, 0]), opts.lhc_restarts)?;
    let y1 = x1.iter().map(|x| sim.evaluate(1, x)).collect::<Result<Vec<_>>>()?;
    let mut setup_cost = costs[0] * sizes[0] as f64;
    let mut levels = vec![LevelInput { x: x1, y: y1, y_low: None }];
    for l in 2..=nl {
        let n = sizes[l - 1];
        let below = &levels[l - 2];
        let picks = if below.x.len() >= 2 {
            let fit_seed = seed::derive(seed_, &[l as u64, 1]);
            let lower = vec![0.0; p];
            let g = gp::fit_gp(&below.x, &below.y, MeanMode::Constant, &lower, opts.nugget, fit_seed, &opts.fit)?;
            let pool: Vec<Vec<f64>> = levels.iter().flat_map(|li| li.x.iter().cloned()).collect();
            let mut surface =
                esloo::build_single_level_surface(&g, &pool, &opts.surface, seed::derive(seed_, &[l as u64, 2]))?;
            let mut picks: Vec<Vec<f64>> = Vec::with_capacity(n);
            for k in 0..n {
                let (x, _) = surface.maximize_pei(&opts.search, seed::derive(seed_, &[l as u64, 3, k as u64]));
                surface.add_repulsion_point(x.clone());
                picks.push(x);
            }
            picks
        } else if n >= 2 {
            maximin_lhc(n, p, seed::derive(seed_, &[l as u64, 0]), opts.lhc_restarts)?
        } else {
            let mut rng = seed::rng(seed::derive(seed_, &[l as u64, 4]));
            vec![(0..p).map(|_| rng.gen::<f64>()).collect()]
        };
        let y = picks.iter().map(|x| sim.evaluate(l, x)).collect::<Result<Vec<_>>>()?;
        let y_low = picks.iter().map(|x| sim.evaluate(l - 1, x)).collect::<Result<Vec<_>>>()?;
        setup_cost += (costs[l - 2] + costs[l - 1]) * n as f64;
        levels.push(LevelInput { x: picks, y, y_low: Some(y_low) });
    }
    Ok(InitialDesign { levels, setup_cost })
}
