//! Expected-squared leave-one-out (ES-LOO) error surfaces and the pseudo
//! expected improvement (PEI) acquisition.
//!
//! For each level `l`, a leave-one-out pass on that level's GP is propagated
//! to the top level of the emulator, giving a Normal error `N(M, V)` at every
//! level-`l` design point. The normalized value
//! `E[e^2] / sqrt(Var[e^2]) = (V + M^2) / sqrt(2 V^2 + 4 V M^2)` is then
//! interpolated by a GP whose expected improvement, times a repulsion factor
//! over design and pseudo points, is the acquisition.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::emulator::MultiLevelEmulator;
use crate::error::{Error, Result};
use crate::gp::{self, FitOptions, GaussianProcess, MeanMode};
use crate::lowdisc;
use crate::optim::{self, NelderMeadOptions};
use crate::par::Execution;

/// Lower bound on ES-LOO surface lengthscales: `sqrt(-0.5 / ln 1e-8)`, the
/// lengthscale at which points one unit apart correlate at 1e-8.
pub fn esloo_lengthscale_floor() -> f64 {
    (-0.5 / 1e-8f64.ln()).sqrt()
}

/// Variance floor applied inside [`esloo_value`].
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub mean: f64,
    pub variance: f64,
}

/// Normalized expected squared error `(V + M^2) / sqrt(2 V^2 + 4 V M^2)`.
///
/// `V` is floored at [`VARIANCE_FLOOR`]; exactly zero mean and variance is an
/// error.
pub fn esloo_value(d: ErrorDistribution) -> Result<f64> {
    if d.variance == 0.0 && d.mean == 0.0 {
        return Err(Error::DegenerateError);
    }
    if !d.mean.is_finite() || !d.variance.is_finite() || d.variance < 0.0 {
        return Err(Error::NonFinite { what: "error distribution" });
    }
    let v = d.variance.max(VARIANCE_FLOOR);
    let m2 = d.mean * d.mean;
    Ok((v + m2) / (2.0 * v * v + 4.0 * v * m2).sqrt())
}

/// Top-level error distributions induced by leave-one-out on `level`, one
/// per design point of that level.
///
/// `weights` are the level weights `P_1..P_L` matching `gps`. Level 1 uses
/// the LOO error of the level-1 GP plus the zero-mean predictions of every
/// discrepancy GP; level `l > 1` uses the LOO error of its own discrepancy GP
/// plus zero-mean predictions of all the others (level 1 included). With a
/// single GP and weight 1 this is the plain single-level LOO error.
pub fn error_distributions(gps: &[GaussianProcess], weights: &[f64], level: usize) -> Result<Vec<ErrorDistribution>> {
    if gps.len() != weights.len() {
        return Err(Error::LengthMismatch { left: gps.len(), right: weights.len() });
    }
    if level == 0 || level > gps.len() {
        return Err(Error::InvalidLevel { level, levels: gps.len() });
    }
    let own = &gps[level - 1];
    let loo = own.loo_predictions()?;
    let w_own = weights[level - 1];
    own.inputs()
        .iter()
        .zip(own.targets())
        .zip(&loo)
        .map(|((xi, yi), pred)| {
            let mut mean = w_own * (pred.mean - yi);
            let mut variance = w_own * w_own * pred.variance;
            for (j, (gp, w)) in gps.iter().zip(weights).enumerate() {
                if j == level - 1 {
                    continue;
                }
                let e = gp.zero_mean_posterior(xi)?;
                mean += w * e.mean;
                variance += w * w * e.variance;
            }
            Ok(ErrorDistribution { mean, variance })
        })
        .collect()
}

/// Error distribution at level-1 design point `i` (0-based).
pub fn error_distribution_level1(em: &MultiLevelEmulator, i: usize) -> Result<ErrorDistribution> {
    let n = em.levels()[0].len();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    Ok(error_distributions(em.gps(), em.weights(), 1)?[i])
}

/// Error distribution at design point `i` (0-based) of level `level >= 2`.
pub fn error_distribution_levell(em: &MultiLevelEmulator, level: usize, i: usize) -> Result<ErrorDistribution> {
    if level < 2 || level > em.num_levels() {
        return Err(Error::InvalidLevel { level, levels: em.num_levels() });
    }
    let n = em.levels()[level - 1].len();
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    Ok(error_distributions(em.gps(), em.weights(), level)?[i])
}

/// Corners of `[0,1]^p` plus, for each of the `2p` faces, the projection onto
/// that face of the design point nearest to it (lowest index on ties).
/// Exact duplicates are dropped, keeping the first occurrence.
pub fn pseudo_points(design: &[Vec<f64>], p: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity((1 << p) + 2 * p);
    for mask in 0..(1usize << p) {
        out.push((0..p).map(|d| ((mask >> d) & 1) as f64).collect());
    }
    if !design.is_empty() {
        for d in 0..p {
            let mut lo = 0;
            let mut hi = 0;
            for (k, x) in design.iter().enumerate() {
                if x[d] < design[lo][d] {
                    lo = k;
                }
                if x[d] > design[hi][d] {
                    hi = k;
                }
            }
            let mut a = design[lo].clone();
            a[d] = 0.0;
            let mut b = design[hi].clone();
            b[d] = 1.0;
            out.push(a);
            out.push(b);
        }
    }
    let mut uniq: Vec<Vec<f64>> = Vec::with_capacity(out.len());
    for pt in out {
        if !uniq.contains(&pt) {
            uniq.push(pt);
        }
    }
    uniq
}

/// Two-branch expected improvement over `best` of a Normal with the given
/// mean and standard deviation.
pub fn expected_improvement_value(mean: f64, sd: f64, best: f64) -> f64 {
    if !(sd > 0.0) {
        return 0.0;
    }
    let diff = mean - best;
    let u = diff / sd;
    let cdf = 0.5 * erfc(-u / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (diff * cdf + sd * pdf).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceOptions {
    /// Prior mean of the ES-LOO surface GP.
    pub mean_mode: MeanMode,
    /// Fit the surface to `ln E` instead of `E`.
    pub log_transform: bool,
    pub lengthscale_floor: f64,
    pub nugget: f64,
    pub fit: FitOptions,
    /// Additional user-supplied pseudo points.
    pub extra_pseudo_points: Vec<Vec<f64>>,
}

impl Default for SurfaceOptions {
    fn default() -> Self {
        Self {
            mean_mode: MeanMode::Constant,
            log_transform: false,
            lengthscale_floor: esloo_lengthscale_floor(),
            nugget: gp::DEFAULT_NUGGET,
            fit: FitOptions::default(),
            extra_pseudo_points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    /// Candidate count is this times the input dimension.
    pub candidates_per_dim: usize,
    /// Number of best candidates refined by local search.
    pub n_refine: usize,
    pub refine_evals: usize,
    pub execution: Execution,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            candidates_per_dim: 500,
            n_refine: 5,
            refine_evals: 150,
            execution: Execution::Sequential,
        }
    }
}

/// GP model of the ES-LOO values of one level, plus the repulsion set.
#[derive(Debug, Clone)]
pub struct EsLooSurface {
    level: usize,
    gp: GaussianProcess,
    targets: Vec<f64>,
    y_max: f64,
    design_points: Vec<Vec<f64>>,
    pseudo_points: Vec<Vec<f64>>,
}

impl EsLooSurface {
    /// Fit a surface to ES-LOO values `values` at `design`. The repulsion set
    /// is `design` plus `pseudo`.
    pub fn fit(
        level: usize,
        design: Vec<Vec<f64>>,
        values: Vec<f64>,
        pseudo: Vec<Vec<f64>>,
        opts: &SurfaceOptions,
        seed: u64,
    ) -> Result<Self> {
        let p = design.first().map_or(0, |x| x.len());
        let targets: Vec<f64> = if opts.log_transform {
            values.iter().map(|v| v.ln()).collect()
        } else {
            values
        };
        let floor = vec![opts.lengthscale_floor; p];
        let gp = gp::fit_gp(&design, &targets, opts.mean_mode, &floor, opts.nugget, seed, &opts.fit)?;
        let y_max = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { level, gp, targets, y_max, design_points: design, pseudo_points: pseudo })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn gp(&self) -> &GaussianProcess {
        &self.gp
    }

    /// Training ES-LOO values (log scale if the surface was log-transformed).
    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn design_points(&self) -> &[Vec<f64>] {
        &self.design_points
    }

    pub fn pseudo_points(&self) -> &[Vec<f64>] {
        &self.pseudo_points
    }

    pub fn dim(&self) -> usize {
        self.gp.dim()
    }

    /// Add a point to the repulsion set without refitting the surface.
    pub fn add_repulsion_point(&mut self, x: Vec<f64>) {
        self.design_points.push(x);
    }

    pub fn expected_improvement(&self, x: &[f64]) -> f64 {
        let post = self.gp.posterior_unchecked(x);
        expected_improvement_value(post.mean, post.sd(), self.y_max)
    }

    /// `prod (1 - corr(x, x_i))` over design and pseudo points.
    pub fn repulsion(&self, x: &[f64]) -> f64 {
        let k = self.gp.kernel();
        let mut rf = 1.0;
        for xi in self.design_points.iter().chain(&self.pseudo_points) {
            rf *= 1.0 - k.correlation_unchecked(x, xi);
            if rf == 0.0 {
                break;
            }
        }
        rf.clamp(0.0, 1.0)
    }

    pub fn pei(&self, x: &[f64]) -> f64 {
        let rf = self.repulsion(x);
        if rf == 0.0 {
            return 0.0;
        }
        self.expected_improvement(x) * rf
    }

    /// Multi-start maximization of PEI over `[0,1]^p`: score a shifted
    /// Halton candidate set, then refine the best few by bounded
    /// Nelder-Mead. Ties resolve to the earliest candidate.
    pub fn maximize_pei(&self, opts: &SearchOptions, seed: u64) -> (Vec<f64>, f64) {
        let p = self.dim();
        let n = (opts.candidates_per_dim * p).max(1);
        let candidates = lowdisc::shifted_halton(n, p, seed);
        let scores = opts.execution.map(&candidates, |c| self.pei(c));

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut best_x = candidates[order[0]].clone();
        let mut best_v = scores[order[0]];

        let starts: Vec<usize> = order.iter().copied().take(opts.n_refine).filter(|&i| scores[i] > 0.0).collect();
        let lower = vec![0.0; p];
        let upper = vec![1.0; p];
        let nm = NelderMeadOptions { max_evals: opts.refine_evals, ftol: 1e-12, initial_step: 0.02 };
        let refined = opts.execution.map(&starts, |&i| {
            optim::minimize(|x| -self.pei(x), &candidates[i], &lower, &upper, nm)
        });
        for m in refined {
            if -m.value > best_v {
                best_v = -m.value;
                best_x = m.x;
            }
        }
        (best_x, best_v)
    }
}

/// Build the ES-LOO surface for `level` of the emulator.
pub fn build_surface(em: &MultiLevelEmulator, level: usize, opts: &SurfaceOptions, seed: u64) -> Result<EsLooSurface> {
    if level == 0 || level > em.num_levels() {
        return Err(Error::InvalidLevel { level, levels: em.num_levels() });
    }
    let data = &em.levels()[level - 1];
    if data.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: data.len() });
    }
    let values = error_distributions(em.gps(), em.weights(), level)?
        .into_iter()
        .map(esloo_value)
        .collect::<Result<Vec<_>>>()?;
    let mut pseudo = pseudo_points(&em.all_design_points(), em.dim());
    pseudo.extend(opts.extra_pseudo_points.iter().cloned());
    EsLooSurface::fit(level, data.x.clone(), values, pseudo, opts, seed)
}

/// Single-level ES-LOO surface for a plain GP; `pool` supplies the points the
/// face pseudo points are projected from.
pub fn build_single_level_surface(
    gp: &GaussianProcess,
    pool: &[Vec<f64>],
    opts: &SurfaceOptions,
    seed: u64,
) -> Result<EsLooSurface> {
    let values = error_distributions(std::slice::from_ref(gp), &[1.0], 1)?
        .into_iter()
        .map(esloo_value)
        .collect::<Result<Vec<_>>>()?;
    let mut pseudo = pseudo_points(pool, gp.dim());
    pseudo.extend(opts.extra_pseudo_points.iter().cloned());
    EsLooSurface::fit(1, gp.inputs().to_vec(), values, pseudo, opts, seed)
}
