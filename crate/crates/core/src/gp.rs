//! Gaussian-process regression with a squared-exponential kernel.
//!
//! Hyperparameters (log-lengthscales and log-variance) are fitted by
//! multi-start bounded Nelder-Mead on the log marginal likelihood. With
//! [`MeanMode::Constant`] the constant mean is profiled out by generalized
//! least squares at every likelihood evaluation.
//!
//! A fitted [`GaussianProcess`] is immutable; it caches the Cholesky factor of
//! `K + nugget * I` and the weight vectors needed for posterior and exact
//! leave-one-out queries.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::optim::{self, NelderMeadOptions};
use crate::seed;

pub const DEFAULT_NUGGET: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MeanMode {
    Zero,
    #[default]
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub mean: f64,
    pub variance: f64,
}

impl PosteriorSummary {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub n_starts: usize,
    pub max_evals: usize,
    pub ftol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_starts: 10,
            max_evals: 200,
            ftol: 1e-9,
        }
    }
}

/// Record of the hyperparameter search, in the optimizer's coordinates
/// (log-lengthscales followed by log-variance).
#[derive(Debug, Clone)]
pub struct FitReport {
    pub starts: Vec<Vec<f64>>,
    pub start_log_likelihoods: Vec<f64>,
    pub best_log_likelihood: f64,
}

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    mean_mode: MeanMode,
    mean_constant: f64,
    kernel: KernelSpec,
    nugget: f64,
    /// Row-major lower Cholesky factor of `K + nugget * I`.
    chol_rows: Vec<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// `K^-1 (y - m)`.
    alpha: Vec<f64>,
    /// `K^-1 y`, the weights of the zero-mean variant.
    alpha_zero: Vec<f64>,
    log_likelihood: f64,
}

fn check_inputs(x: &[Vec<f64>], y: &[f64], min_points: usize) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < min_points {
        return Err(Error::TooFewPoints { needed: min_points, got: x.len() });
    }
    let p = x[0].len();
    for row in x {
        if row.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: row.len() });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "inputs" });
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "targets" });
    }
    for j in 1..x.len() {
        if x[..j].iter().any(|r| r == &x[j]) {
            return Err(Error::DuplicateInput { index: j });
        }
    }
    Ok(p)
}

fn covariance(x: &[Vec<f64>], kernel: &KernelSpec, nugget: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = kernel.variance + nugget;
        for j in 0..i {
            let v = kernel.eval_unchecked(&x[i], &x[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Generalized least-squares constant mean: `(1' K^-1 y) / (1' K^-1 1)`.
fn gls_constant(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>, y: &DVector<f64>) -> f64 {
    let ones = DVector::from_element(y.len(), 1.0);
    let kinv_one = chol.solve(&ones);
    kinv_one.dot(y) / kinv_one.sum()
}

fn log_likelihood_from(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>, resid: &DVector<f64>) -> f64 {
    let l = chol.l_dirty();
    let z = l.solve_lower_triangular(resid).expect("cholesky factor has nonzero diagonal");
    let n = resid.len();
    let log_det: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    -0.5 * z.dot(&z) - log_det - 0.5 * n as f64 * LN_2PI
}

/// Squared coordinate differences for every pair `i > j`, per dimension.
struct PairTable {
    n: usize,
    p: usize,
    sq: Vec<f64>,
}

impl PairTable {
    fn new(x: &[Vec<f64>]) -> Self {
        let n = x.len();
        let p = x[0].len();
        let mut sq = Vec::with_capacity(n * (n - 1) / 2 * p);
        for i in 0..n {
            for j in 0..i {
                for d in 0..p {
                    let t = x[i][d] - x[j][d];
                    sq.push(t * t);
                }
            }
        }
        Self { n, p, sq }
    }

    fn covariance(&self, inv_two_l2: &[f64], variance: f64, nugget: f64) -> DMatrix<f64> {
        let n = self.n;
        let mut k = DMatrix::zeros(n, n);
        let mut idx = 0;
        for i in 0..n {
            k[(i, i)] = variance + nugget;
            for j in 0..i {
                let mut s = 0.0;
                for d in 0..self.p {
                    s += self.sq[idx + d] * inv_two_l2[d];
                }
                idx += self.p;
                let v = variance * (-s).exp();
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

/// Log marginal likelihood at fixed hyperparameters, with the constant mean
/// profiled out when `mean_mode` is constant. `None` when the covariance is
/// not positive definite.
pub fn log_marginal_likelihood(
    x: &[Vec<f64>],
    y: &[f64],
    mean_mode: MeanMode,
    kernel: &KernelSpec,
    nugget: f64,
) -> Option<f64> {
    let chol = covariance(x, kernel, nugget).cholesky()?;
    let yv = DVector::from_column_slice(y);
    let m = match mean_mode {
        MeanMode::Zero => 0.0,
        MeanMode::Constant => gls_constant(&chol, &yv),
    };
    Some(log_likelihood_from(&chol, &yv.add_scalar(-m)))
}

fn data_scale(y: &[f64], mean_mode: MeanMode) -> f64 {
    let n = y.len() as f64;
    let v = match mean_mode {
        MeanMode::Zero => y.iter().map(|v| v * v).sum::<f64>() / n,
        MeanMode::Constant => {
            let mu = y.iter().sum::<f64>() / n;
            y.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n
        }
    };
    v.max(1e-12)
}

/// Fit a GP by maximizing the log marginal likelihood.
///
/// `lengthscale_lower_bounds` has one entry per input dimension (0 means
/// unbounded); the search box is `log l in [log(max(lb, 0.01)), log 10]` and
/// `log var` within 4 nats of the data variance.
pub fn fit_gp(
    x: &[Vec<f64>],
    y: &[f64],
    mean_mode: MeanMode,
    lengthscale_lower_bounds: &[f64],
    nugget: f64,
    seed: u64,
    opts: &FitOptions,
) -> Result<GaussianProcess> {
    fit_gp_with_report(x, y, mean_mode, lengthscale_lower_bounds, nugget, seed, opts).map(|(gp, _)| gp)
}

pub fn fit_gp_with_report(
    x: &[Vec<f64>],
    y: &[f64],
    mean_mode: MeanMode,
    lengthscale_lower_bounds: &[f64],
    nugget: f64,
    seed: u64,
    opts: &FitOptions,
) -> Result<(GaussianProcess, FitReport)> {
    let p = check_inputs(x, y, 2)?;
    if lengthscale_lower_bounds.len() != p {
        return Err(Error::DimensionMismatch { expected: p, got: lengthscale_lower_bounds.len() });
    }
    if !(nugget >= 0.0) {
        return Err(Error::InvalidConfig(format!("nugget must be nonnegative, got {nugget}")));
    }

    let log_v0 = data_scale(y, mean_mode).ln();
    let mut lower: Vec<f64> = lengthscale_lower_bounds.iter().map(|&lb| lb.max(0.01).ln()).collect();
    let mut upper: Vec<f64> = vec![10f64.ln(); p];
    for (lo, hi) in lower.iter_mut().zip(upper.iter_mut()) {
        if *lo > *hi {
            *hi = *lo;
        }
    }
    lower.push(log_v0 - 4.0);
    upper.push(log_v0 + 4.0);

    let table = PairTable::new(x);
    let yv = DVector::from_column_slice(y);
    let neg_lml = |theta: &[f64]| -> f64 {
        let inv_two_l2: Vec<f64> = theta[..p].iter().map(|t| 0.5 * (-2.0 * t).exp()).collect();
        let k = table.covariance(&inv_two_l2, theta[p].exp(), nugget);
        let Some(chol) = k.cholesky() else {
            return f64::INFINITY;
        };
        let m = match mean_mode {
            MeanMode::Zero => 0.0,
            MeanMode::Constant => gls_constant(&chol, &yv),
        };
        -log_likelihood_from(&chol, &yv.add_scalar(-m))
    };

    let mut rng = seed::rng(seed);
    let n_starts = opts.n_starts.max(1);
    let mut starts = Vec::with_capacity(n_starts);
    // first start: moderate lengthscale, data variance
    let mut first: Vec<f64> = lower[..p].iter().zip(&upper[..p]).map(|(lo, hi)| 0.3f64.ln().clamp(*lo, *hi)).collect();
    first.push(log_v0);
    starts.push(first);
    while starts.len() < n_starts {
        starts.push(lower.iter().zip(&upper).map(|(lo, hi)| rng.gen_range(*lo..=*hi)).collect());
    }

    let nm = NelderMeadOptions {
        max_evals: opts.max_evals,
        ftol: opts.ftol,
        initial_step: 0.1,
    };
    let mut start_values = Vec::with_capacity(n_starts);
    let mut best: Option<optim::Minimum> = None;
    for s in &starts {
        start_values.push(-neg_lml(s));
        let m = optim::minimize(neg_lml, s, &lower, &upper, nm);
        if best.as_ref().is_none_or(|b| m.value < b.value) {
            best = Some(m);
        }
    }
    let best = best.expect("at least one start");
    if !best.value.is_finite() {
        return Err(Error::SingularCovariance { nugget });
    }

    let lengthscales: Vec<f64> = best.x[..p]
        .iter()
        .zip(lengthscale_lower_bounds)
        .map(|(t, &lb)| t.exp().max(lb))
        .collect();
    let kernel = KernelSpec::with_bounds(lengthscales, best.x[p].exp(), lengthscale_lower_bounds.to_vec())?;
    let gp = GaussianProcess::with_kernel(x.to_vec(), y.to_vec(), mean_mode, kernel, nugget, None)?;
    let report = FitReport {
        starts,
        start_log_likelihoods: start_values,
        best_log_likelihood: -best.value,
    };
    Ok((gp, report))
}

impl GaussianProcess {
    /// Condition a GP with fixed hyperparameters. With a constant mean and
    /// `mean_constant = None`, the constant is the GLS estimate.
    pub fn with_kernel(
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        mean_mode: MeanMode,
        kernel: KernelSpec,
        nugget: f64,
        mean_constant: Option<f64>,
    ) -> Result<Self> {
        let p = check_inputs(&inputs, &targets, 1)?;
        if kernel.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, got: kernel.dim() });
        }
        let chol = covariance(&inputs, &kernel, nugget)
            .cholesky()
            .ok_or(Error::SingularCovariance { nugget })?;
        let yv = DVector::from_column_slice(&targets);
        let mean_constant = match mean_mode {
            MeanMode::Zero => 0.0,
            MeanMode::Constant => mean_constant.unwrap_or_else(|| gls_constant(&chol, &yv)),
        };
        let resid = yv.add_scalar(-mean_constant);
        let alpha = chol.solve(&resid);
        let alpha_zero = chol.solve(&yv);
        let log_likelihood = log_likelihood_from(&chol, &resid);
        let n = inputs.len();
        let l = chol.l_dirty();
        let mut chol_rows = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                chol_rows[i * n + j] = l[(i, j)];
            }
        }
        Ok(Self {
            inputs,
            targets,
            mean_mode,
            mean_constant,
            kernel,
            nugget,
            chol_rows,
            chol,
            alpha: alpha.as_slice().to_vec(),
            alpha_zero: alpha_zero.as_slice().to_vec(),
            log_likelihood,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn mean_mode(&self) -> MeanMode {
        self.mean_mode
    }

    /// Prior mean (the GLS constant, or 0).
    pub fn mean_constant(&self) -> f64 {
        self.mean_constant
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Max-norm error between `L L'` and `K + nugget * I`.
    pub fn reconstruction_error(&self) -> f64 {
        let k = covariance(&self.inputs, &self.kernel, self.nugget);
        let l = self.chol.l();
        (&l * l.transpose() - k).amax()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    fn cross_cov(&self, x: &[f64]) -> Vec<f64> {
        self.inputs.iter().map(|xi| self.kernel.eval_unchecked(x, xi)).collect()
    }

    /// `k(x,x) - k(x,X) K^-1 k(X,x)` via forward substitution, clamped at 0.
    fn reduced_variance(&self, kx: &[f64]) -> f64 {
        let n = kx.len();
        let mut v = vec![0.0; n];
        let mut quad = 0.0;
        for i in 0..n {
            let row = &self.chol_rows[i * n..i * n + i];
            let s: f64 = row.iter().zip(&v[..i]).map(|(l, vj)| l * vj).sum();
            let vi = (kx[i] - s) / self.chol_rows[i * n + i];
            v[i] = vi;
            quad += vi * vi;
        }
        (self.kernel.variance - quad).max(0.0)
    }

    pub(crate) fn posterior_unchecked(&self, x: &[f64]) -> PosteriorSummary {
        let kx = self.cross_cov(x);
        let mean = self.mean_constant + dot(&kx, &self.alpha);
        PosteriorSummary { mean, variance: self.reduced_variance(&kx) }
    }

    pub(crate) fn mean_unchecked(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (xi, a) in self.inputs.iter().zip(&self.alpha) {
            s += self.kernel.eval_unchecked(x, xi) * a;
        }
        self.mean_constant + s
    }

    /// Posterior mean and variance at `x`.
    pub fn posterior(&self, x: &[f64]) -> Result<PosteriorSummary> {
        self.check_point(x)?;
        Ok(self.posterior_unchecked(x))
    }

    /// Posterior of the same GP with its prior mean forced to zero:
    /// mean `k(x,X) K^-1 y`, variance as in [`posterior`](Self::posterior).
    pub fn zero_mean_posterior(&self, x: &[f64]) -> Result<PosteriorSummary> {
        self.check_point(x)?;
        let kx = self.cross_cov(x);
        Ok(PosteriorSummary {
            mean: dot(&kx, &self.alpha_zero),
            variance: self.reduced_variance(&kx),
        })
    }

    /// Exact leave-one-out predictive distributions with frozen
    /// hyperparameters (including the fitted mean constant):
    /// `m_{-i} = y_i - [K^-1 (y - m)]_i / [K^-1]_ii`, `s^2_{-i} = 1 / [K^-1]_ii`.
    pub fn loo_predictions(&self) -> Result<Vec<PosteriorSummary>> {
        let n = self.len();
        if n < 2 {
            return Err(Error::TooFewPoints { needed: 2, got: n });
        }
        let kinv = self.chol.inverse();
        Ok((0..n)
            .map(|i| {
                let d = kinv[(i, i)];
                PosteriorSummary {
                    mean: self.targets[i] - self.alpha[i] / d,
                    variance: (1.0 / d).max(0.0),
                }
            })
            .collect())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_design(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = seed::rng(seed);
        (0..n).map(|_| (0..p).map(|_| rng.gen::<f64>()).collect()).collect()
    }

    /// Naive dense oracle: Gaussian elimination with partial pivoting.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut r = b.to_vec();
        for c in 0..n {
            let piv = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
            m.swap(c, piv);
            r.swap(c, piv);
            for i in c + 1..n {
                let f = m[i][c] / m[c][c];
                for j in c..n {
                    m[i][j] -= f * m[c][j];
                }
                r[i] -= f * r[c];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
            x[i] = (r[i] - s) / m[i][i];
        }
        x
    }

    fn naive_k(x: &[Vec<f64>], ls: &[f64], var: f64, nugget: f64) -> Vec<Vec<f64>> {
        let k = |a: &[f64], b: &[f64]| {
            var * (-a.iter().zip(b).zip(ls).map(|((u, v), l)| (u - v).powi(2) / (2.0 * l * l)).sum::<f64>()).exp()
        };
        x.iter()
            .enumerate()
            .map(|(i, a)| x.iter().enumerate().map(|(j, b)| k(a, b) + if i == j { nugget } else { 0.0 }).collect())
            .collect()
    }

    #[test]
    fn constant_data_gives_constant_mean() {
        let x = random_design(6, 2, 1);
        let y = vec![2.5; 6];
        let gp = fit_gp(&x, &y, MeanMode::Constant, &[0.0, 0.0], DEFAULT_NUGGET, 3, &FitOptions::default()).unwrap();
        assert!((gp.mean_constant() - 2.5).abs() < 1e-9);
    }

    #[test]
    fn optimizer_beats_every_start() {
        let x = random_design(10, 2, 5);
        let y: Vec<f64> = x.iter().map(|r| (3.0 * r[0]).sin() + r[1] * r[1]).collect();
        let (gp, report) =
            fit_gp_with_report(&x, &y, MeanMode::Constant, &[0.0, 0.0], DEFAULT_NUGGET, 11, &FitOptions::default())
                .unwrap();
        for v in &report.start_log_likelihoods {
            assert!(report.best_log_likelihood >= *v);
        }
        assert!((gp.log_likelihood() - report.best_log_likelihood).abs() < 1e-8);
    }

    #[test]
    fn interpolates_sine_training_data() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![0.1 + 0.2 * i as f64]).collect();
        let y: Vec<f64> = x.iter().map(|r| (2.0 * std::f64::consts::PI * r[0]).sin()).collect();
        let gp = fit_gp(&x, &y, MeanMode::Constant, &[0.0], 1e-8, 0, &FitOptions::default()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let post = gp.posterior(xi).unwrap();
            assert!((post.mean - yi).abs() < 1e-6);
            assert!(post.variance <= 1e-5);
        }
        assert!(gp.reconstruction_error() <= 1e-8);
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let x = vec![vec![0.0], vec![0.1]];
        let k = KernelSpec::new(vec![0.05], 1.7).unwrap();
        let gp = GaussianProcess::with_kernel(x, vec![1.0, -1.0], MeanMode::Zero, k, 1e-8, None).unwrap();
        let post = gp.posterior(&[5.0]).unwrap();
        assert!(post.mean.abs() < 1e-12);
        assert!((post.variance - 1.7).abs() < 1e-12);
    }

    #[test]
    fn posterior_matches_dense_oracle() {
        let x = random_design(4, 1, 9);
        let y = vec![0.3, -1.2, 0.8, 2.0];
        let k = KernelSpec::new(vec![0.4], 1.3).unwrap();
        let gp = GaussianProcess::with_kernel(x.clone(), y.clone(), MeanMode::Constant, k, 1e-6, Some(0.25)).unwrap();
        let km = naive_k(&x, &[0.4], 1.3, 1e-6);
        for q in [0.05, 0.37, 0.9] {
            let kx: Vec<f64> = x.iter().map(|xi| 1.3 * (-(q - xi[0]).powi(2) / (2.0 * 0.16)).exp()).collect();
            let r: Vec<f64> = y.iter().map(|v| v - 0.25).collect();
            let w = dense_solve(&km, &r);
            let mean = 0.25 + kx.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
            let u = dense_solve(&km, &kx);
            let var = 1.3 - kx.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>();
            let post = gp.posterior(&[q]).unwrap();
            assert!((post.mean - mean).abs() < 1e-10, "{} vs {}", post.mean, mean);
            assert!((post.variance - var).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_mean_posterior_matches_dense_oracle() {
        let x = vec![vec![0.1], vec![0.5], vec![0.8]];
        let y = vec![1.0, 3.0, -2.0];
        let k = KernelSpec::new(vec![0.3], 2.0).unwrap();
        let gp = GaussianProcess::with_kernel(x.clone(), y.clone(), MeanMode::Constant, k, 1e-8, None).unwrap();
        let km = naive_k(&x, &[0.3], 2.0, 1e-8);
        let w = dense_solve(&km, &y);
        for q in [0.0, 0.33, 0.61] {
            let kx: Vec<f64> = x.iter().map(|xi| 2.0 * (-(q - xi[0]).powi(2) / 0.18).exp()).collect();
            let mean: f64 = kx.iter().zip(&w).map(|(a, b)| a * b).sum();
            assert!((gp.zero_mean_posterior(&[q]).unwrap().mean - mean).abs() < 1e-10);
        }
        // interpolation at training points
        for (xi, yi) in x.iter().zip(&y) {
            assert!((gp.zero_mean_posterior(xi).unwrap().mean - yi).abs() < 1e-5);
        }
    }

    #[test]
    fn zero_data_zero_mean() {
        let x = random_design(5, 2, 4);
        let k = KernelSpec::new(vec![0.3, 0.3], 1.0).unwrap();
        let gp = GaussianProcess::with_kernel(x, vec![0.0; 5], MeanMode::Constant, k, 1e-8, None).unwrap();
        for q in [[0.2, 0.2], [0.9, 0.1]] {
            assert_eq!(gp.zero_mean_posterior(&q).unwrap().mean, 0.0);
        }
    }

    #[test]
    fn loo_matches_refit() {
        let x = random_design(7, 2, 21);
        let y: Vec<f64> = x.iter().map(|r| r[0] * 2.0 - r[1].cos()).collect();
        let gp = fit_gp(&x, &y, MeanMode::Constant, &[0.0, 0.0], 1e-8, 2, &FitOptions::default()).unwrap();
        let loo = gp.loo_predictions().unwrap();
        for i in 0..x.len() {
            let mut xr = x.clone();
            let mut yr = y.clone();
            let xi = xr.remove(i);
            yr.remove(i);
            let refit = GaussianProcess::with_kernel(
                xr,
                yr,
                MeanMode::Constant,
                gp.kernel().clone(),
                gp.nugget(),
                Some(gp.mean_constant()),
            )
            .unwrap();
            let p = refit.posterior(&xi).unwrap();
            assert!((p.mean - loo[i].mean).abs() < 1e-6);
            assert!((p.variance - loo[i].variance).abs() < 1e-6);
        }
    }

    #[test]
    fn loo_symmetric_two_points() {
        let x = vec![vec![0.25], vec![0.75]];
        let k = KernelSpec::new(vec![0.5], 1.0).unwrap();
        let gp = GaussianProcess::with_kernel(x, vec![1.0, 1.0], MeanMode::Zero, k, 1e-8, None).unwrap();
        let loo = gp.loo_predictions().unwrap();
        assert!((loo[0].variance - loo[1].variance).abs() < 1e-14);
    }

    #[test]
    fn loo_flags_outlier() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let mut y: Vec<f64> = x.iter().map(|r| r[0]).collect();
        y[4] = 25.0;
        let k = KernelSpec::new(vec![0.1], 1.0).unwrap();
        let gp = GaussianProcess::with_kernel(x, y.clone(), MeanMode::Constant, k, 1e-8, None).unwrap();
        let loo = gp.loo_predictions().unwrap();
        let err: Vec<f64> = loo.iter().zip(&y).map(|(p, yi)| (p.mean - yi).abs()).collect();
        for (i, e) in err.iter().enumerate() {
            if i != 4 {
                assert!(err[4] > *e);
            }
        }
    }

    #[test]
    fn loo_needs_two_points() {
        let k = KernelSpec::new(vec![0.5], 1.0).unwrap();
        let gp = GaussianProcess::with_kernel(vec![vec![0.5]], vec![1.0], MeanMode::Zero, k, 1e-8, None).unwrap();
        assert!(matches!(gp.loo_predictions(), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn rejects_duplicates_and_non_finite() {
        let x = vec![vec![0.1, 0.2], vec![0.1, 0.2], vec![0.5, 0.5]];
        let r = fit_gp(&x, &[1.0, 2.0, 3.0], MeanMode::Zero, &[0.0, 0.0], 1e-8, 0, &FitOptions::default());
        assert!(matches!(r, Err(Error::DuplicateInput { index: 1 })));
        let x = vec![vec![0.1], vec![0.4]];
        let r = fit_gp(&x, &[1.0, f64::NAN], MeanMode::Zero, &[0.0], 1e-8, 0, &FitOptions::default());
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn fit_is_deterministic() {
        let x = random_design(9, 3, 77);
        let y: Vec<f64> = x.iter().map(|r| r.iter().sum::<f64>().sin()).collect();
        let a = fit_gp(&x, &y, MeanMode::Constant, &[0.0; 3], 1e-8, 5, &FitOptions::default()).unwrap();
        let b = fit_gp(&x, &y, MeanMode::Constant, &[0.0; 3], 1e-8, 5, &FitOptions::default()).unwrap();
        assert_eq!(a.kernel(), b.kernel());
        assert_eq!(a.mean_constant().to_bits(), b.mean_constant().to_bits());
    }

    #[test]
    fn lengthscale_floor_respected() {
        let x = random_design(8, 2, 3);
        let y: Vec<f64> = x.iter().map(|r| (20.0 * r[0]).sin()).collect();
        let gp = fit_gp(&x, &y, MeanMode::Constant, &[0.2, 0.2], 1e-8, 1, &FitOptions::default()).unwrap();
        assert!(gp.kernel().lengthscales.iter().all(|&l| l >= 0.2));
    }
}
