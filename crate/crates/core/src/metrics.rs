use crate::error::{Error, Result};

/// RMSE divided by the range of `truth`.
pub fn nrmse(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch { left: predictions.len(), right: truth.len() });
    }
    if truth.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: truth.len() });
    }
    let (lo, hi) = truth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > 0.0) {
        return Err(Error::ConstantTruth);
    }
    let mse = predictions.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / truth.len() as f64;
    Ok(mse.sqrt() / range)
}

/// Points per axis for a test grid in `p` dimensions: `round(10000^(1/p))`,
/// reduced until the total stays at most 20000.
pub fn default_grid_per_axis(p: usize) -> usize {
    let mut k = (10_000f64.powf(1.0 / p as f64)).round().max(2.0) as usize;
    while k > 2 && (k as f64).powi(p as i32) > 20_000.0 {
        k -= 1;
    }
    k
}

/// Full tensor grid with `per_axis` evenly spaced values in `[0,1]` per axis.
pub fn test_grid(p: usize, per_axis: usize) -> Vec<Vec<f64>> {
    let per_axis = per_axis.max(2);
    let ticks: Vec<f64> = (0..per_axis).map(|i| i as f64 / (per_axis - 1) as f64).collect();
    let total = per_axis.pow(p as u32);
    (0..total)
        .map(|mut idx| {
            let mut pt = vec![0.0; p];
            for v in pt.iter_mut() {
                *v = ticks[idx % per_axis];
                idx /= per_axis;
            }
            pt
        })
        .collect()
}

/// Linear-interpolation quantile of already sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] + t * (sorted[hi] - sorted[lo])
}

pub fn quantile(data: &[f64], q: f64) -> f64 {
    let mut s = data.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

pub fn median(data: &[f64]) -> f64 {
    quantile(data, 0.5)
}

pub fn mean(data: &[f64]) -> f64 {
    data.iter().sum::<f64>() / data.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nrmse_examples() {
        assert_eq!(nrmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let v = nrmse(&[0.0, 1.0], &[0.0, 2.0]).unwrap();
        assert!((v - 0.5f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((v - 0.35355).abs() < 1e-5);
        assert_eq!(nrmse(&[1.0, 1.0], &[2.0, 2.0]), Err(Error::ConstantTruth));
    }

    #[test]
    fn nrmse_scale_and_shift_free() {
        let p = [0.3, 1.9, -0.4, 2.2];
        let t = [0.0, 2.0, -1.0, 2.5];
        let base = nrmse(&p, &t).unwrap();
        let scale = |v: &[f64], c: f64| v.iter().map(|x| c * x).collect::<Vec<_>>();
        let shift = |v: &[f64], c: f64| v.iter().map(|x| c + x).collect::<Vec<_>>();
        assert!((nrmse(&scale(&p, 3.5), &scale(&t, 3.5)).unwrap() - base).abs() < 1e-14);
        assert!((nrmse(&shift(&p, -7.0), &shift(&t, -7.0)).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(default_grid_per_axis(2), 100);
        assert_eq!(default_grid_per_axis(1), 10_000);
        assert!(default_grid_per_axis(3).pow(3) <= 20_000);
        let g = test_grid(2, 100);
        assert_eq!(g.len(), 10_000);
        assert_eq!(g[0], vec![0.0, 0.0]);
        assert_eq!(g[9_999], vec![1.0, 1.0]);
    }

    #[test]
    fn quantiles() {
        let d = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&d), 2.5);
        assert_eq!(quantile(&d, 0.0), 1.0);
        assert_eq!(quantile(&d, 1.0), 4.0);
        assert!((quantile(&d, 0.05) - 1.15).abs() < 1e-12);
    }
}
