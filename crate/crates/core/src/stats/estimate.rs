//! Estimators shared by the Monte Carlo experiments.
//!
//! All reductions go through [`pairwise_sum`] over slices in sample-index
//! order, so a result depends only on the samples and never on how the work
//! was split across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of batches used for batch-means error bars.
pub const MIN_BATCHES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// Sample variance of the underlying per-sample values.
    pub variance: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn exact(value: f64, seed: u64) -> Self {
        McEstimate {
            mean: value,
            variance: 0.0,
            stderr: 0.0,
            n: 1,
            seed,
        }
    }

    pub fn ci(&self, z: f64) -> (f64, f64) {
        (self.mean - z * self.stderr, self.mean + z * self.stderr)
    }
}

/// Evaluates `f(0..n)` in parallel and returns results in index order.
pub fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Sum in a fixed binary-tree order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().fold(0.0, |a, b| a + b);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Unbiased sample variance (two-pass).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    pairwise_sum(&dev) / (n - 1) as f64
}

fn batch_count(n: usize) -> usize {
    if n < MIN_BATCHES {
        n
    } else {
        MIN_BATCHES.max((n as f64).sqrt() as usize).min(n)
    }
}

/// Contiguous batches of nearly equal size covering `xs` in order.
fn batches(xs: &[f64]) -> Vec<&[f64]> {
    let n = xs.len();
    let nb = batch_count(n);
    (0..nb).map(|k| &xs[k * n / nb..(k + 1) * n / nb]).collect()
}

/// Mean with a batch-means standard error.
pub fn batch_mean(xs: &[f64], seed: u64) -> McEstimate {
    let n = xs.len();
    let m = mean(xs);
    let variance = sample_variance(xs);
    let stderr = if n < 2 {
        f64::INFINITY
    } else {
        let bm: Vec<f64> = batches(xs).iter().map(|b| mean(b)).collect();
        // batch sizes differ by at most one; weighting them equally is
        // the usual batch-means estimator
        (sample_variance(&bm) / bm.len() as f64).sqrt()
    };
    McEstimate {
        mean: m,
        variance,
        stderr,
        n,
        seed,
    }
}

/// Unbiased variance of the samples, with a delete-one-batch jackknife
/// standard error.
pub fn variance_estimate(xs: &[f64], seed: u64) -> McEstimate {
    let n = xs.len();
    let v = sample_variance(xs);
    if n < 3 {
        return McEstimate {
            mean: v,
            variance: 0.0,
            stderr: f64::INFINITY,
            n,
            seed,
        };
    }
    let bs = batches(xs);
    let nb = bs.len();
    let mut start = 0;
    let mut leave_out = Vec::with_capacity(nb);
    for b in &bs {
        let rest: Vec<f64> = xs[..start]
            .iter()
            .chain(xs[start + b.len()..].iter())
            .copied()
            .collect();
        leave_out.push(sample_variance(&rest));
        start += b.len();
    }
    let jm = mean(&leave_out);
    let dev: Vec<f64> = leave_out.iter().map(|x| (x - jm) * (x - jm)).collect();
    let stderr = ((nb - 1) as f64 / nb as f64 * pairwise_sum(&dev)).sqrt();
    let m = mean(xs);
    let sq: Vec<f64> = xs.iter().map(|x| (x - m).powi(2)).collect();
    McEstimate {
        mean: v,
        variance: sample_variance(&sq),
        stderr,
        n,
        seed,
    }
}

/// Proportion `k/n` with its binomial standard error.
pub fn proportion(k: usize, n: usize, seed: u64) -> McEstimate {
    let p = if n == 0 {
        f64::NAN
    } else {
        k as f64 / n as f64
    };
    McEstimate {
        mean: p,
        variance: p * (1.0 - p),
        stderr: (p * (1.0 - p) / n as f64).sqrt(),
        n,
        seed,
    }
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    /// Reduced chi-square of the weighted residuals.
    pub chi2: f64,
    pub points: usize,
}

impl LinearFit {
    /// Normal-approximation confidence interval for the slope.
    pub fn slope_ci(&self, z: f64) -> (f64, f64) {
        (
            self.slope - z * self.slope_stderr,
            self.slope + z * self.slope_stderr,
        )
    }
}

/// Weighted least squares `y ≈ intercept + slope x` with weights
/// `1/sigma_k^2`; the reported standard errors treat the sigmas as known.
pub fn wls_fit(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() != sigma.len() {
        return Err(Error::Argument("fit inputs differ in length".into()));
    }
    if x.len() < 2 {
        return Err(Error::Degenerate(
            "need at least two points to fit a line".into(),
        ));
    }
    if sigma.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::Argument("fit uncertainties must be positive".into()));
    }
    let w: Vec<f64> = sigma.iter().map(|s| 1.0 / (s * s)).collect();
    let sw = pairwise_sum(&w);
    let xw: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a * b).collect();
    let yw: Vec<f64> = y.iter().zip(&w).map(|(a, b)| a * b).collect();
    let xm = pairwise_sum(&xw) / sw;
    let ym = pairwise_sum(&yw) / sw;
    let sxx: Vec<f64> = x
        .iter()
        .zip(&w)
        .map(|(a, b)| b * (a - xm).powi(2))
        .collect();
    let sxy: Vec<f64> = x
        .iter()
        .zip(y)
        .zip(&w)
        .map(|((a, c), b)| b * (a - xm) * (c - ym))
        .collect();
    let sxx = pairwise_sum(&sxx);
    if sxx <= 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let slope = pairwise_sum(&sxy) / sxx;
    let intercept = ym - slope * xm;
    let res: Vec<f64> = x
        .iter()
        .zip(y)
        .zip(&w)
        .map(|((a, c), b)| b * (c - intercept - slope * a).powi(2))
        .collect();
    let dof = (x.len() as f64 - 2.0).max(1.0);
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr: (1.0 / sxx).sqrt(),
        intercept_stderr: (1.0 / sw + xm * xm / sxx).sqrt(),
        chi2: pairwise_sum(&res) / dof,
        points: x.len(),
    })
}

/// Ordinary least squares with residual-based standard errors.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let ones = vec![1.0; x.len()];
    let mut fit = wls_fit(x, y, &ones)?;
    let s = fit.chi2.sqrt();
    fit.slope_stderr *= s;
    fit.intercept_stderr *= s;
    Ok(fit)
}
