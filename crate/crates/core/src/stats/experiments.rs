//! Monte Carlo experiments on `log Σ` and on resolvent tails.

use nalgebra::SymmetricEigen;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::estimate::{
    batch_mean, par_map, proportion, variance_estimate, wilson_interval, wls_fit, LinearFit,
    McEstimate,
};
use crate::error::{Error, Result};
use crate::greens;
use crate::model::{sample_potential, CouplingSpec, PotentialDist, StripDomain, VerticalCoupling};
use crate::rng::{derive_seed, stream_rng};

/// Largest tolerated fraction of near-singular draws.
pub const MAX_EXCLUDED_FRACTION: f64 = 1e-3;

/// Parameters shared by the strip experiments. Boxes are `[0, L-1] x {1..W}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ExperimentConfig {
    #[serde(rename = "W")]
    pub width: usize,
    pub l_grid: Vec<usize>,
    #[serde(rename = "E", default)]
    pub energy: f64,
    #[serde(default)]
    pub coupling: CouplingSpec,
    pub dist: PotentialDist,
    pub samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::InvalidParameter("W must be positive".into()));
        }
        if self.l_grid.is_empty() {
            return Err(Error::InvalidParameter("empty L grid".into()));
        }
        if self.samples == 0 {
            return Err(Error::InvalidParameter("samples must be positive".into()));
        }
        if !self.energy.is_finite() {
            return Err(Error::InvalidParameter("E must be finite".into()));
        }
        self.dist.validate()?;
        self.coupling.build(self.width)?;
        Ok(())
    }

    /// Σ needs at least two columns.
    pub fn validate_sigma(&self) -> Result<()> {
        self.validate()?;
        if let Some(&l) = self.l_grid.iter().find(|&&l| l < 2) {
            return Err(Error::DomainTooSmall(l as i64 - 1));
        }
        Ok(())
    }

    pub fn domain(&self, l: usize) -> Result<StripDomain> {
        if l == 0 {
            return Err(Error::InvalidDomain("L must be positive".into()));
        }
        StripDomain::new(0, l as i64 - 1, self.width)
    }
}

/// `log Σ` for `n` independent fields on `[0, L-1]`; near-singular draws
/// are dropped and counted.
pub fn log_sigma_samples(
    cfg: &ExperimentConfig,
    coupling: &VerticalCoupling,
    l: usize,
    n: usize,
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    let domain = cfg.domain(l)?;
    let draws: Vec<Result<Option<f64>>> = par_map(n, |k| {
        let field = sample_potential(&cfg.dist, &domain, derive_seed(seed, &[k as u64]));
        match greens::log_sigma_of(&domain, coupling, field.values(), cfg.energy) {
            Ok(v) => Ok(Some(v)),
            Err(Error::Singular { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut out = Vec::with_capacity(n);
    let mut excluded = 0;
    for d in draws {
        match d? {
            Some(v) => out.push(v),
            None => excluded += 1,
        }
    }
    Ok((out, excluded))
}

/// Like [`log_sigma_samples`], failing when too many draws are dropped.
fn checked_samples(
    cfg: &ExperimentConfig,
    coupling: &VerticalCoupling,
    l: usize,
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    let (xs, excluded) = log_sigma_samples(cfg, coupling, l, cfg.samples, seed)?;
    if excluded as f64 >= MAX_EXCLUDED_FRACTION * cfg.samples as f64 {
        return Err(Error::ExcessiveExclusions {
            excluded,
            total: cfg.samples,
        });
    }
    Ok((xs, excluded))
}

fn point_seed(cfg: &ExperimentConfig, tag: u64, l: usize) -> u64 {
    derive_seed(cfg.seed, &[tag, cfg.width as u64, l as u64])
}

const TAG_VARIANCE: u64 = 1;
const TAG_WEAK: u64 = 2;
const TAG_WEGNER: u64 = 3;
const TAG_MOMENT: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VariancePoint {
    #[serde(rename = "L")]
    pub l: usize,
    pub estimate: McEstimate,
    pub excluded: usize,
    pub excluded_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceScan {
    pub points: Vec<VariancePoint>,
    /// Weighted fit of `var(log Σ)` against `L - 2`.
    pub fit: Option<LinearFit>,
}

impl VarianceScan {
    /// Slope positive with the 95% interval excluding zero.
    pub fn slope_positive(&self) -> bool {
        self.fit.is_some_and(|f| f.slope_ci(1.96).0 > 0.0)
    }
}

/// Per-L variance of `log Σ` with jackknife errors and the slope against
/// `L - 2`.
pub fn var_log_sigma(cfg: &ExperimentConfig) -> Result<VarianceScan> {
    cfg.validate_sigma()?;
    let coupling = cfg.coupling.build(cfg.width)?;
    let mut points = Vec::new();
    for &l in &cfg.l_grid {
        let seed = point_seed(cfg, TAG_VARIANCE, l);
        let (xs, excluded) = checked_samples(cfg, &coupling, l, seed)?;
        let frac = excluded as f64 / cfg.samples as f64;
        points.push(VariancePoint {
            l,
            estimate: variance_estimate(&xs, seed),
            excluded,
            excluded_fraction: frac,
        });
    }
    let usable: Vec<&VariancePoint> = points
        .iter()
        .filter(|p| p.estimate.stderr > 0.0 && p.estimate.stderr.is_finite())
        .collect();
    let x: Vec<f64> = usable.iter().map(|p| p.l as f64 - 2.0).collect();
    let y: Vec<f64> = usable.iter().map(|p| p.estimate.mean).collect();
    let s: Vec<f64> = usable.iter().map(|p| p.estimate.stderr).collect();
    Ok(VarianceScan {
        fit: wls_fit(&x, &y, &s).ok(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WeakDecayPoint {
    #[serde(rename = "L")]
    pub l: usize,
    /// `-sqrt(L δ0) / 2`.
    pub threshold: f64,
    /// `P(log Σ <= threshold)`.
    pub lower: McEstimate,
    pub wilson: (f64, f64),
    /// `P(log Σ >= -threshold)`.
    pub upper: McEstimate,
    pub excluded: usize,
}

pub fn weak_decay_prob(cfg: &ExperimentConfig, delta0: f64) -> Result<Vec<WeakDecayPoint>> {
    cfg.validate_sigma()?;
    if !(delta0 >= 0.0) || delta0 > 1.0 / cfg.width as f64 {
        return Err(Error::Precondition(format!(
            "δ0 = {delta0} must lie in [0, 1/W]"
        )));
    }
    let coupling = cfg.coupling.build(cfg.width)?;
    cfg.l_grid
        .iter()
        .map(|&l| {
            let seed = point_seed(cfg, TAG_WEAK, l);
            let (xs, excluded) = checked_samples(cfg, &coupling, l, seed)?;
            let t = -(l as f64 * delta0).sqrt() / 2.0;
            let k_lo = xs.iter().filter(|&&v| v <= t).count();
            let k_hi = xs.iter().filter(|&&v| v >= -t).count();
            Ok(WeakDecayPoint {
                l,
                threshold: t,
                lower: proportion(k_lo, xs.len(), seed),
                wilson: wilson_interval(k_lo, xs.len(), 1.96),
                upper: proportion(k_hi, xs.len(), seed),
                excluded,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct WegnerPoint {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "T")]
    pub t: f64,
    /// `T · P(|G(i,i)| >= T)` at the first site of the middle column.
    pub entry: McEstimate,
    /// `T · P(||G|| >= T) / |Λ|`.
    pub norm: McEstimate,
}

fn scaled(p: McEstimate, factor: f64) -> McEstimate {
    McEstimate {
        mean: p.mean * factor,
        variance: p.variance * factor * factor,
        stderr: p.stderr * factor,
        ..p
    }
}

/// Normalized tails of one diagonal resolvent entry and of the resolvent
/// norm, from the spectral decomposition of `H_Λ`.
pub fn wegner_tail(cfg: &ExperimentConfig, t_grid: &[f64]) -> Result<Vec<WegnerPoint>> {
    cfg.validate()?;
    if t_grid.iter().any(|&t| !(t >= 1.0)) {
        return Err(Error::Precondition(
            "T grid entries must be at least 1".into(),
        ));
    }
    let coupling = cfg.coupling.build(cfg.width)?;
    let mut out = Vec::new();
    for &l in &cfg.l_grid {
        let domain = cfg.domain(l)?;
        let seed = point_seed(cfg, TAG_WEGNER, l);
        let site = domain.width * (domain.columns() / 2);
        let draws: Vec<Result<(f64, f64)>> = par_map(cfg.samples, |k| {
            let field = sample_potential(&cfg.dist, &domain, derive_seed(seed, &[k as u64]));
            let h = greens::BlockTridiagonal::from_potentials(domain, &coupling, field.values())?;
            let eig = SymmetricEigen::new(h.to_dense());
            let mut entry = 0.0;
            let mut gap = f64::INFINITY;
            for (idx, &lam) in eig.eigenvalues.iter().enumerate() {
                let d = lam - cfg.energy;
                gap = gap.min(d.abs());
                entry += eig.eigenvectors[(site, idx)].norm_sqr() / d;
            }
            Ok((entry.abs(), 1.0 / gap))
        });
        let draws: Vec<(f64, f64)> = draws.into_iter().collect::<Result<_>>()?;
        let n = draws.len();
        for &t in t_grid {
            let ke = draws.iter().filter(|d| d.0 >= t).count();
            let kn = draws.iter().filter(|d| d.1 >= t).count();
            out.push(WegnerPoint {
                l,
                t,
                entry: scaled(proportion(ke, n, seed), t),
                norm: scaled(proportion(kn, n, seed), t / domain.len() as f64),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MomentPoint {
    #[serde(rename = "L")]
    pub l: usize,
    pub s: f64,
    /// `E |log Σ|^s`.
    pub estimate: McEstimate,
    /// Batch-means error of the first half of the sample.
    pub stderr_half: f64,
    /// `C0 (|Λ| log|Λ|)^{2s}` with `C0` fixed at the smallest `L`.
    pub envelope: f64,
    pub holds: bool,
    /// Relative error above one half.
    pub heavy_tail: bool,
    pub excluded: usize,
}

impl MomentPoint {
    /// The error bar shrinks when the sample doubles.
    pub fn converging(&self) -> bool {
        self.estimate.stderr.is_finite() && self.estimate.stderr < 0.95 * self.stderr_half
    }
}

fn envelope_shape(sites: usize, s: f64) -> f64 {
    let n = sites as f64;
    (n * n.ln()).powf(2.0 * s)
}

pub fn moment_log_sigma(cfg: &ExperimentConfig, orders: &[f64]) -> Result<Vec<MomentPoint>> {
    cfg.validate_sigma()?;
    if orders.iter().any(|&s| !(s >= 1.0)) {
        return Err(Error::Precondition(
            "moment orders must be at least 1".into(),
        ));
    }
    let coupling = cfg.coupling.build(cfg.width)?;
    let mut grid = cfg.l_grid.clone();
    grid.sort_unstable();
    let mut samples = Vec::new();
    for &l in &grid {
        let seed = point_seed(cfg, TAG_MOMENT, l);
        let (xs, excluded) = checked_samples(cfg, &coupling, l, seed)?;
        samples.push((l, seed, xs, excluded));
    }
    let mut out = Vec::new();
    for &s in orders {
        let mut c0 = None;
        for (l, seed, xs, excluded) in &samples {
            let pw: Vec<f64> = xs.iter().map(|v| v.abs().powf(s)).collect();
            let est = batch_mean(&pw, *seed);
            let half = batch_mean(&pw[..pw.len() / 2], *seed);
            let sites = l * cfg.width;
            let shape = envelope_shape(sites, s);
            // calibrated once, with a three-sigma allowance
            let c = *c0.get_or_insert((est.mean + 3.0 * est.stderr) / shape);
            out.push(MomentPoint {
                l: *l,
                s,
                estimate: est,
                stderr_half: half.stderr,
                envelope: c * shape,
                holds: est.mean <= c * shape,
                heavy_tail: est.mean != 0.0 && est.stderr / est.mean.abs() > 0.5,
                excluded: *excluded,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SectorMeasure {
    #[serde(rename = "K")]
    pub k: usize,
    pub eps: f64,
    /// Normalized measure of `{ξ : min |ξ_i| >= ε}`.
    pub fraction: McEstimate,
    /// Exact value where one is available (`K <= 2`).
    pub exact: Option<f64>,
    /// Surface measure `fraction · area(S^{K-1})` of the whole set.
    pub measure: f64,
    pub measure_stderr: f64,
    /// Surface measure of the positive-orthant part,
    /// `fraction · area(S^{K-1}) / 2^K`.
    pub orthant_measure: f64,
    pub orthant_stderr: f64,
    /// `K 2^{-K}`.
    pub usage_bound: f64,
    /// `K 2^K (1 - sqrt(K) ε)^K`, reported without being asserted.
    pub literal_bound: f64,
}

impl SectorMeasure {
    /// `σ(Θ) >= K 2^{-K}` for the symmetric set, within three standard
    /// errors.
    pub fn usage_holds(&self) -> bool {
        self.measure + 3.0 * self.measure_stderr >= self.usage_bound
    }

    /// The same bound for the positive-orthant part alone; reported only.
    pub fn orthant_usage_holds(&self) -> bool {
        self.orthant_measure + 3.0 * self.orthant_stderr >= self.usage_bound
    }
}

/// `Γ(k/2)` for positive integers `k`.
fn gamma_half(k: usize) -> f64 {
    match k {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (k as f64 / 2.0 - 1.0) * gamma_half(k - 2),
    }
}

/// Surface measure of `S^{k-1}` (counting measure for `k = 1`).
pub fn sphere_area(k: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(k as f64 / 2.0) / gamma_half(k)
}

pub fn sector_measure(k: usize, eps: f64, samples: usize, seed: u64) -> Result<SectorMeasure> {
    if k == 0 || !(eps > 0.0) || eps >= 1.0 / (k as f64).sqrt() {
        return Err(Error::Precondition(format!(
            "need K >= 1 and 0 < ε < 1/sqrt(K), got K={k}, ε={eps}"
        )));
    }
    let chunk = 4096;
    let chunks = samples.div_ceil(chunk);
    let hits: Vec<usize> = par_map(chunks, |c| {
        let mut rng = stream_rng(derive_seed(seed, &[c as u64]), 0);
        let count = chunk.min(samples - c * chunk);
        (0..count)
            .filter(|_| {
                let g: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
                g.iter().all(|x| x.abs() >= eps * norm)
            })
            .count()
    });
    let fraction = proportion(hits.iter().sum(), samples, seed);
    let exact = match k {
        1 => Some(1.0),
        2 => Some(1.0 - 4.0 / std::f64::consts::PI * eps.asin()),
        _ => None,
    };
    let scale = sphere_area(k) / 2f64.powi(k as i32);
    Ok(SectorMeasure {
        k,
        eps,
        fraction,
        exact,
        measure: fraction.mean * sphere_area(k),
        measure_stderr: fraction.stderr * sphere_area(k),
        orthant_measure: fraction.mean * scale,
        orthant_stderr: fraction.stderr * scale,
        usage_bound: k as f64 * 2f64.powi(-(k as i32)),
        literal_bound: k as f64
            * 2f64.powi(k as i32)
            * (1.0 - (k as f64).sqrt() * eps).powi(k as i32),
    })
}
