//! Green's-function decay rates, transfer-matrix Lyapunov exponents and the
//! deterministic multi-scale rate recursion.

use nalgebra::{ComplexField, DMatrix};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{self, BlockTridiagonal};
use crate::model::{sample_potential, PotentialDist, StripDomain, VerticalCoupling};
use crate::rng::{derive_seed, stream_rng, SiteStream};
use crate::stats::{
    batch_mean, ols_fit, par_map, proportion, wilson_interval, ExperimentConfig, McEstimate,
};

/// Fewest profiles accepted by [`rate_fit`].
pub const MIN_PROFILES: usize = 50;
/// Bootstrap resamples behind the rate interval.
pub const BOOTSTRAP_RESAMPLES: usize = 400;

/// `log max |G(i,j)|` over `i` in the centre column of `[-L, L]` and `j` in
/// the column at each distance `d = 1..=L` to the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecayProfile {
    pub distances: Vec<usize>,
    pub log_g: Vec<f64>,
    pub seed: u64,
}

fn potentials(dist: Option<&PotentialDist>, domain: &StripDomain, seed: u64) -> Vec<f64> {
    match dist {
        Some(d) => sample_potential(d, domain, seed).values().to_vec(),
        None => vec![0.0; domain.len()],
    }
}

/// One profile; `dist = None` is the free operator. A near-singular
/// resolvent surfaces as [`Error::Singular`] so callers can drop the draw.
pub fn decay_profile(
    width: usize,
    l: usize,
    energy: f64,
    coupling: &VerticalCoupling,
    dist: Option<&PotentialDist>,
    seed: u64,
) -> Result<DecayProfile> {
    if l < 2 {
        return Err(Error::Precondition(format!("L = {l} must be at least 2")));
    }
    if let Some(d) = dist {
        d.validate()?;
    }
    let domain = StripDomain::centered(0, l as i64, width)?;
    let h = BlockTridiagonal::from_potentials(domain, coupling, &potentials(dist, &domain, seed))?;
    let prof = greens::center_profile(&h, energy, 0)?;
    Ok(DecayProfile {
        distances: (1..=l).collect(),
        log_g: prof.right[1..].to_vec(),
        seed,
    })
}

/// `n` profiles with per-draw seeds; singular draws are counted, not kept.
pub fn decay_profiles(
    width: usize,
    l: usize,
    energy: f64,
    coupling: &VerticalCoupling,
    dist: Option<&PotentialDist>,
    n: usize,
    seed: u64,
) -> Result<(Vec<DecayProfile>, usize)> {
    let draws = par_map(n, |k| {
        decay_profile(
            width,
            l,
            energy,
            coupling,
            dist,
            derive_seed(seed, &[k as u64]),
        )
    });
    let mut out = Vec::with_capacity(n);
    let mut excluded = 0;
    for d in draws {
        match d {
            Ok(p) => out.push(p),
            Err(Error::Singular { .. }) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((out, excluded))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RateFit {
    /// Minus the slope of the mean profile over the fitted distances.
    pub rate: f64,
    pub stderr: f64,
    /// 95% percentile bootstrap interval.
    pub ci: (f64, f64),
    /// The fitted slope was non-negative.
    pub no_decay: bool,
    pub profiles: usize,
    pub points: usize,
}

fn tail_slope(sum: &[f64], count: f64, xs: &[f64], start: usize) -> Result<f64> {
    let ys: Vec<f64> = sum[start..].iter().map(|s| s / count).collect();
    Ok(ols_fit(&xs[start..], &ys)?.slope)
}

pub fn rate_fit(profiles: &[DecayProfile], tail_fraction: f64, seed: u64) -> Result<RateFit> {
    if profiles.len() < MIN_PROFILES {
        return Err(Error::Precondition(format!(
            "need at least {MIN_PROFILES} profiles, got {}",
            profiles.len()
        )));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::Precondition(format!(
            "tail fraction {tail_fraction} outside (0, 1]"
        )));
    }
    let dist = &profiles[0].distances;
    if profiles
        .iter()
        .any(|p| &p.distances != dist || p.log_g.len() != dist.len())
    {
        return Err(Error::Argument("profiles cover different distances".into()));
    }
    let n = dist.len();
    let points = ((tail_fraction * n as f64).ceil() as usize).clamp(2.min(n), n);
    let start = n - points;
    let xs: Vec<f64> = dist.iter().map(|&d| d as f64).collect();
    let sum_of = |pick: &mut dyn FnMut() -> usize| {
        let mut s = vec![0.0; n];
        for _ in 0..profiles.len() {
            for (acc, v) in s.iter_mut().zip(&profiles[pick()].log_g) {
                *acc += v;
            }
        }
        s
    };
    let mut k = 0;
    let total = sum_of(&mut || {
        k += 1;
        k - 1
    });
    let count = profiles.len() as f64;
    let slope = tail_slope(&total, count, &xs, start)?;
    let boot: Vec<f64> = par_map(BOOTSTRAP_RESAMPLES, |r| {
        let mut rng = stream_rng(derive_seed(seed, &[r as u64]), 0);
        let s = sum_of(&mut || rng.random_range(0..profiles.len()));
        -tail_slope(&s, count, &xs, start).unwrap_or(f64::NAN)
    });
    let mut sorted: Vec<f64> = boot.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| sorted[((p * (sorted.len() - 1) as f64).round()) as usize];
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (sorted.len() - 1) as f64;
    Ok(RateFit {
        rate: -slope,
        stderr: var.sqrt(),
        ci: (q(0.025), q(0.975)),
        no_decay: slope >= 0.0,
        profiles: profiles.len(),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TransferParams {
    pub steps: usize,
    /// Steps between QR re-orthogonalizations.
    pub reortho: usize,
}

impl Default for TransferParams {
    fn default() -> Self {
        TransferParams {
            steps: 1_000_000,
            reortho: 10,
        }
    }
}

/// Smallest steps count accepted by [`lyapunov_transfer`].
pub const MIN_TRANSFER_STEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LyapunovEstimate {
    #[serde(rename = "W")]
    pub width: usize,
    /// All `2W` exponents in decreasing order.
    pub exponents: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// The `W`-th exponent, the smallest non-negative one.
    pub gamma: f64,
    pub gamma_stderr: f64,
    /// `max_i |λ_i + λ_{2W+1-i}|`.
    pub pair_defect: f64,
    /// The next larger exponent lies within three standard errors.
    pub near_degenerate: bool,
    pub steps: usize,
    pub reortho: usize,
    pub seed: u64,
}

impl LyapunovEstimate {
    pub fn ci(&self, z: f64) -> (f64, f64) {
        (
            self.gamma - z * self.gamma_stderr,
            self.gamma + z * self.gamma_stderr,
        )
    }

    pub fn pairs_hold(&self) -> bool {
        let tol = 3.0 * self.stderrs.iter().copied().fold(0.0, f64::max);
        // contracting directions carry rounding amplified by the growth
        // between QR steps
        let growth = (2.0 * self.exponents[0] * self.reortho as f64).exp();
        self.pair_defect <= tol.max(1e-14 * growth.min(MAX_GROWTH * MAX_GROWTH))
    }
}

/// Largest entry growth tolerated between QR steps; beyond it the
/// contracting directions would drown in rounding.
pub const MAX_GROWTH: f64 = 1e4;

/// Orthonormalizes `[top; bottom]` in place and returns `log |R_ii|`.
fn reorthonormalize<T>(
    top: &mut DMatrix<T>,
    bottom: &mut DMatrix<T>,
    step: usize,
) -> Result<Vec<f64>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let w = top.nrows();
    let mut q = DMatrix::<T>::zeros(2 * w, 2 * w);
    q.view_mut((0, 0), (w, 2 * w)).copy_from(top);
    q.view_mut((w, 0), (w, 2 * w)).copy_from(bottom);
    if q.iter().any(|z| !z.is_finite()) {
        return Err(Error::StepSize(format!(
            "non-finite transfer product at step {step}; use a shorter re-orthogonalization interval"
        )));
    }
    let qr = q.qr();
    let r = qr.r();
    let logs = (0..2 * w).map(|i| r[(i, i)].modulus().ln()).collect();
    let qm = qr.q();
    top.copy_from(&qm.view((0, 0), (w, 2 * w)));
    bottom.copy_from(&qm.view((w, 0), (w, 2 * w)));
    Ok(logs)
}

/// Per-block sums of `log |R_ii|` for the renormalized transfer product
/// `ψ_{n+1} = (S + V_n - E) ψ_n - ψ_{n-1}`. A block is `reortho` steps; an
/// extra QR is taken inside a block when entries grow past [`MAX_GROWTH`].
fn transfer_increments<T>(
    s: &DMatrix<T>,
    energy: f64,
    potential: &mut dyn FnMut() -> f64,
    params: TransferParams,
) -> Result<Vec<Vec<f64>>>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let w = s.nrows();
    let mut top = DMatrix::<T>::identity(w, 2 * w);
    let mut bottom = DMatrix::<T>::zeros(w, 2 * w);
    for i in 0..w {
        bottom[(i, w + i)] = T::one();
    }
    let blocks = params.steps / params.reortho;
    let mut incs = Vec::with_capacity(blocks);
    let mut v = vec![0.0; w];
    let mut step = 0;
    for _ in 0..blocks {
        let mut acc = vec![0.0; 2 * w];
        for j in 0..params.reortho {
            for x in v.iter_mut() {
                *x = potential() - energy;
            }
            let mut next = s * &top - &bottom;
            for i in 0..w {
                let vi = T::from_real(v[i]);
                for c in 0..2 * w {
                    next[(i, c)] += vi * top[(i, c)];
                }
            }
            bottom = std::mem::replace(&mut top, next);
            step += 1;
            let last = j + 1 == params.reortho;
            let grown = top.iter().any(|z| !(z.modulus() <= MAX_GROWTH));
            if last || grown {
                for (a, l) in acc
                    .iter_mut()
                    .zip(reorthonormalize(&mut top, &mut bottom, step)?)
                {
                    *a += l;
                }
            }
        }
        incs.push(acc);
    }
    Ok(incs)
}

/// Lyapunov spectrum of the strip by QR-renormalized transfer products,
/// averaged over the second half of the trajectory. `dist = None` is the
/// free operator.
pub fn lyapunov_transfer(
    width: usize,
    energy: f64,
    coupling: &VerticalCoupling,
    dist: Option<&PotentialDist>,
    params: TransferParams,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if width == 0 || coupling.width() != width {
        return Err(Error::DomainMismatch(format!(
            "coupling of width {} for strip width {width}",
            coupling.width()
        )));
    }
    if params.steps < MIN_TRANSFER_STEPS {
        return Err(Error::Precondition(format!(
            "need at least {MIN_TRANSFER_STEPS} steps, got {}",
            params.steps
        )));
    }
    if params.reortho == 0 || params.reortho > params.steps / 2 {
        return Err(Error::Precondition(format!(
            "re-orthogonalization interval {} out of range",
            params.reortho
        )));
    }
    if let Some(d) = dist {
        d.validate()?;
    }
    let mut stream = SiteStream::at(seed, 0);
    let mut potential = || dist.map_or(0.0, |d| d.quantile(stream.next_unit()));
    let incs = if coupling.is_real() {
        let s = coupling.matrix().map(|z: Complex64| z.re);
        transfer_increments(&s, energy, &mut potential, params)?
    } else {
        transfer_increments(coupling.matrix(), energy, &mut potential, params)?
    };
    let half = &incs[incs.len() / 2..];
    let k = params.reortho as f64;
    let mut est: Vec<McEstimate> = (0..2 * width)
        .map(|i| {
            let xs: Vec<f64> = half.iter().map(|b| b[i] / k).collect();
            batch_mean(&xs, seed)
        })
        .collect();
    est.sort_by(|a, b| b.mean.total_cmp(&a.mean));
    let exponents: Vec<f64> = est.iter().map(|e| e.mean).collect();
    let stderrs: Vec<f64> = est.iter().map(|e| e.stderr).collect();
    let pair_defect = (0..width)
        .map(|i| (exponents[i] + exponents[2 * width - 1 - i]).abs())
        .fold(0.0, f64::max);
    let g = width - 1;
    let near_degenerate =
        g > 0 && exponents[g - 1] - exponents[g] < 3.0 * stderrs[g - 1].hypot(stderrs[g]);
    Ok(LyapunovEstimate {
        width,
        gamma: exponents[g],
        gamma_stderr: stderrs[g],
        exponents,
        stderrs,
        pair_defect,
        near_degenerate,
        steps: params.steps,
        reortho: params.reortho,
        seed,
    })
}

/// Decay rate of the free `W = 1` chain at `|E| > 2`.
pub fn free_rate(energy: f64) -> Result<f64> {
    if energy.abs() <= 2.0 {
        return Err(Error::Precondition(format!(
            "|E| = {} inside the band",
            energy.abs()
        )));
    }
    Ok((energy.abs() / 2.0).acosh())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MsaState {
    pub l: f64,
    pub m: f64,
    #[serde(rename = "W")]
    pub width: usize,
    pub beta: f64,
    pub eps: f64,
}

impl MsaState {
    /// `l^{ε-1} log W`.
    pub fn threshold(&self) -> f64 {
        self.l.powf(self.eps - 1.0) * (self.width as f64).ln()
    }

    pub fn check(&self) -> Result<()> {
        if !(self.l > 1.0) || !self.m.is_finite() || self.width == 0 {
            return Err(Error::Precondition(format!("invalid scale state {self:?}")));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) || !(self.beta >= 1.0) {
            return Err(Error::Precondition(format!(
                "need 0 < ε < 1 and β >= 1, got ε={}, β={}",
                self.eps, self.beta
            )));
        }
        if !(self.m >= self.threshold()) || self.m < 0.0 {
            return Err(Error::Certification {
                scale: self.l,
                reason: format!("rate {} below l^(ε-1) log W = {}", self.m, self.threshold()),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AlphaSchedule {
    Constant(f64),
    List(Vec<f64>),
}

impl AlphaSchedule {
    fn at(&self, k: usize) -> f64 {
        match self {
            AlphaSchedule::Constant(a) => *a,
            AlphaSchedule::List(v) => *v.get(k).or(v.last()).unwrap_or(&2.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MsaRun {
    pub states: Vec<MsaState>,
    pub alphas: Vec<f64>,
    /// `Σ (6 l_k^{-1/4} m_k + log(2W)/l_k)`.
    pub total_loss: f64,
    /// The summed loss stays within half the initial rate.
    pub budget_holds: bool,
    pub final_holds: bool,
}

impl MsaRun {
    pub fn final_rate(&self) -> f64 {
        self.states.last().map_or(f64::NAN, |s| s.m)
    }
}

/// Iterates `m_{k+1} = (1 - 6 l_k^{-1/4}) m_k - log(2W)/l_k` with
/// `l_{k+1} = l_k^{α_k}` until `target` is reached. Exponents are kept in
/// `[2, 4]`; the last step is shortened to land on `target` exactly and
/// earlier steps leave room for it.
pub fn msa_recursion(initial: MsaState, target: f64, schedule: &AlphaSchedule) -> Result<MsaRun> {
    initial.check()?;
    if !(target >= initial.l.powi(2)) || !target.is_finite() {
        return Err(Error::Precondition(format!(
            "target {target:e} below l0^2 = {:e}",
            initial.l.powi(2)
        )));
    }
    let bad_alpha = match schedule {
        AlphaSchedule::Constant(a) => !(2.0..=4.0).contains(a),
        AlphaSchedule::List(v) => v.is_empty() || v.iter().any(|a| !(2.0..=4.0).contains(a)),
    };
    if bad_alpha {
        return Err(Error::Precondition(
            "α-schedule values must lie in [2, 4]".into(),
        ));
    }
    let log_target = target.ln();
    let log_2w = (2.0 * initial.width as f64).ln();
    let mut states = vec![initial];
    let mut alphas = Vec::new();
    let mut loss = 0.0;
    let mut cur = initial;
    // relative slack for landing on the target scale
    while log_target - cur.l.ln() > 1e-12 * log_target {
        let r = log_target / cur.l.ln();
        let wanted = schedule.at(alphas.len());
        // land on the target when the remaining ratio allows no further
        // step of at least 2
        let last = r <= wanted || (r <= 4.0 && r < 2.0 * wanted);
        let alpha = if last { r } else { wanted.clamp(2.0, r / 2.0) };
        let step_loss = 6.0 * cur.l.powf(-0.25) * cur.m + log_2w / cur.l;
        loss += step_loss;
        let next = MsaState {
            l: if last { target } else { cur.l.powf(alpha) },
            m: cur.m - step_loss,
            ..cur
        };
        next.check()?;
        alphas.push(alpha);
        states.push(next);
        cur = next;
    }
    let budget_holds = loss <= initial.m / 2.0;
    Ok(MsaRun {
        final_holds: cur.m >= initial.m / 2.0,
        states,
        alphas,
        total_loss: loss,
        budget_holds,
    })
}

/// `log max |G(i,j)|` over `i` in the first and `j` in the last column,
/// against `-δ0^{1/2} L^{1/10} / 4`.
pub fn initial_length_event(
    domain: &StripDomain,
    coupling: &VerticalCoupling,
    values: &[f64],
    energy: f64,
    delta0: f64,
) -> Result<bool> {
    let h = BlockTridiagonal::from_potentials(*domain, coupling, values)?;
    let cg = greens::corner_green(&h, energy)?;
    let l = domain.columns() as f64;
    let threshold = -delta0.sqrt() * l.powf(0.1) / 4.0;
    let max = cg.g_ab.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(cg.log_norm_ab() + max.ln() <= threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InitialLengthPoint {
    #[serde(rename = "L")]
    pub l: usize,
    pub probability: McEstimate,
    pub wilson: (f64, f64),
    pub excluded: usize,
}

/// Empirical probability of the initial-length event on each box of the
/// grid; singular draws count as failures of the event.
pub fn initial_length_check(
    cfg: &ExperimentConfig,
    delta0: f64,
) -> Result<Vec<InitialLengthPoint>> {
    cfg.validate_sigma()?;
    if !(delta0 > 0.0) || delta0 > 1.0 / cfg.width as f64 {
        return Err(Error::Precondition(format!(
            "δ0 = {delta0} must lie in (0, 1/W]"
        )));
    }
    let coupling = cfg.coupling.build(cfg.width)?;
    cfg.l_grid
        .iter()
        .map(|&l| {
            let domain = cfg.domain(l)?;
            let seed = derive_seed(cfg.seed, &[5, cfg.width as u64, l as u64]);
            let hits = par_map(cfg.samples, |k| {
                let field = sample_potential(&cfg.dist, &domain, derive_seed(seed, &[k as u64]));
                match initial_length_event(&domain, &coupling, field.values(), cfg.energy, delta0) {
                    Ok(e) => Ok(Some(e)),
                    Err(Error::Singular { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            });
            let hits: Vec<Option<bool>> = hits.into_iter().collect::<Result<_>>()?;
            let k = hits.iter().filter(|h| **h == Some(true)).count();
            Ok(InitialLengthPoint {
                l,
                probability: proportion(k, cfg.samples, seed),
                wilson: wilson_interval(k, cfg.samples, 1.96),
                excluded: hits.iter().filter(|h| h.is_none()).count(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(n: usize, rate: f64, noise: f64, seed: u64) -> Vec<DecayProfile> {
        let mut rng = stream_rng(seed, 0);
        (0..n)
            .map(|k| DecayProfile {
                distances: (1..=40).collect(),
                log_g: (1..=40)
                    .map(|d| -rate * d as f64 + noise * (rng.random::<f64>() - 0.5))
                    .collect(),
                seed: k as u64,
            })
            .collect()
    }

    #[test]
    fn synthetic_rate_recovered() {
        let fit = rate_fit(&synthetic(60, 0.3, 0.5, 1), 0.5, 2).unwrap();
        assert!((fit.rate - 0.3).abs() < 0.01);
        assert!(fit.ci.0 <= 0.3 && 0.3 <= fit.ci.1);
        assert!(!fit.no_decay);
        let flat = rate_fit(&synthetic(60, -0.1, 0.0, 1), 1.0, 2).unwrap();
        assert!(flat.no_decay);
        assert!(rate_fit(&synthetic(10, 0.3, 0.1, 1), 0.5, 2).is_err());
    }

    #[test]
    fn free_transfer_exponent() {
        let s = VerticalCoupling::zero(1);
        let p = TransferParams {
            steps: 20_000,
            reortho: 10,
        };
        for e in [2.5, 3.0, -4.0] {
            let est = lyapunov_transfer(1, e, &s, None, p, 0).unwrap();
            let g = free_rate(e).unwrap();
            assert!(
                (est.gamma - g).abs() < 1e-3 * g,
                "{e}: {} vs {g}",
                est.gamma
            );
            assert!(est.pairs_hold(), "{est:?}");
        }
    }

    #[test]
    fn transfer_preconditions() {
        let s = VerticalCoupling::zero(1);
        let short = TransferParams {
            steps: 100,
            reortho: 10,
        };
        assert!(lyapunov_transfer(1, 3.0, &s, None, short, 0).is_err());
        let wild = PotentialDist::Cauchy(1e300);
        assert!(matches!(
            lyapunov_transfer(
                1,
                0.0,
                &s,
                Some(&wild),
                TransferParams {
                    steps: 10_000,
                    reortho: 10
                },
                0
            ),
            Err(Error::StepSize(_))
        ));
    }

    #[test]
    fn msa_reference_iteration() {
        let init = MsaState {
            l: 1e6,
            m: 0.01,
            width: 1,
            beta: 1.0,
            eps: 0.5,
        };
        let run = msa_recursion(init, 1e24, &AlphaSchedule::Constant(2.0)).unwrap();
        assert_eq!(run.alphas, vec![2.0, 2.0]);
        // direct iteration
        let mut m = 0.01;
        for l in [1e6f64, 1e12] {
            m = (1.0 - 6.0 * l.powf(-0.25)) * m - 2f64.ln() / l;
        }
        assert!((run.final_rate() - m).abs() < 1e-15);
        assert!(run.final_rate() >= 0.005 && run.budget_holds && run.final_holds);
    }

    #[test]
    fn msa_rejects_invalid_start() {
        let init = MsaState {
            l: 100.0,
            m: 1e-4,
            width: 4,
            beta: 1.0,
            eps: 0.1,
        };
        assert!(matches!(
            msa_recursion(init, 1e8, &AlphaSchedule::Constant(2.0)),
            Err(Error::Certification { .. })
        ));
    }

    #[test]
    fn free_band_center_never_decays() {
        let dom = StripDomain::new(0, 127, 1).unwrap();
        let s = VerticalCoupling::zero(1);
        assert!(!initial_length_event(&dom, &s, &[0.0; 128], 0.3, 0.5).unwrap());
    }
}
