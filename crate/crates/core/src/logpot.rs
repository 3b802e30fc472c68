//! One-dimensional logarithmic potentials `u_μ(x) = ∫ log|x - ζ| dμ(ζ)` of
//! atomic measures, their variances under the uniform law on an interval,
//! and checks of the elementary variance inequalities.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens;
use crate::model::{PotentialDist, StripDomain, VerticalCoupling};
use crate::quad;
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{self, McEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub zeta: Complex64,
    pub weight: f64,
}

/// Finitely many weighted point masses with total mass one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<(Complex64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("measure has no atoms".into()));
        }
        if atoms
            .iter()
            .any(|(z, w)| !(*w > 0.0) || !w.is_finite() || !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidParameter(
                "atoms need finite positions and positive weights".into(),
            ));
        }
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "total mass {total} is not one"
            )));
        }
        Ok(AtomicMeasure {
            atoms: atoms
                .into_iter()
                .map(|(zeta, weight)| Atom { zeta, weight })
                .collect(),
        })
    }

    /// Rescales positive weights to total mass one.
    pub fn normalized(atoms: Vec<(Complex64, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        Self::new(atoms.into_iter().map(|(z, w)| (z, w / total)).collect())
    }

    pub fn dirac(zeta: Complex64) -> Self {
        AtomicMeasure {
            atoms: vec![Atom { zeta, weight: 1.0 }],
        }
    }

    /// Equal weights on the given points (e.g. the roots of a polynomial).
    pub fn uniform_on(points: &[Complex64]) -> Result<Self> {
        let w = 1.0 / points.len() as f64;
        Self::normalized(points.iter().map(|&z| (z, w)).collect())
    }

    /// `n` atoms with modulus uniform in `[r_min, r_max]`, uniform argument
    /// and random positive weights.
    pub fn random_in_annulus(n: usize, r_min: f64, r_max: f64, seed: u64) -> Result<Self> {
        if n == 0 || !(r_min >= 0.0) || !(r_max >= r_min) || !r_max.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "need n >= 1 and 0 <= r_min <= r_max, got n={n}, [{r_min}, {r_max}]"
            )));
        }
        let mut rng = stream_rng(seed, 0);
        let atoms = (0..n)
            .map(|_| {
                let r = r_min + (r_max - r_min) * rng.random::<f64>();
                let t = std::f64::consts::TAU * rng.random::<f64>();
                (Complex64::from_polar(r, t), 0.05 + rng.random::<f64>())
            })
            .collect();
        Self::normalized(atoms)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        AtomicMeasure {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    zeta: f(a.zeta),
                    weight: a.weight,
                })
                .collect(),
        }
    }

    /// `μ^{(c)}(A) = μ(c A)`: atoms divided by `c`.
    pub fn rescaled(&self, c: f64) -> Self {
        self.map(|z| z / c)
    }

    /// Image under `ζ ↦ -conj(ζ)`, the reflection matching `x ↦ -x`.
    pub fn reflected(&self) -> Self {
        self.map(|z| -z.conj())
    }

    pub fn max_modulus(&self) -> f64 {
        self.atoms.iter().map(|a| a.zeta.norm()).fold(0.0, f64::max)
    }

    pub fn min_modulus(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.zeta.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Normalized restriction to the atoms satisfying `keep`.
    pub fn restricted(&self, keep: impl Fn(Complex64) -> bool) -> Option<Self> {
        let kept: Vec<(Complex64, f64)> = self
            .atoms
            .iter()
            .filter(|a| keep(a.zeta))
            .map(|a| (a.zeta, a.weight))
            .collect();
        if kept.is_empty() {
            None
        } else {
            Self::normalized(kept).ok()
        }
    }
}

/// `Σ w_j log|x - ζ_j|`; `-inf` when `x` is a real atom.
pub fn u_mu(x: f64, mu: &AtomicMeasure) -> f64 {
    mu.atoms
        .iter()
        .map(|a| a.weight * (Complex64::new(x, 0.0) - a.zeta).norm().ln())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalVariance {
    pub m0: f64,
    pub m1: f64,
    pub value: f64,
    pub mean: f64,
    /// Quadrature error estimate for `value`.
    pub abs_tolerance: f64,
    /// A real atom sits exactly on an endpoint; the integral is still
    /// finite and the substitution at the endpoint handles it.
    pub endpoint_atom: bool,
}

fn breakpoints(mu: &AtomicMeasure, m0: f64, m1: f64) -> Vec<f64> {
    let mut pts = vec![m0, m1];
    for a in &mu.atoms {
        let (re, im) = (a.zeta.re, a.zeta.im.abs());
        for p in [re, re - im, re + im] {
            if p > m0 && p < m1 {
                pts.push(p);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Integral of `g(u_μ(x))` over `[m0, m1]`, split at the real parts of
/// nearby atoms, with the endpoint substitution on every piece.
fn integrate_u(
    mu: &AtomicMeasure,
    pts: &[f64],
    g: impl Fn(f64) -> f64,
    abs_tol_density: f64,
    rel_tol: f64,
) -> quad::Quadrature {
    let mut total = quad::Quadrature {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    for w in pts.windows(2) {
        let q = quad::integrate_endpoint_singular(
            |x| g(u_mu(x, mu)),
            w[0],
            w[1],
            abs_tol_density * (w[1] - w[0]),
            rel_tol,
        );
        total.value += q.value;
        total.error += q.error;
        total.evaluations += q.evaluations;
    }
    total
}

/// Variance of `u_μ` under the uniform law on `[m0, m1]`.
pub fn var_uniform(mu: &AtomicMeasure, m0: f64, m1: f64) -> Result<IntervalVariance> {
    if !(m0 >= 0.0) || !(m1 > m0) || !m1.is_finite() {
        return Err(Error::Precondition(format!(
            "need m1 > m0 >= 0, got [{m0}, {m1}]"
        )));
    }
    let len = m1 - m0;
    let pts = breakpoints(mu, m0, m1);
    let first = integrate_u(mu, &pts, |u| u, 1e-14, 1e-13);
    let mean = first.value / len;
    let second = integrate_u(mu, &pts, |u| (u - mean) * (u - mean), 0.0, 1e-11);
    let endpoint_atom = mu
        .atoms
        .iter()
        .any(|a| a.zeta.im == 0.0 && (a.zeta.re == m0 || a.zeta.re == m1));
    let mean_err = first.error / len;
    Ok(IntervalVariance {
        m0,
        m1,
        value: second.value / len,
        mean,
        abs_tolerance: second.error / len + mean_err * mean_err + 1e-15 * (1.0 + mean * mean),
        endpoint_atom,
    })
}

/// `E_{[0,M]}[u_μ^2]`.
pub fn second_moment(mu: &AtomicMeasure, m: f64) -> Result<(f64, f64)> {
    if !(m > 0.0) {
        return Err(Error::Precondition(format!("need M > 0, got {m}")));
    }
    let pts = breakpoints(mu, 0.0, m);
    let q = integrate_u(mu, &pts, |u| u * u, 0.0, 1e-11);
    Ok((q.value / m, q.error / m))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    /// `var_{[M0,M1]}(u_μ)`.
    pub lhs: f64,
    /// `var_{[M0/M1,1]}(u_{μ^{(M1)}})`.
    pub rhs: f64,
    pub residual: f64,
    pub tolerance: f64,
}

pub fn check_scaling(mu: &AtomicMeasure, m0: f64, m1: f64) -> Result<ScalingCheck> {
    let lhs = var_uniform(mu, m0, m1)?;
    let rhs = var_uniform(&mu.rescaled(m1), m0 / m1, 1.0)?;
    Ok(ScalingCheck {
        lhs: lhs.value,
        rhs: rhs.value,
        residual: (lhs.value - rhs.value).abs(),
        tolerance: lhs.abs_tolerance + rhs.abs_tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "kebab-case")]
pub enum BoundScenario {
    /// `E_{[0,M]}[u^2]` for `μ` supported in `|ζ| <= R`.
    SecondMoment { m: f64, r: f64 },
    /// `|var_{[M0,M1]} - 1|` for `μ` supported in `|ζ| <= R`,
    /// `M1 >= 2 M0 >= 4 R`.
    NearLog { r: f64, m0: f64, m1: f64 },
    /// `var_{[M0,M1]}` for `μ` supported in `|ζ| >= R`,
    /// `0 <= 2 M0 <= M1 <= R/2`.
    FarAtoms { r: f64, m0: f64, m1: f64 },
}

impl BoundScenario {
    pub fn label(&self) -> &'static str {
        match self {
            BoundScenario::SecondMoment { .. } => "second-moment",
            BoundScenario::NearLog { .. } => "near-log",
            BoundScenario::FarAtoms { .. } => "far-atoms",
        }
    }

    pub fn params(&self) -> String {
        match *self {
            BoundScenario::SecondMoment { m, r } => format!("M={m:e};R={r:e}"),
            BoundScenario::NearLog { r, m0, m1 } | BoundScenario::FarAtoms { r, m0, m1 } => {
                format!("R={r:e};M0={m0:e};M1={m1:e}")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub scenario: BoundScenario,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `rhs / lhs`, infinite when `lhs = 0`.
    pub slack: f64,
}

/// Atoms exactly on the circle `|ζ| = R` are accepted in every scenario:
/// both sides are continuous in the atom positions.
pub fn check_bounds(mu: &AtomicMeasure, scenario: BoundScenario) -> Result<BoundReport> {
    let fail = |msg: String| Err(Error::Precondition(msg));
    let (lhs, rhs, tol) = match scenario {
        BoundScenario::SecondMoment { m, r } => {
            if !(m > 0.0) || !(r > 0.0) {
                return fail(format!("need M > 0 and R > 0, got M={m}, R={r}"));
            }
            if mu.max_modulus() > r {
                return fail(format!("atom with |ζ| = {} > R = {r}", mu.max_modulus()));
            }
            let (val, err) = second_moment(mu, m)?;
            let a = m.min(1.0);
            let rhs = (4.0 * a * (a.ln() - 1.0).powi(2) + m * (m + r).ln().powi(2)) / m;
            (val, rhs, err)
        }
        BoundScenario::NearLog { r, m0, m1 } => {
            if !(r > 0.0) {
                return fail(format!("need R > 0, got {r}"));
            }
            if !(m1 >= 2.0 * m0) || !(2.0 * m0 >= 4.0 * r) {
                return fail(format!(
                    "need M1 >= 2 M0 >= 4 R, got M0={m0}, M1={m1}, R={r}"
                ));
            }
            if mu.max_modulus() > r {
                return fail(format!("atom with |ζ| = {} > R = {r}", mu.max_modulus()));
            }
            let v = var_uniform(mu, m0, m1)?;
            let rhs = 1e4 * ((r / m1).powf(0.2) + (m0 / m1).sqrt());
            ((v.value - 1.0).abs(), rhs, v.abs_tolerance)
        }
        BoundScenario::FarAtoms { r, m0, m1 } => {
            if !(r > 0.0) {
                return fail(format!("need R > 0, got {r}"));
            }
            if !(m0 >= 0.0) || !(2.0 * m0 <= m1) || !(m1 <= r / 2.0) || !(m1 > 0.0) {
                return fail(format!(
                    "need 0 <= 2 M0 <= M1 <= R/2, got M0={m0}, M1={m1}, R={r}"
                ));
            }
            if mu.min_modulus() < r {
                return fail(format!("atom with |ζ| = {} < R = {r}", mu.min_modulus()));
            }
            let v = var_uniform(mu, m0, m1)?;
            (v.value, 8.0 * (m1 / r).powi(2), v.abs_tolerance)
        }
    };
    Ok(BoundReport {
        scenario,
        lhs,
        rhs,
        holds: lhs <= rhs + tol,
        slack: if lhs == 0.0 { f64::INFINITY } else { rhs / lhs },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicSelection {
    /// `var_{[M0, 2^k A0]}` for `k = 1..=m`.
    pub variances: Vec<f64>,
    pub sum: f64,
    pub sum_holds: bool,
    /// Index `k` (1-based) and scale of the smallest variance.
    pub k: usize,
    pub scale: f64,
    pub var: f64,
    /// `var < 1 + 10^5 / m` at the chosen scale.
    pub found: bool,
}

pub fn dyadic_select(mu: &AtomicMeasure, m0: f64, a0: f64, m: usize) -> Result<DyadicSelection> {
    if m == 0 {
        return Err(Error::Precondition("need m >= 1".into()));
    }
    if !(a0 > 0.0) || !(m0 >= 0.0) || a0 < m0 {
        return Err(Error::Precondition(format!(
            "need A0 >= M0 >= 0 and A0 > 0, got A0={a0}, M0={m0}"
        )));
    }
    let variances: Vec<f64> = (1..=m)
        .map(|k| var_uniform(mu, m0, 2f64.powi(k as i32) * a0).map(|v| v.value))
        .collect::<Result<_>>()?;
    let sum = stats::pairwise_sum(&variances);
    let (idx, var) = variances
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    Ok(DyadicSelection {
        sum,
        sum_holds: sum < m as f64 + 1e5,
        k: idx + 1,
        scale: 2f64.powi(idx as i32 + 1) * a0,
        var,
        found: var < 1.0 + 1e5 / m as f64,
        variances,
    })
}

/// One inequality `smaller <= larger`, checked up to `3 * stderr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactCheck {
    pub name: String,
    pub smaller: f64,
    pub larger: f64,
    pub stderr: f64,
    pub holds: bool,
}

impl FactCheck {
    fn new(name: &str, smaller: f64, larger: f64, stderr: f64) -> Self {
        FactCheck {
            name: name.to_string(),
            smaller,
            larger,
            stderr,
            holds: smaller <= larger + 3.0 * stderr + 1e-12 * larger.abs().max(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceFactsReport {
    pub checks: Vec<FactCheck>,
}

impl VarianceFactsReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// Sample sizes for [`variance_facts_suite`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FactsSizes {
    /// Samples for the synthetic checks and for `var(log Σ)`.
    pub samples: usize,
    /// Outer and inner sizes of the nested conditional expectations.
    pub outer: usize,
    pub inner: usize,
    /// Frozen values of one column for the sectional variances.
    pub sections: usize,
}

impl Default for FactsSizes {
    fn default() -> Self {
        FactsSizes {
            samples: 200_000,
            outer: 10_000,
            inner: 1000,
            sections: 16,
        }
    }
}

fn pop_var(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    stats::sample_variance(xs) * (n - 1.0) / n
}

fn pop_second(xs: &[f64]) -> f64 {
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    stats::mean(&sq)
}

fn uniform_draws(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Strip used for the `log Σ` instances: `W = 1`, `L = 6`, `E = 0`,
/// uniform potentials on `[-1, 1]`.
struct LogSigmaSetup {
    domain: StripDomain,
    coupling: VerticalCoupling,
    dist: PotentialDist,
}

impl LogSigmaSetup {
    fn new() -> Self {
        LogSigmaSetup {
            domain: StripDomain::new(0, 5, 1).unwrap(),
            coupling: VerticalCoupling::zero(1),
            dist: PotentialDist::Uniform(1.0),
        }
    }

    fn eval(&self, v: &[f64]) -> Option<f64> {
        greens::log_sigma_of(&self.domain, &self.coupling, v, 0.0).ok()
    }

    /// Independent draws of `log Σ`, one stream per sample; `frozen`
    /// pins one site's potential and `first` replaces the law of site 0.
    fn draws(
        &self,
        n: usize,
        seed: u64,
        frozen: Option<(usize, f64)>,
        first: Option<(f64, f64)>,
    ) -> Vec<f64> {
        let len = self.domain.len();
        stats::par_map(n, |k| {
            let mut rng = stream_rng(derive_seed(seed, &[k as u64]), 0);
            let mut v: Vec<f64> = (0..len).map(|_| self.dist.sample(&mut rng)).collect();
            if let Some((lo, hi)) = first {
                v[0] = lo + (hi - lo) * rng.random::<f64>();
            }
            if let Some((site, val)) = frozen {
                v[site] = val;
            }
            self.eval(&v)
        })
        .into_iter()
        .flatten()
        .collect()
    }
}

/// Monte Carlo checks of the elementary variance inequalities on synthetic
/// variables and on `log Σ` for a short `W = 1` strip.
pub fn variance_facts_suite(seed: u64, sizes: FactsSizes) -> Result<VarianceFactsReport> {
    let n = sizes.samples;
    let mut checks = Vec::new();
    let xi: Vec<Vec<f64>> = (0..3)
        .map(|k| uniform_draws(n, derive_seed(seed, &[1, k]), -1.0, 1.0))
        .collect();

    // triangle inequality and the difference bound hold exactly for the
    // empirical measure
    let x: Vec<f64> = (0..n).map(|k| xi[0][k] + xi[1][k] * xi[2][k]).collect();
    let y: Vec<f64> = (0..n).map(|k| xi[0][k].powi(3) - xi[2][k]).collect();
    let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
    let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    let gap = (pop_var(&x).sqrt() - pop_var(&y).sqrt()).abs();
    checks.push(FactCheck::new(
        "triangle-plus",
        gap,
        pop_var(&sum).sqrt(),
        0.0,
    ));
    checks.push(FactCheck::new(
        "triangle-minus",
        gap,
        pop_var(&diff).sqrt(),
        0.0,
    ));
    checks.push(FactCheck::new(
        "variance-difference",
        (pop_var(&x) - pop_var(&y)).abs(),
        pop_second(&diff).sqrt() * (pop_second(&x).sqrt() + pop_second(&y).sqrt()),
        0.0,
    ));

    // conditional variances: for ξ_i uniform on [-1,1],
    // E[X | ξ_i] = ξ_i for both X below, so the sum is exactly 1
    let additive: Vec<f64> = (0..n).map(|k| xi[0][k] + xi[1][k] + xi[2][k]).collect();
    let va = stats::variance_estimate(&additive, seed);
    checks.push(FactCheck::new(
        "bessel-additive-lower",
        1.0,
        va.mean,
        va.stderr,
    ));
    checks.push(FactCheck::new(
        "bessel-additive-upper",
        va.mean,
        1.0,
        va.stderr,
    ));
    let mixed: Vec<f64> = (0..n)
        .map(|k| xi[0][k] + xi[1][k] + xi[2][k] + xi[0][k] * xi[1][k])
        .collect();
    let vm = stats::variance_estimate(&mixed, seed);
    checks.push(FactCheck::new("bessel-synthetic", 1.0, vm.mean, vm.stderr));

    // minorization: uniform[-1,1] >= (1/2) uniform[0,1]
    let sq: Vec<f64> = xi[0].iter().map(|v| v * v).collect();
    let half = uniform_draws(n, derive_seed(seed, &[2]), 0.0, 1.0);
    let sq0: Vec<f64> = half.iter().map(|v| v * v).collect();
    let v_mu = stats::variance_estimate(&sq, seed);
    let v_mu0 = stats::variance_estimate(&sq0, seed);
    checks.push(FactCheck::new(
        "minorization-synthetic",
        0.5 * v_mu0.mean,
        v_mu.mean,
        (0.25 * v_mu0.stderr.powi(2) + v_mu.stderr.powi(2)).sqrt(),
    ));

    // Cauchy-Schwarz form over three discrete measures and two variables
    let (lhs, rhs) = sum_of_variances_example();
    checks.push(FactCheck::new("sum-of-variances", lhs, rhs, 0.0));

    // sectional variances: X = ω (1 + ω'), ω, ω' uniform on [0,1];
    // var(X | ω') = (1 + ω')^2 / 12 has essential infimum 1/12
    let w1 = uniform_draws(n, derive_seed(seed, &[3]), 0.0, 1.0);
    let w2 = uniform_draws(n, derive_seed(seed, &[4]), 0.0, 1.0);
    let prod: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a * (1.0 + b)).collect();
    let vp = stats::variance_estimate(&prod, seed);
    checks.push(FactCheck::new(
        "essinf-synthetic",
        1.0 / 12.0,
        vp.mean,
        vp.stderr,
    ));

    // the same inequalities for log Σ
    let setup = LogSigmaSetup::new();
    let len = setup.domain.len();
    let base = setup.draws(n, derive_seed(seed, &[10]), None, None);
    let vx = stats::variance_estimate(&base, seed);

    let mut total = 0.0;
    let mut total_se2 = 0.0;
    for site in 0..len {
        let outer_seed = derive_seed(seed, &[11, site as u64]);
        let frozen = uniform_draws(sizes.outer, outer_seed, -1.0, 1.0);
        let rows: Vec<(f64, f64)> = stats::par_map(sizes.outer, |o| {
            let inner = setup.draws(
                sizes.inner,
                derive_seed(outer_seed, &[o as u64]),
                Some((site, frozen[o])),
                None,
            );
            (
                stats::mean(&inner),
                stats::sample_variance(&inner) / inner.len() as f64,
            )
        });
        let h: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let noise: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let vh = stats::variance_estimate(&h, seed);
        // nested estimates carry the inner sampling noise on top of var(h)
        let corrected = vh.mean - stats::mean(&noise);
        checks.push(FactCheck::new(
            &format!("conditional-variance-column-{site}"),
            corrected,
            vx.mean,
            (vh.stderr.powi(2) + vx.stderr.powi(2)).sqrt(),
        ));
        total += corrected;
        total_se2 += vh.stderr.powi(2);
    }
    checks.push(FactCheck::new(
        "bessel-log-sigma",
        total,
        vx.mean,
        (total_se2 + vx.stderr.powi(2)).sqrt(),
    ));

    // minorization on log Σ: changing the law of V_0 from uniform[-1,1]
    // to uniform[0,1] multiplies the density by at most 2
    let shifted = setup.draws(n, derive_seed(seed, &[12]), None, Some((0.0, 1.0)));
    let vs = stats::variance_estimate(&shifted, seed);
    checks.push(FactCheck::new(
        "minorization-log-sigma",
        0.5 * vs.mean,
        vx.mean,
        (0.25 * vs.stderr.powi(2) + vx.stderr.powi(2)).sqrt(),
    ));

    // sectional variances of log Σ with the middle column frozen
    let per_section = (n / sizes.sections.max(1)).max(100);
    let mut smallest = f64::INFINITY;
    let mut smallest_se = 0.0;
    for s in 0..sizes.sections {
        let val = -1.0 + (2 * s + 1) as f64 / sizes.sections as f64;
        let draws = setup.draws(
            per_section,
            derive_seed(seed, &[13, s as u64]),
            Some((len / 2, val)),
            None,
        );
        let v = stats::variance_estimate(&draws, seed);
        if v.mean < smallest {
            smallest = v.mean;
            smallest_se = v.stderr;
        }
    }
    checks.push(FactCheck::new(
        "essinf-log-sigma",
        smallest,
        vx.mean,
        (smallest_se.powi(2) + vx.stderr.powi(2)).sqrt(),
    ));

    Ok(VarianceFactsReport { checks })
}

/// Exact evaluation of `Σ_i var_{μ_i}(β_1 X_1 + β_2 X_2)` and
/// `(Σ|β_j|)^2 max_j Σ_i var_{μ_i}(X_j)` on a four-point space.
pub fn sum_of_variances_example() -> (f64, f64) {
    let x1 = [1.0, -2.0, 0.5, 3.0];
    let x2 = [0.0, 1.5, -1.0, 2.0];
    let mus = [
        [0.1, 0.2, 0.3, 0.4],
        [0.25, 0.25, 0.25, 0.25],
        [0.7, 0.1, 0.1, 0.1],
    ];
    let beta = [0.7, -1.3];
    let var = |mu: &[f64; 4], x: &[f64]| {
        let m: f64 = mu.iter().zip(x).map(|(p, v)| p * v).sum();
        mu.iter()
            .zip(x)
            .map(|(p, v)| p * (v - m).powi(2))
            .sum::<f64>()
    };
    let comb: Vec<f64> = (0..4).map(|k| beta[0] * x1[k] + beta[1] * x2[k]).collect();
    let lhs: f64 = mus.iter().map(|mu| var(mu, &comb)).sum();
    let s1: f64 = mus.iter().map(|mu| var(mu, &x1)).sum();
    let s2: f64 = mus.iter().map(|mu| var(mu, &x2)).sum();
    let b: f64 = beta.iter().map(|b: &f64| b.abs()).sum();
    (lhs, b * b * s1.max(s2))
}

/// Summary of a `log Σ` sample, used by the harness.
pub fn log_sigma_variance(n: usize, seed: u64) -> McEstimate {
    let setup = LogSigmaSetup::new();
    stats::variance_estimate(&setup.draws(n, seed, None, None), seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Closed form of `var_{[m,1]}(log)` from the antiderivatives of
    /// `log` and `log^2`.
    fn var_log(m: f64) -> f64 {
        let i1 = |a: f64| if a == 0.0 { 0.0 } else { a * (a.ln() - 1.0) };
        let i2 = |a: f64| {
            if a == 0.0 {
                0.0
            } else {
                a * ((a.ln() - 1.0).powi(2) + 1.0)
            }
        };
        let len = 1.0 - m;
        let e1 = (i1(1.0) - i1(m)) / len;
        let e2 = (i2(1.0) - i2(m)) / len;
        e2 - e1 * e1
    }

    #[test]
    fn potential_examples() {
        assert!((u_mu(3.0, &AtomicMeasure::dirac(c(0.0, 0.0))) - 3f64.ln()).abs() < 1e-15);
        let sym = AtomicMeasure::new(vec![(c(-1.0, 0.0), 0.5), (c(1.0, 0.0), 0.5)]).unwrap();
        assert_eq!(u_mu(0.0, &sym), 0.0);
        let roots =
            AtomicMeasure::uniform_on(&[c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)])
                .unwrap();
        assert!((u_mu(2.0, &roots) - 0.25 * 15f64.ln()).abs() < 1e-14);
        assert_eq!(u_mu(1.0, &sym), f64::NEG_INFINITY);
    }

    #[test]
    fn measure_validation() {
        assert!(AtomicMeasure::new(vec![(c(0.0, 0.0), 0.5)]).is_err());
        assert!(AtomicMeasure::new(vec![(c(0.0, 0.0), -1.0), (c(1.0, 0.0), 2.0)]).is_err());
        assert!(AtomicMeasure::new(vec![]).is_err());
    }

    #[test]
    fn variance_of_log_on_unit_interval() {
        let v = var_uniform(&AtomicMeasure::dirac(c(0.0, 0.0)), 0.0, 1.0).unwrap();
        assert!((v.value - 1.0).abs() < 1e-10, "{}", v.value);
        assert!((v.mean + 1.0).abs() < 1e-11);
        assert!(v.endpoint_atom);
    }

    #[test]
    fn variance_of_log_matches_closed_form() {
        for m in [1e-6, 0.01, 0.3, 0.9] {
            let v = var_uniform(&AtomicMeasure::dirac(c(0.0, 0.0)), m, 1.0).unwrap();
            assert!((v.value - var_log(m)).abs() < 1e-9, "m={m}");
        }
    }

    #[test]
    fn interior_real_atom() {
        // u = log|x - 1/2| on [0,1] is log|y| on [-1/2, 1/2]: same law as
        // log(y) on [0, 1/2], variance 1
        let v = var_uniform(&AtomicMeasure::dirac(c(0.5, 0.0)), 0.0, 1.0).unwrap();
        assert!((v.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn far_atom_bound() {
        let mu = AtomicMeasure::dirac(c(1e6, 0.0));
        let v = var_uniform(&mu, 1.0, 2.0).unwrap();
        assert!(v.value <= 8.0 * (2.0f64 / 1e6).powi(2));
        // |ζ| = 1e6: u(x) ≈ log 1e6 - x/1e6, var ≈ 1/(12 · 1e12)
        assert!((v.value - 1.0 / 12e12).abs() < 1e-3 / 12e12);
    }

    #[test]
    fn scaling_identity_examples() {
        let d = AtomicMeasure::dirac(c(0.0, 0.0));
        let chk = check_scaling(&d, 0.5, 4.0).unwrap();
        assert!((chk.lhs - var_log(0.125)).abs() < 1e-9);
        assert!(chk.residual < 1e-9);
        let chk0 = check_scaling(&d, 0.0, 7.0).unwrap();
        assert!(chk0.residual < 1e-9);
    }

    #[test]
    fn reflection_symmetry() {
        let mu = AtomicMeasure::new(vec![(c(1.5, 0.3), 0.6), (c(-0.2, -2.0), 0.4)]).unwrap();
        let a = var_uniform(&mu, 0.5, 3.0).unwrap();
        // the reflected measure on the reflected interval, shifted back to
        // nonnegative abscissae by translating the atoms
        let shifted = mu.reflected().map(|z| z + 3.5);
        let b = var_uniform(&shifted, 0.5, 3.0).unwrap();
        assert!((a.value - b.value).abs() < 1e-9);
    }

    #[test]
    fn bound_examples() {
        let d = AtomicMeasure::dirac(c(0.0, 0.0));
        let r = check_bounds(&d, BoundScenario::SecondMoment { m: 1.0, r: 1e-9 }).unwrap();
        assert!((r.lhs - 2.0).abs() < 1e-9 && (r.rhs - 4.0).abs() < 1e-8 && r.holds);

        let near = check_bounds(
            &d,
            BoundScenario::NearLog {
                r: 1.0,
                m0: 2.0,
                m1: 1e6,
            },
        )
        .unwrap();
        assert!(near.holds && near.slack > 10.0);

        let ring = AtomicMeasure::uniform_on(&[c(4.0, 0.0), c(0.0, 4.0), c(-4.0, 0.0)]).unwrap();
        let far = check_bounds(
            &ring,
            BoundScenario::FarAtoms {
                r: 4.0,
                m0: 0.0,
                m1: 2.0,
            },
        )
        .unwrap();
        assert!((far.rhs - 2.0).abs() < 1e-15 && far.holds);

        assert!(matches!(
            check_bounds(
                &d,
                BoundScenario::NearLog {
                    r: 1.0,
                    m0: 1.0,
                    m1: 10.0
                }
            ),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            check_bounds(
                &ring,
                BoundScenario::FarAtoms {
                    r: 4.0,
                    m0: 0.0,
                    m1: 3.0
                }
            ),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn dyadic_selection_for_dirac() {
        let sel = dyadic_select(&AtomicMeasure::dirac(c(0.0, 0.0)), 0.0, 1.0, 10).unwrap();
        assert!(sel.found && sel.sum_holds);
        assert!(sel.variances.iter().all(|v| (v - 1.0).abs() < 1e-8));
        assert!(dyadic_select(&AtomicMeasure::dirac(c(0.0, 0.0)), 2.0, 1.0, 10).is_err());
    }

    #[test]
    fn sum_of_variances_holds() {
        let (l, r) = sum_of_variances_example();
        assert!(l <= r);
    }
}
