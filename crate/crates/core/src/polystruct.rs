//! `f = det(H_Λ - E)` and the minors `g(i,j)` as polynomials in the
//! potentials: evaluation, column degrees, monomial coefficients, the
//! non-vanishing scan off the bad set, and Cartan-type sublevel estimates.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::{self, BlockTridiagonal};
use crate::linalg::{self, CMat, LogDet};
use crate::model::{sample_potential, PotentialDist, Site, StripDomain, VerticalCoupling};
use crate::rng::{derive_seed, stream_rng};
use crate::stats::{self, LinearFit, McEstimate};

/// Interpolation coefficients below this fraction of the largest one are
/// treated as zero when reading off a degree.
pub const DEGREE_TOLERANCE: f64 = 1e-7;

/// A determinant is treated as exactly zero when it is below this fraction
/// of Hadamard's bound.
pub const ZERO_RELATIVE_TO_HADAMARD: f64 = 1e-12;

/// Largest α-support accepted by [`monomial_coeff`].
pub const MAX_MONOMIAL_SUPPORT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolyKind {
    Determinant,
    /// `det H^{ij}`: row `i` and column `j` of `H - E` zeroed, entry `(i,j)`
    /// set to one. This is the `(i,j)` cofactor, so `G(j,i) = g(i,j) / f`.
    Minor {
        i: Site,
        j: Site,
    },
}

#[derive(Debug, Clone)]
pub struct PotentialPolynomial {
    pub domain: StripDomain,
    pub coupling: VerticalCoupling,
    pub energy: f64,
    pub kind: PolyKind,
}

impl PotentialPolynomial {
    pub fn determinant(domain: StripDomain, coupling: VerticalCoupling, energy: f64) -> Self {
        PotentialPolynomial {
            domain,
            coupling,
            energy,
            kind: PolyKind::Determinant,
        }
    }

    pub fn minor(
        domain: StripDomain,
        coupling: VerticalCoupling,
        energy: f64,
        i: Site,
        j: Site,
    ) -> Result<Self> {
        if !domain.contains(i) || !domain.contains(j) {
            return Err(Error::Argument(format!(
                "{i:?} or {j:?} outside {domain:?}"
            )));
        }
        Ok(PotentialPolynomial {
            domain,
            coupling,
            energy,
            kind: PolyKind::Minor { i, j },
        })
    }

    pub fn variables(&self) -> usize {
        self.domain.len()
    }

    /// The matrix whose determinant is the polynomial at `v`.
    pub fn matrix(&self, v: &[Complex64]) -> Result<CMat> {
        let h = BlockTridiagonal::from_complex_potentials(self.domain, &self.coupling, v)?;
        let mut m = h.to_dense();
        for k in 0..m.nrows() {
            m[(k, k)] -= self.energy;
        }
        if let PolyKind::Minor { i, j } = self.kind {
            let (ii, jj) = (
                self.domain.local_index(i).unwrap(),
                self.domain.local_index(j).unwrap(),
            );
            m.row_mut(ii).fill(Complex64::new(0.0, 0.0));
            m.column_mut(jj).fill(Complex64::new(0.0, 0.0));
            m[(ii, jj)] = Complex64::new(1.0, 0.0);
        }
        Ok(m)
    }

    pub fn eval(&self, v: &[Complex64]) -> Result<LogDet> {
        if v.iter().any(|z| z.re.is_nan() || z.im.is_nan()) {
            return Err(Error::InvalidParameter("NaN potential".into()));
        }
        Ok(linalg::log_det(&self.matrix(v)?))
    }

    pub fn eval_real(&self, v: &[f64]) -> Result<LogDet> {
        let z: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.eval(&z)
    }

    /// Evaluation together with `ln` of Hadamard's bound for the same matrix.
    fn eval_with_scale(&self, v: &[Complex64]) -> Result<(LogDet, f64)> {
        let m = self.matrix(v)?;
        Ok((linalg::log_det(&m), linalg::log_hadamard(&m)))
    }
}

fn is_negligible(d: &LogDet, log_hadamard: f64) -> bool {
    d.is_zero() || d.log_abs < log_hadamard + ZERO_RELATIVE_TO_HADAMARD.ln()
}

fn chebyshev_nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| (std::f64::consts::PI * (2 * k + 1) as f64 / (2 * n) as f64).cos())
        .collect()
}

/// Degree in `(V_k)_{k in {column}_W}` jointly: `V` on the column is
/// restricted to `t ξ` and the resulting univariate polynomial is
/// interpolated. `None` means every restriction vanished identically.
pub fn column_degree(p: &PotentialPolynomial, column: i64, seed: u64) -> Result<Option<usize>> {
    let dom = p.domain;
    if column < dom.a || column > dom.b {
        return Err(Error::Argument(format!("column {column} outside {dom:?}")));
    }
    if let PolyKind::Minor { i, j } = p.kind {
        let (lo, hi) = (i.column.min(j.column), i.column.max(j.column));
        if column <= lo || column >= hi {
            return Err(Error::Argument(format!(
                "column {column} must lie strictly between the columns of {i:?} and {j:?}"
            )));
        }
    }
    let w = dom.width;
    let nodes = chebyshev_nodes(w + 2);
    let rho = 3.0 + p.coupling.norm() + p.energy.abs();
    let vander = CMat::from_fn(nodes.len(), nodes.len(), |r, c| {
        Complex64::new(nodes[r].powi(c as i32), 0.0)
    });
    let lu = vander.lu();
    let col_range = {
        let off = (column - dom.a) as usize * w;
        off..off + w
    };
    let mut best: Option<usize> = None;
    for assignment in 0..3u64 {
        for direction in 0..3u64 {
            let mut rng = stream_rng(derive_seed(seed, &[assignment, direction]), 0);
            let mut v: Vec<Complex64> = (0..dom.len())
                .map(|_| Complex64::new(rng.random_range(-2.0..2.0), 0.0))
                .collect();
            let xi: Vec<f64> = (0..w)
                .map(|_| {
                    let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    s * rng.random_range(0.5..1.5)
                })
                .collect();
            let mut vals = Vec::with_capacity(nodes.len());
            let mut all_zero = true;
            for &x in &nodes {
                for (r, k) in col_range.clone().enumerate() {
                    v[k] = Complex64::new(rho * x * xi[r], 0.0);
                }
                let (d, lh) = p.eval_with_scale(&v)?;
                if !is_negligible(&d, lh) {
                    all_zero = false;
                }
                vals.push(d);
            }
            if all_zero {
                continue;
            }
            let top = vals
                .iter()
                .filter(|d| !d.is_zero())
                .map(|d| d.log_abs)
                .fold(f64::NEG_INFINITY, f64::max);
            let rhs = DVector::from_iterator(
                vals.len(),
                vals.iter().map(|d| {
                    if d.is_zero() {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.phase * (d.log_abs - top).exp()
                    }
                }),
            );
            let coeffs = lu
                .solve(&rhs)
                .ok_or_else(|| Error::Degenerate("interpolation system".into()))?;
            let cmax = coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let deg = coeffs
                .iter()
                .rposition(|z| z.norm() > DEGREE_TOLERANCE * cmax)
                .unwrap_or(0);
            best = Some(best.map_or(deg, |b| b.max(deg)));
        }
    }
    Ok(best)
}

fn complex_pairwise_sum(zs: &[Complex64]) -> Complex64 {
    let re: Vec<f64> = zs.iter().map(|z| z.re).collect();
    let im: Vec<f64> = zs.iter().map(|z| z.im).collect();
    Complex64::new(stats::pairwise_sum(&re), stats::pairwise_sum(&im))
}

/// Coefficient of `V^α` for `α ∈ {0,1}^Λ`, by inclusion-exclusion over the
/// vertices of the cube spanned by the support of `α` (all other potentials
/// at zero). Exact for multilinear polynomials.
pub fn monomial_coeff(p: &PotentialPolynomial, alpha: &[bool]) -> Result<Complex64> {
    if alpha.len() != p.variables() {
        return Err(Error::DomainMismatch(format!(
            "exponent vector of length {} for {} variables",
            alpha.len(),
            p.variables()
        )));
    }
    let support: Vec<usize> = (0..alpha.len()).filter(|&k| alpha[k]).collect();
    if support.len() > MAX_MONOMIAL_SUPPORT {
        return Err(Error::SizeGuard(format!(
            "monomial support {} exceeds {MAX_MONOMIAL_SUPPORT}",
            support.len()
        )));
    }
    let k = support.len();
    let terms: Vec<Result<Complex64>> = stats::par_map(1usize << k, |mask| {
        let mut v = vec![Complex64::new(0.0, 0.0); alpha.len()];
        for (b, &site) in support.iter().enumerate() {
            if mask >> b & 1 == 1 {
                v[site] = Complex64::new(1.0, 0.0);
            }
        }
        let sign = if (k - mask.count_ones() as usize).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        Ok(p.eval(&v)?.value() * sign)
    });
    let terms: Vec<Complex64> = terms.into_iter().collect::<Result<_>>()?;
    Ok(complex_pairwise_sum(&terms))
}

/// The exponent vector used to exhibit a `±1` coefficient of `g(i,j)`
/// when `i` and `j` share a row: every potential except those on the row of
/// `j` between the columns of `i` and `j`.
pub fn designated_monomial(domain: &StripDomain, i: Site, j: Site) -> Vec<bool> {
    let (lo, hi) = (i.column.min(j.column), i.column.max(j.column));
    domain
        .sites()
        .map(|l| l.column < lo || l.column > hi || l.row != j.row)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BadReason {
    BoundaryEntryExceedsT,
    RestrictedDeterminantZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BadSetWitness {
    pub column: i64,
    #[serde(rename = "T")]
    pub threshold: f64,
    pub reason: BadReason,
    pub trial: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NonvanishingReport {
    pub bad_fraction: f64,
    #[serde(rename = "T")]
    pub threshold: f64,
    /// Smallest `|f|` over all scanned good configurations; `ln` of it in
    /// `min_log_abs_f` for when it over- or underflows.
    pub min_abs_f: f64,
    pub min_log_abs_f: f64,
    /// Smallest `1 - ||S - E - Γ0 G Γ0^*|| / min |V_i|` over the scans.
    pub dominance_margin: f64,
    /// Number of `(V', V)` pairs scanned.
    pub samples: usize,
    pub trials: usize,
    pub good_trials: usize,
    pub scanned_trials: usize,
    /// Every scanned `|f|` was bounded below by the Neumann-series
    /// certificate.
    pub all_certified: bool,
    /// Fraction of draws that are bad at threshold `2T`.
    pub bad_fraction_double: f64,
    /// Mean of `1{bad at 2T} - 1{bad at T}/2`; zero when doubling `T`
    /// halves the bad fraction.
    pub halving: McEstimate,
    pub witnesses: Vec<BadSetWitness>,
    /// The scan had no good draw to work with.
    pub empty: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct ScanParams {
    /// Number of `V'` draws used for the bad-set fraction.
    pub trials: usize,
    /// Number of good draws that get a column scan.
    pub scanned: usize,
    /// Column configurations per scanned draw.
    pub scans: usize,
}

struct TrialOutcome {
    /// Largest boundary-adjacent entry of `G_{Λ0'}`, `inf` if singular.
    boundary_max: f64,
    singular: bool,
    scan: Option<ScanOutcome>,
}

struct ScanOutcome {
    min_log_abs_f: f64,
    min_margin: f64,
    certified: bool,
    count: usize,
}

fn piece_data(
    h: &BlockTridiagonal,
    piece: Option<StripDomain>,
    energy: f64,
    left: bool,
) -> Result<Option<(CMat, LogDet)>> {
    let Some(piece) = piece else {
        return Ok(None);
    };
    let sub = h.restrict(&piece)?;
    let cg = greens::corner_green(&sub, energy)?;
    let mut dense = sub.to_dense();
    for k in 0..dense.nrows() {
        dense[(k, k)] -= energy;
    }
    let block = if left { cg.g_bb } else { cg.g_aa };
    Ok(Some((block, linalg::log_det(&dense))))
}

fn scan_column(
    x: &CMat,
    log_det_rest: f64,
    w: usize,
    threshold: f64,
    scans: usize,
    seed: u64,
) -> ScanOutcome {
    let x_norm = linalg::op_norm(x);
    let base = 10.0 * w as f64 * threshold;
    let mut rng = stream_rng(seed, 1);
    let mut configs: Vec<Vec<Complex64>> = Vec::new();
    // adversarial: minimal modulus with phases chosen to cancel the diagonal
    configs.push(
        (0..w)
            .map(|r| {
                let d = x[(r, r)];
                if d.norm() == 0.0 {
                    Complex64::new(base, 0.0)
                } else {
                    -d / d.norm() * base
                }
            })
            .collect(),
    );
    for mask in 0..(1usize << w) {
        configs.push(
            (0..w)
                .map(|r| Complex64::new(if mask >> r & 1 == 1 { base } else { -base }, 0.0))
                .collect(),
        );
    }
    while configs.len() < scans {
        configs.push(
            (0..w)
                .map(|_| {
                    let mag = base * 100f64.powf(rng.random::<f64>());
                    Complex64::from_polar(mag, rng.random_range(0.0..std::f64::consts::TAU))
                })
                .collect(),
        );
    }
    configs.truncate(scans.max(1));
    let mut out = ScanOutcome {
        min_log_abs_f: f64::INFINITY,
        min_margin: f64::INFINITY,
        certified: true,
        count: 0,
    };
    for v in &configs {
        let min_v = v.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
        let ratio = x_norm / min_v;
        let margin = 1.0 - ratio;
        let mut m = x.clone();
        for r in 0..w {
            m[(r, r)] += v[r];
        }
        let ld = linalg::log_det(&m);
        let log_f = if ld.is_zero() {
            f64::NEG_INFINITY
        } else {
            ld.log_abs + log_det_rest
        };
        if ratio < 1.0 {
            let certificate: f64 =
                v.iter().map(|z| z.norm().ln()).sum::<f64>() + w as f64 * (1.0 - ratio).ln();
            // allow rounding in the LU determinant
            if ld.is_zero() || ld.log_abs < certificate - 1e-9 * (1.0 + certificate.abs()) {
                out.certified = false;
            }
        } else {
            out.certified = false;
        }
        out.min_log_abs_f = out.min_log_abs_f.min(log_f);
        out.min_margin = out.min_margin.min(margin);
        out.count += 1;
    }
    out
}

/// Samples `V'` off column `n`, classifies it against the bad set at
/// threshold `T` (and `2T`), and for good draws scans complex column
/// potentials with `min |V_i| >= 10 W T`.
#[allow(clippy::too_many_arguments)]
pub fn nonvanishing_scan(
    domain: &StripDomain,
    coupling: &VerticalCoupling,
    energy: f64,
    column: i64,
    threshold: f64,
    dist: &PotentialDist,
    params: ScanParams,
    seed: u64,
) -> Result<NonvanishingReport> {
    domain.validate()?;
    if column < domain.a || column > domain.b {
        return Err(Error::Argument(format!(
            "column {column} outside {domain:?}"
        )));
    }
    let floor = energy.abs().max(coupling.norm()).max(1.0);
    if !(threshold >= floor) {
        return Err(Error::Precondition(format!(
            "T = {threshold} must be at least max(|E|, ||S||, 1) = {floor}"
        )));
    }
    let w = domain.width;
    let left = (column > domain.a).then(|| StripDomain {
        a: domain.a,
        b: column - 1,
        width: w,
    });
    let right = (column < domain.b).then(|| StripDomain {
        a: column + 1,
        b: domain.b,
        width: w,
    });
    let col_block = {
        let zero = vec![0.0; w];
        BlockTridiagonal::from_potentials(StripDomain::new(column, column, w)?, coupling, &zero)?
            .diag()[0]
            .clone()
    };

    let outcomes: Vec<Result<TrialOutcome>> = stats::par_map(params.trials, |t| {
        let s = derive_seed(seed, &[t as u64]);
        let field = sample_potential(dist, domain, s);
        let h = greens::BlockTridiagonal::from_potentials(*domain, coupling, field.values())?;
        let pieces = (
            piece_data(&h, left, energy, true),
            piece_data(&h, right, energy, false),
        );
        let (l, r) = match pieces {
            (Ok(l), Ok(r)) => (l, r),
            (Err(Error::Singular { .. }), _) | (_, Err(Error::Singular { .. })) => {
                return Ok(TrialOutcome {
                    boundary_max: f64::INFINITY,
                    singular: true,
                    scan: None,
                })
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let mut boundary_max: f64 = 0.0;
        let mut b = CMat::zeros(w, w);
        let mut log_det_rest = 0.0;
        for (blk, ld) in [l, r].into_iter().flatten() {
            boundary_max = boundary_max.max(linalg::norm_max(&blk));
            b += blk;
            log_det_rest += ld.log_abs;
        }
        let mut x = &col_block - b;
        for k in 0..w {
            x[(k, k)] -= energy;
        }
        let scan = (boundary_max <= threshold)
            .then(|| scan_column(&x, log_det_rest, w, threshold, params.scans, s));
        Ok(TrialOutcome {
            boundary_max,
            singular: false,
            scan,
        })
    });
    let outcomes: Vec<TrialOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let bad_at = |t: f64, o: &TrialOutcome| o.singular || o.boundary_max > t;
    let n = outcomes.len();
    let bad = outcomes.iter().filter(|o| bad_at(threshold, o)).count();
    let bad2 = outcomes
        .iter()
        .filter(|o| bad_at(2.0 * threshold, o))
        .count();
    let d: Vec<f64> = outcomes
        .iter()
        .map(|o| {
            let b2 = if bad_at(2.0 * threshold, o) { 1.0 } else { 0.0 };
            let b1 = if bad_at(threshold, o) { 1.0 } else { 0.0 };
            b2 - 0.5 * b1
        })
        .collect();
    let witnesses = outcomes
        .iter()
        .enumerate()
        .filter(|(_, o)| bad_at(threshold, o))
        .map(|(trial, o)| BadSetWitness {
            column,
            threshold,
            reason: if o.singular {
                BadReason::RestrictedDeterminantZero
            } else {
                BadReason::BoundaryEntryExceedsT
            },
            trial,
        })
        .collect();

    let mut min_log = f64::INFINITY;
    let mut margin = f64::INFINITY;
    let mut certified = true;
    let mut samples = 0;
    let mut scanned = 0;
    for scan in outcomes
        .iter()
        .filter_map(|o| o.scan.as_ref())
        .take(params.scanned)
    {
        min_log = min_log.min(scan.min_log_abs_f);
        margin = margin.min(scan.min_margin);
        certified &= scan.certified;
        samples += scan.count;
        scanned += 1;
    }
    let good = n - bad;
    Ok(NonvanishingReport {
        bad_fraction: bad as f64 / n.max(1) as f64,
        threshold,
        min_abs_f: if scanned == 0 {
            f64::NAN
        } else {
            min_log.exp()
        },
        min_log_abs_f: min_log,
        dominance_margin: if scanned == 0 { f64::NAN } else { margin },
        samples,
        trials: n,
        good_trials: good,
        scanned_trials: scanned,
        all_certified: certified && scanned > 0,
        bad_fraction_double: bad2 as f64 / n.max(1) as f64,
        halving: stats::batch_mean(&d, seed),
        witnesses,
        empty: scanned == 0,
    })
}

/// Anything whose `log |f|` can be evaluated at a real point.
pub trait LogModulus: Sync {
    fn dim(&self) -> usize;
    fn log_abs(&self, x: &[f64]) -> f64;
}

impl LogModulus for PotentialPolynomial {
    fn dim(&self) -> usize {
        self.variables()
    }

    fn log_abs(&self, x: &[f64]) -> f64 {
        self.eval_real(x).map_or(f64::NAN, |d| d.log_abs)
    }
}

/// `Σ_α a_α x^α` with complex coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitPolynomial {
    pub dim: usize,
    pub terms: Vec<(Complex64, Vec<u32>)>,
}

impl ExplicitPolynomial {
    pub fn new(dim: usize, terms: Vec<(Complex64, Vec<u32>)>) -> Result<Self> {
        if terms.iter().any(|(_, e)| e.len() != dim) {
            return Err(Error::DomainMismatch(
                "exponent length differs from dimension".into(),
            ));
        }
        Ok(ExplicitPolynomial { dim, terms })
    }

    /// Dense polynomial of total degree `degree` in `dim` variables with
    /// coefficients uniform in the unit disk, rescaled so the largest has
    /// modulus one.
    pub fn random_dense(dim: usize, degree: u32, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0);
        let mut exps: Vec<Vec<u32>> = vec![vec![]];
        for _ in 0..dim {
            exps = exps
                .into_iter()
                .flat_map(|e| {
                    let used: u32 = e.iter().sum();
                    (0..=degree - used).map(move |k| {
                        let mut next = e.clone();
                        next.push(k);
                        next
                    })
                })
                .collect();
        }
        let mut terms: Vec<(Complex64, Vec<u32>)> = exps
            .into_iter()
            .map(|e| {
                let r = rng.random::<f64>().sqrt();
                let z = Complex64::from_polar(r, rng.random_range(0.0..std::f64::consts::TAU));
                (z, e)
            })
            .collect();
        let top = terms.iter().map(|(z, _)| z.norm()).fold(0.0, f64::max);
        for (z, _) in terms.iter_mut() {
            *z /= top;
        }
        ExplicitPolynomial { dim, terms }
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(a, e)| {
                a * e
                    .iter()
                    .zip(x)
                    .map(|(&k, &xi)| xi.powi(k as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

impl LogModulus for ExplicitPolynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_abs(&self, x: &[f64]) -> f64 {
        self.eval(x).norm().ln()
    }
}

/// `log Σ` as a function of real potentials on a fixed strip.
#[derive(Debug, Clone)]
pub struct LogSigmaFn {
    pub domain: StripDomain,
    pub coupling: VerticalCoupling,
    pub energy: f64,
}

impl LogModulus for LogSigmaFn {
    fn dim(&self) -> usize {
        self.domain.len()
    }

    fn log_abs(&self, x: &[f64]) -> f64 {
        // E in the spectrum: Σ blows up, which is never in a sublevel set
        greens::log_sigma_of(&self.domain, &self.coupling, x, self.energy).unwrap_or(f64::INFINITY)
    }
}

/// Uniform point in the Euclidean ball of radius `r` in `R^dim`.
pub fn sample_ball<R: Rng>(rng: &mut R, dim: usize, r: f64) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            let radius = r * rng.random::<f64>().powf(1.0 / dim as f64);
            return g.into_iter().map(|x| x * radius / norm).collect();
        }
    }
}

fn sampled_values(f: &dyn LogModulus, r: f64, samples: usize, seed: u64) -> Vec<f64> {
    let chunk = 1024;
    let chunks = samples.div_ceil(chunk);
    stats::par_map(chunks, |c| {
        let mut rng = stream_rng(derive_seed(seed, &[c as u64]), 0);
        let count = chunk.min(samples - c * chunk);
        (0..count)
            .map(|_| f.log_abs(&sample_ball(&mut rng, f.dim(), r)))
            .collect::<Vec<f64>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Sampled `sup_{||z|| <= radius} log |f(z)|` over real points.
pub fn sampled_sup(f: &dyn LogModulus, radius: f64, samples: usize, seed: u64) -> Result<f64> {
    let vals = sampled_values(f, radius, samples, seed);
    let finite: Vec<f64> = vals.into_iter().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(Error::Degenerate(
            "function vanishes at every sample".into(),
        ));
    }
    Ok(finite.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CartanCurve {
    pub r0: f64,
    /// Threshold scale, by default the sampled sup of `log |f|` over the
    /// ball of radius `20 R0`.
    pub m: f64,
    pub c: f64,
    pub h: Vec<f64>,
    /// Fraction of the ball where `log |f| <= -c H M`.
    pub fraction: Vec<f64>,
    pub counts: Vec<usize>,
    pub samples: usize,
    /// Fit of `ln fraction` against `H` over grid points with enough hits;
    /// `None` when fewer than two such points exist.
    pub fit: Option<LinearFit>,
    /// Fitted slope, or `-inf` when the sublevel set is empty from some
    /// grid point on and there are too few points to fit.
    pub slope: f64,
    /// Smallest sampled `log |f|` on the ball.
    pub min_value: f64,
}

/// Minimum hit count for a grid point to enter the slope fit.
pub const CARTAN_MIN_COUNT: usize = 20;

/// Monte Carlo estimate of `mes{||x|| <= R0 : log|f(x)| <= -c H M} / mes(ball)`
/// along an `H` grid, with `M` the sampled sup over the ball of radius
/// `20 R0`.
pub fn cartan_sublevel(
    f: &dyn LogModulus,
    r0: f64,
    h_grid: &[f64],
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<CartanCurve> {
    if !(r0 > 0.0) || !(c > 0.0) {
        return Err(Error::InvalidParameter("R0 and c must be positive".into()));
    }
    let m = sampled_sup(f, 20.0 * r0, samples.min(200_000), derive_seed(seed, &[1]))?;
    sublevel_curve(f, r0, m, h_grid, c, samples, seed)
}

/// `|Λ| max(1, log|E|, log||S||) log R`, the a-priori scale for `log Σ` on
/// the ball of radius `R >= e`.
pub fn log_sigma_scale(f: &LogSigmaFn, r: f64) -> Result<f64> {
    if !(r >= std::f64::consts::E) {
        return Err(Error::Precondition(format!("R = {r} must be at least e")));
    }
    let l = 1f64.max(f.energy.abs().ln()).max(f.coupling.norm().ln());
    Ok(f.domain.len() as f64 * l * r.ln())
}

/// Like [`cartan_sublevel`] with a given scale `M`.
pub fn sublevel_curve(
    f: &dyn LogModulus,
    r0: f64,
    m: f64,
    h_grid: &[f64],
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<CartanCurve> {
    if !(r0 > 0.0) || !(c > 0.0) {
        return Err(Error::InvalidParameter("R0 and c must be positive".into()));
    }
    if !(m > 0.0) {
        return Err(Error::Degenerate(format!(
            "threshold scale M = {m}, the sublevel thresholds need M > 0"
        )));
    }
    let vals = sampled_values(f, r0, samples, derive_seed(seed, &[2]));
    let counts: Vec<usize> = h_grid
        .iter()
        .map(|&h| vals.iter().filter(|&&v| v <= -c * h * m).count())
        .collect();
    let fraction: Vec<f64> = counts.iter().map(|&k| k as f64 / samples as f64).collect();
    let (mut xs, mut ys, mut sig) = (vec![], vec![], vec![]);
    for (k, &h) in h_grid.iter().enumerate() {
        if counts[k] >= CARTAN_MIN_COUNT && counts[k] < samples {
            let p = fraction[k];
            xs.push(h);
            ys.push(p.ln());
            sig.push(((1.0 - p) / counts[k] as f64).sqrt());
        }
    }
    let fit = stats::wls_fit(&xs, &ys, &sig).ok();
    let slope = match &fit {
        Some(f) => f.slope,
        None if counts.contains(&0) => f64::NEG_INFINITY,
        None => f64::NAN,
    };
    Ok(CartanCurve {
        r0,
        m,
        c,
        h: h_grid.to_vec(),
        fraction,
        counts,
        samples,
        fit,
        slope,
        min_value: vals.iter().cloned().fold(f64::INFINITY, f64::min),
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentBound {
    /// Number of variables.
    pub n: usize,
    /// Upper bound for `sup log|f|` on the ball.
    pub m0: f64,
    /// `dμ <= B0^N dm`.
    pub b0: f64,
    pub r0: f64,
    pub c2: f64,
}

impl MomentBound {
    pub fn value(&self, s: f64) -> f64 {
        let l = 1f64.max(self.b0.ln()).max(self.r0.ln());
        (self.c2 * self.m0.max(1.0) * self.n as f64 * l).powf(s)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MomentCheck {
    pub s: f64,
    pub estimate: McEstimate,
    pub bound: f64,
    pub holds: bool,
}

/// `∫ |log|f||^s dμ` from samples of `log|f|` drawn from `μ`, against the
/// layer-cake bound `(C2 M0 N max(1, ln B0, ln R0))^s`.
pub fn moment_from_cartan(
    log_values: &[f64],
    s: f64,
    bound: MomentBound,
    seed: u64,
) -> Result<MomentCheck> {
    if !(s >= 1.0) {
        return Err(Error::Precondition(format!(
            "moment order s = {s} must be at least 1"
        )));
    }
    let xs: Vec<f64> = log_values.iter().map(|v| v.abs().powf(s)).collect();
    let estimate = stats::batch_mean(&xs, seed);
    let b = bound.value(s);
    Ok(MomentCheck {
        s,
        estimate,
        bound: b,
        holds: estimate.mean <= b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn dom(l: i64, w: usize) -> StripDomain {
        StripDomain::new(0, l - 1, w).unwrap()
    }

    #[test]
    fn two_site_determinant_and_minor() {
        let f = PotentialPolynomial::determinant(dom(2, 1), VerticalCoupling::zero(1), 0.0);
        for (v1, v2) in [(0.5, 3.0), (-2.0, 1.5)] {
            let val = f.eval_real(&[v1, v2]).unwrap().value();
            assert!((val - c(v1 * v2 - 1.0)).norm() < 1e-13);
        }
        let g = PotentialPolynomial::minor(
            dom(2, 1),
            VerticalCoupling::zero(1),
            0.0,
            Site::new(0, 1),
            Site::new(1, 1),
        )
        .unwrap();
        for v in [[0.0, 0.0], [3.0, -7.0]] {
            assert!((g.eval_real(&v).unwrap().value() - c(1.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn free_chain_of_three_is_singular_at_zero() {
        let f = PotentialPolynomial::determinant(dom(3, 1), VerticalCoupling::zero(1), 0.0);
        assert!(f.eval_real(&[0.0; 3]).unwrap().value().norm() < 1e-14);
    }

    #[test]
    fn nan_rejected() {
        let f = PotentialPolynomial::determinant(dom(2, 1), VerticalCoupling::zero(1), 0.0);
        assert!(f.eval_real(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn degrees_small_cases() {
        let s = VerticalCoupling::random(2, 1.0, 3);
        let f = PotentialPolynomial::determinant(dom(4, 2), s.clone(), 0.3);
        assert_eq!(column_degree(&f, 1, 9).unwrap(), Some(2));
        let g = PotentialPolynomial::minor(dom(4, 2), s, 0.3, Site::new(0, 2), Site::new(3, 2))
            .unwrap();
        assert_eq!(column_degree(&g, 2, 9).unwrap(), Some(1));
        let g1 = PotentialPolynomial::minor(
            dom(4, 1),
            VerticalCoupling::zero(1),
            0.0,
            Site::new(0, 1),
            Site::new(3, 1),
        )
        .unwrap();
        assert_eq!(column_degree(&g1, 1, 9).unwrap(), Some(0));
        assert!(column_degree(&g1, 0, 9).is_err());
    }

    #[test]
    fn zero_minor_has_no_degree() {
        let g = PotentialPolynomial::minor(
            dom(3, 2),
            VerticalCoupling::zero(2),
            0.2,
            Site::new(0, 1),
            Site::new(2, 2),
        )
        .unwrap();
        assert_eq!(column_degree(&g, 1, 1).unwrap(), None);
    }

    #[test]
    fn determinant_is_monic() {
        let f =
            PotentialPolynomial::determinant(dom(3, 2), VerticalCoupling::random(2, 1.0, 1), 0.4);
        let coeff = monomial_coeff(&f, &[true; 6]).unwrap();
        assert!((coeff - c(1.0)).norm() < 1e-9);
        let too_big = PotentialPolynomial::determinant(dom(11, 2), VerticalCoupling::zero(2), 0.0);
        assert!(matches!(
            monomial_coeff(&too_big, &[true; 22]),
            Err(Error::SizeGuard(_))
        ));
    }

    #[test]
    fn designated_coefficient_is_unit() {
        let d = dom(4, 2);
        let (i, j) = (Site::new(0, 1), Site::new(3, 1));
        let g =
            PotentialPolynomial::minor(d, VerticalCoupling::random(2, 1.0, 5), -0.7, i, j).unwrap();
        let alpha = designated_monomial(&d, i, j);
        assert_eq!(alpha.iter().filter(|a| !**a).count(), 4);
        let coeff = monomial_coeff(&g, &alpha).unwrap();
        assert!((coeff.norm() - 1.0).abs() < 1e-9 && coeff.im.abs() < 1e-9);
    }

    #[test]
    fn cofactor_matches_green_entry() {
        let d = dom(3, 2);
        let s = VerticalCoupling::random(2, 1.0, 8);
        let v = crate::model::sample_potential(&PotentialDist::Uniform(2.0), &d, 4);
        let h = BlockTridiagonal::from_potentials(d, &s, v.values()).unwrap();
        let g = greens::dense_green(&h, 0.1).unwrap();
        let f = PotentialPolynomial::determinant(d, s.clone(), 0.1)
            .eval_real(v.values())
            .unwrap()
            .value();
        for (a, b) in [(0usize, 5usize), (1, 4), (3, 3)] {
            let (i, j) = (d.site(a), d.site(b));
            let m = PotentialPolynomial::minor(d, s.clone(), 0.1, i, j)
                .unwrap()
                .eval_real(v.values())
                .unwrap()
                .value();
            assert!((m / f - g[(b, a)]).norm() < 1e-9 * g[(b, a)].norm().max(1e-3));
        }
    }

    #[test]
    fn sublevel_of_identity_polynomial() {
        let p = ExplicitPolynomial::new(1, vec![(c(1.0), vec![1])]).unwrap();
        let curve = cartan_sublevel(&p, 1.0, &[0.2, 0.4, 0.6, 0.8], 1.0, 400_000, 3).unwrap();
        for (k, &h) in curve.h.iter().enumerate() {
            let exact = (-h * curve.m).exp();
            let se = (exact * (1.0 - exact) / curve.samples as f64).sqrt();
            assert!((curve.fraction[k] - exact).abs() < 4.0 * se);
        }
        let fit = curve.fit.unwrap();
        assert!((fit.slope + curve.m).abs() < 4.0 * fit.slope_stderr);
        assert!((curve.m - 20f64.ln()).abs() < 0.05);
    }

    #[test]
    fn zero_polynomial_rejected() {
        let p = ExplicitPolynomial::new(1, vec![(c(0.0), vec![1])]).unwrap();
        assert!(matches!(
            cartan_sublevel(&p, 1.0, &[1.0], 1.0, 1000, 0),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn log_moment_of_identity() {
        let mut rng = stream_rng(4, 0);
        let xs: Vec<f64> = (0..200_000)
            .map(|_| rng.random_range(-1.0f64..1.0).abs().ln())
            .collect();
        let bound = MomentBound {
            n: 1,
            m0: 1.0,
            b0: 0.5,
            r0: 1.0,
            c2: 10.0,
        };
        let chk = moment_from_cartan(&xs, 2.0, bound, 0).unwrap();
        assert!((chk.estimate.mean - 2.0).abs() < 4.0 * chk.estimate.stderr);
        assert!(chk.holds);
        let ones = vec![0.0; 10];
        assert_eq!(
            moment_from_cartan(&ones, 1.0, bound, 0)
                .unwrap()
                .estimate
                .mean,
            0.0
        );
    }

    #[test]
    fn scalar_nonvanishing_scan() {
        let d = dom(5, 1);
        let rep = nonvanishing_scan(
            &d,
            &VerticalCoupling::zero(1),
            0.0,
            2,
            10.0,
            &PotentialDist::Uniform(1.0),
            ScanParams {
                trials: 200,
                scanned: 50,
                scans: 20,
            },
            1,
        )
        .unwrap();
        assert!(rep.min_abs_f > 0.0);
        assert!(rep.dominance_margin >= 0.4);
        assert!(rep.all_certified);
        let json = serde_json::to_value(&rep).unwrap();
        for key in ["badFraction", "T", "minAbsF", "dominanceMargin", "samples"] {
            assert!(json.get(key).is_some(), "{key}");
        }
        assert!(nonvanishing_scan(
            &d,
            &VerticalCoupling::zero(1),
            3.0,
            2,
            2.0,
            &PotentialDist::Uniform(1.0),
            ScanParams {
                trials: 1,
                scanned: 1,
                scans: 1
            },
            1
        )
        .is_err());
    }
}
