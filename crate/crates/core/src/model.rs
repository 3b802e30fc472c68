//! Strip lattice, potential laws and the finite-volume operator.
//!
//! Sites of `[a,b] x {1..W}` are ordered lexicographically (column first,
//! then row), which makes the operator block tridiagonal with `W x W`
//! diagonal blocks `S + diag(V_{(n,1)}, .., V_{(n,W)})` and `-I` couplings
//! between neighbouring columns.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::greens::BlockTridiagonal;
use crate::linalg::{self, CMat};
use crate::rng::{self, SiteStream};

/// A lattice site `(column, row)` with rows numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub column: i64,
    pub row: usize,
}

impl Site {
    pub fn new(column: i64, row: usize) -> Self {
        Site { column, row }
    }
}

/// The box `[a,b] x {1..W}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripDomain {
    pub a: i64,
    pub b: i64,
    #[serde(rename = "W")]
    pub width: usize,
}

impl StripDomain {
    pub fn new(a: i64, b: i64, width: usize) -> Result<Self> {
        let d = StripDomain { a, b, width };
        d.validate()?;
        Ok(d)
    }

    /// `[a - l, a + l] x {1..W}`.
    pub fn centered(a: i64, l: i64, width: usize) -> Result<Self> {
        Self::new(a - l, a + l, width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b < self.a {
            return Err(Error::InvalidDomain(format!(
                "b = {} < a = {}",
                self.b, self.a
            )));
        }
        if self.width == 0 {
            return Err(Error::InvalidDomain("width must be positive".into()));
        }
        Ok(())
    }

    pub fn columns(&self) -> usize {
        (self.b - self.a + 1) as usize
    }

    /// Number of sites `|Λ|`.
    pub fn len(&self) -> usize {
        self.columns() * self.width
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, s: Site) -> bool {
        s.column >= self.a && s.column <= self.b && s.row >= 1 && s.row <= self.width
    }

    pub fn contains_domain(&self, other: &StripDomain) -> bool {
        other.width == self.width && other.a >= self.a && other.b <= self.b
    }

    /// Position of a site in the lexicographic enumeration.
    pub fn local_index(&self, s: Site) -> Option<usize> {
        if !self.contains(s) {
            return None;
        }
        Some((s.column - self.a) as usize * self.width + (s.row - 1))
    }

    pub fn site(&self, idx: usize) -> Site {
        Site {
            column: self.a + (idx / self.width) as i64,
            row: idx % self.width + 1,
        }
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.len()).map(move |k| self.site(k))
    }

    pub fn column_sites(&self, n: i64) -> impl Iterator<Item = Site> {
        let w = self.width;
        (1..=w).map(move |r| Site::new(n, r))
    }

    /// Pairs `(i, j)` with `i` in the left column and `j` in the right one,
    /// the index set of the boundary overlap sum.
    pub fn cross_pairs(&self) -> impl Iterator<Item = (Site, Site)> + '_ {
        let w = self.width;
        (1..=w)
            .flat_map(move |r| (1..=w).map(move |q| (Site::new(self.a, r), Site::new(self.b, q))))
    }
}

/// Hermitian vertical coupling `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalCoupling {
    matrix: CMat,
}

impl VerticalCoupling {
    pub fn new(matrix: CMat) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidParameter(
                "coupling must be square and non-empty".into(),
            ));
        }
        let defect = linalg::hermitian_defect(&matrix);
        let scale = 1.0 + linalg::norm_max(&matrix);
        if defect > 4.0 * f64::EPSILON * scale {
            return Err(Error::NotHermitian { defect });
        }
        Ok(VerticalCoupling { matrix })
    }

    pub fn zero(width: usize) -> Self {
        VerticalCoupling {
            matrix: CMat::zeros(width, width),
        }
    }

    /// Nearest-neighbour vertical hopping `-t` with open ends.
    pub fn hopping(width: usize, t: f64) -> Self {
        let mut m = CMat::zeros(width, width);
        for r in 0..width.saturating_sub(1) {
            m[(r, r + 1)] = Complex64::new(-t, 0.0);
            m[(r + 1, r)] = Complex64::new(-t, 0.0);
        }
        VerticalCoupling { matrix: m }
    }

    /// Random Hermitian matrix with entries of size `scale`.
    pub fn random(width: usize, scale: f64, seed: u64) -> Self {
        let mut rng = rng::stream_rng(seed, 0xc0u64);
        let mut m = CMat::zeros(width, width);
        for r in 0..width {
            m[(r, r)] = Complex64::new(scale * rng.random_range(-1.0..1.0), 0.0);
            for q in r + 1..width {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    * scale;
                m[(r, q)] = z;
                m[(q, r)] = z.conj();
            }
        }
        VerticalCoupling { matrix: m }
    }

    pub fn width(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// Operator norm `||S||`.
    pub fn norm(&self) -> f64 {
        linalg::op_norm(&self.matrix)
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }
}

/// Serializable description of a vertical coupling, resolved once the
/// strip width is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CouplingSpec {
    Zero,
    Hopping {
        t: f64,
    },
    Random {
        scale: f64,
        seed: u64,
    },
    /// Row-major `[re, im]` entries.
    Matrix {
        entries: Vec<Vec<[f64; 2]>>,
    },
}

impl Default for CouplingSpec {
    fn default() -> Self {
        CouplingSpec::Hopping { t: 1.0 }
    }
}

impl CouplingSpec {
    pub fn build(&self, width: usize) -> Result<VerticalCoupling> {
        match self {
            CouplingSpec::Zero => Ok(VerticalCoupling::zero(width)),
            CouplingSpec::Hopping { t } => Ok(VerticalCoupling::hopping(width, *t)),
            CouplingSpec::Random { scale, seed } => {
                Ok(VerticalCoupling::random(width, *scale, *seed))
            }
            CouplingSpec::Matrix { entries } => {
                if entries.len() != width || entries.iter().any(|r| r.len() != width) {
                    return Err(Error::DomainMismatch(format!(
                        "coupling matrix is not {width}x{width}"
                    )));
                }
                let m = CMat::from_fn(width, width, |r, q| {
                    Complex64::new(entries[r][q][0], entries[r][q][1])
                });
                VerticalCoupling::new(m)
            }
        }
    }
}

/// Single-site potential law with a bounded density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param", rename_all = "lowercase")]
pub enum PotentialDist {
    /// Uniform on `[-h, h]`.
    Uniform(f64),
    /// Cauchy with scale `γ`.
    Cauchy(f64),
}

impl PotentialDist {
    pub fn validate(&self) -> Result<()> {
        let p = match *self {
            PotentialDist::Uniform(h) => h,
            PotentialDist::Cauchy(g) => g,
        };
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "distribution parameter must be positive, got {p}"
            )));
        }
        Ok(())
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            PotentialDist::Uniform(h) => {
                if x.abs() <= h {
                    0.5 / h
                } else {
                    0.0
                }
            }
            PotentialDist::Cauchy(g) => 1.0 / (PI * g * (1.0 + (x / g).powi(2))),
        }
    }

    /// `A_0 = sup v`.
    pub fn a0(&self) -> f64 {
        match *self {
            PotentialDist::Uniform(h) => 0.5 / h,
            PotentialDist::Cauchy(g) => 1.0 / (PI * g),
        }
    }

    /// A constant `A_1` with `P(|V| >= T) <= A_1 / T` for all `T >= 1`.
    pub fn a1(&self) -> f64 {
        match *self {
            PotentialDist::Uniform(h) => {
                if h <= 1.0 {
                    0.0
                } else if h >= 2.0 {
                    h / 4.0
                } else {
                    (h - 1.0) / h
                }
            }
            PotentialDist::Cauchy(g) => 2.0 * g / PI * (1.0 + 1.0 / g),
        }
    }

    /// Exact `P(|V| >= t)`.
    pub fn tail(&self, t: f64) -> f64 {
        let t = t.abs();
        match *self {
            PotentialDist::Uniform(h) => ((h - t) / h).clamp(0.0, 1.0),
            PotentialDist::Cauchy(g) => 2.0 / PI * (g / t).atan(),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            PotentialDist::Uniform(h) => h * (2.0 * u - 1.0),
            PotentialDist::Cauchy(g) => g * (PI * (u - 0.5)).tan(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = rng::unit_open(rng.next_u64());
        self.quantile(u)
    }

    /// Infimum of the density over `[lo, hi]`; zero when the interval leaves
    /// the support.
    pub fn density_inf(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "degenerate interval [{lo}, {hi}]"
            )));
        }
        Ok(match *self {
            PotentialDist::Uniform(h) => {
                if lo >= -h && hi <= h {
                    0.5 / h
                } else {
                    0.0
                }
            }
            PotentialDist::Cauchy(_) => self.density(lo.abs().max(hi.abs())),
        })
    }
}

pub fn density_inf(dist: &PotentialDist, lo: f64, hi: f64) -> Result<f64> {
    dist.density_inf(lo, hi)
}

/// Potential values on a strip, stored in lexicographic site order.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    domain: StripDomain,
    values: Vec<f64>,
    seed: Option<u64>,
}

impl PotentialField {
    pub fn from_values(domain: StripDomain, values: Vec<f64>) -> Result<Self> {
        domain.validate()?;
        if values.len() != domain.len() {
            return Err(Error::DomainMismatch(format!(
                "{} potential values for {} sites",
                values.len(),
                domain.len()
            )));
        }
        Ok(PotentialField {
            domain,
            values,
            seed: None,
        })
    }

    pub fn constant(domain: StripDomain, v: f64) -> Self {
        PotentialField {
            domain,
            values: vec![v; domain.len()],
            seed: None,
        }
    }

    pub fn domain(&self) -> &StripDomain {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn value(&self, s: Site) -> Option<f64> {
        self.domain.local_index(s).map(|k| self.values[k])
    }

    pub fn set(&mut self, s: Site, v: f64) -> Result<()> {
        let k = self
            .domain
            .local_index(s)
            .ok_or_else(|| Error::DomainMismatch(format!("site {s:?} outside field")))?;
        self.values[k] = v;
        Ok(())
    }

    /// Values on a sub-strip, in that sub-strip's lexicographic order.
    pub fn restricted(&self, sub: &StripDomain) -> Result<Vec<f64>> {
        if !self.domain.contains_domain(sub) {
            return Err(Error::DomainMismatch(format!(
                "potential defined on {:?} does not cover {:?}",
                self.domain, sub
            )));
        }
        let off = (sub.a - self.domain.a) as usize * self.domain.width;
        Ok(self.values[off..off + sub.len()].to_vec())
    }
}

/// Column-0 based canonical counter of a site; shared by every domain so
/// that enlarging a box keeps the values on the overlap.
pub fn canonical_index(s: Site, width: usize) -> i64 {
    s.column * width as i64 + (s.row as i64 - 1)
}

/// Draws i.i.d. potentials. The value at a site depends only on
/// `(dist, seed, canonical index)`.
pub fn sample_potential(dist: &PotentialDist, domain: &StripDomain, seed: u64) -> PotentialField {
    let start = canonical_index(Site::new(domain.a, 1), domain.width);
    let mut stream = SiteStream::at(seed, start);
    let values = (0..domain.len())
        .map(|_| dist.quantile(stream.next_unit()))
        .collect();
    PotentialField {
        domain: *domain,
        values,
        seed: Some(seed),
    }
}

/// Assembles `H_Λ` for potentials `V` restricted to `domain`.
pub fn build_hamiltonian(
    domain: &StripDomain,
    coupling: &VerticalCoupling,
    potential: &PotentialField,
) -> Result<BlockTridiagonal> {
    let values = potential.restricted(domain)?;
    BlockTridiagonal::from_potentials(*domain, coupling, &values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_enumeration_is_lexicographic() {
        let d = StripDomain::new(-1, 1, 2).unwrap();
        let sites: Vec<Site> = d.sites().collect();
        assert_eq!(sites.len(), 6);
        for w in sites.windows(2) {
            assert!(w[0] < w[1]);
        }
        for (k, s) in sites.iter().enumerate() {
            assert_eq!(d.local_index(*s), Some(k));
        }
        assert_eq!(d.local_index(Site::new(2, 1)), None);
    }

    #[test]
    fn cross_pairs_cover_the_extreme_columns() {
        let d = StripDomain::new(2, 5, 3).unwrap();
        let pairs: Vec<_> = d.cross_pairs().collect();
        assert_eq!(pairs.len(), 9);
        assert!(pairs.iter().all(|(i, j)| i.column == 2 && j.column == 5));
    }

    #[test]
    fn invalid_domains_are_rejected() {
        assert!(StripDomain::new(3, 2, 1).is_err());
        assert!(StripDomain::new(0, 2, 0).is_err());
    }

    #[test]
    fn density_inf_examples() {
        let u = PotentialDist::Uniform(1.0);
        assert_eq!(u.density_inf(0.0, 0.5).unwrap(), 0.5);
        assert_eq!(u.density_inf(0.5, 2.0).unwrap(), 0.0);
        let c = PotentialDist::Cauchy(1.0);
        let e = std::f64::consts::E;
        let expect = 1.0 / (PI * (1.0 + e.powi(4)));
        assert!((c.density_inf(e, e * e).unwrap() - expect).abs() < 1e-15);
        assert!(u.density_inf(1.0, 1.0).is_err());
    }

    #[test]
    fn tail_constant_dominates_exact_tail() {
        for dist in [
            PotentialDist::Uniform(0.5),
            PotentialDist::Uniform(1.5),
            PotentialDist::Uniform(7.0),
            PotentialDist::Cauchy(0.3),
            PotentialDist::Cauchy(4.0),
        ] {
            for k in 0..200 {
                let t = 1.0 + k as f64 * 0.37;
                assert!(dist.tail(t) <= dist.a1() / t + 1e-15, "{dist:?} at {t}");
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_in_support() {
        let d = StripDomain::new(0, 9, 3).unwrap();
        let u = PotentialDist::Uniform(1.0);
        let f1 = sample_potential(&u, &d, 42);
        let f2 = sample_potential(&u, &d, 42);
        assert_eq!(f1, f2);
        assert!(f1.values().iter().all(|v| v.abs() <= 1.0));
        let f3 = sample_potential(&u, &d, 43);
        assert_ne!(f1.values(), f3.values());
    }

    #[test]
    fn enlarging_the_domain_keeps_shared_values() {
        let small = StripDomain::new(2, 4, 2).unwrap();
        let big = StripDomain::new(-3, 8, 2).unwrap();
        let c = PotentialDist::Cauchy(1.0);
        let fs = sample_potential(&c, &small, 9);
        let fb = sample_potential(&c, &big, 9);
        for s in small.sites() {
            assert_eq!(fs.value(s), fb.value(s));
        }
    }

    #[test]
    fn coupling_rejects_non_hermitian() {
        let m = CMat::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        assert!(matches!(
            VerticalCoupling::new(m),
            Err(Error::NotHermitian { .. })
        ));
        let r = VerticalCoupling::random(4, 1.0, 5);
        assert_eq!(linalg::hermitian_defect(r.matrix()), 0.0);
    }

    #[test]
    fn distribution_json_shape() {
        let s = serde_json::to_string(&PotentialDist::Uniform(0.5)).unwrap();
        assert_eq!(s, r#"{"kind":"uniform","param":0.5}"#);
        let c: PotentialDist = serde_json::from_str(r#"{"kind":"cauchy","param":2.0}"#).unwrap();
        assert_eq!(c, PotentialDist::Cauchy(2.0));
        let d: StripDomain = serde_json::from_str(r#"{"a":0,"b":3,"W":2}"#).unwrap();
        assert_eq!(d, StripDomain::new(0, 3, 2).unwrap());
    }
}
