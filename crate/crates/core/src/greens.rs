//! Finite-volume Green's functions `G = (H_Λ - E)^{-1}`.
//!
//! The structured solver runs a left-to-right and a right-to-left sweep of
//! partial Schur complements over the columns of the strip. Each sweep step
//! inverts one `W x W` block, so the four corner blocks of `G` cost
//! `O(L W^3)`. Products that decay exponentially in the strip length are
//! carried as a normalized matrix plus a log-scale.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, LogDet};
use crate::model::{Site, StripDomain, VerticalCoupling};

/// `H_Λ` in block form: diagonal blocks `S + diag(V_n)`, couplings `-I`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    domain: StripDomain,
    diag: Vec<CMat>,
}

impl BlockTridiagonal {
    pub fn from_blocks(domain: StripDomain, diag: Vec<CMat>) -> Result<Self> {
        domain.validate()?;
        if diag.len() != domain.columns() {
            return Err(Error::DomainMismatch(format!(
                "{} diagonal blocks for {} columns",
                diag.len(),
                domain.columns()
            )));
        }
        if diag
            .iter()
            .any(|d| d.nrows() != domain.width || d.ncols() != domain.width)
        {
            return Err(Error::DomainMismatch(
                "diagonal block has wrong size".into(),
            ));
        }
        Ok(BlockTridiagonal { domain, diag })
    }

    pub fn from_potentials(
        domain: StripDomain,
        coupling: &VerticalCoupling,
        values: &[f64],
    ) -> Result<Self> {
        let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::from_complex_potentials(domain, coupling, &complex)
    }

    /// Complex potentials are allowed here because the determinant and the
    /// minors are studied as polynomials over `C^Λ`.
    pub fn from_complex_potentials(
        domain: StripDomain,
        coupling: &VerticalCoupling,
        values: &[Complex64],
    ) -> Result<Self> {
        domain.validate()?;
        let w = domain.width;
        if coupling.width() != w {
            return Err(Error::DomainMismatch(format!(
                "coupling width {} for strip width {}",
                coupling.width(),
                w
            )));
        }
        if values.len() != domain.len() {
            return Err(Error::DomainMismatch(format!(
                "{} potential values for {} sites",
                values.len(),
                domain.len()
            )));
        }
        if values
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite potential value".into()));
        }
        let diag = values
            .chunks(w)
            .map(|col| {
                let mut block = coupling.matrix().clone();
                for (r, v) in col.iter().enumerate() {
                    block[(r, r)] += v;
                }
                block
            })
            .collect();
        Ok(BlockTridiagonal { domain, diag })
    }

    pub fn domain(&self) -> &StripDomain {
        &self.domain
    }

    pub fn width(&self) -> usize {
        self.domain.width
    }

    pub fn columns(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[CMat] {
        &self.diag
    }

    pub fn block(&self, column: i64) -> Option<&CMat> {
        if column < self.domain.a || column > self.domain.b {
            return None;
        }
        Some(&self.diag[(column - self.domain.a) as usize])
    }

    pub fn to_dense(&self) -> CMat {
        let w = self.width();
        let n = self.domain.len();
        let mut m = CMat::zeros(n, n);
        for (k, block) in self.diag.iter().enumerate() {
            m.view_mut((k * w, k * w), (w, w)).copy_from(block);
            if k + 1 < self.diag.len() {
                for r in 0..w {
                    m[(k * w + r, (k + 1) * w + r)] = Complex64::new(-1.0, 0.0);
                    m[((k + 1) * w + r, k * w + r)] = Complex64::new(-1.0, 0.0);
                }
            }
        }
        m
    }

    /// Reads the diagonal blocks back from a dense matrix, checking that it
    /// has the strip structure exactly.
    pub fn from_dense(domain: StripDomain, m: &CMat) -> Result<Self> {
        domain.validate()?;
        let n = domain.len();
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::DomainMismatch("dense matrix has wrong size".into()));
        }
        let w = domain.width;
        let diag: Vec<CMat> = (0..domain.columns())
            .map(|k| m.view((k * w, k * w), (w, w)).into_owned())
            .collect();
        let candidate = BlockTridiagonal { domain, diag };
        if candidate.to_dense() != *m {
            return Err(Error::DomainMismatch(
                "dense matrix is not block tridiagonal with -I couplings".into(),
            ));
        }
        Ok(candidate)
    }

    /// The Dirichlet restriction `P H P` to a sub-strip.
    pub fn restrict(&self, sub: &StripDomain) -> Result<Self> {
        if !self.domain.contains_domain(sub) {
            return Err(Error::DomainMismatch(format!(
                "{sub:?} is not a sub-strip of {:?}",
                self.domain
            )));
        }
        let off = (sub.a - self.domain.a) as usize;
        Ok(BlockTridiagonal {
            domain: *sub,
            diag: self.diag[off..off + sub.columns()].to_vec(),
        })
    }

    pub fn is_hermitian(&self) -> bool {
        self.diag.iter().all(|d| linalg::hermitian_defect(d) == 0.0)
    }

    /// Cheap upper bound on `||H||`.
    pub fn norm_bound(&self) -> f64 {
        let coupling = if self.diag.len() > 1 { 2.0 } else { 0.0 };
        self.diag.iter().map(linalg::norm1).fold(0.0, f64::max) + coupling
    }

    fn shifted_block(&self, k: usize, energy: f64) -> CMat {
        let mut x = self.diag[k].clone();
        for r in 0..self.width() {
            x[(r, r)] -= energy;
        }
        x
    }

    fn row_scale(&self, k: usize, energy: f64) -> f64 {
        linalg::norm1(&self.shifted_block(k, energy)) + 2.0
    }
}

/// Dense reference inverse of `H - E`.
pub fn dense_green(h: &BlockTridiagonal, energy: f64) -> Result<CMat> {
    let mut m = h.to_dense();
    for k in 0..m.nrows() {
        m[(k, k)] -= energy;
    }
    linalg::invert_checked(&m).map(|(g, _)| g)
}

/// Corner blocks of `G` between the extreme columns `a` and `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct CornerGreens {
    pub g_aa: CMat,
    pub g_ab: CMat,
    pub g_ba: CMat,
    pub g_bb: CMat,
    pub energy: f64,
    pub domain: StripDomain,
    /// `ln ||g_ab||_F`, tracked through the sweep so it survives underflow
    /// of `g_ab` itself on long strips.
    log_norm_ab: f64,
}

impl CornerGreens {
    pub fn new(
        domain: StripDomain,
        energy: f64,
        g_aa: CMat,
        g_ab: CMat,
        g_ba: CMat,
        g_bb: CMat,
    ) -> Result<Self> {
        let w = domain.width;
        for m in [&g_aa, &g_ab, &g_ba, &g_bb] {
            if m.nrows() != w || m.ncols() != w {
                return Err(Error::DomainMismatch("corner block has wrong size".into()));
            }
        }
        let log_norm_ab = linalg::log_frobenius(&g_ab);
        Ok(CornerGreens {
            g_aa,
            g_ab,
            g_ba,
            g_bb,
            energy,
            domain,
            log_norm_ab,
        })
    }

    pub fn log_norm_ab(&self) -> f64 {
        self.log_norm_ab
    }
}

#[derive(Serialize, Deserialize)]
struct CornerGreensJson {
    domain: StripDomain,
    energy: f64,
    g_aa: Vec<Vec<[f64; 2]>>,
    g_ab: Vec<Vec<[f64; 2]>>,
    g_ba: Vec<Vec<[f64; 2]>>,
    g_bb: Vec<Vec<[f64; 2]>>,
}

fn block_to_rows(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| [m[(r, c)].re, m[(r, c)].im])
                .collect()
        })
        .collect()
}

fn rows_to_block(rows: &[Vec<[f64; 2]>]) -> std::result::Result<CMat, String> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err("corner block is not square".into());
    }
    Ok(CMat::from_fn(n, n, |r, c| {
        Complex64::new(rows[r][c][0], rows[r][c][1])
    }))
}

impl Serialize for CornerGreens {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CornerGreensJson {
            domain: self.domain,
            energy: self.energy,
            g_aa: block_to_rows(&self.g_aa),
            g_ab: block_to_rows(&self.g_ab),
            g_ba: block_to_rows(&self.g_ba),
            g_bb: block_to_rows(&self.g_bb),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CornerGreens {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = CornerGreensJson::deserialize(d)?;
        let conv = |rows: &[Vec<[f64; 2]>]| rows_to_block(rows).map_err(D::Error::custom);
        CornerGreens::new(
            j.domain,
            j.energy,
            conv(&j.g_aa)?,
            conv(&j.g_ab)?,
            conv(&j.g_ba)?,
            conv(&j.g_bb)?,
        )
        .map_err(D::Error::custom)
    }
}

fn sweep_inverse(h: &BlockTridiagonal, k: usize, energy: f64, x: &CMat) -> Result<CMat> {
    linalg::invert_with_scale(x, h.row_scale(k, energy))
        .map(|(inv, _)| inv)
        .map_err(|e| match e {
            Error::Singular { condition, .. } => Error::Singular {
                condition,
                position: Some(k),
            },
            other => other,
        })
}

/// `G_{[a..n]}(n,n)` for every column `n` (left-connected blocks).
fn left_sweep(h: &BlockTridiagonal, energy: f64, upto: usize) -> Result<Vec<CMat>> {
    let mut out: Vec<CMat> = Vec::with_capacity(upto);
    for k in 0..upto {
        let mut x = h.shifted_block(k, energy);
        if let Some(prev) = out.last() {
            x -= prev;
        }
        out.push(sweep_inverse(h, k, energy, &x)?);
    }
    Ok(out)
}

/// `G_{[n..b]}(n,n)` for columns `from..L` (right-connected blocks), indexed
/// by column offset; entries below `from` are left empty.
fn right_sweep(h: &BlockTridiagonal, energy: f64, from: usize) -> Result<Vec<CMat>> {
    let l = h.columns();
    let mut out = vec![CMat::zeros(0, 0); l];
    for k in (from..l).rev() {
        let mut x = h.shifted_block(k, energy);
        if k + 1 < l {
            x -= &out[k + 1];
        }
        out[k] = sweep_inverse(h, k, energy, &x)?;
    }
    Ok(out)
}

/// Structured corner solver.
pub fn corner_green(h: &BlockTridiagonal, energy: f64) -> Result<CornerGreens> {
    let l = h.columns();
    let lefts = left_sweep(h, energy, l)?;
    let rights = right_sweep(h, energy, 0)?;

    // G_{[a..n]}(a,n) = G_{[a..n-1]}(a,n-1) G_{[a..n]}(n,n), and the mirror
    // image for G(n,a).
    let mut p = lefts[0].clone();
    let mut log_p = linalg::normalize_in_place(&mut p);
    let mut q = lefts[0].clone();
    let mut log_q = linalg::normalize_in_place(&mut q);
    for blk in lefts.iter().skip(1) {
        p = &p * blk;
        log_p += linalg::normalize_in_place(&mut p);
        q = blk * &q;
        log_q += linalg::normalize_in_place(&mut q);
    }
    let log_norm_ab = log_p + linalg::log_frobenius(&p);
    Ok(CornerGreens {
        g_aa: rights[0].clone(),
        g_ab: p * Complex64::new(log_p.exp(), 0.0),
        g_ba: q * Complex64::new(log_q.exp(), 0.0),
        g_bb: lefts[l - 1].clone(),
        energy,
        domain: *h.domain(),
        log_norm_ab,
    })
}

/// `Σ = sum_{i in {a}_W, j in {b}_W} |G(i,j)|^2 = ||g_ab||_F^2`.
pub fn sigma(cg: &CornerGreens) -> Result<f64> {
    if cg.domain.b == cg.domain.a {
        return Err(Error::DomainTooSmall(cg.domain.a));
    }
    Ok(cg.g_ab.iter().map(|z| z.norm_sqr()).sum())
}

/// `log Σ` computed from the tracked log-norm, finite even when `Σ`
/// underflows.
pub fn log_sigma(cg: &CornerGreens) -> Result<f64> {
    if cg.domain.b == cg.domain.a {
        return Err(Error::DomainTooSmall(cg.domain.a));
    }
    Ok(2.0 * cg.log_norm_ab)
}

/// `log Σ` for real potentials, with a scalar recursion when `W = 1`.
pub fn log_sigma_of(
    domain: &StripDomain,
    coupling: &VerticalCoupling,
    values: &[f64],
    energy: f64,
) -> Result<f64> {
    if domain.b == domain.a {
        return Err(Error::DomainTooSmall(domain.a));
    }
    if domain.width == 1 && coupling.width() == 1 {
        if values.len() != domain.len() {
            return Err(Error::DomainMismatch("potential length".into()));
        }
        let s = coupling.matrix()[(0, 0)].re;
        let mut log_p = 0.0;
        let mut prev = 0.0;
        for (k, &v) in values.iter().enumerate() {
            let d = v + s - energy;
            let x = d - prev;
            let inv = 1.0 / x;
            let cond = inv.abs() * (d.abs() + 2.0);
            if x == 0.0 || !cond.is_finite() || cond > linalg::SINGULAR_CONDITION {
                return Err(Error::Singular {
                    condition: cond,
                    position: Some(k),
                });
            }
            log_p += inv.abs().ln();
            prev = inv;
        }
        return Ok(2.0 * log_p);
    }
    let h = BlockTridiagonal::from_potentials(*domain, coupling, values)?;
    log_sigma(&corner_green(&h, energy)?)
}

/// `log max_{i in {c}_W, j in {c±d}_W} |G(i,j)|` for every distance `d`
/// from an interior column `c` to either end of the strip.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterProfile {
    pub center: i64,
    /// Index `d` holds distance `d` towards column `b`.
    pub right: Vec<f64>,
    /// Index `d` holds distance `d` towards column `a`.
    pub left: Vec<f64>,
}

pub fn center_profile(h: &BlockTridiagonal, energy: f64, center: i64) -> Result<CenterProfile> {
    let dom = h.domain();
    if center < dom.a || center > dom.b {
        return Err(Error::Argument(format!(
            "center column {center} outside strip"
        )));
    }
    let c = (center - dom.a) as usize;
    let l = h.columns();
    let lefts = left_sweep(h, energy, c)?;
    let rights = right_sweep(h, energy, c + 1)?;
    let mut x = h.shifted_block(c, energy);
    if c > 0 {
        x -= &lefts[c - 1];
    }
    if c + 1 < l {
        x -= &rights[c + 1];
    }
    let g_cc = sweep_inverse(h, c, energy, &x)?;

    // G(c,m) = G(c,m-1) G_{[m..b]}(m,m) for m > c, and
    // G(m,c) = G_{[a..m]}(m,m) G(m+1,c) for m < c.
    let mut right = Vec::with_capacity(l - c);
    let mut y = g_cc.clone();
    let mut ls = linalg::normalize_in_place(&mut y);
    right.push(ls);
    for blk in rights.iter().skip(c + 1) {
        y = &y * blk;
        ls += linalg::normalize_in_place(&mut y);
        right.push(ls);
    }
    let mut left = Vec::with_capacity(c + 1);
    let mut y = g_cc;
    let mut ls = linalg::normalize_in_place(&mut y);
    left.push(ls);
    for blk in lefts.iter().rev() {
        y = blk * &y;
        ls += linalg::normalize_in_place(&mut y);
        left.push(ls);
    }
    Ok(CenterProfile {
        center,
        right,
        left,
    })
}

/// Local indices of a sub-strip inside a strip: the sub-strip occupies a
/// contiguous range, its complement is everything else.
fn split_indices(outer: &StripDomain, inner: &StripDomain) -> (Vec<usize>, Vec<usize>) {
    let off = (inner.a - outer.a) as usize * outer.width;
    let inside: Vec<usize> = (off..off + inner.len()).collect();
    let outside: Vec<usize> = (0..outer.len())
        .filter(|k| *k < off || *k >= off + inner.len())
        .collect();
    (inside, outside)
}

fn select(m: &CMat, rows: &[usize], cols: &[usize]) -> CMat {
    CMat::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
}

fn check_substrip(h: &BlockTridiagonal, sub: &StripDomain) -> Result<()> {
    let dom = h.domain();
    if sub.width != dom.width {
        return Err(Error::UnsupportedGeometry(format!(
            "sub-box width {} differs from strip width {}",
            sub.width, dom.width
        )));
    }
    if sub.b < sub.a || !dom.contains_domain(sub) {
        return Err(Error::UnsupportedGeometry(format!(
            "{sub:?} is not a contiguous column range inside {dom:?}"
        )));
    }
    Ok(())
}

/// Result of splitting `H` along `Λ0 ⊕ Λ0'`.
#[derive(Debug, Clone)]
pub struct SchurComplement {
    /// `H/H_1 = H_{Λ0} - Γ0 (H_{Λ0'} - E)^{-1} Γ0^*`.
    pub complement: CMat,
    /// The coupling block between `Λ0` and `Λ0'`.
    pub gamma0: CMat,
    /// `|det(H-E) - det(H/H_1 - E) det(H_1 - E)| / |det(H-E)|`.
    pub det_residual: f64,
    /// Max-entry distance between the block-inverse formula and the dense
    /// inverse, relative to the largest entry of the inverse.
    pub inverse_residual: f64,
    pub inside: Vec<usize>,
    pub outside: Vec<usize>,
}

fn shifted(m: &CMat, energy: f64) -> CMat {
    let mut x = m.clone();
    for k in 0..x.nrows().min(x.ncols()) {
        x[(k, k)] -= energy;
    }
    x
}

fn relative_det_residual(full: LogDet, factored: LogDet) -> f64 {
    if full.is_zero() {
        return if factored.is_zero() {
            0.0
        } else {
            f64::INFINITY
        };
    }
    if factored.is_zero() {
        return 1.0;
    }
    let ratio = factored.phase / full.phase * (factored.log_abs - full.log_abs).exp();
    (ratio - Complex64::new(1.0, 0.0)).norm()
}

pub fn schur_complement(
    h: &BlockTridiagonal,
    sub: &StripDomain,
    energy: f64,
) -> Result<SchurComplement> {
    check_substrip(h, sub)?;
    let dense = h.to_dense();
    let (inside, outside) = split_indices(h.domain(), sub);
    let h0 = select(&dense, &inside, &inside);
    let gamma0 = select(&dense, &inside, &outside);
    if outside.is_empty() {
        return Ok(SchurComplement {
            complement: h0,
            gamma0,
            det_residual: 0.0,
            inverse_residual: 0.0,
            inside,
            outside,
        });
    }
    let h1 = select(&dense, &outside, &outside);
    let h1_shift = shifted(&h1, energy);
    let (g1, _) = linalg::invert_checked(&h1_shift)?;
    let complement = &h0 - &gamma0 * &g1 * gamma0.adjoint();

    let full = shifted(&dense, energy);
    let ld_full = linalg::log_det(&full);
    let ld_factored =
        linalg::log_det(&shifted(&complement, energy)).mul(linalg::log_det(&h1_shift));
    let det_residual = relative_det_residual(ld_full, ld_factored);

    // Block inverse of [[A, B], [B^*, D]] with A = H0 - E, D = H1 - E.
    let (s_inv, _) = linalg::invert_checked(&shifted(&complement, energy))?;
    let gamma1 = gamma0.adjoint();
    let top_right = -(&s_inv * &gamma0 * &g1);
    let bottom_left = -(&g1 * &gamma1 * &s_inv);
    let bottom_right = &g1 + &g1 * &gamma1 * &s_inv * &gamma0 * &g1;
    let (g_full, _) = linalg::invert_checked(&full)?;
    let n0 = inside.len();
    let n1 = outside.len();
    let mut diff: f64 = 0.0;
    for r in 0..n0 + n1 {
        for c in 0..n0 + n1 {
            let formula = match (r < n0, c < n0) {
                (true, true) => s_inv[(r, c)],
                (true, false) => top_right[(r, c - n0)],
                (false, true) => bottom_left[(r - n0, c)],
                (false, false) => bottom_right[(r - n0, c - n0)],
            };
            let gi = if r < n0 { inside[r] } else { outside[r - n0] };
            let gj = if c < n0 { inside[c] } else { outside[c - n0] };
            diff = diff.max((formula - g_full[(gi, gj)]).norm());
        }
    }
    let inverse_residual = diff / linalg::norm_max(&g_full);
    Ok(SchurComplement {
        complement,
        gamma0,
        det_residual,
        inverse_residual,
        inside,
        outside,
    })
}

/// Both sides of the second resolvent identity across `∂_Λ Λ0`.
#[derive(Debug, Clone)]
pub struct ResolventCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    /// Number of boundary pairs `(k, k')` in the sum.
    pub terms: usize,
    /// `|lhs - rhs|`.
    pub residual: f64,
    /// `max(|lhs|, sum |G_{Λ0}(i,k) G_Λ(k',j)|)`.
    pub scale: f64,
}

impl ResolventCheck {
    pub fn relative(&self) -> f64 {
        if self.scale == 0.0 {
            self.residual
        } else {
            self.residual / self.scale
        }
    }
}

/// Boundary pairs `(k, k')` with `k ∈ Λ0`, `k' ∈ Λ \ Λ0`, horizontal
/// neighbours in the same row (the support of the coupling `Γ0`).
pub fn boundary_pairs(outer: &StripDomain, inner: &StripDomain) -> Vec<(Site, Site)> {
    let mut out = Vec::new();
    for r in 1..=inner.width {
        if inner.a > outer.a {
            out.push((Site::new(inner.a, r), Site::new(inner.a - 1, r)));
        }
        if inner.b < outer.b {
            out.push((Site::new(inner.b, r), Site::new(inner.b + 1, r)));
        }
    }
    out
}

pub fn resolvent_identity_residual(
    h: &BlockTridiagonal,
    sub: &StripDomain,
    energy: f64,
    i: Site,
    j: Site,
) -> Result<ResolventCheck> {
    check_substrip(h, sub)?;
    let dom = *h.domain();
    if !sub.contains(i) {
        return Err(Error::Argument(format!(
            "{i:?} must lie in the sub-box {sub:?}"
        )));
    }
    if !dom.contains(j) || sub.contains(j) {
        return Err(Error::Argument(format!(
            "{j:?} must lie in the complement of {sub:?}"
        )));
    }
    let g = dense_green(h, energy)?;
    let g0 = dense_green(&h.restrict(sub)?, energy)?;
    let gi = dom.local_index(i).unwrap();
    let gj = dom.local_index(j).unwrap();
    let si = sub.local_index(i).unwrap();
    let pairs = boundary_pairs(&dom, sub);
    let mut rhs = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    for (k, kp) in &pairs {
        let term = g0[(si, sub.local_index(*k).unwrap())] * g[(dom.local_index(*kp).unwrap(), gj)];
        abs_sum += term.norm();
        rhs += term;
    }
    let lhs = g[(gi, gj)];
    Ok(ResolventCheck {
        lhs,
        rhs,
        terms: pairs.len(),
        residual: (lhs - rhs).norm(),
        scale: lhs.norm().max(abs_sum),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_potential, PotentialDist};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn random_h(w: usize, l: i64, seed: u64) -> BlockTridiagonal {
        let d = StripDomain::new(0, l - 1, w).unwrap();
        let s = VerticalCoupling::random(w, 1.0, seed ^ 0xabc);
        let v = sample_potential(&PotentialDist::Uniform(2.0), &d, seed);
        BlockTridiagonal::from_potentials(d, &s, v.values()).unwrap()
    }

    fn max_rel(a: &CMat, b: &CMat) -> f64 {
        linalg::norm_max(&(a - b)) / linalg::norm_max(b)
    }

    #[test]
    fn tridiagonal_example() {
        let d = StripDomain::new(0, 2, 1).unwrap();
        let h = BlockTridiagonal::from_potentials(d, &VerticalCoupling::zero(1), &[1.0, 2.0, 3.0])
            .unwrap();
        let expect = CMat::from_row_slice(
            3,
            3,
            &[
                c(1.0),
                c(-1.0),
                c(0.0),
                c(-1.0),
                c(2.0),
                c(-1.0),
                c(0.0),
                c(-1.0),
                c(3.0),
            ],
        );
        assert_eq!(h.to_dense(), expect);
    }

    #[test]
    fn single_column_block() {
        let d = StripDomain::new(0, 0, 2).unwrap();
        let s = Complex64::new(0.3, -0.7);
        let m = CMat::from_row_slice(2, 2, &[c(0.0), s, s.conj(), c(0.0)]);
        let cpl = VerticalCoupling::new(m).unwrap();
        let h = BlockTridiagonal::from_potentials(d, &cpl, &[1.5, -2.5]).unwrap();
        let expect = CMat::from_row_slice(2, 2, &[c(1.5), s, s.conj(), c(-2.5)]);
        assert_eq!(h.to_dense(), expect);
    }

    #[test]
    fn dense_round_trip_and_hermitian() {
        let h = random_h(3, 5, 1);
        let back = BlockTridiagonal::from_dense(*h.domain(), &h.to_dense()).unwrap();
        assert_eq!(back, h);
        assert_eq!(linalg::hermitian_defect(&h.to_dense()), 0.0);
        let mut broken = h.to_dense();
        broken[(0, 5)] = c(1.0);
        assert!(BlockTridiagonal::from_dense(*h.domain(), &broken).is_err());
    }

    #[test]
    fn dense_green_scalar_and_singular() {
        let d = StripDomain::new(0, 0, 1).unwrap();
        let h = BlockTridiagonal::from_potentials(d, &VerticalCoupling::zero(1), &[2.0]).unwrap();
        let g = dense_green(&h, 0.0).unwrap();
        assert!((g[(0, 0)] - c(0.5)).norm() < 1e-15);
        assert!(matches!(dense_green(&h, 2.0), Err(Error::Singular { .. })));
        // free chain of length 2 has eigenvalues ±1
        let d2 = StripDomain::new(0, 1, 1).unwrap();
        let h2 =
            BlockTridiagonal::from_potentials(d2, &VerticalCoupling::zero(1), &[0.0, 0.0]).unwrap();
        assert!(matches!(dense_green(&h2, 1.0), Err(Error::Singular { .. })));
    }

    #[test]
    fn dense_green_residual() {
        let h = random_h(2, 3, 4);
        let g = dense_green(&h, 0.3).unwrap();
        let a = shifted(&h.to_dense(), 0.3);
        let res = linalg::norm_max(&(&a * &g - linalg::identity(6)));
        assert!(res <= 1e-10 * (1.0 + h.norm_bound()));
    }

    #[test]
    fn corners_match_dense() {
        for seed in 0..20u64 {
            let w = 1 + (seed % 3) as usize;
            let l = 1 + (seed % 7) as i64;
            let h = random_h(w, l, seed);
            let e = 0.1 * seed as f64 - 0.5;
            let g = dense_green(&h, e).unwrap();
            let cg = corner_green(&h, e).unwrap();
            let n = g.nrows();
            let blk = |r0: usize, c0: usize| g.view((r0, c0), (w, w)).into_owned();
            assert!(max_rel(&cg.g_aa, &blk(0, 0)) < 1e-9);
            assert!(max_rel(&cg.g_ab, &blk(0, n - w)) < 1e-9);
            assert!(max_rel(&cg.g_ba, &blk(n - w, 0)) < 1e-9);
            assert!(max_rel(&cg.g_bb, &blk(n - w, n - w)) < 1e-9);
        }
    }

    #[test]
    fn single_column_corners_coincide() {
        let h = random_h(2, 1, 8);
        let cg = corner_green(&h, 0.2).unwrap();
        let direct = linalg::invert_checked(&shifted(&h.diag()[0], 0.2))
            .unwrap()
            .0;
        for m in [&cg.g_aa, &cg.g_ab, &cg.g_ba, &cg.g_bb] {
            assert!(max_rel(m, &direct) < 1e-12);
        }
        assert!(matches!(sigma(&cg), Err(Error::DomainTooSmall(0))));
    }

    #[test]
    fn sigma_examples() {
        let h = random_h(1, 4, 2);
        let cg = corner_green(&h, 0.0).unwrap();
        let g = dense_green(&h, 0.0).unwrap();
        assert!((sigma(&cg).unwrap() - g[(0, 3)].norm_sqr()).abs() < 1e-12 * g[(0, 3)].norm_sqr());

        let d = StripDomain::new(0, 1, 2).unwrap();
        let z = CMat::zeros(2, 2);
        let cg0 = CornerGreens::new(d, 0.0, z.clone(), z.clone(), z.clone(), z).unwrap();
        assert_eq!(sigma(&cg0).unwrap(), 0.0);
        assert_eq!(log_sigma(&cg0).unwrap(), f64::NEG_INFINITY);

        // W=2, L=3, V=0, S=0, E=1/2
        let d = StripDomain::new(0, 2, 2).unwrap();
        let h =
            BlockTridiagonal::from_potentials(d, &VerticalCoupling::zero(2), &[0.0; 6]).unwrap();
        let g = dense_green(&h, 0.5).unwrap();
        let dense_sigma: f64 = d
            .cross_pairs()
            .map(|(i, j)| g[(d.local_index(i).unwrap(), d.local_index(j).unwrap())].norm_sqr())
            .sum();
        let cs = sigma(&corner_green(&h, 0.5).unwrap()).unwrap();
        assert!((cs - dense_sigma).abs() <= 1e-12 * dense_sigma);
    }

    #[test]
    fn scalar_log_sigma_matches_block_sweep() {
        let d = StripDomain::new(0, 9, 1).unwrap();
        let s = VerticalCoupling::zero(1);
        let v = sample_potential(&PotentialDist::Cauchy(1.0), &d, 5);
        let fast = log_sigma_of(&d, &s, v.values(), 0.3).unwrap();
        let h = BlockTridiagonal::from_potentials(d, &s, v.values()).unwrap();
        let slow = log_sigma(&corner_green(&h, 0.3).unwrap()).unwrap();
        assert!((fast - slow).abs() < 1e-10 * (1.0 + slow.abs()));
    }

    #[test]
    fn long_strip_log_sigma_survives_underflow() {
        let d = StripDomain::new(0, 999, 1).unwrap();
        let s = VerticalCoupling::zero(1);
        let v = sample_potential(&PotentialDist::Uniform(10.0), &d, 3);
        let h = BlockTridiagonal::from_potentials(d, &s, v.values()).unwrap();
        let cg = corner_green(&h, 0.0).unwrap();
        let ls = log_sigma(&cg).unwrap();
        assert!(ls.is_finite() && ls < -1000.0);
        assert!((ls - log_sigma_of(&d, &s, v.values(), 0.0).unwrap()).abs() < 1e-8 * ls.abs());
    }

    #[test]
    fn center_profile_matches_dense() {
        let h = random_h(2, 9, 12);
        let g = dense_green(&h, 0.1).unwrap();
        let p = center_profile(&h, 0.1, 4).unwrap();
        assert_eq!(p.right.len(), 5);
        assert_eq!(p.left.len(), 5);
        let w = 2;
        for d in 0..5usize {
            let r = g.view((4 * w, (4 + d) * w), (w, w)).into_owned();
            let l = g.view((4 * w, (4 - d) * w), (w, w)).into_owned();
            assert!((p.right[d] - linalg::norm_max(&r).ln()).abs() < 1e-9);
            assert!((p.left[d] - linalg::norm_max(&l).ln()).abs() < 1e-9);
        }
    }

    #[test]
    fn schur_trivial_and_gamma_structure() {
        let h = random_h(2, 4, 3);
        let full = *h.domain();
        let sc = schur_complement(&h, &full, 0.2).unwrap();
        assert_eq!(sc.complement, h.to_dense());
        assert_eq!(sc.det_residual, 0.0);
        assert_eq!(sc.inverse_residual, 0.0);

        let sub = StripDomain::new(1, 2, 2).unwrap();
        let sc = schur_complement(&h, &sub, 0.2).unwrap();
        let dom = h.domain();
        for (r, &gi) in sc.inside.iter().enumerate() {
            for (q, &gj) in sc.outside.iter().enumerate() {
                let (si, sj) = (dom.site(gi), dom.site(gj));
                let adjacent = (si.column - sj.column).abs() == 1 && si.row == sj.row;
                let expect = if adjacent { c(-1.0) } else { c(0.0) };
                assert_eq!(sc.gamma0[(r, q)], expect);
            }
        }
        assert!(sc.det_residual < 1e-9 && sc.inverse_residual < 1e-9);
    }

    #[test]
    fn schur_rejects_foreign_geometry() {
        let h = random_h(2, 4, 3);
        let bad = StripDomain::new(2, 6, 2).unwrap();
        assert!(matches!(
            schur_complement(&h, &bad, 0.0),
            Err(Error::UnsupportedGeometry(_))
        ));
        let narrow = StripDomain::new(0, 1, 1).unwrap();
        assert!(schur_complement(&h, &narrow, 0.0).is_err());
    }

    #[test]
    fn resolvent_identity_examples() {
        let h = random_h(2, 6, 77);
        let left = StripDomain::new(0, 2, 2).unwrap();
        let chk =
            resolvent_identity_residual(&h, &left, 0.05, Site::new(1, 2), Site::new(4, 1)).unwrap();
        assert_eq!(chk.terms, 2);
        assert!(chk.relative() < 1e-9);

        let h1 = random_h(1, 6, 5);
        let left1 = StripDomain::new(0, 2, 1).unwrap();
        let chk = resolvent_identity_residual(&h1, &left1, 0.0, Site::new(0, 1), Site::new(5, 1))
            .unwrap();
        assert_eq!(chk.terms, 1);

        assert!(matches!(
            resolvent_identity_residual(&h, &left, 0.0, Site::new(4, 1), Site::new(5, 1)),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            resolvent_identity_residual(&h, &left, 0.0, Site::new(0, 1), Site::new(1, 1)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn resolvent_identity_with_huge_entry() {
        let d = StripDomain::new(0, 5, 2).unwrap();
        let s = VerticalCoupling::random(2, 1.0, 2);
        let mut v = sample_potential(&PotentialDist::Uniform(1.0), &d, 9);
        v.set(Site::new(2, 1), 1e6).unwrap();
        let h = crate::model::build_hamiltonian(&d, &s, &v).unwrap();
        let left = StripDomain::new(0, 2, 2).unwrap();
        let chk =
            resolvent_identity_residual(&h, &left, 0.0, Site::new(0, 1), Site::new(5, 2)).unwrap();
        assert!(chk.relative() < 1e-9);
    }

    #[test]
    fn corner_green_json_round_trip() {
        let h = random_h(2, 3, 6);
        let cg = corner_green(&h, 0.0).unwrap();
        let s = serde_json::to_string(&cg).unwrap();
        let back: CornerGreens = serde_json::from_str(&s).unwrap();
        assert_eq!(back.g_ab, cg.g_ab);
        assert_eq!(back.domain, cg.domain);
        assert!(s.contains("\"g_ab\":[[["));
    }
}
