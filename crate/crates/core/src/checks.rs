//! Randomized instances shared by the experiment runner and the test suite.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::greens::{self, BlockTridiagonal};
use crate::linalg::{self, CMat};
use crate::logpot::{check_bounds, AtomicMeasure, BoundReport, BoundScenario};
use crate::model::{sample_potential, PotentialDist, Site, StripDomain, VerticalCoupling};
use crate::polystruct::{
    column_degree, designated_monomial, monomial_coeff, ExplicitPolynomial, PotentialPolynomial,
};
use crate::rng::{derive_seed, stream_rng};

/// Relative residuals of the block identities on one random strip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IdentityInstance {
    #[serde(rename = "W")]
    pub width: usize,
    #[serde(rename = "L")]
    pub length: usize,
    pub schur_det: f64,
    pub schur_inverse: f64,
    pub resolvent: f64,
}

impl IdentityInstance {
    pub fn worst(&self) -> f64 {
        self.schur_det.max(self.schur_inverse).max(self.resolvent)
    }
}

fn random_strip(width: usize, length: usize, seed: u64) -> Result<(BlockTridiagonal, f64)> {
    let dom = StripDomain::new(0, length as i64 - 1, width)?;
    let s = VerticalCoupling::random(width, 1.0, derive_seed(seed, &[1]));
    let v = sample_potential(&PotentialDist::Uniform(2.0), &dom, derive_seed(seed, &[2]));
    let e = stream_rng(seed, 3).random_range(-3.0..3.0);
    Ok((BlockTridiagonal::from_potentials(dom, &s, v.values())?, e))
}

/// Schur factorization and second resolvent identity on a random strip
/// with `W <= max_width`, `2 <= L <= max_length` and a random proper
/// sub-strip.
pub fn identity_instance(
    seed: u64,
    max_width: usize,
    max_length: usize,
) -> Result<IdentityInstance> {
    let mut rng = stream_rng(seed, 0);
    let width = rng.random_range(1..=max_width.max(1));
    let length = rng.random_range(2..=max_length.max(2));
    let (h, e) = random_strip(width, length, seed)?;
    let a0 = rng.random_range(0..length as i64);
    let b0 = if a0 == 0 {
        rng.random_range(0..length as i64 - 1)
    } else {
        rng.random_range(a0..length as i64)
    };
    let sub = StripDomain::new(a0, b0, width)?;
    let sc = greens::schur_complement(&h, &sub, e)?;
    let i = Site::new(rng.random_range(a0..=b0), rng.random_range(1..=width));
    let outside: Vec<i64> = (0..length as i64).filter(|c| *c < a0 || *c > b0).collect();
    let j = Site::new(
        outside[rng.random_range(0..outside.len())],
        rng.random_range(1..=width),
    );
    let res = greens::resolvent_identity_residual(&h, &sub, e, i, j)?;
    Ok(IdentityInstance {
        width,
        length,
        schur_det: sc.det_residual,
        schur_inverse: sc.inverse_residual,
        resolvent: res.relative(),
    })
}

/// Largest relative max-entry error of the four corner blocks from the
/// sweeps against dense inversion.
pub fn solver_instance(width: usize, length: usize, seed: u64) -> Result<f64> {
    let (h, e) = random_strip(width, length, seed)?;
    let cg = greens::corner_green(&h, e)?;
    let g = greens::dense_green(&h, e)?;
    let n = g.nrows();
    let last = n - width;
    let pairs: [(&CMat, usize, usize); 4] = [
        (&cg.g_aa, 0, 0),
        (&cg.g_ab, 0, last),
        (&cg.g_ba, last, 0),
        (&cg.g_bb, last, last),
    ];
    let mut worst: f64 = 0.0;
    for (blk, r0, c0) in pairs {
        let dense = g.view((r0, c0), (width, width)).into_owned();
        let err = linalg::norm_max(&(blk - &dense));
        worst = worst.max(err / linalg::norm_max(&dense).max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Degrees in one interior column and the designated coefficient of the
/// corner minor with `i = (a, 1)`, `j = (b, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DegreeRow {
    #[serde(rename = "W")]
    pub width: usize,
    #[serde(rename = "L")]
    pub length: usize,
    pub column: i64,
    pub deg_f: Option<usize>,
    pub deg_g: Option<usize>,
    pub coeff: Complex64,
}

/// One row per interior column for a random `(S, E)`.
pub fn degree_rows(width: usize, length: usize, seed: u64) -> Result<Vec<DegreeRow>> {
    let dom = StripDomain::new(0, length as i64 - 1, width)?;
    let s = VerticalCoupling::random(width, 1.0, derive_seed(seed, &[1]));
    let e = stream_rng(seed, 2).random_range(-2.0..2.0);
    let i = Site::new(dom.a, 1);
    let j = Site::new(dom.b, 1);
    let f = PotentialPolynomial::determinant(dom, s.clone(), e);
    let g = PotentialPolynomial::minor(dom, s, e, i, j)?;
    let coeff = monomial_coeff(&g, &designated_monomial(&dom, i, j))?;
    (dom.a + 1..dom.b)
        .map(|n| {
            Ok(DegreeRow {
                width,
                length,
                column: n,
                deg_f: column_degree(&f, n, derive_seed(seed, &[3, n as u64]))?,
                deg_g: column_degree(&g, n, derive_seed(seed, &[4, n as u64]))?,
                coeff,
            })
        })
        .collect()
}

/// Admissible parameter points cycling through the three bound scenarios,
/// each with its own random atomic measure.
pub fn bound_grid(points: usize, seed: u64) -> Result<Vec<BoundReport>> {
    (0..points)
        .map(|k| {
            let s = derive_seed(seed, &[k as u64]);
            let mut rng = stream_rng(s, 0);
            let atoms = rng.random_range(1..=8);
            let r = 10f64.powf(rng.random_range(-2.0..2.0));
            let (mu, scenario) = match k % 3 {
                0 => {
                    let m = 10f64.powf(rng.random_range(-2.0..2.0));
                    (
                        AtomicMeasure::random_in_annulus(atoms, 0.0, r, s)?,
                        BoundScenario::SecondMoment { m, r },
                    )
                }
                1 => {
                    let m0 = 2.0 * r * rng.random_range(1.0..4.0);
                    let m1 = 2.0 * m0 * 10f64.powf(rng.random_range(0.0..4.0));
                    (
                        AtomicMeasure::random_in_annulus(atoms, 0.0, r, s)?,
                        BoundScenario::NearLog { r, m0, m1 },
                    )
                }
                _ => {
                    let m1 = r / 2.0 * rng.random_range(0.01..1.0);
                    let m0 = m1 / 2.0 * rng.random::<f64>();
                    (
                        AtomicMeasure::random_in_annulus(atoms, r, 4.0 * r, s)?,
                        BoundScenario::FarAtoms { r, m0, m1 },
                    )
                }
            };
            check_bounds(&mu, scenario)
        })
        .collect()
}

/// Test polynomials for the sublevel-set estimates: `p(x) = x` and random
/// dense polynomials of a few shapes.
pub fn cartan_family(seed: u64) -> Vec<(String, ExplicitPolynomial)> {
    let mut out = vec![(
        "identity".to_string(),
        ExplicitPolynomial::new(1, vec![(Complex64::new(1.0, 0.0), vec![1])]).unwrap(),
    )];
    for (k, (dim, deg)) in [(1, 3), (2, 2), (3, 2), (4, 1), (2, 3)]
        .into_iter()
        .enumerate()
    {
        out.push((
            format!("dense-N{dim}-D{deg}"),
            ExplicitPolynomial::random_dense(dim, deg, derive_seed(seed, &[k as u64])),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_instances_are_tight() {
        for s in 0..10 {
            assert!(identity_instance(s, 3, 8).unwrap().worst() < 1e-9);
        }
    }

    #[test]
    fn solver_matches_dense() {
        assert!(solver_instance(2, 30, 1).unwrap() < 1e-9);
    }

    #[test]
    fn degree_rows_two_by_three() {
        let rows = degree_rows(2, 3, 5).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].deg_f, Some(2));
        assert_eq!(rows[0].deg_g, Some(1));
        assert!((rows[0].coeff.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bound_grid_is_admissible() {
        let g = bound_grid(30, 3).unwrap();
        assert!(g.iter().all(|r| r.holds));
    }
}
