//! Module results against closed forms and exact small-instance recursions.

use stripgreen::decay::{self, TransferParams};
use stripgreen::greens::{self, BlockTridiagonal};
use stripgreen::logpot::{self, AtomicMeasure};
use stripgreen::model::{StripDomain, VerticalCoupling};
use stripgreen::polystruct::{cartan_sublevel, ExplicitPolynomial, PotentialPolynomial};

use num_complex::Complex64;

/// Leading principal minors of the free chain `H - E`: diagonal `-E`,
/// off-diagonal `-1`.
fn chain_minors(e: f64, n: usize) -> Vec<f64> {
    let mut d = vec![1.0, -e];
    for k in 2..=n {
        d.push(-e * d[k - 1] - d[k - 2]);
    }
    d
}

#[test]
fn free_profile_matches_minor_recursion() {
    let l = 30;
    for e in [2.5, 3.0, 0.7] {
        let p = decay::decay_profile(1, l, e, &VerticalCoupling::zero(1), None, 0).unwrap();
        let d = chain_minors(e, 2 * l + 1);
        for (k, &dist) in p.distances.iter().enumerate() {
            // |G(0, d)| = |D_L D_{L-d} / D_{2L+1}| on [-L, L]
            let exact = (d[l] * d[l - dist] / d[2 * l + 1]).abs().ln();
            assert!(
                (p.log_g[k] - exact).abs() < 1e-9 * exact.abs().max(1.0),
                "E={e} d={dist}"
            );
        }
    }
}

#[test]
fn free_rate_fit_reproduces_arccosh() {
    for e in [2.5, 3.0, 4.0] {
        let (ps, ex) =
            decay::decay_profiles(1, 100, e, &VerticalCoupling::zero(1), None, 50, 1).unwrap();
        assert_eq!(ex, 0);
        let fit = decay::rate_fit(&ps, 0.5, 2).unwrap();
        let g = decay::free_rate(e).unwrap();
        assert!(
            (fit.rate - g).abs() <= 0.02 * g,
            "E={e}: {} vs {g}",
            fit.rate
        );
    }
}

#[test]
fn free_transfer_exponents_follow_transverse_modes() {
    // S = hopping has eigenvalues ±1, so the channels see E ∓ 1
    let e: f64 = 4.0;
    let params = TransferParams {
        steps: 20_000,
        reortho: 10,
    };
    let est = decay::lyapunov_transfer(2, e, &VerticalCoupling::hopping(2, 1.0), None, params, 0)
        .unwrap();
    let a = ((e - 1.0) / 2.0).acosh();
    let b = ((e + 1.0) / 2.0).acosh();
    assert!((est.exponents[0] - b).abs() < 1e-6, "{:?}", est.exponents);
    assert!((est.gamma - a).abs() < 1e-6, "{:?}", est.exponents);
    assert!(est.pairs_hold());
}

#[test]
fn corner_blocks_match_dense_inverse_on_free_chain() {
    let e = 2.5;
    let dom = StripDomain::new(0, 19, 1).unwrap();
    let h = BlockTridiagonal::from_potentials(dom, &VerticalCoupling::zero(1), &[0.0; 20]).unwrap();
    let cg = greens::corner_green(&h, e).unwrap();
    let d = chain_minors(e, 20);
    // G(1, N) = 1 / D_N for the unit-hopping chain
    let exact = (1.0 / d[20]).abs();
    let got = cg.g_ab[(0, 0)].norm();
    assert!((cg.log_norm_ab() - exact.ln()).abs() < 1e-9);
    assert!(((got - exact) / exact).abs() < 1e-9, "{got} vs {exact}");
}

#[test]
fn determinant_of_free_strip_is_chebyshev() {
    let e = 0.3;
    let dom = StripDomain::new(0, 9, 1).unwrap();
    let f = PotentialPolynomial::determinant(dom, VerticalCoupling::zero(1), e);
    let ld = f.eval_real(&[0.0; 10]).unwrap();
    let exact = chain_minors(e, 10)[10];
    assert!((ld.log_abs - exact.abs().ln()).abs() < 1e-12);
}

#[test]
fn log_variance_on_unit_interval_is_one() {
    let v = logpot::var_uniform(&AtomicMeasure::dirac(Complex64::new(0.0, 0.0)), 0.0, 1.0).unwrap();
    assert!((v.value - 1.0).abs() < 1e-8);
}

#[test]
fn linear_sublevel_fraction_is_exponential() {
    // |x| <= e^{-cHM} on [-1, 1] has relative length e^{-cHM}
    let p = ExplicitPolynomial::new(1, vec![(Complex64::new(1.0, 0.0), vec![1])]).unwrap();
    let h = [0.5, 1.0, 2.0];
    let curve = cartan_sublevel(&p, 1.0, &h, 0.25, 100_000, 3).unwrap();
    for (h, fr) in h.iter().zip(&curve.fraction) {
        let exact = (-0.25 * h * curve.m).exp();
        let se = (exact * (1.0 - exact) / 100_000.0).sqrt();
        assert!((fr - exact).abs() < 4.0 * se, "H={h}: {fr} vs {exact}");
    }
}
