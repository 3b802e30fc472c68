//! Invariants checked on random inputs.

use num_complex::Complex64;
use proptest::prelude::*;

use stripgreen::decay::{self, AlphaSchedule, MsaState};
use stripgreen::greens::{self, BlockTridiagonal};
use stripgreen::harness::output::{csv_bytes, format_float, Row};
use stripgreen::logpot::{self, AtomicMeasure};
use stripgreen::model::{sample_potential, PotentialDist, StripDomain, VerticalCoupling};
use stripgreen::polystruct::PotentialPolynomial;
use stripgreen::rng::derive_seed;

fn det_value(f: &PotentialPolynomial, v: &[f64]) -> Complex64 {
    let d = f.eval_real(v).unwrap();
    d.phase * d.log_abs.exp()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn floats_survive_csv(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        let bytes = csv_bytes(&[Row::new("s", x).stderr(x.abs())]).unwrap();
        let mut rd = csv::Reader::from_reader(bytes.as_slice());
        let rec = rd.records().next().unwrap().unwrap();
        prop_assert_eq!(rec[4].parse::<f64>().unwrap(), x);
    }

    #[test]
    fn seeds_are_pure_and_tag_sensitive(m in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        prop_assert_eq!(derive_seed(m, &[a, b]), derive_seed(m, &[a, b]));
        if a != b {
            prop_assert_ne!(derive_seed(m, &[a]), derive_seed(m, &[b]));
        }
    }

    #[test]
    fn potentials_depend_only_on_site_and_seed(seed in any::<u64>(), l in 2i64..12, w in 1usize..4) {
        let big = StripDomain::new(-l, l, w).unwrap();
        let small = StripDomain::new(0, l / 2, w).unwrap();
        let d = PotentialDist::Uniform(1.0);
        let restricted = sample_potential(&d, &big, seed).restricted(&small).unwrap();
        let direct = sample_potential(&d, &small, seed);
        prop_assert_eq!(restricted, direct.values().to_vec());
    }

    #[test]
    fn determinant_is_affine_in_each_potential(
        seed in any::<u64>(), w in 1usize..4, l in 2i64..5, e in -2.0f64..2.0, t in -3.0f64..3.0,
    ) {
        let dom = StripDomain::new(0, l - 1, w).unwrap();
        let f = PotentialPolynomial::determinant(dom, VerticalCoupling::random(w, 1.0, seed), e);
        let mut v = sample_potential(&PotentialDist::Uniform(1.0), &dom, seed ^ 1).values().to_vec();
        let k = (seed as usize) % v.len();
        let at = |x: f64, v: &mut Vec<f64>| { v[k] = x; det_value(&f, v) };
        let (f0, f1, ft) = (at(0.0, &mut v), at(1.0, &mut v), at(t, &mut v));
        let lin = f0 + (f1 - f0) * t;
        let scale = 1.0 + f0.norm() + f1.norm() * (1.0 + t.abs());
        prop_assert!((ft - lin).norm() <= 1e-9 * scale);
    }

    #[test]
    fn sigma_is_symmetric_under_reflection(seed in any::<u64>(), w in 1usize..4, l in 2i64..10) {
        let dom = StripDomain::new(0, l - 1, w).unwrap();
        let s = VerticalCoupling::random(w, 1.0, seed);
        let v = sample_potential(&PotentialDist::Uniform(2.0), &dom, seed).values().to_vec();
        let mut rev = Vec::with_capacity(v.len());
        for c in v.chunks(w).rev() {
            rev.extend_from_slice(c);
        }
        let e = 0.37;
        let a = greens::corner_green(&BlockTridiagonal::from_potentials(dom, &s, &v).unwrap(), e);
        let b = greens::corner_green(&BlockTridiagonal::from_potentials(dom, &s, &rev).unwrap(), e);
        if let (Ok(a), Ok(b)) = (a, b) {
            let (la, lb) = (greens::log_sigma(&a).unwrap(), greens::log_sigma(&b).unwrap());
            prop_assert!((la - lb).abs() < 1e-8 * la.abs().max(1.0));
        }
    }

    #[test]
    fn log_variance_scaling_identity(seed in any::<u64>(), n in 1usize..6, m0 in 0.0f64..2.0, len in 0.1f64..5.0) {
        let mu = AtomicMeasure::random_in_annulus(n, 0.0, 3.0, seed).unwrap();
        let sc = logpot::check_scaling(&mu, m0, m0 + len).unwrap();
        prop_assert!(sc.residual <= 1e-7, "{:?}", sc);
    }

    #[test]
    fn msa_scales_grow_and_rates_shrink(m0 in 0.005f64..0.05, a in 2.0f64..4.0) {
        let init = MsaState { l: 1e6, m: m0, width: 1, beta: 1.0, eps: 0.5 };
        let run = decay::msa_recursion(init, 1e24, &AlphaSchedule::Constant(a)).unwrap();
        prop_assert!(run.states.windows(2).all(|p| p[1].l > p[0].l && p[1].m <= p[0].m));
        let last = run.states.last().unwrap();
        prop_assert!((last.l / 1e24 - 1.0).abs() < 1e-9);
    }
}
