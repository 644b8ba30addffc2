use framebound::estimators::*;
use framebound::gti::*;
use framebound::lattice::{enumerate_annihilator_union, same_lattice};
use framebound::rational::Q;
use framebound::*;
use proptest::prelude::*;

fn gabor(a: f64, b: f64, sigma: f64) -> SystemSpec {
    let g = builtin(Builtin::Gaussian { sigma, dim: 1, decay_eps: 1e-16 }).unwrap();
    gabor_system(vec![g], LatticeR::from_rows(&[vec![a]]).unwrap(), Modulation::Lattice(LatticeR::from_rows(&[vec![b]]).unwrap())).unwrap()
}

fn dyadic(psis: Vec<GeneratorSpec>, j_min: i32, j_max: i32) -> SystemSpec {
    wavelet_system(psis, Dilations::Powers { a: Mat::diag(&[2.0]), j_min, j_max }, LatticeR::integer(1), false).unwrap()
}

/// Meyer plus a shifted, scaled second copy.
fn two_meyer(tau: f64, s: f64) -> SystemSpec {
    let m = builtin(Builtin::Meyer).unwrap();
    let second = m.phase(&[tau]).unwrap().scaled(s);
    dyadic(vec![m, second], -6, 6)
}

fn any_system() -> impl Strategy<Value = (SystemSpec, f64)> {
    prop_oneof![
        (prop::sample::select(vec![0.5, 2.0 / 3.0, 1.0]), prop::sample::select(vec![0.5, 1.0]), 0.7f64..1.4)
            .prop_map(|(a, b, s)| (gabor(a, b, s), 1.0 / a)),
        (-1.0f64..1.0, 0.2f64..0.9).prop_map(|(t, s)| (two_meyer(t, s), 1.0)),
    ]
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn hermitian_symmetry((sys, step) in any_system(), w in -1.5f64..1.5, k in -3i32..=3, m in 0i32..3) {
        let scale = if matches!(sys.kind, SystemKind::Wavelet) { 2f64.powi(m) } else { 1.0 };
        let alpha = k as f64 * step * scale;
        let lhs = t_alpha(&sys, &[w], &[-alpha]);
        let rhs = t_alpha(&sys, &[w - alpha], &[alpha]).conj();
        prop_assert!((lhs - rhs).norm() < 1e-10, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn remainder_below_absolute_remainder((sys, _) in any_system(), w in 0.05f64..1.5) {
        let p = eval_point(&sys, &[w], &Truncation::default()).unwrap();
        prop_assert!(p.r <= p.r_abs + 1e-12 * p.r_abs.max(1.0));
        prop_assert!(p.l2sq.sqrt() <= p.t0 + p.r + 1e-12);
    }

    #[test]
    fn b2_below_b1((sys, _) in any_system()) {
        let rep = bounds(&sys, &GridSpec::new(48).without_refinement(), &Truncation::default()).unwrap();
        let b = rep.bounds;
        prop_assert!(b.b2 <= b.b1 * (1.0 + 1e-12));
        prop_assert!(b.a1 <= b.a_inf + 1e-12);
        prop_assert!(b.a_prime <= b.a1 + 1e-12 && b.b1 <= b.b_prime + 1e-12);
    }

    #[test]
    fn monotone_truncation((sys, _) in any_system(), w in 0.05f64..1.5) {
        let mut last = 0.0;
        for r in [2.0, 4.0, 8.0, 16.0, 32.0] {
            let p = eval_point(&sys, &[w], &Truncation::default().with_radius(r)).unwrap();
            prop_assert!(p.r >= last - 1e-14);
            last = p.r;
        }
    }

    #[test]
    fn zero_lies_in_every_annihilator(j_min in -6i32..0, j_max in 0i32..6) {
        let sys = dyadic(vec![builtin(Builtin::Meyer).unwrap()], j_min, j_max);
        let pts = enumerate_annihilator_union(&sys.lattices(), 4.0, 100_000).unwrap();
        prop_assert!(pts[0].alpha.iter().all(|v| *v == 0.0));
        prop_assert_eq!(pts[0].kappa.len(), sys.layers.len());
        prop_assert_eq!(pts[0].kappa.clone(), (0..sys.layers.len()).collect::<Vec<_>>());
    }

    #[test]
    fn dual_of_dual((a, b, c, d) in (1i64..6, -4i64..5, -4i64..5, 1i64..6), den in 1i64..5) {
        prop_assume!(a * d - b * c != 0);
        let q = |x: i64| Q::new(x as i128, den as i128);
        let m = QMat::from_rows(&[vec![q(a), q(b)], vec![q(c), q(d)]]);
        let l = LatticeR::from_rational(m).unwrap();
        let dd = dual_lattice(&dual_lattice(&l).unwrap()).unwrap();
        prop_assert!(same_lattice(&l, &dd, Membership::Tolerance(1e-9)));
        prop_assert_eq!(dd.exact(), l.exact());
    }

    #[test]
    fn dilation_periodicity(tau in -1.0f64..1.0, s in 0.2f64..0.9, w in 0.5f64..1.0) {
        let sys = dyadic(vec![builtin(Builtin::Meyer).unwrap(), builtin(Builtin::Meyer).unwrap().phase(&[tau]).unwrap().scaled(s)], -10, 10);
        let trunc = Truncation::default();
        let p = eval_point(&sys, &[w], &trunc).unwrap();
        let q = eval_point(&sys, &[2.0 * w], &trunc).unwrap();
        prop_assert!((p.t0 - q.t0).abs() < 1e-8);
        prop_assert!((p.r - q.r).abs() < 1e-8);
    }

    #[test]
    fn tight_systems_have_no_remainder(w in 0.05f64..3.0, which in 0usize..3) {
        let sys = match which {
            0 => dyadic(vec![builtin(Builtin::Meyer).unwrap()], -6, 6),
            1 => dyadic(vec![builtin(Builtin::Shannon).unwrap()], -6, 6),
            _ => gabor_system(vec![builtin(Builtin::Box { lo: vec![0.0], hi: vec![1.0] }).unwrap()], LatticeR::integer(1), Modulation::Lattice(LatticeR::integer(1))).unwrap(),
        };
        let p = eval_point(&sys, &[w], &Truncation::default()).unwrap();
        prop_assert!(p.r.abs() < 1e-12, "R = {}", p.r);
        prop_assert!((p.t0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn summation_order_is_immaterial(tau in -1.0f64..1.0, s in 0.2f64..0.9, w in 0.3f64..1.2) {
        let sys = two_meyer(tau, s);
        let trunc = Truncation::default().with_radius(16.0);
        let generic = eval_point(&sys, &[w], &trunc).unwrap().r;
        let nested = remainder_nested(&sys, &[w], &trunc).unwrap();
        prop_assert!((generic - nested).abs() < 1e-10 * generic.max(1.0), "{} vs {}", generic, nested);
    }
}

#[test]
fn parallel_grid_matches_pointwise() {
    let sys = two_meyer(0.3, 0.5);
    let trunc = Truncation::default();
    let pts = grid_points(&sys, &GridSpec::new(64)).unwrap();
    let par = evaluate_grid(&sys, &pts, &trunc).unwrap();
    for (p, e) in pts.iter().zip(&par) {
        let s = eval_point(&sys, p, &trunc).unwrap();
        assert_eq!(s.t0.to_bits(), e.t0.to_bits());
        assert_eq!(s.r.to_bits(), e.r.to_bits());
    }
}
