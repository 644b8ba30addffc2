use std::collections::BTreeMap;

use framebound::estimators::*;
use framebound::gti::*;
use framebound::*;

fn dyadic(psis: Vec<GeneratorSpec>, c: f64, j_min: i32, j_max: i32) -> SystemSpec {
    let gamma = LatticeR::from_rows(&[vec![c]]).unwrap();
    wavelet_system(psis, Dilations::Powers { a: Mat::diag(&[2.0]), j_min, j_max }, gamma, false).unwrap()
}

struct Reference {
    t0: f64,
    r: f64,
    r_abs: f64,
    l2sq: f64,
}

/// Direct sum over scales j and shifts k for {D_{2^j} T_{ck} psi}:
/// t_alpha(w) = (1/c) sum_{j : 2^j c alpha in Z} psi(2^j w) conj psi(2^j (w + alpha)).
fn reference(psis: &[GeneratorSpec], c: f64, w: f64, jr: i32, kmax: i64) -> Reference {
    let mut t: BTreeMap<i64, C64> = BTreeMap::new();
    let mut r_abs = 0.0;
    let mut t0 = 0.0;
    for j in -jr..=jr {
        let s = 2f64.powi(j);
        for psi in psis {
            let a = psi.eval(&[s * w]);
            if a.norm() == 0.0 {
                continue;
            }
            t0 += a.norm_sqr() / c;
            for k in -kmax..=kmax {
                if k == 0 {
                    continue;
                }
                let b = psi.eval(&[s * w + k as f64 / c]);
                // alpha = k / (c 2^j), keyed on the common scale 2^{-jr}
                let key = k * (1i64 << (jr - j) as u32);
                *t.entry(key).or_default() += a * b.conj() / c;
                r_abs += (a * b).norm() / c;
            }
        }
    }
    let r = t.values().map(|v| v.norm()).sum();
    let l2sq = t0 * t0 + t.values().map(|v| v.norm_sqr()).sum::<f64>();
    Reference { t0, r, r_abs, l2sq }
}

fn meyer() -> GeneratorSpec {
    builtin(Builtin::Meyer).unwrap()
}

#[test]
fn pointwise_sums_match_reference() {
    let second = meyer().phase(&[0.37]).unwrap().scaled(0.6);
    for c in [0.5, 1.0] {
        let psis = vec![meyer(), second.clone()];
        let sys = dyadic(psis.clone(), c, -12, 12);
        for w in [0.3, 0.55, 0.71, 0.9, 1.37, 2.2] {
            let p = eval_point(&sys, &[w], &Truncation::default()).unwrap();
            let q = reference(&psis, c, w, 16, 8);
            assert!((p.t0 - q.t0).abs() < 1e-12, "t0 {c} {w}: {} vs {}", p.t0, q.t0);
            assert!((p.r - q.r).abs() < 1e-12, "R {c} {w}: {} vs {}", p.r, q.r);
            assert!((p.r_abs - q.r_abs).abs() < 1e-12, "R_abs {c} {w}: {} vs {}", p.r_abs, q.r_abs);
            assert!((p.l2sq - q.l2sq).abs() < 1e-12, "l2 {c} {w}: {} vs {}", p.l2sq, q.l2sq);
        }
    }
}

#[test]
fn meyer_is_tight_with_bound_one() {
    let sys = dyadic(vec![meyer()], 1.0, -3, 5);
    let rep = bounds(&sys, &GridSpec::new(256), &Truncation::default()).unwrap();
    assert!((rep.a1() - 1.0).abs() < 1e-6 && (rep.b1() - 1.0).abs() < 1e-6);
    assert!((rep.b2() - 1.0).abs() < 1e-6 && (rep.a_inf() - 1.0).abs() < 1e-6);
    let t = tightness(&sys, &GridSpec::new(256), &Truncation::default()).unwrap().unwrap();
    assert!((t - 1.0).abs() < 1e-8);
    assert!(!rep.divergence.any());
}

#[test]
fn meyer_absolute_bounds_match_reference_extremes() {
    let sys = dyadic(vec![meyer()], 1.0, -3, 5);
    let grid = GridSpec::new(256).without_refinement();
    let rep = bounds(&sys, &grid, &Truncation::default()).unwrap();
    let pts = grid_points(&sys, &grid).unwrap();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        let q = reference(&[meyer()], 1.0, p[0], 12, 8);
        lo = lo.min(q.t0 - q.r_abs);
        hi = hi.max(q.t0 + q.r_abs);
    }
    assert!((rep.a_prime() - lo).abs() < 1e-12, "{} vs {lo}", rep.a_prime());
    assert!((rep.b_prime() - hi).abs() < 1e-12, "{} vs {hi}", rep.b_prime());
}

#[test]
fn meyer_separated_absolute_bounds_match_reference() {
    let sys = dyadic(vec![meyer()], 1.0, -3, 5);
    let rep = bounds(&sys, &GridSpec::new(256), &Truncation::default()).unwrap();
    let (a, b) = rep.abs_separated.expect("nested compact wavelet");
    // beta(k) = sup_w sum_j |psi(2^j w)| |psi(2^j w + k)| over a fine period grid
    let beta = |k: i64| {
        (0..8000)
            .map(|i| {
                let u = 0.5 + 0.5 * ((i % 4000) as f64 + 0.5) / 4000.0;
                let w = if i < 4000 { u } else { -u };
                (-12..=12).map(|j| {
                    let s = 2f64.powi(j);
                    meyer().eval(&[s * w]).norm() * meyer().eval(&[s * w + k as f64]).norm()
                }).sum::<f64>()
            })
            .fold(0.0, f64::max)
    };
    let off: f64 = (1..=3).map(|k| 2.0 * (beta(k) * beta(-k)).sqrt()).sum();
    assert!((a - (1.0 - off)).abs() < 1e-3, "{a} vs {}", 1.0 - off);
    assert!((b - (1.0 + off)).abs() < 1e-3, "{b} vs {}", 1.0 + off);
}

#[test]
fn shannon_bounds_are_one() {
    let sys = dyadic(vec![builtin(Builtin::Shannon).unwrap()], 1.0, -3, 5);
    let rep = bounds(&sys, &GridSpec::new(256), &Truncation::default()).unwrap();
    for v in [rep.a1(), rep.b1(), rep.b2(), rep.a_inf(), rep.a_prime(), rep.b_prime()] {
        assert!((v - 1.0).abs() < 1e-12, "{v}");
    }
}

#[test]
fn nadic2_bounds_are_one() {
    let (sys, _, cert) = nadic_counterexample(2, 12).unwrap();
    assert!(cert.disjoint && cert.uncovered.is_empty());
    let rep = bounds(&sys, &GridSpec::new(64), &Truncation::default()).unwrap();
    let tol = 2f64.powi(-12) + 1e-10;
    for v in [rep.a1(), rep.b1(), rep.a_inf(), rep.b2()] {
        assert!((v - 1.0).abs() <= tol, "{v}");
    }
    assert!(!rep.divergence.primary());
}

#[test]
fn nadic3_lower_bound_on_t_alpha() {
    let (sys, _, _) = nadic_counterexample(3, 8).unwrap();
    for m in 1..=4u32 {
        let den = 3f64.powi(m as i32);
        for k in 1..3i64.pow(m) {
            if k % 3 == 0 {
                continue;
            }
            let alpha = k as f64 / den;
            let worst = (0..9).map(|i| t_alpha(&sys, &[i as f64 / 9.0 + 0.01], &[alpha]).norm()).fold(f64::INFINITY, f64::min);
            assert!(worst >= 1.0 / den / 2.0 - 1e-12, "k = {k}, m = {m}: {worst}");
        }
    }
}

#[test]
fn nadic3_flags_divergence() {
    let (sys, _, _) = nadic_counterexample(3, 8).unwrap();
    let rep = bounds(&sys, &GridSpec::new(64), &Truncation::default()).unwrap();
    assert!(rep.divergence.r && rep.divergence.r_abs);
    assert_eq!(rep.b1(), f64::INFINITY);
    assert_eq!(rep.a1(), f64::NEG_INFINITY);
    assert_eq!(rep.b_prime(), f64::INFINITY);
}

#[test]
fn calderon_sum_of_gabor_box_is_one() {
    let g = builtin(Builtin::Box { lo: vec![0.0], hi: vec![1.0] }).unwrap();
    let sys = gabor_system(vec![g], LatticeR::integer(1), Modulation::Lattice(LatticeR::integer(1))).unwrap();
    let pts: Vec<Point> = (0..32).map(|k| framebound::linalg::point(&[k as f64 / 32.0 + 0.01])).collect();
    let t0 = calderon_sum(&sys, &pts, &Truncation::default()).unwrap();
    assert!(t0.iter().all(|v| (v - 1.0).abs() < 1e-14));
}

#[test]
fn missing_certificate_is_undecidable() {
    let l1 = LatticeR::irrational(Mat::diag(&[std::f64::consts::SQRT_2])).unwrap();
    let g = builtin(Builtin::Meyer).unwrap();
    let layers = vec![
        Layer::new(Lattice::R(LatticeR::integer(1)), MemberSet::Finite(vec![Member::unit(g.clone())]), "a"),
        Layer::new(Lattice::R(l1), MemberSet::Finite(vec![Member::unit(g)]), "b"),
    ];
    let err = SystemSpec::assemble(Group::Real(1), layers, SystemKind::Custom, false).unwrap_err();
    assert_eq!(err.to_string(), "κ(α) undecidable; supply disjointness certificate or rational data");
}

#[test]
fn gaussian_gabor_estimates_bracket_fibers() {
    let g = builtin(Builtin::Gaussian { sigma: 1.0, dim: 1, decay_eps: 1e-16 }).unwrap();
    let sys = gabor_system(vec![g], LatticeR::from_rows(&[vec![0.5]]).unwrap(), Modulation::Lattice(LatticeR::from_rows(&[vec![0.5]]).unwrap())).unwrap();
    let rep = bounds(&sys, &GridSpec::new(128), &Truncation::default()).unwrap();
    let pts = grid_points(&sys, &GridSpec::new(128)).unwrap();
    let fb = framebound::oracle::fiber_bounds(&sys, &pts, 12.0).unwrap();
    assert!(rep.a1() <= fb.a_fib + 1e-9 && fb.b_fib <= rep.b1() + 1e-9);
    assert!(rep.b2() <= rep.b1());
}
