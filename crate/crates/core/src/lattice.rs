//! Full-rank lattices in R^d, arithmetic progressions in Z, their annihilators
//! and the index sets kappa(alpha).

use std::collections::BTreeMap;

use num_integer::Integer;
use num_traits::Zero;
use serde::Serialize;
use smallvec::SmallVec;
use thiserror::Error;

use crate::linalg::{integer_box, norm2, Mat, Point};
use crate::rational::{q_to_f64, rational_from_f64, QMat, Q};

/// Default float-mode membership tolerance, relative to the lattice gap.
pub const DEFAULT_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("degenerate lattice")]
    Degenerate,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("max_points exceeded: {partial} points enumerated before stopping")]
    TooManyPoints { partial: usize },
    #[error("nested-lattice decomposition inapplicable")]
    NotNested,
    #[error("lattices live on different groups")]
    MixedGroups,
    #[error("radius must be positive")]
    BadRadius,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Membership {
    Exact,
    Tolerance(f64),
}

/// Gamma = C Z^d with C invertible.
#[derive(Clone, Debug)]
pub struct LatticeR {
    gen: Mat,
    dual: Mat,
    covol: f64,
    exact: Option<QMat>,
    irrational: bool,
}

impl LatticeR {
    /// Float generator; exact arithmetic is enabled when every entry is a small rational.
    pub fn new(gen: Mat) -> Result<Self, LatticeError> {
        match QMat::from_mat(&gen) {
            Some(q) => Self::from_rational(q),
            None => Self::build(gen, None, false),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LatticeError> {
        Self::new(Mat::from_rows(rows))
    }

    pub fn from_rational(q: QMat) -> Result<Self, LatticeError> {
        if q.det().is_zero() {
            return Err(LatticeError::Degenerate);
        }
        Self::build(q.to_mat(), Some(q), false)
    }

    /// Float data certified to meet the rationals only at the origin
    /// (e.g. a transcendental multiple of an integer lattice).
    pub fn irrational(gen: Mat) -> Result<Self, LatticeError> {
        Self::build(gen, None, true)
    }

    pub fn integer(d: usize) -> Self {
        Self::from_rational(QMat::identity(d)).unwrap()
    }

    fn build(gen: Mat, exact: Option<QMat>, irrational: bool) -> Result<Self, LatticeError> {
        let inv = gen.inverse().ok_or(LatticeError::Degenerate)?;
        let dual = match &exact {
            Some(q) => q.transpose().inverse().ok_or(LatticeError::Degenerate)?.to_mat(),
            None => inv.transpose(),
        };
        let covol = match &exact {
            Some(q) => q_to_f64(&q.abs_det()),
            None => gen.det().abs(),
        };
        if !(covol > 0.0) {
            return Err(LatticeError::Degenerate);
        }
        Ok(LatticeR { gen, dual, covol, exact, irrational })
    }

    pub fn dim(&self) -> usize {
        self.gen.dim()
    }

    pub fn generator(&self) -> &Mat {
        &self.gen
    }

    /// C# = (C^T)^-1, whose columns generate the dual lattice.
    pub fn dual_generator(&self) -> &Mat {
        &self.dual
    }

    pub fn covol(&self) -> f64 {
        self.covol
    }

    pub fn exact(&self) -> Option<&QMat> {
        self.exact.as_ref()
    }

    pub fn exact_dual(&self) -> Option<QMat> {
        self.exact.as_ref().and_then(|q| q.transpose().inverse())
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn is_irrational(&self) -> bool {
        self.irrational
    }

    /// Image lattice M Gamma.
    pub fn image(&self, m: &Mat) -> Result<LatticeR, LatticeError> {
        let gen = m.mul(&self.gen);
        match (&self.exact, QMat::from_mat(m)) {
            (Some(q), Some(mq)) => Self::from_rational(mq.mul(q)),
            _ if self.irrational => Self::irrational(gen),
            _ => Self::new(gen),
        }
    }

    pub fn image_exact(&self, m: &QMat) -> Result<LatticeR, LatticeError> {
        match &self.exact {
            Some(q) => Self::from_rational(m.mul(q)),
            None => Self::new(m.to_mat().mul(&self.gen)),
        }
    }

    /// Exact test when both lattice and point are rational.
    pub fn contains_exact(&self, x: &[Q]) -> Option<bool> {
        if self.irrational {
            return Some(x.iter().all(|v| v.is_zero()));
        }
        let q = self.exact.as_ref()?;
        let inv = q.inverse()?;
        Some(inv.apply(x).iter().all(|v| v.is_integer()))
    }

    pub fn contains(&self, x: &[f64], mode: Membership) -> bool {
        if let Membership::Exact = mode {
            let xq: Option<Vec<Q>> = x.iter().map(|v| rational_from_f64(*v)).collect();
            match xq {
                Some(xq) => {
                    if let Some(b) = self.contains_exact(&xq) {
                        return b;
                    }
                }
                None => {
                    if self.exact.is_some() {
                        return false;
                    }
                }
            }
        }
        let eps = match mode {
            Membership::Tolerance(e) => e,
            Membership::Exact => DEFAULT_EPS,
        };
        let inv = self.gen.inverse().expect("invertible generator");
        inv.apply(x).iter().all(|c| (c - c.round()).abs() < eps)
    }

    /// Dual points C# nu with |C# nu| <= radius.
    pub fn dual_points_in_ball(&self, radius: f64) -> Vec<(SmallVec<[i64; 4]>, Point)> {
        points_in_ball(&self.dual, radius)
    }
}

/// Lattice points M nu inside the closed ball of the given radius.
pub fn points_in_ball(m: &Mat, radius: f64) -> Vec<(SmallVec<[i64; 4]>, Point)> {
    let d = m.dim();
    let inv = m.inverse().expect("invertible generator");
    let lo: Vec<i64> = (0..d).map(|i| -(radius * inv.row_norm2(i) + 1e-9).floor() as i64).collect();
    let hi: Vec<i64> = lo.iter().map(|v| -v).collect();
    let mut out = Vec::new();
    let tol = radius * (1.0 + 1e-12);
    integer_box(&lo, &hi, |nu| {
        let p = m.apply_i64(nu);
        if norm2(&p) <= tol {
            out.push((SmallVec::from_slice(nu), p));
        }
    });
    out
}

/// Gamma = N Z inside Z.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatticeZ {
    modulus: i128,
}

impl LatticeZ {
    pub fn new(modulus: i128) -> Result<Self, LatticeError> {
        if modulus < 1 {
            return Err(LatticeError::Degenerate);
        }
        Ok(LatticeZ { modulus })
    }

    pub fn modulus(&self) -> i128 {
        self.modulus
    }

    pub fn covol(&self) -> f64 {
        self.modulus as f64
    }

    pub fn contains(&self, t: i128) -> bool {
        t.mod_floor(&self.modulus) == 0
    }

    /// alpha in T = [0,1) lies in the annihilator (1/N)Z mod 1.
    pub fn annihilates(&self, alpha: &Q) -> bool {
        (alpha * Q::from_integer(self.modulus)).is_integer()
    }
}

/// Translation subgroup of a layer.
#[derive(Clone, Debug)]
pub enum Lattice {
    R(LatticeR),
    Z(LatticeZ),
    /// The whole group R^d (continuous translations); annihilator {0}.
    Full(usize),
}

impl Lattice {
    pub fn covol(&self) -> f64 {
        match self {
            Lattice::R(l) => l.covol(),
            Lattice::Z(l) => l.covol(),
            Lattice::Full(_) => 1.0,
        }
    }
}

pub fn dual_lattice(l: &LatticeR) -> Result<LatticeR, LatticeError> {
    match l.exact_dual() {
        Some(q) => LatticeR::from_rational(q),
        None if l.is_irrational() => LatticeR::irrational(*l.dual_generator()),
        None => LatticeR::new(*l.dual_generator()),
    }
}

/// Equality of lattices via mutual membership of basis vectors.
pub fn same_lattice(a: &LatticeR, b: &LatticeR, mode: Membership) -> bool {
    a.dim() == b.dim() && is_sublattice(a, b, mode) && is_sublattice(b, a, mode)
}

/// fine is contained in coarse (checked on the basis of fine).
pub fn is_sublattice(fine: &LatticeR, coarse: &LatticeR, mode: Membership) -> bool {
    if fine.dim() != coarse.dim() {
        return false;
    }
    let d = fine.dim();
    if let (Some(f), Some(c)) = (fine.exact(), coarse.exact()) {
        let cinv = c.inverse().expect("invertible");
        return cinv.mul(f).is_integer();
    }
    let g = fine.generator();
    (0..d).all(|j| {
        let col: Vec<f64> = (0..d).map(|i| g.get(i, j)).collect();
        coarse.contains(&col, mode)
    })
}

/// A point of the union of annihilators together with kappa(alpha).
#[derive(Clone, Debug, Serialize)]
pub struct AnnihilatorPoint {
    pub alpha: Vec<f64>,
    pub kappa: Vec<usize>,
    pub exact: bool,
}

impl AnnihilatorPoint {
    pub fn norm(&self) -> f64 {
        norm2(&self.alpha)
    }
}

/// Centered representative of k/n mod 1 in (-1/2, 1/2].
pub fn torus_centered(k: i128, n: i128) -> (i128, f64) {
    let k = k.mod_floor(&n);
    let c = if 2 * k > n { k - n } else { k };
    (k, c as f64 / n as f64)
}

/// Every alpha with |alpha| <= radius in the union of annihilators, with kappa.
/// Sorted by norm; alpha = 0 comes first and carries every index.
pub fn enumerate_annihilator_union(
    lattices: &[Lattice],
    radius: f64,
    max_points: usize,
) -> Result<Vec<AnnihilatorPoint>, LatticeError> {
    if !(radius > 0.0) {
        return Err(LatticeError::BadRadius);
    }
    let all_z = lattices.iter().all(|l| matches!(l, Lattice::Z(_)));
    let any_z = lattices.iter().any(|l| matches!(l, Lattice::Z(_)));
    if any_z && !all_z {
        return Err(LatticeError::MixedGroups);
    }
    if all_z && !lattices.is_empty() {
        return enumerate_torus(lattices, radius, max_points);
    }
    let d = lattices
        .iter()
        .map(|l| match l {
            Lattice::R(r) => r.dim(),
            Lattice::Full(d) => *d,
            Lattice::Z(_) => 1,
        })
        .next()
        .unwrap_or(1);
    for l in lattices {
        let ld = match l {
            Lattice::R(r) => r.dim(),
            Lattice::Full(d) => *d,
            Lattice::Z(_) => 1,
        };
        if ld != d {
            return Err(LatticeError::DimensionMismatch { expected: d, got: ld });
        }
    }
    let exact_all = lattices.iter().all(|l| match l {
        Lattice::R(r) => r.is_exact(),
        _ => true,
    });
    let den = if exact_all {
        lattices.iter().fold(1i128, |acc, l| match l {
            Lattice::R(r) => acc.lcm(&r.exact_dual().unwrap().denominator_lcm()),
            _ => acc,
        })
    } else {
        1
    };
    // key -> (alpha, kappa)
    let mut merged: BTreeMap<Vec<i128>, (Point, Vec<usize>)> = BTreeMap::new();
    merged.insert(vec![0; d], (Point::from_elem(0.0, d), (0..lattices.len()).collect()));
    for (j, l) in lattices.iter().enumerate() {
        let r = match l {
            Lattice::R(r) => r,
            _ => continue,
        };
        let exact_dual = if exact_all { r.exact_dual() } else { None };
        for (nu, alpha) in r.dual_points_in_ball(radius) {
            if nu.iter().all(|v| *v == 0) {
                continue;
            }
            let key: Vec<i128> = match &exact_dual {
                Some(qd) => {
                    let nuq: Vec<Q> = nu.iter().map(|v| Q::from_integer(*v as i128)).collect();
                    qd.apply(&nuq)
                        .iter()
                        .map(|v| *(v * Q::from_integer(den)).numer())
                        .collect()
                }
                None => alpha.iter().map(|v| (v / DEFAULT_EPS).round() as i128).collect(),
            };
            let entry = merged.entry(key).or_insert_with(|| (alpha.clone(), Vec::new()));
            if exact_all && !entry.1.contains(&j) {
                entry.1.push(j);
            }
            if merged.len() > max_points {
                return Err(LatticeError::TooManyPoints { partial: merged.len() - 1 });
            }
        }
    }
    let mut out: Vec<AnnihilatorPoint> = merged
        .into_iter()
        .map(|(_, (alpha, mut kappa))| {
            let zero = alpha.iter().all(|v| *v == 0.0);
            if !exact_all && !zero {
                kappa = lattices
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| match l {
                        Lattice::R(r) => dual_lattice(r)
                            .map(|dl| dl.contains(&alpha, Membership::Tolerance(DEFAULT_EPS)))
                            .unwrap_or(false),
                        _ => false,
                    })
                    .map(|(j, _)| j)
                    .collect();
            }
            kappa.sort_unstable();
            AnnihilatorPoint { alpha: alpha.to_vec(), kappa, exact: exact_all }
        })
        .collect();
    sort_points(&mut out);
    Ok(out)
}

fn enumerate_torus(
    lattices: &[Lattice],
    radius: f64,
    max_points: usize,
) -> Result<Vec<AnnihilatorPoint>, LatticeError> {
    let mods: Vec<i128> = lattices
        .iter()
        .map(|l| match l {
            Lattice::Z(z) => z.modulus(),
            _ => unreachable!(),
        })
        .collect();
    let den = mods.iter().fold(1i128, |a, m| a.lcm(m));
    let mut merged: BTreeMap<i128, Vec<usize>> = BTreeMap::new();
    merged.insert(0, (0..lattices.len()).collect());
    for (j, n) in mods.iter().enumerate() {
        for k in 1..*n {
            let (_, c) = torus_centered(k, *n);
            if c.abs() > radius * (1.0 + 1e-12) {
                continue;
            }
            let key = (k * (den / n)).mod_floor(&den);
            let e = merged.entry(key).or_default();
            if !e.contains(&j) {
                e.push(j);
            }
            if merged.len() > max_points {
                return Err(LatticeError::TooManyPoints { partial: merged.len() - 1 });
            }
        }
    }
    let mut out: Vec<AnnihilatorPoint> = merged
        .into_iter()
        .map(|(key, mut kappa)| {
            kappa.sort_unstable();
            let (_, c) = torus_centered(key, den);
            AnnihilatorPoint { alpha: vec![c], kappa, exact: true }
        })
        .collect();
    sort_points(&mut out);
    Ok(out)
}

fn sort_points(pts: &mut [AnnihilatorPoint]) {
    pts.sort_by(|a, b| {
        a.norm()
            .partial_cmp(&b.norm())
            .unwrap()
            .then_with(|| a.alpha.partial_cmp(&b.alpha).unwrap())
    });
}

/// Points of coarse \ fine_image inside the ball (the sets Gamma* \ B Gamma*).
pub fn difference_points(
    coarse: &LatticeR,
    fine_image: &LatticeR,
    radius: f64,
) -> Result<Vec<Point>, LatticeError> {
    if coarse.dim() != fine_image.dim() {
        return Err(LatticeError::DimensionMismatch { expected: coarse.dim(), got: fine_image.dim() });
    }
    if !is_sublattice(fine_image, coarse, Membership::Exact) {
        return Err(LatticeError::NotNested);
    }
    let fine_inv_exact = fine_image.exact().and_then(|q| q.inverse());
    let coarse_exact = coarse.exact().cloned();
    let fine_inv = fine_image.generator().inverse().ok_or(LatticeError::Degenerate)?;
    let mut out = Vec::new();
    for (nu, p) in points_in_ball(coarse.generator(), radius) {
        let in_fine = match (&fine_inv_exact, &coarse_exact) {
            (Some(fi), Some(c)) => {
                let nuq: Vec<Q> = nu.iter().map(|v| Q::from_integer(*v as i128)).collect();
                fi.apply(&c.apply(&nuq)).iter().all(|v| v.is_integer())
            }
            _ => fine_inv.apply(&p).iter().all(|c| (c - c.round()).abs() < DEFAULT_EPS),
        };
        if !in_fine {
            out.push(p);
        }
    }
    out.sort_by(|a, b| norm2(a).partial_cmp(&norm2(b)).unwrap().then_with(|| a.partial_cmp(b).unwrap()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_examples() {
        let d = dual_lattice(&LatticeR::integer(2)).unwrap();
        assert_eq!(d.generator().rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let d = dual_lattice(&LatticeR::from_rows(&[vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap()).unwrap();
        assert_eq!(d.generator().rows(), vec![vec![0.5, 0.0], vec![0.0, 0.5]]);
        let d = dual_lattice(&LatticeR::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(d.generator().rows(), vec![vec![1.0, 0.0], vec![-1.0, 1.0]]);
    }

    #[test]
    fn singular_is_degenerate() {
        let e = LatticeR::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap_err();
        assert_eq!(e.to_string(), "degenerate lattice");
    }

    #[test]
    fn membership_examples() {
        assert!(LatticeR::integer(2).contains(&[3.0, -5.0], Membership::Exact));
        let half = LatticeR::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert!(!half.contains(&[0.25, 0.0], Membership::Exact));
        let root2 = LatticeR::irrational(Mat::diag(&[std::f64::consts::SQRT_2])).unwrap();
        assert!(!root2.contains(&[1.0], Membership::Exact));
        assert!(root2.contains(&[0.0], Membership::Exact));
    }

    #[test]
    fn integers_in_ball() {
        let pts = enumerate_annihilator_union(&[Lattice::R(LatticeR::integer(1))], 2.5, 100).unwrap();
        let alphas: Vec<f64> = pts.iter().map(|p| p.alpha[0]).collect();
        assert_eq!(alphas, vec![0.0, -1.0, 1.0, -2.0, 2.0]);
        assert!(pts.iter().all(|p| p.kappa == vec![0]));
    }

    #[test]
    fn max_points_reports_partial_count() {
        let e = enumerate_annihilator_union(&[Lattice::R(LatticeR::integer(1))], 100.0, 10).unwrap_err();
        assert!(matches!(e, LatticeError::TooManyPoints { partial: 10 }));
    }

    #[test]
    fn odd_integers_are_the_difference() {
        let z = LatticeR::integer(1);
        let two = LatticeR::from_rows(&[vec![2.0]]).unwrap();
        let q = difference_points(&z, &two, 4.0).unwrap();
        let q: Vec<f64> = q.iter().map(|p| p[0]).collect();
        assert_eq!(q, vec![-1.0, 1.0, -3.0, 3.0]);
    }

    #[test]
    fn non_nested_pair_is_rejected() {
        let z2 = LatticeR::integer(2);
        let b = LatticeR::from_rows(&[vec![0.5, 0.0], vec![0.0, 1.0]]).unwrap();
        let e = difference_points(&z2, &b, 2.0).unwrap_err();
        assert_eq!(e.to_string(), "nested-lattice decomposition inapplicable");
    }
}
