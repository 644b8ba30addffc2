//! Reference frame bounds from finite discretizations: frame-operator spectra,
//! dual Gramian fibers and exact Gram checks on Z.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::estimators::BoundsReport;
use crate::gti::{for_each_modulation, nadic_taus, GtiError, Layer, MemberSet, SystemKind, SystemSpec};
use crate::lattice::Lattice;
use crate::linalg::Point;
use crate::rational::{rational_from_f64, Q};
use crate::spectra::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Gti(#[from] GtiError),
    #[error("incommensurable lattices: {0}")]
    Incommensurable(String),
    #[error("discretization supports d <= 2 on R^d (got d = {0})")]
    Dimension(usize),
    #[error("invalid model size: {0}")]
    Size(String),
    #[error("fiber oracle requires a single lattice")]
    NotShiftInvariant,
    #[error("eigenvalue computation did not converge (residual {0:.3e})")]
    Breakdown(f64),
}

/// Rank-one piece c v v^H of the frame operator, v sparse.
#[derive(Clone, Debug)]
struct Piece {
    coef: f64,
    entries: Vec<(usize, C64)>,
}

#[derive(Clone, Debug)]
pub enum ModelDomain {
    /// frequency samples (k - n/2)/L per dimension, L-periodized system
    Frequency { grid: Vec<Point>, period: f64 },
    /// coordinates of l^2 on the window [lo, hi)
    Integer { lo: i64, hi: i64 },
}

/// Finite section of the frame operator, kept as a sum of rank-one pieces.
#[derive(Clone, Debug)]
pub struct FiniteModel {
    pub dim: usize,
    pub domain: ModelDomain,
    /// grid points removed because an incommensurable layer is active there
    pub excluded: usize,
    pub provenance: String,
    pieces: Vec<Piece>,
}

fn frac_key(y: f64) -> i64 {
    let f = y - y.floor();
    let k = (f * 1e8).round() as i64;
    if k >= 100_000_000 {
        0
    } else {
        k
    }
}

/// Whether L Z^d lies in the lattice, i.e. L C^{-1} is an integer matrix.
fn commensurable(lat: &Lattice, period: f64) -> bool {
    match lat {
        Lattice::Full(_) => true,
        Lattice::Z(_) => false,
        Lattice::R(l) => {
            if let (Some(q), Some(lq)) = (l.exact(), rational_from_f64(period)) {
                if let Some(inv) = q.inverse() {
                    return inv.scale(lq).is_integer();
                }
            }
            let inv = l.generator().inverse().expect("invertible generator").scale(period);
            inv.rows().iter().flatten().all(|v| (v - v.round()).abs() < 1e-9)
        }
    }
}

fn layer_active(layer: &Layer, w: &[f64]) -> bool {
    match &layer.members {
        MemberSet::Finite(ms) => ms.iter().any(|m| m.gen.eval(w).norm_sqr() > 0.0),
        MemberSet::Modulations { .. } => layer.diagonal(w) > 0.0,
    }
}

/// Periodized frequency-domain model (R^d) or windowed model (Z).
pub fn discretize(sys: &SystemSpec, n: usize, rate: f64) -> Result<FiniteModel, OracleError> {
    match sys.group {
        crate::gti::Group::Integers => discretize_z(sys, n),
        crate::gti::Group::Real(d) => discretize_r(sys, d, n, rate),
    }
}

fn discretize_r(sys: &SystemSpec, d: usize, n: usize, rate: f64) -> Result<FiniteModel, OracleError> {
    if d > 2 {
        return Err(OracleError::Dimension(d));
    }
    if n < 2 || !(rate > 0.0) {
        return Err(OracleError::Size(format!("n = {n}, rate = {rate}")));
    }
    let period = n as f64 / rate;
    let axis: Vec<f64> = (0..n).map(|k| (k as f64 - (n / 2) as f64) / period).collect();
    let mut grid: Vec<Point> = vec![Point::new()];
    for _ in 0..d {
        grid = grid.into_iter().flat_map(|p| axis.iter().map(move |v| {
            let mut q = p.clone();
            q.push(*v);
            q
        })).collect();
    }
    let dilation = matches!(sys.kind, SystemKind::Wavelet | SystemKind::Composite | SystemKind::ShearletClassical | SystemKind::ShearletCone);
    let comm: Vec<bool> = sys.layers.iter().map(|l| commensurable(&l.lattice, period)).collect();
    let keep: Vec<bool> = grid
        .par_iter()
        .map(|w| {
            if dilation && w.iter().all(|v| *v == 0.0) {
                return false;
            }
            !sys.layers.iter().zip(&comm).any(|(l, c)| !c && layer_active(l, w))
        })
        .collect();
    let kept: Vec<Point> = grid.iter().zip(&keep).filter(|(_, k)| **k).map(|(p, _)| p.clone()).collect();
    let excluded = grid.len() - kept.len();
    let active_excluded = excluded - usize::from(dilation);
    if kept.is_empty() || active_excluded * 2 > grid.len() {
        let bad: Vec<&str> = sys.layers.iter().zip(&comm).filter(|(_, c)| !**c).map(|(l, _)| l.label.as_str()).collect();
        return Err(OracleError::Incommensurable(format!(
            "period L = {period} is not in layers {}; {excluded} of {} grid points excluded",
            bad.join(", "),
            grid.len()
        )));
    }
    let mut pieces = Vec::new();
    for (layer, c) in sys.layers.iter().zip(&comm) {
        if !c {
            continue;
        }
        let pre = layer.weight_prefix();
        let ct = match &layer.lattice {
            Lattice::R(l) => Some(l.generator().transpose()),
            _ => None,
        };
        let class = |w: &[f64]| -> Vec<i64> {
            match &ct {
                Some(m) => m.apply(w).iter().map(|v| frac_key(*v)).collect(),
                None => w.iter().map(|v| (v * 1e9).round() as i64).collect(),
            }
        };
        let mut push_groups = |coef: f64, vals: Vec<(usize, C64)>| {
            let mut groups: BTreeMap<Vec<i64>, Vec<(usize, C64)>> = BTreeMap::new();
            for (k, v) in vals {
                groups.entry(class(&kept[k])).or_default().push((k, v));
            }
            for (_, entries) in groups {
                pieces.push(Piece { coef, entries });
            }
        };
        match &layer.members {
            MemberSet::Finite(ms) => {
                for m in ms {
                    let vals: Vec<(usize, C64)> = kept.iter().enumerate().map(|(k, w)| (k, m.gen.eval(w))).filter(|(_, v)| v.norm_sqr() > 0.0).collect();
                    push_groups(pre * m.weight, vals);
                }
            }
            MemberSet::Modulations { lambda, gens } => {
                for g in gens {
                    let mut lams: BTreeSet<Vec<i64>> = BTreeSet::new();
                    let mut lam_pts: HashMap<Vec<i64>, Point> = HashMap::new();
                    for w in &kept {
                        for_each_modulation(lambda, g, w, |lam| {
                            let key: Vec<i64> = lam.iter().map(|v| (v * 1e9).round() as i64).collect();
                            lam_pts.entry(key.clone()).or_insert_with(|| crate::linalg::point(lam));
                            lams.insert(key);
                        });
                    }
                    for key in lams {
                        let lam = &lam_pts[&key];
                        let vals: Vec<(usize, C64)> = kept
                            .iter()
                            .enumerate()
                            .map(|(k, w)| {
                                let x: Point = w.iter().zip(lam).map(|(a, b)| a - b).collect();
                                (k, g.gen.eval(&x))
                            })
                            .filter(|(_, v)| v.norm_sqr() > 0.0)
                            .collect();
                        push_groups(pre * g.weight, vals);
                    }
                }
            }
        }
    }
    Ok(FiniteModel {
        dim: kept.len(),
        domain: ModelDomain::Frequency { grid: kept, period },
        excluded,
        provenance: format!("{}: frequency model n = {n}^{d}, rate {rate}, period L = {period}", sys.label),
        pieces,
    })
}

fn discretize_z(sys: &SystemSpec, n: usize) -> Result<FiniteModel, OracleError> {
    if n < 2 {
        return Err(OracleError::Size(format!("n = {n}")));
    }
    let lo = -((n / 2) as i64);
    let hi = lo + n as i64;
    let idx = |t: i64| -> Option<usize> { (t >= lo && t < hi).then(|| (t - lo) as usize) };
    let mut pieces = Vec::new();
    if let Some(info) = &sys.nadic {
        // extend the greedy sequence until the window is covered
        let mut covered = vec![false; n];
        let mut count = 0usize;
        let mut taus = Vec::new();
        while covered.iter().any(|c| !c) {
            count = (count * 2).max(info.j_max).max(8);
            taus = nadic_taus(info.n, count);
            covered.iter_mut().for_each(|c| *c = false);
            for (j, t) in taus.iter().enumerate() {
                for_coset(info.n, j + 1, *t, lo, hi, |x| covered[(x - lo) as usize] = true);
            }
            if count > 64 * n {
                break;
            }
        }
        for (j, t) in taus.iter().enumerate() {
            for_coset(info.n, j + 1, *t, lo, hi, |x| pieces.push(Piece { coef: 1.0, entries: vec![(idx(x).unwrap(), C64::new(1.0, 0.0))] }));
        }
    } else {
        for layer in &sys.layers {
            let m = match &layer.lattice {
                Lattice::Z(z) => z.modulus() as i64,
                _ => return Err(OracleError::Gti(GtiError::Lattice(crate::lattice::LatticeError::MixedGroups))),
            };
            let ms = match &layer.members {
                MemberSet::Finite(ms) => ms,
                MemberSet::Modulations { .. } => return Err(OracleError::Size("modulated layers on Z".into())),
            };
            for mem in ms {
                let sup = mem.gen.space_support_z().ok_or_else(|| OracleError::Gti(GtiError::NoSpaceEval(mem.gen.label().to_string())))?;
                let (smin, smax) = sup.iter().fold((i64::MAX, i64::MIN), |(a, b), (t, _)| (a.min(*t), b.max(*t)));
                let g0 = (lo - smax).div_euclid(m) - 1;
                let g1 = (hi - smin).div_euclid(m) + 1;
                for g in g0..=g1 {
                    let entries: Vec<(usize, C64)> = sup.iter().filter_map(|(t, c)| idx(g * m + t).map(|i| (i, *c))).collect();
                    if !entries.is_empty() {
                        pieces.push(Piece { coef: mem.weight, entries });
                    }
                }
            }
        }
    }
    Ok(FiniteModel {
        dim: n,
        domain: ModelDomain::Integer { lo, hi },
        excluded: 0,
        provenance: format!("{}: window [{lo}, {hi}) on Z", sys.label),
        pieces,
    })
}

fn for_coset(n: i64, j: usize, t: i64, lo: i64, hi: i64, mut f: impl FnMut(i64)) {
    let mut m: i128 = 1;
    for _ in 0..j {
        m *= n as i128;
        if m > (hi - lo) as i128 * 4 {
            if t >= lo && t < hi {
                f(t);
            }
            return;
        }
    }
    let m = m as i64;
    let mut x = t + (lo - t).div_euclid(m) * m;
    if x < lo {
        x += m;
    }
    while x < hi {
        f(x);
        x += m;
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl FiniteModel {
    pub fn n_elements(&self) -> usize {
        self.pieces.len()
    }

    /// Connected components of the frame operator with their dense blocks.
    fn blocks(&self) -> (Vec<(Vec<usize>, DMatrix<C64>)>, usize) {
        let mut parent: Vec<usize> = (0..self.dim).collect();
        let mut touched = vec![false; self.dim];
        for p in &self.pieces {
            if let Some((first, _)) = p.entries.first() {
                for (k, _) in &p.entries {
                    touched[*k] = true;
                    let (a, b) = (find(&mut parent, *first), find(&mut parent, *k));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut comp: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for k in 0..self.dim {
            if touched[k] {
                let r = find(&mut parent, k);
                comp.entry(r).or_default().push(k);
            }
        }
        let zero_rows = touched.iter().filter(|t| !**t).count();
        let mut local = vec![(0usize, 0usize); self.dim];
        let roots: Vec<usize> = comp.keys().copied().collect();
        let root_index: HashMap<usize, usize> = roots.iter().enumerate().map(|(i, r)| (*r, i)).collect();
        for (r, members) in &comp {
            for (i, k) in members.iter().enumerate() {
                local[*k] = (root_index[r], i);
            }
        }
        let mut mats: Vec<DMatrix<C64>> = comp.values().map(|m| DMatrix::zeros(m.len(), m.len())).collect();
        for p in &self.pieces {
            if p.entries.is_empty() {
                continue;
            }
            let b = local[p.entries[0].0].0;
            let m = &mut mats[b];
            for (k1, v1) in &p.entries {
                for (k2, v2) in &p.entries {
                    m[(local[*k1].1, local[*k2].1)] += *v1 * v2.conj() * p.coef;
                }
            }
        }
        (comp.into_values().zip(mats).collect(), zero_rows)
    }

    /// Dense frame operator (small models only).
    pub fn frame_operator(&self) -> DMatrix<C64> {
        let mut s = DMatrix::zeros(self.dim, self.dim);
        for p in &self.pieces {
            for (k1, v1) in &p.entries {
                for (k2, v2) in &p.entries {
                    s[(*k1, *k2)] += *v1 * v2.conj() * p.coef;
                }
            }
        }
        s
    }

    /// Explicit synthesis rows: for frequency models one row per element
    /// T_gamma g with gamma over coset representatives of Γ_j / L Z^d.
    pub fn synthesis(&self, sys: &SystemSpec) -> Result<DMatrix<C64>, OracleError> {
        match &self.domain {
            ModelDomain::Integer { .. } => {
                let mut m = DMatrix::zeros(self.pieces.len(), self.dim);
                for (r, p) in self.pieces.iter().enumerate() {
                    for (k, v) in &p.entries {
                        m[(r, *k)] = v.conj() * p.coef.sqrt();
                    }
                }
                Ok(m)
            }
            ModelDomain::Frequency { grid, period } => {
                let d = sys.dim();
                let vol = period.powi(d as i32);
                let mut rows: Vec<Vec<C64>> = Vec::new();
                for layer in &sys.layers {
                    let (gen, lat_ok) = match &layer.lattice {
                        Lattice::R(l) => (*l.generator(), commensurable(&layer.lattice, *period)),
                        _ => return Err(OracleError::Size("synthesis needs lattice layers".into())),
                    };
                    if !lat_ok {
                        continue;
                    }
                    let nmat = gen.inverse().unwrap().scale(*period);
                    let ints: Vec<Vec<i64>> = nmat.rows().iter().map(|r| r.iter().map(|v| v.round() as i64).collect()).collect();
                    let reps = coset_reps(&ints);
                    let gens_here: Vec<(f64, Box<dyn Fn(&[f64]) -> C64 + '_>)> = match &layer.members {
                        MemberSet::Finite(ms) => ms.iter().map(|m| (m.weight, Box::new(move |w: &[f64]| m.gen.eval(w)) as Box<dyn Fn(&[f64]) -> C64>)).collect(),
                        MemberSet::Modulations { lambda, gens } => {
                            let mut out: Vec<(f64, Box<dyn Fn(&[f64]) -> C64>)> = Vec::new();
                            for g in gens {
                                let mut lams: BTreeMap<Vec<i64>, Point> = BTreeMap::new();
                                for w in grid {
                                    for_each_modulation(lambda, g, w, |lam| {
                                        lams.entry(lam.iter().map(|v| (v * 1e9).round() as i64).collect()).or_insert_with(|| crate::linalg::point(lam));
                                    });
                                }
                                for (_, lam) in lams {
                                    out.push((g.weight, Box::new(move |w: &[f64]| {
                                        let x: Point = w.iter().zip(&lam).map(|(a, b)| a - b).collect();
                                        g.gen.eval(&x)
                                    })));
                                }
                            }
                            out
                        }
                    };
                    for (wt, f) in &gens_here {
                        let vals: Vec<C64> = grid.iter().map(|w| f(w)).collect();
                        let s = (wt / vol).sqrt();
                        for m in &reps {
                            let gamma = gen.apply_i64(m);
                            rows.push(
                                grid.iter()
                                    .zip(&vals)
                                    .map(|(w, v)| {
                                        let ph = -2.0 * std::f64::consts::PI * crate::linalg::dot(&gamma, w);
                                        (C64::new(0.0, ph).exp() * v).conj() * s
                                    })
                                    .collect(),
                            );
                        }
                    }
                }
                let mut m = DMatrix::zeros(rows.len(), self.dim);
                for (r, row) in rows.iter().enumerate() {
                    for (k, v) in row.iter().enumerate() {
                        m[(r, k)] = *v;
                    }
                }
                Ok(m)
            }
        }
    }
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        if a < 0 {
            (-a, -1, 0)
        } else {
            (a, 1, 0)
        }
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

/// Representatives of Z^d / N Z^d for d <= 2 via a lower-triangular Hermite form.
pub fn coset_reps(n: &[Vec<i64>]) -> Vec<Vec<i64>> {
    match n.len() {
        1 => (0..n[0][0].abs()).map(|a| vec![a]).collect(),
        2 => {
            let (a, b) = (n[0][0], n[0][1]);
            let (g, _, _) = ext_gcd(a, b);
            let h22 = (-n[1][0] * (b / g) + n[1][1] * (a / g)).abs();
            let mut out = Vec::new();
            for i in 0..g.abs() {
                for j in 0..h22 {
                    out.push(vec![i, j]);
                }
            }
            out
        }
        _ => Vec::new(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleBounds {
    pub a_opt: f64,
    pub b_opt: f64,
    pub residual: f64,
    pub blocks: usize,
    pub largest_block: usize,
    pub zero_rows: usize,
    pub method: String,
}

const DENSE_LIMIT: usize = 1600;

fn dense_extremes(m: &DMatrix<C64>) -> (f64, f64, f64) {
    let n = m.nrows();
    if n == 1 {
        return (m[(0, 0)].re, m[(0, 0)].re, 0.0);
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let (mut imin, mut imax) = (0, 0);
    for i in 0..n {
        if eig.eigenvalues[i] < eig.eigenvalues[imin] {
            imin = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[imax] {
            imax = i;
        }
    }
    let res = |i: usize| {
        let v = eig.eigenvectors.column(i).into_owned();
        let r = m * &v - v.map(|c| c * eig.eigenvalues[i]);
        r.norm()
    };
    (eig.eigenvalues[imin], eig.eigenvalues[imax], res(imin).max(res(imax)))
}

/// Extremal eigenvalues by Lanczos with full reorthogonalization.
pub fn lanczos_extremes(m: &DMatrix<C64>, tol: f64) -> Result<(f64, f64, f64), OracleError> {
    let n = m.nrows();
    let mut q: Vec<DVector<C64>> = Vec::new();
    let mut v = DVector::from_fn(n, |i, _| C64::new(1.0 + ((i as f64) * 0.618_033_988_7).sin() * 0.5, ((i as f64) * 0.414_213_562).cos() * 0.25));
    let nv = v.norm();
    v /= C64::new(nv, 0.0);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = (0.0, 0.0, f64::INFINITY);
    for k in 0..n {
        q.push(v.clone());
        let mut w = m * &v;
        let a = v.dotc(&w).re;
        alpha.push(a);
        for _ in 0..2 {
            for qi in &q {
                let c = qi.dotc(&w);
                w -= qi.map(|x| x * c);
            }
        }
        let b = w.norm();
        let check = (k + 1) % 16 == 0 || b < 1e-12 || k + 1 == n;
        if check {
            let kk = alpha.len();
            let t = DMatrix::from_fn(kk, kk, |i, j| {
                if i == j {
                    alpha[i]
                } else if i + 1 == j {
                    beta[i]
                } else if j + 1 == i {
                    beta[j]
                } else {
                    0.0
                }
            });
            let eig = nalgebra::SymmetricEigen::new(t);
            let (mut imin, mut imax) = (0, 0);
            for i in 0..kk {
                if eig.eigenvalues[i] < eig.eigenvalues[imin] {
                    imin = i;
                }
                if eig.eigenvalues[i] > eig.eigenvalues[imax] {
                    imax = i;
                }
            }
            let r = |i: usize| b * eig.eigenvectors[(kk - 1, i)].abs();
            let res = r(imin).max(r(imax));
            last = (eig.eigenvalues[imin], eig.eigenvalues[imax], res);
            let scale = eig.eigenvalues[imax].abs().max(1.0);
            if res < tol * scale || b < 1e-12 {
                return Ok(last);
            }
        }
        beta.push(b);
        v = w / C64::new(b, 0.0);
    }
    if last.2 < 1e-6 {
        Ok(last)
    } else {
        Err(OracleError::Breakdown(last.2))
    }
}

/// Smallest and largest eigenvalue of the model's frame operator.
pub fn optimal_bounds(model: &FiniteModel) -> Result<OracleBounds, OracleError> {
    let (blocks, zero_rows) = model.blocks();
    let results: Vec<Result<(f64, f64, f64, bool), OracleError>> = blocks
        .par_iter()
        .map(|(_, m)| {
            if m.nrows() <= DENSE_LIMIT {
                let (a, b, r) = dense_extremes(m);
                Ok((a, b, r, false))
            } else {
                lanczos_extremes(m, 1e-10).map(|(a, b, r)| (a, b, r, true))
            }
        })
        .collect();
    let mut a_opt = if zero_rows > 0 { 0.0 } else { f64::INFINITY };
    let mut b_opt: f64 = if zero_rows > 0 { 0.0 } else { f64::NEG_INFINITY };
    let mut residual: f64 = 0.0;
    let mut lanczos = false;
    for r in results {
        let (a, b, res, l) = r?;
        a_opt = a_opt.min(a);
        b_opt = b_opt.max(b);
        residual = residual.max(res);
        lanczos |= l;
    }
    if residual > 1e-8 * b_opt.abs().max(1.0) {
        return Err(OracleError::Breakdown(residual));
    }
    Ok(OracleBounds {
        a_opt,
        b_opt,
        residual,
        blocks: blocks.len(),
        largest_block: blocks.iter().map(|(i, _)| i.len()).max().unwrap_or(0),
        zero_rows,
        method: if lanczos { "dense + lanczos".into() } else { "dense".into() },
    })
}

/// Exact Gram check for windowed models on Z: every element has unit norm and
/// distinct elements are orthogonal.
pub fn gram_is_identity(model: &FiniteModel) -> bool {
    let mut at: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, p) in model.pieces.iter().enumerate() {
        let norm: f64 = p.entries.iter().map(|(_, v)| v.norm_sqr()).sum::<f64>() * p.coef;
        if norm != 1.0 {
            return false;
        }
        for (k, _) in &p.entries {
            at.entry(*k).or_default().push(i);
        }
    }
    let mut seen: BTreeSet<(usize, usize)> = BTreeSet::new();
    for list in at.values() {
        for a in 0..list.len() {
            for b in a + 1..list.len() {
                let (i, j) = (list[a], list[b]);
                if !seen.insert((i, j)) {
                    continue;
                }
                let pi = &model.pieces[i];
                let pj: HashMap<usize, C64> = model.pieces[j].entries.iter().copied().collect();
                let ip: C64 = pi.entries.iter().filter_map(|(k, v)| pj.get(k).map(|u| v.conj() * u)).sum();
                if ip.norm() != 0.0 {
                    return false;
                }
            }
        }
    }
    true
}

#[derive(Clone, Debug, Serialize)]
pub struct FiberReport {
    pub a_fib: f64,
    pub b_fib: f64,
    /// same with the index window of half the radius
    pub a_half: f64,
    pub b_half: f64,
    pub window: usize,
}

/// G(w)[alpha, beta] = (1/covol Γ) sum_p w_p conj g_p(w + alpha) g_p(w + beta),
/// alpha, beta over the annihilator ball of the given radius.
pub fn fiber_matrix(sys: &SystemSpec, w: &[f64], radius: f64) -> Result<(Vec<Point>, DMatrix<C64>), OracleError> {
    let lattice = single_lattice(sys)?;
    let alphas: Vec<Point> = match &lattice {
        Some(l) => l.dual_points_in_ball(radius).into_iter().map(|(_, p)| p).collect(),
        None => vec![crate::linalg::point(&vec![0.0; sys.dim()])],
    };
    let n = alphas.len();
    let mut g = DMatrix::zeros(n, n);
    for layer in &sys.layers {
        let pre = layer.weight_prefix();
        let mut add = |f: &dyn Fn(&[f64]) -> C64, wt: f64| {
            let vals: Vec<C64> = alphas.iter().map(|a| f(&w.iter().zip(a).map(|(x, y)| x + y).collect::<Point>())).collect();
            for i in 0..n {
                if vals[i].norm_sqr() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    g[(i, j)] += vals[i].conj() * vals[j] * (pre * wt);
                }
            }
        };
        match &layer.members {
            MemberSet::Finite(ms) => {
                for m in ms {
                    add(&|x: &[f64]| m.gen.eval(x), m.weight);
                }
            }
            MemberSet::Modulations { lambda, gens } => {
                for gm in gens {
                    let mut lams: BTreeMap<Vec<i64>, Point> = BTreeMap::new();
                    for a in &alphas {
                        let x: Point = w.iter().zip(a).map(|(p, q)| p + q).collect();
                        for_each_modulation(lambda, gm, &x, |lam| {
                            lams.entry(lam.iter().map(|v| (v * 1e9).round() as i64).collect()).or_insert_with(|| crate::linalg::point(lam));
                        });
                    }
                    for (_, lam) in lams {
                        add(
                            &|x: &[f64]| {
                                let y: Point = x.iter().zip(&lam).map(|(p, q)| p - q).collect();
                                gm.gen.eval(&y)
                            },
                            gm.weight,
                        );
                    }
                }
            }
        }
    }
    Ok((alphas, g))
}

fn single_lattice(sys: &SystemSpec) -> Result<Option<crate::lattice::LatticeR>, OracleError> {
    if !sys.is_shift_invariant() || matches!(sys.group, crate::gti::Group::Integers) {
        return Err(OracleError::NotShiftInvariant);
    }
    Ok(sys.layers.iter().find_map(|l| match &l.lattice {
        Lattice::R(r) => Some(r.clone()),
        _ => None,
    }))
}

/// Extremal eigenvalues of the truncated dual Gramian over the grid.
pub fn fiber_bounds(sys: &SystemSpec, points: &[Point], radius: f64) -> Result<FiberReport, OracleError> {
    single_lattice(sys)?;
    let per: Vec<Result<(f64, f64, f64, f64, usize), OracleError>> = points
        .par_iter()
        .map(|w| {
            let (_, g) = fiber_matrix(sys, w, radius)?;
            let (_, gh) = fiber_matrix(sys, w, radius / 2.0)?;
            let (a, b, _) = dense_extremes(&g);
            let (ah, bh, _) = dense_extremes(&gh);
            Ok((a, b, ah, bh, g.nrows()))
        })
        .collect();
    let mut rep = FiberReport { a_fib: f64::INFINITY, b_fib: f64::NEG_INFINITY, a_half: f64::INFINITY, b_half: f64::NEG_INFINITY, window: 0 };
    for r in per {
        let (a, b, ah, bh, n) = r?;
        rep.a_fib = rep.a_fib.min(a);
        rep.b_fib = rep.b_fib.max(b);
        rep.a_half = rep.a_half.min(ah);
        rep.b_half = rep.b_half.max(bh);
        rep.window = rep.window.max(n);
    }
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct Link {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// lhs - rhs
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub ok: bool,
    pub links: Vec<Link>,
    pub message: String,
}

pub const HYPOTHESIS_VIOLATED: &str = "estimator hypotheses violated (1-UCP fails)";

fn leq(lhs: f64, rhs: f64, tol: f64) -> bool {
    if lhs == f64::NEG_INFINITY || rhs == f64::INFINITY {
        return true;
    }
    if lhs.is_nan() || rhs.is_nan() || lhs == f64::INFINITY || rhs == f64::NEG_INFINITY {
        return false;
    }
    lhs <= rhs + tol * lhs.abs().max(rhs.abs()).max(1e-12)
}

/// Checks A1 <= A_opt <= A_inf <= B2 <= B_opt <= B1 with relative tolerance;
/// the A_inf <= B2 link is only required when A_opt > 0.
pub fn verify_chain(bounds: &BoundsReport, oracle: &OracleBounds, tol: f64) -> Verdict {
    let b = &bounds.bounds;
    let mut links = Vec::new();
    let mut link = |name: &str, lhs: f64, rhs: f64| {
        links.push(Link { name: name.into(), lhs, rhs, holds: leq(lhs, rhs, tol), gap: lhs - rhs });
    };
    link("A1 <= A_opt", b.a1, oracle.a_opt);
    link("A_opt <= A_inf", oracle.a_opt, b.a_inf);
    if oracle.a_opt > 0.0 {
        link("A_inf <= B2", b.a_inf, b.b2);
    }
    link("B2 <= B_opt", b.b2, oracle.b_opt);
    link("B_opt <= B1", oracle.b_opt, b.b1);
    let ok = links.iter().all(|l| l.holds);
    let necessary_broken = links.iter().any(|l| !l.holds && (l.name == "A_opt <= A_inf" || l.name == "B2 <= B_opt"));
    let message = if ok {
        "chain holds".to_string()
    } else if bounds.divergence.primary() || necessary_broken {
        HYPOTHESIS_VIOLATED.to_string()
    } else {
        let bad: Vec<String> = links.iter().filter(|l| !l.holds).map(|l| format!("{} ({:.6e} > {:.6e})", l.name, l.lhs, l.rhs)).collect();
        format!("chain violated: {}", bad.join("; "))
    };
    Verdict { ok, links, message }
}

/// Exact rational check that L C^{-1} is integral, for diagnostics.
pub fn is_commensurable(lat: &Lattice, period: Q) -> bool {
    match lat {
        Lattice::R(l) => match l.exact().and_then(|q| q.inverse()) {
            Some(inv) => inv.scale(period).is_integer(),
            None => commensurable(lat, crate::rational::q_to_f64(&period)),
        },
        Lattice::Full(_) => true,
        Lattice::Z(_) => false,
    }
}
