//! Auto-correlation functions t_alpha, the remainders R and R~, and the six
//! frame-bound estimates evaluated on a frequency grid.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use smallvec::SmallVec;
use thiserror::Error;

use crate::gti::{for_each_modulation, GaborTimeSide, GridDomain, GtiError, KeyMode, Layer, Member, MemberSet, SystemSpec};
use crate::lattice::{dual_lattice, Lattice, LatticeError, Membership};
use crate::linalg::{integer_box, norm2, Mat, Point};
use crate::spectra::{Region, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error(transparent)]
    Gti(#[from] GtiError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("grid point {omega} lies outside the truncation-safe band: boundary-layer tail bound {tail:.3e} exceeds tail_tol {tol:.1e} (layers {layers})")]
    UnsafeBand { omega: String, tail: f64, tol: f64, layers: String },
    #[error("no grid domain: the system has no natural domain, supply a band")]
    NoDomain,
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid resolution must be at least 2 per dimension")]
    Resolution,
    #[error("nested-lattice route unavailable: {0}")]
    NotNested(String),
}

/// Limits on the alpha enumeration.
#[derive(Clone, Debug, Serialize)]
pub struct Truncation {
    pub alpha_radius: f64,
    /// cap on the number of (alpha, layer, member) terms at one frequency
    pub max_points: usize,
    pub divergence_delta: f64,
    pub tail_tol: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation { alpha_radius: 64.0, max_points: 2_000_000, divergence_delta: 0.1, tail_tol: 1e-6 }
    }
}

impl Truncation {
    pub fn with_radius(mut self, r: f64) -> Self {
        self.alpha_radius = r;
        self
    }
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    /// falls back to the system's natural domain
    pub domain: Option<GridDomain>,
    /// points per dimension
    pub resolution: usize,
    pub refine: bool,
    pub refine_tol: f64,
    pub refine_passes: usize,
}

impl GridSpec {
    pub fn new(resolution: usize) -> Self {
        GridSpec { domain: None, resolution, refine: true, refine_tol: 0.005, refine_passes: 3 }
    }

    pub fn band(lo: &[f64], hi: &[f64], resolution: usize) -> Self {
        GridSpec::new(resolution).with_domain(GridDomain::Box { lo: lo.to_vec(), hi: hi.to_vec() })
    }

    pub fn with_domain(mut self, d: GridDomain) -> Self {
        self.domain = Some(d);
        self
    }

    pub fn without_refinement(mut self) -> Self {
        self.refine = false;
        self
    }
}

fn midpoints(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(|k| lo + (k as f64 + 0.5) * h).collect()
}

fn tensor(axes: &[Vec<f64>]) -> Vec<Point> {
    let mut out = vec![Point::new()];
    for ax in axes {
        let mut next = Vec::with_capacity(out.len() * ax.len());
        for p in &out {
            for v in ax {
                let mut q = p.clone();
                q.push(*v);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn domain_points(domain: &GridDomain, d: usize, n: usize) -> Vec<Point> {
    match domain {
        GridDomain::Box { lo, hi } => tensor(&lo.iter().zip(hi).map(|(a, b)| midpoints(*a, *b, n)).collect::<Vec<_>>()),
        GridDomain::Torus => midpoints(0.0, 1.0, n).into_iter().map(|v| Point::from_slice(&[v])).collect(),
        GridDomain::Parallelepiped { gen } => tensor(&vec![midpoints(0.0, 1.0, n); d]).into_iter().map(|u| gen.apply(&u)).collect(),
        GridDomain::Annulus { b } => {
            if d == 1 {
                let top = b.get(0, 0).abs();
                let half = (n / 2).max(1);
                let mut pts: Vec<Point> = midpoints(-top, -1.0, half).into_iter().map(|v| Point::from_slice(&[v])).collect();
                pts.extend(midpoints(1.0, top, half).into_iter().map(|v| Point::from_slice(&[v])));
                pts
            } else {
                let r = b.frobenius();
                tensor(&vec![midpoints(-r, r, n); d]).into_iter().filter(|w| domain_contains(domain, w)).collect()
            }
        }
    }
}

fn domain_spacing(domain: &GridDomain, d: usize, n: usize) -> f64 {
    match domain {
        GridDomain::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| (b - a) / n as f64).fold(f64::INFINITY, f64::min),
        GridDomain::Torus => 1.0 / n as f64,
        GridDomain::Parallelepiped { gen } => (0..d).map(|i| gen.row_norm2(i)).fold(f64::INFINITY, f64::min) / n as f64,
        GridDomain::Annulus { b } => {
            if d == 1 {
                (b.get(0, 0).abs() - 1.0) / (n / 2).max(1) as f64
            } else {
                2.0 * b.frobenius() / n as f64
            }
        }
    }
}

/// Membership used to keep refinement points inside the domain.
pub fn domain_contains(domain: &GridDomain, w: &[f64]) -> bool {
    match domain {
        GridDomain::Box { lo, hi } => w.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= *a && *v <= *b),
        GridDomain::Torus | GridDomain::Parallelepiped { .. } => true,
        GridDomain::Annulus { b } => {
            let binv = b.inverse().expect("invertible dilation");
            norm2(w) >= 1.0 && norm2(&binv.apply(w)) < 1.0
        }
    }
}

fn describe_domain(domain: &GridDomain) -> String {
    match domain {
        GridDomain::Box { lo, hi } => format!("band {lo:?}..{hi:?}"),
        GridDomain::Torus => "torus [0,1)".into(),
        GridDomain::Parallelepiped { gen } => format!("fundamental domain of lattice {:?}", gen.rows()),
        GridDomain::Annulus { b } => format!("dilation annulus B(B(0,1))\\B(0,1), B = {:?}", b.rows()),
    }
}

fn resolve_domain(sys: &SystemSpec, grid: &GridSpec) -> Result<GridDomain, EstimatorError> {
    grid.domain.clone().or_else(|| sys.domain.clone()).ok_or(EstimatorError::NoDomain)
}

/// Grid points for the system on the requested (or natural) domain.
pub fn grid_points(sys: &SystemSpec, grid: &GridSpec) -> Result<Vec<Point>, EstimatorError> {
    if grid.resolution < 2 {
        return Err(EstimatorError::Resolution);
    }
    let domain = resolve_domain(sys, grid)?;
    let pts = domain_points(&domain, sys.dim(), grid.resolution);
    if pts.is_empty() {
        return Err(EstimatorError::EmptyGrid);
    }
    Ok(pts)
}

/// Per-frequency summary of the alpha sums.
#[derive(Clone, Debug, Serialize)]
pub struct PointEval {
    pub omega: Vec<f64>,
    pub t0: f64,
    /// sum_{alpha != 0} |t_alpha|
    pub r: f64,
    /// sum_{alpha != 0} sum_{j,p} |terms|
    pub r_abs: f64,
    /// sum_alpha |t_alpha|^2, alpha = 0 included
    pub l2sq: f64,
    pub max_off: f64,
    pub n_alpha: usize,
    /// some alpha was dropped by the radius cap or the member had no support region
    pub clipped: bool,
    /// the term cap was hit
    pub overflow: bool,
    /// diagonal mass of the boundary layers
    pub tail: f64,
}

type Key = SmallVec<[i128; 5]>;

struct Term {
    key: Key,
    value: C64,
    alpha: Option<Point>,
}

struct Collector<'a> {
    sys: &'a SystemSpec,
    w: &'a [f64],
    radius: f64,
    max_points: usize,
    keep_alpha: bool,
    terms: Vec<Term>,
    clipped: bool,
    overflow: bool,
}

fn zero_key(sys: &SystemSpec) -> Key {
    let n = match &sys.key_mode {
        KeyMode::Torus { .. } => 1,
        KeyMode::Disjoint => sys.dim() + 1,
        _ => sys.dim(),
    };
    SmallVec::from_elem(0, n)
}

fn real_key(sys: &SystemSpec, li: usize, nu: &[i64], alpha: &[f64]) -> Key {
    match &sys.key_mode {
        KeyMode::SingleLattice => nu.iter().map(|v| *v as i128).collect(),
        KeyMode::Exact { mats, .. } => {
            let d = nu.len();
            match &mats[li] {
                Some(k) => (0..d).map(|i| (0..d).map(|j| k[i * d + j] * nu[j] as i128).sum()).collect(),
                None => SmallVec::from_elem(0, d),
            }
        }
        KeyMode::Disjoint => {
            let mut k: Key = SmallVec::new();
            if nu.iter().all(|v| *v == 0) {
                k.extend(std::iter::repeat(0).take(nu.len() + 1));
            } else {
                k.push(li as i128 + 1);
                k.extend(nu.iter().map(|v| *v as i128));
            }
            k
        }
        KeyMode::Tolerance | KeyMode::Torus { .. } => alpha.iter().map(|v| (v / 1e-9).round() as i128).collect(),
    }
}

impl<'a> Collector<'a> {
    fn push(&mut self, key: Key, value: C64, alpha: &[f64]) -> bool {
        if self.terms.len() >= self.max_points {
            self.overflow = true;
            return false;
        }
        let alpha = if self.keep_alpha { Some(Point::from_slice(alpha)) } else { None };
        self.terms.push(Term { key, value, alpha });
        true
    }

    /// Terms v conj g(x + alpha) for alpha in the layer's dual lattice.
    fn real_member(&mut self, li: usize, dual: &Mat, m: &Member, x: &[f64], v: C64) {
        let zero = vec![0i64; x.len()];
        let za = vec![0.0; x.len()];
        let key0 = real_key(self.sys, li, &zero, &za);
        if !self.push(key0, v * m.gen.eval(x).conj(), &za) {
            return;
        }
        let fallback;
        let region = match m.region() {
            Some(r) => r,
            None => {
                self.clipped = true;
                fallback = Region::ball(x, self.radius);
                &fallback
            }
        };
        let (lo, hi) = match region.lattice_box(x, dual) {
            Some(b) => b,
            None => {
                self.overflow = true;
                return;
            }
        };
        let mut stop = false;
        integer_box(&lo, &hi, |nu| {
            if stop || nu.iter().all(|v| *v == 0) {
                return;
            }
            let alpha = dual.apply_i64(nu);
            if norm2(&alpha) > self.radius {
                self.clipped = true;
                return;
            }
            let xa: Point = x.iter().zip(&alpha).map(|(a, b)| a + b).collect();
            if !region.contains(&xa) {
                return;
            }
            let u = m.gen.eval(&xa);
            if u.re == 0.0 && u.im == 0.0 {
                return;
            }
            let key = real_key(self.sys, li, nu, &alpha);
            if !self.push(key, v * u.conj(), &alpha) {
                stop = true;
            }
        });
    }

    fn layer(&mut self, li: usize, layer: &Layer) {
        let pre = layer.weight_prefix();
        let w = self.w;
        match (&layer.lattice, &layer.members) {
            (Lattice::Full(_), MemberSet::Finite(ms)) => {
                let key = zero_key(self.sys);
                let za = vec![0.0; w.len()];
                for m in ms {
                    let v = m.gen.eval(w);
                    self.push(key.clone(), C64::new(pre * m.weight * v.norm_sqr(), 0.0), &za);
                }
            }
            (Lattice::Full(_), MemberSet::Modulations { lambda, gens }) => {
                let key = zero_key(self.sys);
                let za = vec![0.0; w.len()];
                for g in gens {
                    let mut acc = Vec::new();
                    for_each_modulation(lambda, g, w, |lam| {
                        let x: Point = w.iter().zip(lam).map(|(a, b)| a - b).collect();
                        acc.push(pre * g.weight * g.gen.eval(&x).norm_sqr());
                    });
                    for v in acc {
                        self.push(key.clone(), C64::new(v, 0.0), &za);
                    }
                }
            }
            (Lattice::R(_), MemberSet::Finite(ms)) => {
                let dual = *layer.dual_generator().expect("lattice layer");
                for m in ms {
                    let v = m.gen.eval(w);
                    if v.re == 0.0 && v.im == 0.0 {
                        continue;
                    }
                    self.real_member(li, &dual, m, w, v * (pre * m.weight));
                }
            }
            (Lattice::R(_), MemberSet::Modulations { lambda, gens }) => {
                let dual = *layer.dual_generator().expect("lattice layer");
                for g in gens {
                    let mut xs = Vec::new();
                    for_each_modulation(lambda, g, w, |lam| {
                        xs.push(w.iter().zip(lam).map(|(a, b)| a - b).collect::<Point>());
                    });
                    for x in xs {
                        let v = g.gen.eval(&x);
                        if v.re == 0.0 && v.im == 0.0 {
                            continue;
                        }
                        self.real_member(li, &dual, g, &x, v * (pre * g.weight));
                    }
                }
            }
            (Lattice::Z(z), members) => {
                let n = z.modulus();
                let den = match &self.sys.key_mode {
                    KeyMode::Torus { den } => *den,
                    _ => n,
                };
                let ms: Vec<&Member> = match members {
                    MemberSet::Finite(ms) => ms.iter().collect(),
                    MemberSet::Modulations { gens, .. } => gens.iter().collect(),
                };
                for m in ms {
                    let v = m.gen.eval(w) * (pre * m.weight);
                    if v.re == 0.0 && v.im == 0.0 {
                        continue;
                    }
                    for k in 0..n {
                        let a = k as f64 / n as f64;
                        let u = m.gen.eval(&[w[0] + a]);
                        if !self.push(SmallVec::from_slice(&[k * (den / n)]), v * u.conj(), &[a]) {
                            return;
                        }
                    }
                }
            }
        }
    }
}

/// Merged alpha sums at one frequency; optionally the (alpha, t_alpha) list.
fn eval_point_inner(
    sys: &SystemSpec,
    w: &[f64],
    trunc: &Truncation,
    radius: f64,
    keep_alpha: bool,
) -> (PointEval, Vec<(Key, Point, C64)>) {
    let mut c = Collector { sys, w, radius, max_points: trunc.max_points, keep_alpha, terms: Vec::new(), clipped: false, overflow: false };
    for (li, layer) in sys.layers.iter().enumerate() {
        c.layer(li, layer);
        if c.overflow {
            break;
        }
    }
    let Collector { mut terms, clipped, overflow, .. } = c;
    terms.sort_by(|a, b| a.key.cmp(&b.key));
    let mut t0 = 0.0;
    let (mut r, mut r_abs, mut l2sq, mut max_off) = (0.0, 0.0, 0.0, 0.0f64);
    let mut n_alpha = 0;
    let mut alphas = Vec::new();
    let mut i = 0;
    while i < terms.len() {
        let mut j = i;
        let mut t = C64::new(0.0, 0.0);
        let mut a = 0.0;
        while j < terms.len() && terms[j].key == terms[i].key {
            t += terms[j].value;
            a += terms[j].value.norm();
            j += 1;
        }
        let is_zero = terms[i].key.iter().all(|v| *v == 0);
        n_alpha += 1;
        if is_zero {
            t0 = t.re;
            l2sq += t.norm_sqr();
        } else {
            let m = t.norm();
            r += m;
            r_abs += a;
            l2sq += m * m;
            max_off = max_off.max(m);
        }
        if keep_alpha {
            let alpha = terms[i].alpha.clone().unwrap_or_default();
            alphas.push((terms[i].key.clone(), alpha, if is_zero { C64::new(t.re, 0.0) } else { t }));
        }
        i = j;
    }
    let tail = sys.boundary.iter().map(|l| l.diagonal(w)).sum();
    let pe = PointEval { omega: w.to_vec(), t0, r, r_abs, l2sq, max_off, n_alpha, clipped, overflow, tail };
    (pe, alphas)
}

fn check_tail(sys: &SystemSpec, pe: &PointEval, trunc: &Truncation) -> Result<(), EstimatorError> {
    if pe.tail > trunc.tail_tol {
        let layers: Vec<&str> = sys.boundary.iter().map(|l| l.label.as_str()).collect();
        return Err(EstimatorError::UnsafeBand { omega: format!("{:?}", pe.omega), tail: pe.tail, tol: trunc.tail_tol, layers: layers.join(", ") });
    }
    Ok(())
}

/// All alpha sums at one frequency.
pub fn eval_point(sys: &SystemSpec, w: &[f64], trunc: &Truncation) -> Result<PointEval, EstimatorError> {
    let (pe, _) = eval_point_inner(sys, w, trunc, trunc.alpha_radius, false);
    check_tail(sys, &pe, trunc)?;
    Ok(pe)
}

/// (alpha, t_alpha(w)) for every alpha with a nonzero term, sorted by alpha key.
pub fn alpha_terms(sys: &SystemSpec, w: &[f64], trunc: &Truncation) -> Result<Vec<(Point, C64)>, EstimatorError> {
    let (pe, alphas) = eval_point_inner(sys, w, trunc, trunc.alpha_radius, true);
    check_tail(sys, &pe, trunc)?;
    Ok(alphas.into_iter().map(|(_, a, t)| (a, t)).collect())
}

/// Parallel evaluation; output order follows the input.
pub fn evaluate_grid(sys: &SystemSpec, points: &[Point], trunc: &Truncation) -> Result<Vec<PointEval>, EstimatorError> {
    points.par_iter().map(|w| eval_point(sys, w, trunc)).collect()
}

/// sup_w |t_alpha(w)| over the grid for each alpha, ordered by alpha key.
pub fn alpha_table(sys: &SystemSpec, points: &[Point], trunc: &Truncation) -> Result<Vec<(Point, f64)>, EstimatorError> {
    let per: Vec<Vec<(Key, Point, C64)>> = points
        .par_iter()
        .map(|w| {
            let (pe, a) = eval_point_inner(sys, w, trunc, trunc.alpha_radius, true);
            check_tail(sys, &pe, trunc).map(|_| a)
        })
        .collect::<Result<_, _>>()?;
    let mut table: BTreeMap<Key, (Point, f64)> = BTreeMap::new();
    for list in per {
        for (k, a, t) in list {
            let e = table.entry(k).or_insert((a, 0.0));
            e.1 = e.1.max(t.norm());
        }
    }
    Ok(table.into_values().collect())
}

fn in_annihilator(layer: &Layer, alpha: &[f64]) -> bool {
    let zero = alpha.iter().all(|v| *v == 0.0);
    match &layer.lattice {
        Lattice::Full(_) => zero,
        Lattice::Z(z) => {
            let k = alpha[0] * z.modulus() as f64;
            (k - k.round()).abs() < 1e-9
        }
        Lattice::R(l) => {
            if zero {
                return true;
            }
            match dual_lattice(l) {
                Ok(d) => d.contains(alpha, Membership::Tolerance(1e-9)),
                Err(_) => false,
            }
        }
    }
}

/// t_alpha(w) = sum_{j in kappa(alpha)} (1/covol Gamma_j) sum_p w_p g(w) conj g(w + alpha),
/// summed directly over the layers whose annihilator contains alpha.
pub fn t_alpha(sys: &SystemSpec, w: &[f64], alpha: &[f64]) -> C64 {
    let mut t = C64::new(0.0, 0.0);
    let wa: Point = w.iter().zip(alpha).map(|(a, b)| a + b).collect();
    for layer in &sys.layers {
        if !in_annihilator(layer, alpha) {
            continue;
        }
        let pre = layer.weight_prefix();
        match &layer.members {
            MemberSet::Finite(ms) => {
                for m in ms {
                    t += m.gen.eval(w) * m.gen.eval(&wa).conj() * (pre * m.weight);
                }
            }
            MemberSet::Modulations { lambda, gens } => {
                for g in gens {
                    for_each_modulation(lambda, g, w, |lam| {
                        let x: Point = w.iter().zip(lam).map(|(a, b)| a - b).collect();
                        let xa: Point = wa.iter().zip(lam).map(|(a, b)| a - b).collect();
                        t += g.gen.eval(&x) * g.gen.eval(&xa).conj() * (pre * g.weight);
                    });
                }
            }
        }
    }
    t
}

/// Samples of one t_alpha with the boundary-layer tail at each point.
#[derive(Clone, Debug)]
pub struct AutoCorrField {
    pub alpha: Point,
    pub samples: Vec<C64>,
    pub tail_estimate: f64,
}

pub fn t_alpha_field(sys: &SystemSpec, alpha: &[f64], points: &[Point], trunc: &Truncation) -> Result<AutoCorrField, EstimatorError> {
    let mut tail: f64 = 0.0;
    for w in points {
        let t: f64 = sys.boundary.iter().map(|l| l.diagonal(w)).sum();
        if t > trunc.tail_tol {
            let pe = PointEval { omega: w.to_vec(), t0: 0.0, r: 0.0, r_abs: 0.0, l2sq: 0.0, max_off: 0.0, n_alpha: 0, clipped: false, overflow: false, tail: t };
            check_tail(sys, &pe, trunc)?;
        }
        tail = tail.max(t);
    }
    let samples = points.par_iter().map(|w| t_alpha(sys, w, alpha)).collect();
    Ok(AutoCorrField { alpha: Point::from_slice(alpha), samples, tail_estimate: tail })
}

/// t_0 on the grid.
pub fn calderon_sum(sys: &SystemSpec, points: &[Point], trunc: &Truncation) -> Result<Vec<f64>, EstimatorError> {
    Ok(evaluate_grid(sys, points, trunc)?.into_iter().map(|p| p.t0).collect())
}

#[derive(Clone, Debug)]
pub struct RemainderField {
    pub values: Vec<f64>,
    pub divergent: bool,
}

fn remainder(sys: &SystemSpec, points: &[Point], trunc: &Truncation, abs: bool) -> Result<RemainderField, EstimatorError> {
    let evals = evaluate_grid(sys, points, trunc)?;
    let flags = divergence_flags(sys, &evals, trunc)?;
    let values = evals.iter().map(|p| if abs { p.r_abs } else { p.r }).collect();
    Ok(RemainderField { values, divergent: if abs { flags.r_abs } else { flags.r } })
}

/// R(w) = sum_{alpha != 0} |t_alpha(w)| with the divergence flag.
pub fn remainder_r(sys: &SystemSpec, points: &[Point], trunc: &Truncation) -> Result<RemainderField, EstimatorError> {
    remainder(sys, points, trunc, false)
}

/// R~(w): moduli taken inside the layer and member sums.
pub fn remainder_abs(sys: &SystemSpec, points: &[Point], trunc: &Truncation) -> Result<RemainderField, EstimatorError> {
    remainder(sys, points, trunc, true)
}

/// R(w) via alpha = B^m q, q in Γ* \ BΓ*, with kappa(alpha) = { j <= m }.
/// Only the plain wavelet case (no shears) is handled.
pub fn remainder_nested(sys: &SystemSpec, w: &[f64], trunc: &Truncation) -> Result<f64, EstimatorError> {
    let info = sys.nested.as_ref().ok_or_else(|| EstimatorError::NotNested("system has no nested dilation".into()))?;
    if info.shears.len() != 1 {
        return Err(EstimatorError::NotNested("sheared layers".into()));
    }
    let (j0, j1) = info.j_range;
    let b = info.dilation.transpose();
    let dual = dual_lattice(&info.gamma)?;
    let bdual = dual.image(&b)?;
    let pre = 1.0 / info.gamma.covol();
    // per-scale frequency maps and reach of the layers that are nonzero at w
    let mut maps = Vec::new();
    for j in j0..=j1 {
        let m = b.pow(-j).ok_or_else(|| EstimatorError::NotNested("singular dilation".into()))?;
        let layer = &sys.layers[(j - j0) as usize];
        let mut reach: f64 = -1.0;
        if let MemberSet::Finite(ms) = &layer.members {
            for mem in ms {
                let v = mem.gen.eval(w);
                if v.re != 0.0 || v.im != 0.0 {
                    reach = reach.max(match mem.region() {
                        Some(r) => r.outer_radius() + norm2(w),
                        None => trunc.alpha_radius,
                    });
                }
            }
        }
        maps.push((j, m, reach.min(trunc.alpha_radius)));
    }
    let regions: Vec<Option<Region>> = info.psis.iter().map(|p| p.region()).collect();
    let mut total = 0.0;
    let mut m = j0;
    loop {
        let reach = maps.iter().filter(|(j, _, _)| *j <= m).map(|(_, _, r)| *r).fold(-1.0, f64::max);
        if reach < 0.0 {
            if m > j1 {
                break;
            }
            m += 1;
            continue;
        }
        let binv = b.pow(-m).ok_or_else(|| EstimatorError::NotNested("singular dilation".into()))?;
        let rq = reach * binv.frobenius();
        let qs = crate::lattice::difference_points(&dual, &bdual, rq)?;
        if qs.is_empty() && m >= j1 {
            break;
        }
        let bm = b.pow(m).unwrap();
        for q in &qs {
            let alpha = bm.apply(q);
            if norm2(&alpha) > trunc.alpha_radius {
                continue;
            }
            let wa: Point = w.iter().zip(&alpha).map(|(a, c)| a + c).collect();
            let mut t = C64::new(0.0, 0.0);
            for (j, mj, _) in &maps {
                if *j > m {
                    break;
                }
                let x = mj.apply(w);
                let xa = mj.apply(&wa);
                for (psi, reg) in info.psis.iter().zip(&regions) {
                    if let Some(reg) = reg {
                        if !reg.contains(&xa) {
                            continue;
                        }
                    }
                    t += psi.eval(&x) * psi.eval(&xa).conj();
                }
            }
            total += pre * t.norm();
        }
        m += 1;
        if m > j1 + 400 {
            break;
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, Default, Serialize, PartialEq)]
pub struct DivergenceFlags {
    pub r: bool,
    pub r_abs: bool,
    pub l2: bool,
    pub overflow: bool,
}

impl DivergenceFlags {
    pub fn any(&self) -> bool {
        self.r || self.r_abs || self.l2
    }

    /// Flags that turn A1, B1 or B2 into sentinels.
    pub fn primary(&self) -> bool {
        self.r || self.l2
    }
}

fn ladder_flags(seq: &[[f64; 3]], delta: f64) -> [bool; 3] {
    let mut out = [false; 3];
    for (q, o) in out.iter_mut().enumerate() {
        *o = seq.windows(2).filter(|w| w[1][q] - w[0][q] >= delta).count() >= 3;
    }
    out
}

/// Cauchy test over a ladder of truncations: radii r/8..r on R^d at the extremal
/// points, level prefixes J/8..J on Z.
pub fn divergence_flags(sys: &SystemSpec, evals: &[PointEval], trunc: &Truncation) -> Result<DivergenceFlags, EstimatorError> {
    let mut flags = DivergenceFlags { overflow: evals.iter().any(|p| p.overflow), ..Default::default() };
    if flags.overflow {
        flags.r = true;
        flags.r_abs = true;
        flags.l2 = true;
        return Ok(flags);
    }
    let delta = trunc.divergence_delta;
    if matches!(sys.group, crate::gti::Group::Integers) {
        let jn = sys.level_count();
        if jn < 4 {
            return Ok(flags);
        }
        let levels = [jn.div_ceil(8), jn.div_ceil(4), jn.div_ceil(2), jn];
        let step = (evals.len() / 64).max(1);
        let pts: Vec<Point> = evals.iter().step_by(step).map(|p| Point::from_slice(&p.omega)).collect();
        let mut seq = Vec::new();
        for m in levels {
            let sub = sys.level_prefix(m)?;
            let ev: Vec<PointEval> = pts.par_iter().map(|w| eval_point_inner(&sub, w, trunc, trunc.alpha_radius, false).0).collect();
            let sup = |f: &dyn Fn(&PointEval) -> f64| ev.iter().map(f).fold(0.0, f64::max);
            seq.push([sup(&|p| p.r), sup(&|p| p.r_abs), sup(&|p| p.l2sq)]);
        }
        let [r, ra, l2] = ladder_flags(&seq, delta);
        flags.r = r;
        flags.r_abs = ra;
        flags.l2 = l2;
        return Ok(flags);
    }
    if !evals.iter().any(|p| p.clipped) {
        return Ok(flags);
    }
    let pick = |f: &dyn Fn(&PointEval) -> f64| -> Point {
        let best = evals.iter().max_by(|a, b| f(a).total_cmp(&f(b))).unwrap();
        Point::from_slice(&best.omega)
    };
    let probes = [pick(&|p| p.r), pick(&|p| p.r_abs), pick(&|p| p.l2sq)];
    let r = trunc.alpha_radius;
    for (q, w) in probes.iter().enumerate() {
        let seq: Vec<[f64; 3]> = [r / 8.0, r / 4.0, r / 2.0, r]
            .iter()
            .map(|rad| {
                let p = eval_point_inner(sys, w, trunc, *rad, false).0;
                [p.r, p.r_abs, p.l2sq]
            })
            .collect();
        let f = ladder_flags(&seq, delta);
        match q {
            0 => flags.r |= f[0],
            1 => flags.r_abs |= f[1],
            _ => flags.l2 |= f[2],
        }
    }
    Ok(flags)
}

/// The six estimates in the order A1, B1, B2, A_inf, A', B'.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct SixBounds {
    pub a1: f64,
    pub b1: f64,
    pub b2: f64,
    pub a_inf: f64,
    pub a_prime: f64,
    pub b_prime: f64,
}

impl SixBounds {
    fn as_array(&self) -> [f64; 6] {
        [self.a1, self.b1, self.b2, self.a_inf, self.a_prime, self.b_prime]
    }

    fn from_array(v: [f64; 6]) -> Self {
        SixBounds { a1: v[0], b1: v[1], b2: v[2], a_inf: v[3], a_prime: v[4], b_prime: v[5] }
    }
}

const MINIMIZE: [bool; 6] = [true, false, false, true, true, false];

fn quantities(p: &PointEval) -> [f64; 6] {
    [p.t0 - p.r, p.t0 + p.r, p.l2sq.sqrt(), p.t0, p.t0 - p.r_abs, p.t0 + p.r_abs]
}

fn extremes(evals: &[PointEval]) -> ([f64; 6], [usize; 6]) {
    let mut v = [0.0; 6];
    let mut arg = [0usize; 6];
    for q in 0..6 {
        v[q] = if MINIMIZE[q] { f64::INFINITY } else { f64::NEG_INFINITY };
        for (i, p) in evals.iter().enumerate() {
            let x = quantities(p)[q];
            let better = if MINIMIZE[q] { x < v[q] } else { x > v[q] };
            if better {
                v[q] = x;
                arg[q] = i;
            }
        }
    }
    (v, arg)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    /// refined values with divergence sentinels applied
    pub bounds: SixBounds,
    /// coarse-grid values before refinement and sentinels
    pub coarse: SixBounds,
    /// |refined - coarse| per estimate
    pub error_bars: SixBounds,
    /// where each extremum was attained
    pub argext: Vec<Vec<f64>>,
    pub alpha_radius: f64,
    pub alpha_count: usize,
    pub grid: String,
    pub grid_points: usize,
    pub divergence: DivergenceFlags,
    pub chain_ok: bool,
    pub tight: Option<f64>,
    pub tail_max: f64,
    /// (A', B') with the supremum taken separately for each k, nested wavelets only
    pub abs_separated: Option<(f64, f64)>,
    pub float_kappa: bool,
    pub ucp_asserted: bool,
    pub notes: Vec<String>,
}

impl BoundsReport {
    pub fn a1(&self) -> f64 {
        self.bounds.a1
    }
    pub fn b1(&self) -> f64 {
        self.bounds.b1
    }
    pub fn b2(&self) -> f64 {
        self.bounds.b2
    }
    pub fn a_inf(&self) -> f64 {
        self.bounds.a_inf
    }
    pub fn a_prime(&self) -> f64 {
        self.bounds.a_prime
    }
    pub fn b_prime(&self) -> f64 {
        self.bounds.b_prime
    }
}

pub const HYPOTHESIS_DISCLAIMER: &str =
    "B2 and A_inf are necessary bounds only under the 1-UCP hypothesis, which is asserted by the user and not verified.";

pub const TIGHT_TOL: f64 = 1e-8;

pub fn chain_ok(b: &SixBounds, tol: f64) -> bool {
    let l1 = b.a1 <= b.a_inf + tol;
    let l2 = !(b.a1 > 0.0) || b.a_inf <= b.b2 + tol;
    let l3 = b.b2 <= b.b1 + tol;
    l1 && l2 && l3
}

/// Constant A when every off-diagonal t_alpha vanishes and t_0 is constant on the grid.
pub fn tightness_from(evals: &[PointEval], tol: f64) -> Option<f64> {
    if evals.is_empty() {
        return None;
    }
    let mean = evals.iter().map(|p| p.t0).sum::<f64>() / evals.len() as f64;
    let off = evals.iter().map(|p| p.max_off).fold(0.0, f64::max);
    let dev = evals.iter().map(|p| (p.t0 - mean).abs()).fold(0.0, f64::max);
    (off < tol && dev < tol).then_some(mean)
}

pub fn tightness(sys: &SystemSpec, grid: &GridSpec, trunc: &Truncation) -> Result<Option<f64>, EstimatorError> {
    let pts = grid_points(sys, grid)?;
    let evals = evaluate_grid(sys, &pts, trunc)?;
    Ok(tightness_from(&evals, TIGHT_TOL))
}

/// Grid evaluation, local refinement of each extremum, divergence ladder and sentinels.
pub fn bounds(sys: &SystemSpec, grid: &GridSpec, trunc: &Truncation) -> Result<BoundsReport, EstimatorError> {
    let domain = resolve_domain(sys, grid)?;
    let pts = grid_points(sys, grid)?;
    let evals = evaluate_grid(sys, &pts, trunc)?;
    bounds_from_evals(sys, grid, trunc, &domain, evals)
}

/// Same as `bounds` but also returns the per-point evaluations.
pub fn bounds_with_points(sys: &SystemSpec, grid: &GridSpec, trunc: &Truncation) -> Result<(BoundsReport, Vec<PointEval>), EstimatorError> {
    let domain = resolve_domain(sys, grid)?;
    let pts = grid_points(sys, grid)?;
    let evals = evaluate_grid(sys, &pts, trunc)?;
    let rep = bounds_from_evals(sys, grid, trunc, &domain, evals.clone())?;
    Ok((rep, evals))
}

fn neighbours(center: &[f64], h: f64) -> Vec<Point> {
    let d = center.len();
    let axes: Vec<Vec<f64>> = (0..d).map(|i| vec![center[i] - h, center[i], center[i] + h]).collect();
    tensor(&axes).into_iter().filter(|p| p.iter().zip(center).any(|(a, b)| a != b)).collect()
}

fn bounds_from_evals(
    sys: &SystemSpec,
    grid: &GridSpec,
    trunc: &Truncation,
    domain: &GridDomain,
    evals: Vec<PointEval>,
) -> Result<BoundsReport, EstimatorError> {
    let (coarse, arg) = extremes(&evals);
    let mut refined = coarse;
    let mut argext: Vec<Point> = arg.iter().map(|i| Point::from_slice(&evals[*i].omega)).collect();
    if grid.refine {
        let h0 = domain_spacing(domain, sys.dim(), grid.resolution);
        for q in 0..6 {
            let mut h = h0;
            for _ in 0..grid.refine_passes {
                h *= 0.5;
                let cand: Vec<Point> = neighbours(&argext[q], h).into_iter().filter(|p| domain_contains(domain, p)).collect();
                let ev = evaluate_grid(sys, &cand, trunc)?;
                let before = refined[q];
                for p in &ev {
                    let x = quantities(p)[q];
                    let better = if MINIMIZE[q] { x < refined[q] } else { x > refined[q] };
                    if better {
                        refined[q] = x;
                        argext[q] = Point::from_slice(&p.omega);
                    }
                }
                let change = (refined[q] - before).abs() / before.abs().max(1e-300);
                if change < grid.refine_tol {
                    break;
                }
            }
        }
    }
    let flags = divergence_flags(sys, &evals, trunc)?;
    let mut b = SixBounds::from_array(refined);
    if flags.r {
        b.a1 = f64::NEG_INFINITY;
        b.b1 = f64::INFINITY;
    }
    if flags.r_abs {
        b.a_prime = f64::NEG_INFINITY;
        b.b_prime = f64::INFINITY;
    }
    if flags.l2 {
        b.b2 = f64::INFINITY;
    }
    let err = {
        let (r, c) = (SixBounds::from_array(refined).as_array(), coarse);
        let mut e = [0.0; 6];
        for i in 0..6 {
            e[i] = (r[i] - c[i]).abs();
        }
        SixBounds::from_array(e)
    };
    let mut notes = sys.notes.clone();
    notes.push(HYPOTHESIS_DISCLAIMER.to_string());
    if !sys.ucp_asserted {
        notes.push("BLOCKING: 1-UCP not asserted for this system; B2 and A_inf are reported without that hypothesis being checked.".into());
    }
    if sys.float_kappa() {
        notes.push("κ(α) certified only to floating-point tolerance 1e-9.".into());
    }
    if matches!(domain, GridDomain::Box { .. }) && !sys.is_shift_invariant() {
        notes.push("ess-sup over a finite band only lower-bounds the global B1.".into());
    }
    let tail_max = evals.iter().map(|p| p.tail).fold(0.0, f64::max);
    let tight = if flags.any() && flags.primary() { None } else { tightness_from(&evals, TIGHT_TOL) };
    Ok(BoundsReport {
        chain_ok: chain_ok(&b, 1e-9),
        bounds: b,
        coarse: SixBounds::from_array(coarse),
        error_bars: err,
        argext: argext.into_iter().map(|p| p.to_vec()).collect(),
        alpha_radius: trunc.alpha_radius,
        alpha_count: evals.iter().map(|p| p.n_alpha).max().unwrap_or(0),
        grid: format!("{} ({} points)", describe_domain(domain), evals.len()),
        grid_points: evals.len(),
        divergence: flags,
        tight,
        tail_max,
        abs_separated: separated_abs_bounds(sys, &evals.iter().map(|p| Point::from_slice(&p.omega)).collect::<Vec<_>>())?,
        float_kappa: sys.float_kappa(),
        ucp_asserted: sys.ucp_asserted,
        notes,
    })
}

/// inf/sup of t_0 -/+ sum_{k != 0} sqrt(beta(k) beta(-k)) with
/// beta(k) = sup_w (1/covol Γ) sum_j sum_l |psi_l(B^-j w)| |psi_l(B^-j w + k)|, k in Γ*.
/// Defined for plain nested wavelet systems with compactly supported generators.
pub fn separated_abs_bounds(sys: &SystemSpec, points: &[Point]) -> Result<Option<(f64, f64)>, EstimatorError> {
    let info = match &sys.nested {
        Some(i) if i.shears.len() == 1 => i,
        _ => return Ok(None),
    };
    let mut reach: f64 = 0.0;
    for p in &info.psis {
        match p.support_hint() {
            crate::spectra::SupportHint::Compact(r) => reach = reach.max(r.outer_radius()),
            _ => return Ok(None),
        }
    }
    let b = info.dilation.transpose();
    let maps: Vec<Mat> = (info.j_range.0..=info.j_range.1).filter_map(|j| b.pow(-j)).collect();
    let pre = 1.0 / info.gamma.covol();
    let ks: Vec<(SmallVec<[i64; 4]>, Point)> = info.gamma.dual_points_in_ball(2.0 * reach + 1e-9).into_iter().filter(|(nu, _)| nu.iter().any(|v| *v != 0)).collect();
    let per_point: Vec<(f64, Vec<f64>)> = points
        .par_iter()
        .map(|w| {
            let xs: Vec<Point> = maps.iter().map(|m| m.apply(w)).collect();
            let vals: Vec<Vec<f64>> = xs.iter().map(|x| info.psis.iter().map(|p| p.eval(x).norm()).collect()).collect();
            let t0 = pre * vals.iter().flatten().map(|v| v * v).sum::<f64>();
            let betas = ks
                .iter()
                .map(|(_, k)| {
                    let mut s = 0.0;
                    for (x, v) in xs.iter().zip(&vals) {
                        let xk: Point = x.iter().zip(k).map(|(a, c)| a + c).collect();
                        for (p, pv) in info.psis.iter().zip(v) {
                            if *pv != 0.0 {
                                s += pv * p.eval(&xk).norm();
                            }
                        }
                    }
                    pre * s
                })
                .collect();
            (t0, betas)
        })
        .collect();
    let mut beta = vec![0.0f64; ks.len()];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (t0, bs) in &per_point {
        lo = lo.min(*t0);
        hi = hi.max(*t0);
        for (b, v) in beta.iter_mut().zip(bs) {
            *b = b.max(*v);
        }
    }
    let index: std::collections::HashMap<SmallVec<[i64; 4]>, usize> = ks.iter().enumerate().map(|(i, (nu, _))| (nu.clone(), i)).collect();
    let mut s = 0.0;
    for (i, (nu, _)) in ks.iter().enumerate() {
        let neg: SmallVec<[i64; 4]> = nu.iter().map(|v| -v).collect();
        if let Some(j) = index.get(&neg) {
            s += (beta[i] * beta[*j]).sqrt();
        }
    }
    Ok(Some((lo - s, hi + s)))
}

/// Time-side estimates from s_alpha, alpha in the annihilator of the modulation lattice.
#[derive(Clone, Debug, Serialize)]
pub struct TimeSideReport {
    pub bounds: SixBounds,
    pub alpha_count: usize,
}

pub fn time_side_bounds(ts: &GaborTimeSide, resolution: usize, trunc: &Truncation) -> Result<TimeSideReport, EstimatorError> {
    let d = ts.gamma.dim();
    let xs: Vec<Point> = tensor(&vec![midpoints(0.0, 1.0, resolution.max(2)); d]).into_iter().map(|u| ts.gamma.generator().apply(&u)).collect();
    let reach = ts
        .gens
        .iter()
        .filter_map(|g| g.space_support_hint().and_then(|h| h.region().map(|r| r.outer_radius())))
        .fold(0.0, f64::max);
    let lam_dual = dual_lattice(&ts.lambda)?;
    let radius = (2.0 * reach + 1e-9).min(trunc.alpha_radius);
    let pts = crate::lattice::points_in_ball(lam_dual.generator(), radius);
    let n = xs.len();
    let mut t0 = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut ra = vec![0.0; n];
    let mut l2 = vec![0.0; n];
    let cols: Vec<(bool, Vec<(C64, f64)>)> = pts
        .par_iter()
        .map(|(nu, a)| Ok((nu.iter().all(|v| *v == 0), crate::gti::gabor_time_terms(ts, a, &xs)?)))
        .collect::<Result<_, GtiError>>()?;
    for (zero, col) in &cols {
        for (i, (s, a)) in col.iter().enumerate() {
            if *zero {
                t0[i] = s.re;
            } else {
                r[i] += s.norm();
                ra[i] += a;
            }
            l2[i] += s.norm_sqr();
        }
    }
    let mut v = [f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for i in 0..n {
        let q = [t0[i] - r[i], t0[i] + r[i], l2[i].sqrt(), t0[i], t0[i] - ra[i], t0[i] + ra[i]];
        for k in 0..6 {
            v[k] = if MINIMIZE[k] { v[k].min(q[k]) } else { v[k].max(q[k]) };
        }
    }
    Ok(TimeSideReport { bounds: SixBounds::from_array(v), alpha_count: pts.len() })
}
