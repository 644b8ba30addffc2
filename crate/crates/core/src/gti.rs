//! Layered system model and the builders that bring Gabor, wavelet,
//! composite-dilation, shearlet, continuous and N-adic systems into
//! translation form.

use num_integer::Integer;
use thiserror::Error;

use crate::lattice::{Lattice, LatticeError, LatticeR, LatticeZ, Membership};
use crate::linalg::{norm2, Mat, Point};
use crate::rational::{QMat, Q};
use crate::spectra::{builtin, Builtin, GeneratorSpec, Region, SpectraError, SupportHint, C64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GtiError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("κ(α) undecidable; supply disjointness certificate or rational data")]
    Undecidable,
    #[error("A_{index} does not map the dual lattice onto itself (invariance A^T Γ* = Γ* fails)")]
    NotInvariant { index: usize },
    #[error("quadrature weights must be positive (weight {weight} at member {index})")]
    NonPositiveWeight { index: usize, weight: f64 },
    #[error("generator '{0}' lacks a space-domain eval")]
    NoSpaceEval(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("alpha does not lie in the dual lattice")]
    Decomposition,
    #[error("system has no layers")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Real(usize),
    Integers,
}

impl Group {
    pub fn dim(&self) -> usize {
        match self {
            Group::Real(d) => *d,
            Group::Integers => 1,
        }
    }
}

/// One generator g_{j,p} with its measure weight.
#[derive(Clone, Debug)]
pub struct Member {
    pub weight: f64,
    pub gen: GeneratorSpec,
    pub node: Vec<f64>,
    region: Option<Region>,
    compact: bool,
}

impl Member {
    pub fn new(weight: f64, gen: GeneratorSpec) -> Self {
        let hint = gen.support_hint();
        let compact = matches!(hint, SupportHint::Compact(_));
        Member { weight, region: hint.region().cloned(), compact, gen, node: Vec::new() }
    }

    pub fn with_node(mut self, node: Vec<f64>) -> Self {
        self.node = node;
        self
    }

    pub fn unit(gen: GeneratorSpec) -> Self {
        Member::new(1.0, gen)
    }

    /// Frequency region outside which the generator is negligible.
    pub fn region(&self) -> Option<&Region> {
        self.region.as_ref()
    }

    pub fn is_compact(&self) -> bool {
        self.compact
    }
}

#[derive(Clone, Debug)]
pub enum MemberSet {
    Finite(Vec<Member>),
    /// Every modulation g(. - lambda), lambda in the lattice, of each generator.
    Modulations { lambda: LatticeR, gens: Vec<Member> },
}

impl MemberSet {
    pub fn len_hint(&self) -> usize {
        match self {
            MemberSet::Finite(m) => m.len(),
            MemberSet::Modulations { gens, .. } => gens.len(),
        }
    }
}

/// Translation subgroup together with its generators and measure.
#[derive(Clone, Debug)]
pub struct Layer {
    pub lattice: Lattice,
    pub members: MemberSet,
    pub label: String,
    prefix: f64,
    dual: Option<Mat>,
}

impl Layer {
    pub fn new(lattice: Lattice, members: MemberSet, label: &str) -> Self {
        let prefix = 1.0 / lattice.covol();
        let dual = match &lattice {
            Lattice::R(l) => Some(*l.dual_generator()),
            _ => None,
        };
        Layer { lattice, members, label: label.to_string(), prefix, dual }
    }

    /// 1/covol(Gamma_j); 1 for the full group.
    pub fn weight_prefix(&self) -> f64 {
        self.prefix
    }

    pub fn dual_generator(&self) -> Option<&Mat> {
        self.dual.as_ref()
    }

    /// prefix * sum_p w_p |g_p(w)|^2, the layer's share of t_0.
    pub fn diagonal(&self, w: &[f64]) -> f64 {
        let mut s = 0.0;
        match &self.members {
            MemberSet::Finite(ms) => {
                for m in ms {
                    s += m.weight * m.gen.eval(w).norm_sqr();
                }
            }
            MemberSet::Modulations { lambda, gens } => {
                for g in gens {
                    for_each_modulation(lambda, g, w, |lam| {
                        let x: Point = w.iter().zip(lam).map(|(a, b)| a - b).collect();
                        s += g.weight * g.gen.eval(&x).norm_sqr();
                    });
                }
            }
        }
        s * self.prefix
    }
}

/// Calls `f(lambda)` for every lambda with w - lambda inside the generator's region.
pub fn for_each_modulation(lambda: &LatticeR, g: &Member, w: &[f64], mut f: impl FnMut(&[f64])) {
    let region = match g.region() {
        Some(r) => r,
        None => return,
    };
    let neg = lambda.generator().scale(-1.0);
    if let Some((lo, hi)) = region.lattice_box(w, &neg) {
        crate::linalg::integer_box(&lo, &hi, |nu| {
            let lam = lambda.generator().apply_i64(nu);
            f(&lam);
        });
    }
}

/// How alpha values from different layers are identified.
#[derive(Clone, Debug)]
pub enum KeyMode {
    /// alpha * den is an integer vector; per-layer integer dual matrices.
    Exact { den: i128, mats: Vec<Option<Vec<i128>>> },
    /// all layers share one lattice; alpha is identified by nu.
    SingleLattice,
    /// lattices meet only at 0 (certified); alpha is identified by (layer, nu).
    Disjoint,
    /// rounding alpha / 1e-9; flagged in reports.
    Tolerance,
    /// alpha = k/den mod 1 on the torus.
    Torus { den: i128 },
}

/// Data for the nested-lattice (Tchamitchian) route: dilations S_i A^j with BΓ* ⊆ Γ*.
#[derive(Clone, Debug)]
pub struct NestedInfo {
    pub dilation: Mat,
    pub gamma: LatticeR,
    pub psis: Vec<GeneratorSpec>,
    pub shears: Vec<Mat>,
    pub j_range: (i32, i32),
}

#[derive(Clone, Debug)]
pub struct ConeInfo {
    pub phi: GeneratorSpec,
    pub psi: [GeneratorSpec; 2],
    pub gamma: LatticeR,
    pub j_max: u32,
}

#[derive(Clone, Debug)]
pub struct NadicInfo {
    pub n: i64,
    pub j_max: usize,
    pub tau: Vec<i64>,
    pub closing: bool,
}

/// Natural evaluation domain of a system.
#[derive(Clone, Debug)]
pub enum GridDomain {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// { w : |B^-1 w| < 1 <= |w| }
    Annulus { b: Mat },
    /// [0, 1) for systems on Z
    Torus,
    /// gen [0,1)^d, a fundamental domain of a lattice
    Parallelepiped { gen: Mat },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    Gabor,
    ShiftInvariant,
    Wavelet,
    Composite,
    ShearletClassical,
    ShearletCone,
    ContinuousTi,
    Nadic,
    Custom,
}

#[derive(Clone, Debug)]
pub struct SystemSpec {
    pub group: Group,
    pub layers: Vec<Layer>,
    /// Layers just outside a truncated scale range, used to bound the tail.
    pub boundary: Vec<Layer>,
    pub ucp_asserted: bool,
    pub kind: SystemKind,
    pub key_mode: KeyMode,
    pub nested: Option<NestedInfo>,
    pub cone: Option<ConeInfo>,
    pub nadic: Option<NadicInfo>,
    pub domain: Option<GridDomain>,
    pub label: String,
    pub notes: Vec<String>,
}

fn same_generator(a: &LatticeR, b: &LatticeR) -> bool {
    match (a.exact(), b.exact()) {
        (Some(x), Some(y)) => x == y,
        _ => a.generator().max_abs_diff(b.generator()) == 0.0,
    }
}

impl SystemSpec {
    /// Validates the layers and fixes how alpha values are identified.
    pub fn assemble(group: Group, layers: Vec<Layer>, kind: SystemKind, disjoint_certificate: bool) -> Result<Self, GtiError> {
        if layers.is_empty() {
            return Err(GtiError::Empty);
        }
        let d = group.dim();
        for l in &layers {
            let ld = match (&l.lattice, group) {
                (Lattice::R(r), Group::Real(_)) => r.dim(),
                (Lattice::Full(k), Group::Real(_)) => *k,
                (Lattice::Z(_), Group::Integers) => 1,
                _ => return Err(GtiError::Lattice(LatticeError::MixedGroups)),
            };
            if ld != d {
                return Err(GtiError::DimensionMismatch { expected: d, got: ld });
            }
            let check = |m: &Member| -> Result<(), GtiError> {
                if m.gen.dim() != d {
                    return Err(GtiError::DimensionMismatch { expected: d, got: m.gen.dim() });
                }
                Ok(())
            };
            match &l.members {
                MemberSet::Finite(ms) => {
                    for (i, m) in ms.iter().enumerate() {
                        check(m)?;
                        if !(m.weight > 0.0) {
                            return Err(GtiError::NonPositiveWeight { index: i, weight: m.weight });
                        }
                    }
                }
                MemberSet::Modulations { lambda, gens } => {
                    if lambda.dim() != d {
                        return Err(GtiError::DimensionMismatch { expected: d, got: lambda.dim() });
                    }
                    for g in gens {
                        check(g)?;
                    }
                }
            }
        }
        let key_mode = match group {
            Group::Integers => {
                let den = layers.iter().fold(1i128, |acc, l| match &l.lattice {
                    Lattice::Z(z) => acc.lcm(&z.modulus()),
                    _ => acc,
                });
                KeyMode::Torus { den }
            }
            Group::Real(_) => {
                let rl: Vec<&LatticeR> = layers
                    .iter()
                    .filter_map(|l| match &l.lattice {
                        Lattice::R(r) => Some(r),
                        _ => None,
                    })
                    .collect();
                if rl.windows(2).all(|w| same_generator(w[0], w[1])) {
                    KeyMode::SingleLattice
                } else if rl.iter().all(|r| r.is_exact()) {
                    let den = rl.iter().fold(1i128, |acc, r| acc.lcm(&r.exact_dual().unwrap().denominator_lcm()));
                    let mats = layers
                        .iter()
                        .map(|l| match &l.lattice {
                            Lattice::R(r) => r.exact_dual().unwrap().scaled_integers(den),
                            _ => None,
                        })
                        .collect();
                    KeyMode::Exact { den, mats }
                } else if disjoint_certificate {
                    KeyMode::Disjoint
                } else if rl.iter().any(|r| r.is_irrational()) {
                    return Err(GtiError::Undecidable);
                } else {
                    KeyMode::Tolerance
                }
            }
        };
        Ok(SystemSpec {
            group,
            layers,
            boundary: Vec::new(),
            ucp_asserted: true,
            kind,
            key_mode,
            nested: None,
            cone: None,
            nadic: None,
            domain: None,
            label: String::new(),
            notes: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.group.dim()
    }

    pub fn lattices(&self) -> Vec<Lattice> {
        self.layers.iter().map(|l| l.lattice.clone()).collect()
    }

    /// True when every layer uses the same translation lattice.
    pub fn is_shift_invariant(&self) -> bool {
        matches!(self.key_mode, KeyMode::SingleLattice)
            || self.layers.iter().all(|l| matches!(l.lattice, Lattice::Full(_)))
    }

    pub fn float_kappa(&self) -> bool {
        matches!(self.key_mode, KeyMode::Tolerance)
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn with_ucp(mut self, asserted: bool) -> Self {
        self.ucp_asserted = asserted;
        self
    }

    pub fn with_domain(mut self, domain: GridDomain) -> Self {
        self.domain = Some(domain);
        self
    }

    /// Sub-system made of the first `m` levels, used for level ladders on Z.
    pub fn level_prefix(&self, m: usize) -> Result<SystemSpec, GtiError> {
        if let Some(info) = &self.nadic {
            let (sys, _, _) = nadic_counterexample_opts(info.n, m.max(1), info.closing)?;
            return Ok(sys.with_ucp(self.ucp_asserted));
        }
        let m = m.clamp(1, self.layers.len());
        let mut out = SystemSpec::assemble(self.group, self.layers[..m].to_vec(), self.kind, matches!(self.key_mode, KeyMode::Disjoint))?;
        out.ucp_asserted = self.ucp_asserted;
        out.domain = self.domain.clone();
        Ok(out)
    }

    /// Number of scale levels available to a level ladder.
    pub fn level_count(&self) -> usize {
        match &self.nadic {
            Some(info) => info.j_max,
            None => self.layers.len(),
        }
    }
}

fn check_dim(expected: usize, got: usize) -> Result<(), GtiError> {
    if expected != got {
        return Err(GtiError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Modulation parameters of a Gabor system.
#[derive(Clone, Debug)]
pub enum Modulation {
    Lattice(LatticeR),
    /// (node lambda, weight) pairs approximating an integral over modulations.
    Quadrature(Vec<(Vec<f64>, f64)>),
}

/// {T_gamma M_lambda g_l}: one layer on Gamma with the modulated generators.
pub fn gabor_system(gens: Vec<GeneratorSpec>, gamma: LatticeR, lambda: Modulation) -> Result<SystemSpec, GtiError> {
    let d = gamma.dim();
    for g in &gens {
        check_dim(d, g.dim())?;
    }
    let (members, domain) = match lambda {
        Modulation::Lattice(l) => {
            check_dim(d, l.dim())?;
            let gen = *l.generator();
            (
                MemberSet::Modulations { lambda: l, gens: gens.into_iter().map(Member::unit).collect() },
                Some(GridDomain::Parallelepiped { gen }),
            )
        }
        Modulation::Quadrature(nodes) => {
            let mut ms = Vec::new();
            for g in &gens {
                for (i, (lam, w)) in nodes.iter().enumerate() {
                    check_dim(d, lam.len())?;
                    if !(*w > 0.0) {
                        return Err(GtiError::NonPositiveWeight { index: i, weight: *w });
                    }
                    ms.push(Member::new(*w, g.modulate(lam)?).with_node(lam.clone()));
                }
            }
            (MemberSet::Finite(ms), None)
        }
    };
    let layer = Layer::new(Lattice::R(gamma), members, "gabor");
    let mut sys = SystemSpec::assemble(Group::Real(d), vec![layer], SystemKind::Gabor, false)?;
    sys.domain = domain;
    Ok(sys.with_label("gabor"))
}

/// {T_gamma g_l}: finitely many generators on one lattice.
pub fn shift_invariant_system(gens: Vec<GeneratorSpec>, gamma: LatticeR) -> Result<SystemSpec, GtiError> {
    let d = gamma.dim();
    for g in &gens {
        check_dim(d, g.dim())?;
    }
    let layer = Layer::new(Lattice::R(gamma), MemberSet::Finite(gens.into_iter().map(Member::unit).collect()), "si");
    Ok(SystemSpec::assemble(Group::Real(d), vec![layer], SystemKind::ShiftInvariant, false)?.with_label("shift-invariant"))
}

/// Space-side description of a Gabor system for the time-domain estimates.
#[derive(Clone, Debug)]
pub struct GaborTimeSide {
    pub gens: Vec<GeneratorSpec>,
    pub gamma: LatticeR,
    pub lambda: LatticeR,
}

impl GaborTimeSide {
    pub fn new(gens: Vec<GeneratorSpec>, gamma: LatticeR, lambda: LatticeR) -> Result<Self, GtiError> {
        for g in &gens {
            check_dim(gamma.dim(), g.dim())?;
            if !g.has_space_eval() || g.space_support_hint().and_then(|h| h.region().cloned()).is_none() {
                return Err(GtiError::NoSpaceEval(g.label().to_string()));
            }
        }
        check_dim(gamma.dim(), lambda.dim())?;
        Ok(GaborTimeSide { gens, gamma, lambda })
    }
}

/// s_alpha(x) = (1/covol Λ) sum_l sum_{gamma} conj g_l(x - gamma - alpha) g_l(x - gamma).
pub fn gabor_time_autocorr(ts: &GaborTimeSide, alpha: &[f64], xs: &[Point]) -> Result<Vec<C64>, GtiError> {
    Ok(gabor_time_terms(ts, alpha, xs)?.into_iter().map(|(s, _)| s).collect())
}

/// s_alpha(x) together with the sum of the moduli of its terms.
pub fn gabor_time_terms(ts: &GaborTimeSide, alpha: &[f64], xs: &[Point]) -> Result<Vec<(C64, f64)>, GtiError> {
    let mut out = Vec::with_capacity(xs.len());
    let neg = ts.gamma.generator().scale(-1.0);
    let pre = 1.0 / ts.lambda.covol();
    for x in xs {
        let mut s = C64::new(0.0, 0.0);
        let mut a = 0.0;
        for g in &ts.gens {
            let hint = g.space_support_hint().ok_or_else(|| GtiError::NoSpaceEval(g.label().to_string()))?;
            let region = hint.region().ok_or_else(|| GtiError::NoSpaceEval(g.label().to_string()))?;
            let (lo, hi) = match region.lattice_box(x, &neg) {
                Some(b) => b,
                None => continue,
            };
            let mut err = None;
            crate::linalg::integer_box(&lo, &hi, |nu| {
                let gm = ts.gamma.generator().apply_i64(nu);
                let y: Point = x.iter().zip(&gm).map(|(a, b)| a - b).collect();
                let ya: Point = y.iter().zip(alpha).map(|(a, b)| a - b).collect();
                match (g.space_eval(&y), g.space_eval(&ya)) {
                    (Some(v), Some(u)) => {
                        let t = u.conj() * v;
                        s += t;
                        a += t.norm();
                    }
                    _ => err = Some(GtiError::NoSpaceEval(g.label().to_string())),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
        }
        out.push((s * pre, a * pre));
    }
    Ok(out)
}

/// Dilation family of a wavelet system.
#[derive(Clone, Debug)]
pub enum Dilations {
    List(Vec<Mat>),
    /// A^j for j in [j_min, j_max]
    Powers { a: Mat, j_min: i32, j_max: i32 },
}

fn exact_pow(q: &QMat, k: i32) -> Option<QMat> {
    let base = if k < 0 { q.inverse()? } else { q.clone() };
    let mut r = QMat::identity(q.dim());
    for _ in 0..k.unsigned_abs() {
        r = r.mul(&base);
    }
    Some(r)
}

fn dilation_layer(psis: &[GeneratorSpec], a: &Mat, a_exact: Option<&QMat>, gamma: &LatticeR, label: String) -> Result<Layer, GtiError> {
    let ainv = a.inverse().ok_or(SpectraError::SingularDilation)?;
    let lat = match (a_exact.and_then(|q| q.inverse()), gamma.is_exact()) {
        (Some(qi), true) => gamma.image_exact(&qi)?,
        _ if gamma.is_irrational() => LatticeR::irrational(ainv.mul(gamma.generator()))?,
        (None, _) => LatticeR::irrational(ainv.mul(gamma.generator()))?,
        _ => gamma.image(&ainv)?,
    };
    let mut ms = Vec::with_capacity(psis.len());
    for p in psis {
        ms.push(Member::unit(p.dilate(a)?));
    }
    Ok(Layer::new(Lattice::R(lat), MemberSet::Finite(ms), &label))
}

/// Integer matrix (C#)^{-1} M^T C# when M^T maps Γ* into itself.
fn preserves_dual(m: &Mat, gamma: &LatticeR, onto: bool) -> bool {
    match (QMat::from_mat(m), gamma.exact_dual()) {
        (Some(mq), Some(dq)) => {
            let u = dq.inverse().unwrap().mul(&mq.transpose()).mul(&dq);
            u.is_integer() && (!onto || u.abs_det() == Q::from_integer(1))
        }
        _ => {
            let dual = gamma.dual_generator();
            let u = dual.inverse().unwrap().mul(&m.transpose()).mul(dual);
            let int = u.rows().iter().flatten().all(|v| (v - v.round()).abs() < 1e-9);
            int && (!onto || (u.det().abs() - 1.0).abs() < 1e-9)
        }
    }
}

/// {D_{a_j} T_gamma psi_l}: layers a_j^{-1} Γ with generators D_{a_j} psi_l.
pub fn wavelet_system(psis: Vec<GeneratorSpec>, dilations: Dilations, gamma: LatticeR, disjoint_certificate: bool) -> Result<SystemSpec, GtiError> {
    let d = gamma.dim();
    for p in &psis {
        check_dim(d, p.dim())?;
    }
    let mut layers = Vec::new();
    let mut boundary = Vec::new();
    let mut nested = None;
    let mut domain = None;
    match &dilations {
        Dilations::List(mats) => {
            for (j, a) in mats.iter().enumerate() {
                check_dim(d, a.dim())?;
                let q = QMat::from_mat(a);
                layers.push(dilation_layer(&psis, a, q.as_ref(), &gamma, format!("a{j}"))?);
            }
        }
        Dilations::Powers { a, j_min, j_max } => {
            check_dim(d, a.dim())?;
            if j_min > j_max {
                return Err(GtiError::InvalidParam("j_min > j_max".into()));
            }
            let q = QMat::from_mat(a);
            let mk = |j: i32| -> Result<Layer, GtiError> {
                let aj = a.pow(j).ok_or(SpectraError::SingularDilation)?;
                let qj = q.as_ref().and_then(|q| exact_pow(q, j));
                dilation_layer(&psis, &aj, qj.as_ref(), &gamma, format!("j={j}"))
            };
            for j in *j_min..=*j_max {
                layers.push(mk(j)?);
            }
            for j in [j_min - 2, j_min - 1, j_max + 1, j_max + 2] {
                boundary.push(mk(j)?);
            }
            if preserves_dual(a, &gamma, false) && (a.det().abs() - 1.0).abs() > 1e-12 {
                nested = Some(NestedInfo {
                    dilation: *a,
                    gamma: gamma.clone(),
                    psis: psis.clone(),
                    shears: vec![Mat::identity(d)],
                    j_range: (*j_min, *j_max),
                });
                domain = Some(GridDomain::Annulus { b: a.transpose() });
            }
        }
    }
    let mut sys = SystemSpec::assemble(Group::Real(d), layers, SystemKind::Wavelet, disjoint_certificate)?;
    sys.boundary = boundary;
    sys.nested = nested;
    sys.domain = domain;
    if matches!(sys.key_mode, KeyMode::Disjoint) {
        sys.notes.push("κ(α) from a disjointness certificate: lattices meet only at 0".into());
    }
    Ok(sys.with_label("wavelet"))
}

/// {D_{A_i B_j} T_gamma psi_l} with A_i^T Γ* = Γ*; layers ordered j-major.
pub fn composite_wavelet_system(psis: Vec<GeneratorSpec>, a_list: Vec<Mat>, b_list: Vec<Mat>, gamma: LatticeR) -> Result<SystemSpec, GtiError> {
    let d = gamma.dim();
    for p in &psis {
        check_dim(d, p.dim())?;
    }
    for (i, a) in a_list.iter().enumerate() {
        check_dim(d, a.dim())?;
        if !preserves_dual(a, &gamma, true) {
            return Err(GtiError::NotInvariant { index: i });
        }
    }
    let mut layers = Vec::new();
    for (j, b) in b_list.iter().enumerate() {
        check_dim(d, b.dim())?;
        for (i, a) in a_list.iter().enumerate() {
            let ab = a.mul(b);
            let q = match (QMat::from_mat(a), QMat::from_mat(b)) {
                (Some(x), Some(y)) => Some(x.mul(&y)),
                _ => None,
            };
            layers.push(dilation_layer(&psis, &ab, q.as_ref(), &gamma, format!("i={i},j={j}"))?);
        }
    }
    let sys = SystemSpec::assemble(Group::Real(d), layers, SystemKind::Composite, false)?;
    Ok(sys.with_label("composite"))
}

pub fn parabolic(horizontal: bool) -> Mat {
    if horizontal {
        Mat::diag(&[4.0, 2.0])
    } else {
        Mat::diag(&[2.0, 4.0])
    }
}

pub fn shear(upper: bool) -> Mat {
    if upper {
        Mat::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]])
    } else {
        Mat::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]])
    }
}

/// {D_{S^k A^j} T_gamma psi_l} with A = diag(4,2), S the upper shear.
pub fn classical_shearlet_system(psis: Vec<GeneratorSpec>, gamma: LatticeR, j_range: (i32, i32), k_range: (i32, i32)) -> Result<SystemSpec, GtiError> {
    check_dim(2, gamma.dim())?;
    if j_range.0 > j_range.1 || k_range.0 > k_range.1 {
        return Err(GtiError::InvalidParam("empty scale or shear range".into()));
    }
    let a = parabolic(true);
    let s = shear(true);
    let shears: Vec<Mat> = (k_range.0..=k_range.1).map(|k| s.pow(k).unwrap()).collect();
    let scales: Vec<Mat> = (j_range.0..=j_range.1).map(|j| a.pow(j).unwrap()).collect();
    let mut sys = composite_wavelet_system(psis.clone(), shears.clone(), scales, gamma.clone())?;
    sys.kind = SystemKind::ShearletClassical;
    sys.nested = Some(NestedInfo { dilation: a, gamma, psis, shears, j_range });
    Ok(sys.with_label("shearlet-classical"))
}

/// Low-pass layer plus the two cones with A_1 = diag(4,2), A_2 = diag(2,4).
pub fn cone_adapted_shearlet_system(phi: GeneratorSpec, psi1: GeneratorSpec, psi2: GeneratorSpec, gamma: LatticeR, j_max: u32) -> Result<SystemSpec, GtiError> {
    check_dim(2, gamma.dim())?;
    for g in [&phi, &psi1, &psi2] {
        check_dim(2, g.dim())?;
    }
    let mut layers = vec![Layer::new(Lattice::R(gamma.clone()), MemberSet::Finite(vec![Member::unit(phi.clone())]), "phi")];
    for (i, psi) in [&psi1, &psi2].into_iter().enumerate() {
        let a = parabolic(i == 0);
        let s = shear(i == 0);
        for j in 0..=j_max as i32 {
            let kmax = 1i32 << j;
            for k in -kmax..=kmax {
                let m = s.pow(k).unwrap().mul(&a.pow(j).unwrap());
                let q = QMat::from_mat(&m);
                layers.push(dilation_layer(std::slice::from_ref(psi), &m, q.as_ref(), &gamma, format!("cone{},j={j},k={k}", i + 1))?);
            }
        }
    }
    let mut sys = SystemSpec::assemble(Group::Real(2), layers, SystemKind::ShearletCone, false)?;
    sys.cone = Some(ConeInfo { phi, psi: [psi1, psi2], gamma, j_max });
    Ok(sys.with_label("shearlet-cone"))
}

/// alpha = A^m q with q in Γ* \ AΓ*, m >= 0 (A acting on the dual lattice).
pub fn cone_decompose(a: &Mat, gamma: &LatticeR, alpha: &[f64]) -> Result<(u32, Point), GtiError> {
    let dual = crate::lattice::dual_lattice(gamma)?;
    if !dual.contains(alpha, Membership::Exact) || norm2(alpha) == 0.0 {
        return Err(GtiError::Decomposition);
    }
    let ainv = a.inverse().ok_or(SpectraError::SingularDilation)?;
    let mut m = 0u32;
    let mut q: Point = Point::from_slice(alpha);
    loop {
        let next = ainv.apply(&q);
        let snapped: Point = next.iter().map(|v| if (v - v.round()).abs() < 1e-12 { v.round() } else { *v }).collect();
        if dual.contains(&snapped, Membership::Exact) {
            q = snapped;
            m += 1;
            if m > 200 {
                return Err(GtiError::Decomposition);
            }
        } else {
            return Ok((m, q));
        }
    }
}

/// The cone-adapted t_alpha assembled scale by scale from the m_i decomposition.
pub fn cone_t_alpha(info: &ConeInfo, w: &[f64], alpha: &[f64]) -> Result<C64, GtiError> {
    let pre = 1.0 / info.gamma.covol();
    let wa: Point = w.iter().zip(alpha).map(|(a, b)| a + b).collect();
    let mut t = info.phi.eval(w) * info.phi.eval(&wa).conj();
    let zero = alpha.iter().all(|v| *v == 0.0);
    for i in 0..2 {
        let a = parabolic(i == 0);
        let s = shear(i == 0);
        let top = if zero { info.j_max } else { cone_decompose(&a, &info.gamma, alpha)?.0.min(info.j_max) };
        let ssharp = s.inverse().unwrap().transpose();
        for j in 0..=top as i32 {
            let kmax = 1i32 << j;
            let ainvj = a.pow(-j).unwrap();
            for k in -kmax..=kmax {
                let m = ssharp.pow(k).unwrap().mul(&ainvj);
                t += info.psi[i].eval(&m.apply(w)) * info.psi[i].eval(&m.apply(&wa)).conj();
            }
        }
    }
    Ok(t * pre)
}

/// Translations along all of R^d with quadrature members.
pub fn continuous_ti_system(d: usize, members: Vec<Member>) -> Result<SystemSpec, GtiError> {
    for (i, m) in members.iter().enumerate() {
        if !(m.weight > 0.0) {
            return Err(GtiError::NonPositiveWeight { index: i, weight: m.weight });
        }
    }
    let layer = Layer::new(Lattice::Full(d), MemberSet::Finite(members), "continuous");
    Ok(SystemSpec::assemble(Group::Real(d), vec![layer], SystemKind::ContinuousTi, false)?.with_label("continuous-ti"))
}

fn midpoints(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = (hi - lo) / n as f64;
    (0..n).map(move |k| (lo + (k as f64 + 0.5) * h, h))
}

/// Members of the continuous wavelet transform int |psi(a w)|^2 da/a, log-spaced midpoints.
pub fn continuous_wavelet_members(psi: &GeneratorSpec, a_min: f64, a_max: f64, n: usize) -> Result<Vec<Member>, GtiError> {
    if !(a_min > 0.0 && a_max > a_min) || n == 0 {
        return Err(GtiError::InvalidParam("need 0 < a_min < a_max and n > 0".into()));
    }
    check_dim(1, psi.dim())?;
    let mut out = Vec::with_capacity(n);
    for (t, dt) in midpoints(a_min.ln(), a_max.ln(), n) {
        let a = t.exp();
        out.push(Member::new(dt / a, psi.dilate(&Mat::diag(&[1.0 / a]))?).with_node(vec![a]));
    }
    Ok(out)
}

/// Quadrature for the continuous alpha-shearlet transform with linear shears:
/// g_p^(w) = a^{(1+alpha)/2} psi^(a w1, a^alpha (r w1 + w2)) under the measure a^{-3} dr da.
pub fn alpha_shearlet_members(
    psi: &GeneratorSpec,
    alpha: f64,
    order: u32,
    a_range: (f64, f64),
    r_range: (f64, f64),
    na: usize,
    nr: usize,
) -> Result<Vec<Member>, GtiError> {
    if order != 1 {
        return Err(GtiError::Unsupported(format!("shear order {order}: only linear shears (order 1) are implemented")));
    }
    check_dim(2, psi.dim())?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(GtiError::InvalidParam("alpha must lie in [0,1]".into()));
    }
    if !(a_range.0 > 0.0 && a_range.1 > a_range.0 && r_range.1 > r_range.0) || na == 0 || nr == 0 {
        return Err(GtiError::InvalidParam("empty quadrature box".into()));
    }
    let mut out = Vec::with_capacity(na * nr);
    for (t, dt) in midpoints(a_range.0.ln(), a_range.1.ln(), na) {
        let a = t.exp();
        let aa = a.powf(alpha);
        for (r, dr) in midpoints(r_range.0, r_range.1, nr) {
            let mt = Mat::from_rows(&[vec![a, 0.0], vec![aa * r, aa]]);
            let dil = mt.inverse().unwrap().transpose();
            let w = a.powi(-3) * a * dt * dr;
            out.push(Member::new(w, psi.dilate(&dil)?).with_node(vec![a, r]));
        }
    }
    Ok(out)
}

/// Exact check that the cosets tau_j + N^j Z are pairwise disjoint, and the
/// points of a window left uncovered.
#[derive(Clone, Debug)]
pub struct NadicCertificate {
    pub disjoint: bool,
    pub window: (i64, i64),
    pub uncovered: Vec<i64>,
    /// (modulus, representative) of the closing coset, when present.
    pub closing: Option<(i128, i64)>,
}

fn pow_i128(n: i64, j: usize) -> Option<i128> {
    let mut r: i128 = 1;
    for _ in 0..j {
        r = r.checked_mul(n as i128)?;
        if r > (1i128 << 100) {
            return None;
        }
    }
    Some(r)
}

fn order_point(i: usize) -> i64 {
    let k = ((i + 1) / 2) as i64;
    if i % 2 == 1 {
        k
    } else {
        -k
    }
}

/// Greedy sequence: tau_1 = 0 and tau_j the smallest |t| (ties to the positive
/// side) outside every earlier coset tau_i + N^i Z.
pub fn nadic_taus(n: i64, count: usize) -> Vec<i64> {
    let mut r: i64 = 64;
    'grow: loop {
        let size = (2 * r + 1) as usize;
        let mut covered = vec![false; size];
        let mut taus = Vec::with_capacity(count);
        let mut cursor = 0usize;
        for j in 1..=count {
            let t = loop {
                if cursor >= size {
                    r *= 4;
                    continue 'grow;
                }
                let t = order_point(cursor);
                if !covered[(t + r) as usize] {
                    break t;
                }
                cursor += 1;
            };
            taus.push(t);
            match pow_i128(n, j) {
                Some(m) if m <= 2 * r as i128 => {
                    let m = m as i64;
                    let mut x = t - (t + r).div_euclid(m) * m;
                    while x <= r {
                        covered[(x + r) as usize] = true;
                        x += m;
                    }
                }
                _ => covered[(t + r) as usize] = true,
            }
        }
        return taus;
    }
}

fn in_coset(t: i64, tau: i64, modulus: Option<i128>) -> bool {
    match modulus {
        Some(m) => (t as i128 - tau as i128).mod_floor(&m) == 0,
        None => t == tau,
    }
}

/// Example system on Z: layers N^j Z carrying deltas at tau_j, j = 1..=j_max.
/// For N = 2 the tail j > j_max is a single coset and is replaced exactly by
/// one closing layer.
pub fn nadic_counterexample(n: i64, j_max: usize) -> Result<(SystemSpec, Vec<i64>, NadicCertificate), GtiError> {
    nadic_counterexample_opts(n, j_max, n == 2)
}

pub fn nadic_counterexample_opts(n: i64, j_max: usize, closing: bool) -> Result<(SystemSpec, Vec<i64>, NadicCertificate), GtiError> {
    if n < 2 || j_max < 1 {
        return Err(GtiError::InvalidParam("need N >= 2 and j_max >= 1".into()));
    }
    if closing && n != 2 {
        return Err(GtiError::Unsupported("closing layer exists only for N = 2".into()));
    }
    let all = nadic_taus(n, j_max + 1);
    let taus = all[..j_max].to_vec();
    let mut layers = Vec::with_capacity(j_max + 1);
    for (i, t) in taus.iter().enumerate() {
        let m = pow_i128(n, i + 1).ok_or_else(|| GtiError::InvalidParam("N^j_max overflows".into()))?;
        let g = builtin(Builtin::Delta { tau: *t })?;
        layers.push(Layer::new(Lattice::Z(LatticeZ::new(m)?), MemberSet::Finite(vec![Member::unit(g)]), &format!("j={}", i + 1)));
    }
    let mut closing_coset = None;
    if closing {
        let m = pow_i128(n, j_max).unwrap();
        let c = all[j_max];
        closing_coset = Some((m, c));
        let g = builtin(Builtin::Delta { tau: c })?;
        layers.push(Layer::new(Lattice::Z(LatticeZ::new(m)?), MemberSet::Finite(vec![Member::unit(g)]), "closing"));
    }
    // certificate
    let mods: Vec<Option<i128>> = (1..=j_max).map(|j| pow_i128(n, j)).collect();
    let mut disjoint = true;
    for j in 0..taus.len() {
        for i in 0..j {
            if in_coset(taus[j], taus[i], mods[i]) {
                disjoint = false;
            }
        }
        if let Some((m, c)) = closing_coset {
            if in_coset(c, taus[j], mods[j]) || in_coset(taus[j], c, Some(m)) {
                disjoint = false;
            }
        }
    }
    let half = mods[j_max - 1].map(|m| (m / 2).min(1 << 20) as i64).unwrap_or(1 << 20).max(1);
    let window = (-half, half);
    let mut uncovered = Vec::new();
    for t in window.0..window.1 {
        let hit = taus.iter().zip(&mods).any(|(tau, m)| in_coset(t, *tau, *m))
            || closing_coset.map(|(m, c)| in_coset(t, c, Some(m))).unwrap_or(false);
        if !hit {
            uncovered.push(t);
        }
    }
    let cert = NadicCertificate { disjoint, window, uncovered, closing: closing_coset };
    let mut sys = SystemSpec::assemble(Group::Integers, layers, SystemKind::Nadic, false)?;
    sys.nadic = Some(NadicInfo { n, j_max, tau: taus.clone(), closing });
    sys.domain = Some(GridDomain::Torus);
    if closing {
        sys.notes.push(format!("tail j > {j_max} replaced by the closing coset {} + {}Z", closing_coset.unwrap().1, closing_coset.unwrap().0));
    }
    Ok((sys.with_label(&format!("nadic{n}")), taus, cert))
}

/// (C#)^{-1} alpha for rational input, used when reporting exact alphas.
pub fn dual_coordinates(gamma: &LatticeR, alpha: &[Q]) -> Option<Vec<Q>> {
    let dq = gamma.exact_dual()?;
    Some(dq.inverse()?.apply(alpha))
}

/// Whether alpha (exact) lies in B^m Γ* for the nested dilation.
pub fn nested_level(info: &NestedInfo, alpha: &[f64]) -> Option<i32> {
    if alpha.iter().all(|v| *v == 0.0) {
        return None;
    }
    let b = info.dilation.transpose();
    let binv = b.inverse()?;
    let dual = crate::lattice::dual_lattice(&info.gamma).ok()?;
    // start low enough that alpha lies in B^m Γ*
    let mut m = info.j_range.0 - 2;
    let mut x: Point = {
        let p = b.pow(-m)?;
        p.apply(alpha)
    };
    let snap = |v: &Point| -> Point { v.iter().map(|c| if (c - c.round()).abs() < 1e-9 { c.round() } else { *c }).collect() };
    if !dual.contains(&snap(&x), Membership::Exact) {
        return None;
    }
    loop {
        let next = snap(&binv.apply(&x));
        if !dual.contains(&next, Membership::Exact) || m > info.j_range.1 + 400 {
            return Some(m);
        }
        x = next;
        m += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nadic_sequences() {
        assert_eq!(nadic_taus(2, 4), vec![0, 1, -1, 3]);
        assert_eq!(&nadic_taus(3, 3), &[0, 1, -1]);
    }

    #[test]
    fn nadic2_certificate_covers_window() {
        let (_, _, cert) = nadic_counterexample(2, 8).unwrap();
        assert!(cert.disjoint);
        assert_eq!(cert.window, (-128, 128));
        assert!(cert.uncovered.is_empty());
    }

    #[test]
    fn undecidable_without_certificate() {
        let beta = std::f64::consts::PI;
        let psi = builtin(Builtin::Shannon).unwrap();
        let e = wavelet_system(vec![psi], Dilations::Powers { a: Mat::diag(&[beta]), j_min: -2, j_max: 2 }, LatticeR::integer(1), false)
            .unwrap_err();
        assert_eq!(e.to_string(), "κ(α) undecidable; supply disjointness certificate or rational data");
    }

    #[test]
    fn composite_rejects_non_invariant() {
        let psi = builtin(Builtin::ShearletTensor { start: 1.0 / 32.0 }).unwrap();
        let e = composite_wavelet_system(vec![psi], vec![Mat::identity(2), Mat::diag(&[2.0, 0.5])], vec![parabolic(true)], LatticeR::integer(2))
            .unwrap_err();
        assert!(matches!(e, GtiError::NotInvariant { index: 1 }));
        assert!(e.to_string().contains("A_1"));
    }

    #[test]
    fn cone_decomposition_levels() {
        let g = LatticeR::integer(2);
        let a = parabolic(true);
        assert_eq!(cone_decompose(&a, &g, &[1.0, 0.0]).unwrap().0, 0);
        assert_eq!(cone_decompose(&a, &g, &[16.0, 4.0]).unwrap().0, 2);
        assert!(cone_decompose(&a, &g, &[0.5, 0.0]).is_err());
    }
}
