//! Fourier-side generators with analytic built-ins and the dilation,
//! modulation and phase actions.
//!
//! Conventions: on R^d, f^(w) = int f(x) e^{-2 pi i x.w} dx. On Z the character
//! sum is taken with the opposite sign, so a delta at tau has transform
//! e^{2 pi i tau w}.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use thiserror::Error;

use crate::linalg::{norm2, Mat, Point};

pub type C64 = Complex<f64>;

pub type FourierFn = Arc<dyn Fn(&[f64]) -> C64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("unknown generator '{0}'")]
    UnknownName(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("singular dilation")]
    SingularDilation,
    #[error("dimension mismatch: generator has d = {expected}, transform has d = {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionNorm {
    L2,
    LInf,
}

/// The set { w : |F (w - center)| <= radius } in the chosen norm.
#[derive(Clone, Debug)]
pub struct Region {
    pub center: Point,
    pub frame: Mat,
    pub radius: f64,
    pub norm: RegionNorm,
}

impl Region {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        Region {
            center: Point::from_slice(center),
            frame: Mat::identity(center.len()),
            radius,
            norm: RegionNorm::L2,
        }
    }

    pub fn boxed(lo: &[f64], hi: &[f64]) -> Self {
        let c: Point = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let inv_half: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 2.0 / (b - a)).collect();
        Region { center: c, frame: Mat::diag(&inv_half), radius: 1.0, norm: RegionNorm::LInf }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn measure(&self, y: &[f64]) -> f64 {
        match self.norm {
            RegionNorm::L2 => norm2(y),
            RegionNorm::LInf => y.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        let diff: Point = w.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        self.measure(&self.frame.apply(&diff)) <= self.radius * (1.0 + 1e-12)
    }

    /// Integer box containing every nu with w + D nu inside the region.
    pub fn lattice_box(&self, w: &[f64], d_gen: &Mat) -> Option<(Vec<i64>, Vec<i64>)> {
        let k = self.frame.mul(d_gen);
        let kinv = k.inverse()?;
        let diff: Point = w.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let y = self.frame.apply(&diff);
        let c = kinv.apply(&y);
        let d = self.dim();
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        for i in 0..d {
            let rn = match self.norm {
                RegionNorm::L2 => kinv.row_norm2(i),
                RegionNorm::LInf => kinv.row_norm1(i),
            };
            let h = self.radius * rn * (1.0 + 1e-12) + 1e-12;
            let lo_i = (-c[i] - h).ceil();
            let hi_i = (-c[i] + h).floor();
            if !(lo_i.is_finite() && hi_i.is_finite()) || hi_i - lo_i > 1e7 {
                return None;
            }
            lo.push(lo_i as i64);
            hi.push(hi_i as i64);
        }
        Some((lo, hi))
    }

    /// Bounding radius about the origin.
    pub fn outer_radius(&self) -> f64 {
        let finv = self.frame.inverse().expect("invertible frame");
        let r = match self.norm {
            RegionNorm::L2 => self.radius * finv.frobenius(),
            RegionNorm::LInf => self.radius * finv.frobenius() * (self.dim() as f64).sqrt(),
        };
        norm2(&self.center) + r
    }

    fn pullback(&self, m: &Mat, b: &[f64]) -> Option<Region> {
        // base region in xi = M w + b  ->  region in w
        let minv = m.inverse()?;
        let shifted: Point = self.center.iter().zip(b).map(|(c, bb)| c - bb).collect();
        Some(Region {
            center: minv.apply(&shifted),
            frame: self.frame.mul(m),
            radius: self.radius,
            norm: self.norm,
        })
    }
}

/// Where the transform is (numerically) nonzero.
#[derive(Clone, Debug)]
pub enum SupportHint {
    /// eval is exactly 0 outside the region.
    Compact(Region),
    /// |eval| <= eps outside the region.
    Decay { region: Region, eps: f64 },
    /// no usable localization (characters on the torus).
    Everywhere,
}

impl SupportHint {
    pub fn region(&self) -> Option<&Region> {
        match self {
            SupportHint::Compact(r) => Some(r),
            SupportHint::Decay { region, .. } => Some(region),
            SupportHint::Everywhere => None,
        }
    }

    pub fn tail_eps(&self) -> f64 {
        match self {
            SupportHint::Decay { eps, .. } => *eps,
            _ => 0.0,
        }
    }
}

/// Built-in profiles with their parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Builtin {
    /// Meyer wavelet, support 1/3 <= |w| <= 4/3.
    Meyer,
    /// Meyer scaling function, support |w| <= 2/3.
    MeyerScaling,
    /// indicator of [-1, -1/2) and [1/2, 1), which tile R mod 1.
    Shannon,
    Haar { decay_eps: f64 },
    Gaussian { sigma: f64, dim: usize, decay_eps: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    BSpline { order: u32, dim: usize, decay_eps: f64 },
    /// delta at tau on Z.
    Delta { tau: i64 },
    /// Meyer-type band for dilation factor `base`, support start <= |w| <= start*base^2.
    LogMeyer { base: f64, start: f64 },
    /// LogMeyer(4, start)(w1) * W(w2/w1) with a unit partition bump W on [-1, 1].
    ShearletTensor { start: f64 },
    /// Low-pass partner of LogMeyer in the max-norm: 1 below start, 0 above start*base.
    LogMeyerScaling { base: f64, start: f64, dim: usize },
    /// LogMeyer(base, start)(w1) * W(w2) with the partition bump W on [-1, 1].
    BandTensor { base: f64, start: f64 },
}

impl Builtin {
    /// Parses a built-in by name with the usual defaults.
    pub fn by_name(name: &str) -> Result<Builtin, SpectraError> {
        Ok(match name {
            "meyer" => Builtin::Meyer,
            "meyer_scaling" => Builtin::MeyerScaling,
            "shannon" => Builtin::Shannon,
            "haar" => Builtin::Haar { decay_eps: 1e-3 },
            "gaussian" => Builtin::Gaussian { sigma: 1.0, dim: 1, decay_eps: 1e-16 },
            "box" => Builtin::Box { lo: vec![0.0], hi: vec![1.0] },
            "bspline" => Builtin::BSpline { order: 2, dim: 1, decay_eps: 1e-4 },
            "delta" => Builtin::Delta { tau: 0 },
            "log_meyer" => Builtin::LogMeyer { base: 2.0, start: 0.5 },
            "shearlet_tensor" => Builtin::ShearletTensor { start: 1.0 / 32.0 },
            "log_meyer_scaling" => Builtin::LogMeyerScaling { base: 4.0, start: 1.0 / 32.0, dim: 2 },
            "band_tensor" => Builtin::BandTensor { base: 2.0, start: 0.5 },
            other => return Err(SpectraError::UnknownName(other.to_string())),
        })
    }
}

#[derive(Clone)]
enum Profile {
    Builtin(Builtin),
    Custom { f: FourierFn, space: Option<FourierFn> },
}

/// The Meyer auxiliary polynomial x^4 (35 - 84x + 70x^2 - 20x^3), clamped to [0, 1].
pub fn meyer_nu(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x.powi(4) * (35.0 - 84.0 * x + 70.0 * x * x - 20.0 * x * x * x)
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

fn log_meyer(base: f64, start: f64, x: f64) -> f64 {
    let x = x.abs();
    let mid = start * base;
    if x < start || x > mid * base {
        0.0
    } else if x <= mid {
        (0.5 * PI * meyer_nu((x / start).ln() / base.ln())).sin()
    } else {
        (0.5 * PI * meyer_nu((x / mid).ln() / base.ln())).cos()
    }
}

fn partition_bump(eta: f64) -> f64 {
    let a = eta.abs();
    if a > 1.0 {
        0.0
    } else {
        (0.5 * PI * meyer_nu(a)).cos()
    }
}

/// Cardinal B-spline of order m supported on [0, m].
fn cardinal_bspline(m: u32, x: f64) -> f64 {
    if m == 1 {
        return if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 };
    }
    if x <= 0.0 || x >= m as f64 {
        return 0.0;
    }
    let mf = m as f64;
    (x * cardinal_bspline(m - 1, x) + (mf - x) * cardinal_bspline(m - 1, x - 1.0)) / (mf - 1.0)
}

impl Builtin {
    fn dim(&self) -> usize {
        match self {
            Builtin::Gaussian { dim, .. } | Builtin::BSpline { dim, .. } => *dim,
            Builtin::Box { lo, .. } => lo.len(),
            Builtin::ShearletTensor { .. } | Builtin::BandTensor { .. } => 2,
            Builtin::LogMeyerScaling { dim, .. } => *dim,
            _ => 1,
        }
    }

    fn validate(&self) -> Result<(), SpectraError> {
        let bad = |s: &str| Err(SpectraError::InvalidParam(s.to_string()));
        match self {
            Builtin::Gaussian { sigma, dim, decay_eps } => {
                if !(*sigma > 0.0) {
                    return bad("sigma must be positive");
                }
                if *dim == 0 || *dim > 4 {
                    return bad("dimension must be 1..4");
                }
                if !(*decay_eps > 0.0 && *decay_eps < 1.0) {
                    return bad("decay_eps must lie in (0,1)");
                }
            }
            Builtin::BSpline { order, dim, decay_eps } => {
                if *order < 1 {
                    return bad("order must be at least 1");
                }
                if *dim == 0 || *dim > 4 {
                    return bad("dimension must be 1..4");
                }
                if !(*decay_eps > 0.0 && *decay_eps < 1.0) {
                    return bad("decay_eps must lie in (0,1)");
                }
            }
            Builtin::Haar { decay_eps } => {
                if !(*decay_eps > 0.0 && *decay_eps < 1.0) {
                    return bad("decay_eps must lie in (0,1)");
                }
            }
            Builtin::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() || lo.len() > 4 {
                    return bad("box corners must have equal dimension 1..4");
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return bad("box must have lo < hi");
                }
            }
            Builtin::LogMeyer { base, start } => {
                if !(*base > 1.0) || !(*start > 0.0) {
                    return bad("log_meyer needs base > 1 and start > 0");
                }
            }
            Builtin::ShearletTensor { start } => {
                if !(*start > 0.0) {
                    return bad("start must be positive");
                }
            }
            Builtin::LogMeyerScaling { base, start, dim } => {
                if !(*base > 1.0) || !(*start > 0.0) {
                    return bad("log_meyer_scaling needs base > 1 and start > 0");
                }
                if *dim == 0 || *dim > 4 {
                    return bad("dimension must be 1..4");
                }
            }
            Builtin::BandTensor { base, start } => {
                if !(*base > 1.0) || !(*start > 0.0) {
                    return bad("band_tensor needs base > 1 and start > 0");
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn support(&self) -> SupportHint {
        match self {
            Builtin::Meyer => SupportHint::Compact(Region::ball(&[0.0], 4.0 / 3.0)),
            Builtin::MeyerScaling => SupportHint::Compact(Region::ball(&[0.0], 2.0 / 3.0)),
            Builtin::Shannon => SupportHint::Compact(Region::ball(&[0.0], 1.0)),
            Builtin::Haar { decay_eps } => SupportHint::Decay {
                region: Region::ball(&[0.0], 2.0 / (PI * decay_eps)),
                eps: *decay_eps,
            },
            Builtin::Gaussian { sigma, dim, decay_eps } => SupportHint::Decay {
                region: Region::ball(&vec![0.0; *dim], ((1.0 / decay_eps).ln() / PI).sqrt() / sigma),
                eps: *decay_eps,
            },
            Builtin::Box { lo, hi } => SupportHint::Compact(Region::boxed(lo, hi)),
            Builtin::BSpline { order, dim, decay_eps } => SupportHint::Decay {
                region: Region::ball(
                    &vec![0.0; *dim],
                    (*dim as f64).sqrt() * decay_eps.powf(-1.0 / *order as f64) / PI,
                ),
                eps: *decay_eps,
            },
            Builtin::Delta { .. } => SupportHint::Everywhere,
            Builtin::LogMeyer { base, start } => {
                SupportHint::Compact(Region::ball(&[0.0], start * base * base))
            }
            Builtin::ShearletTensor { start } => {
                let r = start * 16.0;
                SupportHint::Compact(Region::boxed(&[-r, -r], &[r, r]))
            }
            Builtin::LogMeyerScaling { base, start, dim } => {
                let r = start * base;
                SupportHint::Compact(Region::boxed(&vec![-r; *dim], &vec![r; *dim]))
            }
            Builtin::BandTensor { base, start } => {
                let r = start * base * base;
                SupportHint::Compact(Region::boxed(&[-r, -1.0], &[r, 1.0]))
            }
        }
    }

    fn space_support(&self) -> Option<SupportHint> {
        match self {
            Builtin::BSpline { order, dim, .. } => {
                Some(SupportHint::Compact(Region::boxed(&vec![0.0; *dim], &vec![*order as f64; *dim])))
            }
            Builtin::Haar { .. } => Some(SupportHint::Compact(Region::boxed(&[0.0], &[1.0]))),
            Builtin::Gaussian { sigma, dim, decay_eps } => Some(SupportHint::Decay {
                region: Region::ball(&vec![0.0; *dim], ((1.0 / decay_eps).ln() / PI).sqrt() * sigma),
                eps: *decay_eps,
            }),
            _ => None,
        }
    }

    fn eval(&self, xi: &[f64]) -> C64 {
        match self {
            Builtin::Meyer => {
                let a = xi[0].abs();
                if !(1.0 / 3.0..=4.0 / 3.0).contains(&a) {
                    return C64::new(0.0, 0.0);
                }
                let m = if a <= 2.0 / 3.0 {
                    (0.5 * PI * meyer_nu(3.0 * a - 1.0)).sin()
                } else {
                    (0.5 * PI * meyer_nu(1.5 * a - 1.0)).cos()
                };
                C64::from_polar(m, -PI * xi[0])
            }
            Builtin::MeyerScaling => {
                let a = xi[0].abs();
                if a <= 1.0 / 3.0 {
                    C64::new(1.0, 0.0)
                } else if a <= 2.0 / 3.0 {
                    C64::new((0.5 * PI * meyer_nu(3.0 * a - 1.0)).cos(), 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            }
            Builtin::Shannon => {
                let x = xi[0];
                C64::new(if (0.5..1.0).contains(&x) || (-1.0..-0.5).contains(&x) { 1.0 } else { 0.0 }, 0.0)
            }
            Builtin::Haar { .. } => {
                let w = xi[0];
                if w == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                let h = 0.5 * PI * w;
                let m = h.sin().powi(2) / h;
                C64::new(0.0, 1.0) * C64::from_polar(m, -PI * w)
            }
            Builtin::Gaussian { sigma, .. } => {
                let r2: f64 = xi.iter().map(|v| v * v).sum();
                C64::new((-PI * sigma * sigma * r2).exp(), 0.0)
            }
            Builtin::Box { lo, hi } => {
                let inside = xi.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| *a <= *x && *x < *b);
                C64::new(if inside { 1.0 } else { 0.0 }, 0.0)
            }
            Builtin::BSpline { order, .. } => {
                let mut v = C64::new(1.0, 0.0);
                for x in xi {
                    v *= C64::from_polar(sinc(*x), -PI * x).powu(*order);
                }
                v
            }
            Builtin::Delta { tau } => C64::from_polar(1.0, 2.0 * PI * (*tau as f64) * xi[0]),
            Builtin::LogMeyer { base, start } => C64::new(log_meyer(*base, *start, xi[0]), 0.0),
            Builtin::ShearletTensor { start } => {
                if xi[0] == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                let a = log_meyer(4.0, *start, xi[0]);
                if a == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                C64::new(a * partition_bump(xi[1] / xi[0]), 0.0)
            }
            Builtin::LogMeyerScaling { base, start, .. } => {
                let x = xi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let v = if x <= *start {
                    1.0
                } else if x >= start * base {
                    0.0
                } else {
                    (0.5 * PI * meyer_nu((x / start).ln() / base.ln())).cos()
                };
                C64::new(v, 0.0)
            }
            Builtin::BandTensor { base, start } => {
                let a = log_meyer(*base, *start, xi[0]);
                if a == 0.0 {
                    return C64::new(0.0, 0.0);
                }
                C64::new(a * partition_bump(xi[1]), 0.0)
            }
        }
    }

    fn space(&self, x: &[f64]) -> Option<C64> {
        Some(match self {
            Builtin::Gaussian { sigma, dim, .. } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                C64::new(sigma.powi(-(*dim as i32)) * (-PI * r2 / (sigma * sigma)).exp(), 0.0)
            }
            Builtin::BSpline { order, .. } => {
                C64::new(x.iter().map(|v| cardinal_bspline(*order, *v)).product(), 0.0)
            }
            Builtin::Box { lo, hi } => {
                let mut v = C64::new(1.0, 0.0);
                for (xi, (a, b)) in x.iter().zip(lo.iter().zip(hi)) {
                    if *xi == 0.0 {
                        v *= C64::new(b - a, 0.0);
                    } else {
                        let e = |t: f64| C64::from_polar(1.0, 2.0 * PI * xi * t);
                        v *= (e(*b) - e(*a)) / C64::new(0.0, 2.0 * PI * xi);
                    }
                }
                v
            }
            Builtin::Shannon => {
                let t = x[0];
                if t == 0.0 {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(((2.0 * PI * t).sin() - (PI * t).sin()) / (PI * t), 0.0)
                }
            }
            Builtin::Haar { .. } => {
                let t = x[0];
                C64::new(
                    if (0.0..0.5).contains(&t) {
                        1.0
                    } else if (0.5..1.0).contains(&t) {
                        -1.0
                    } else {
                        0.0
                    },
                    0.0,
                )
            }
            _ => return None,
        })
    }
}

/// eval(w) = scale * e^{2 pi i (tau.w + c)} * base(M w + b).
#[derive(Clone)]
pub struct GeneratorSpec {
    profile: Profile,
    dim: usize,
    m: Mat,
    b: Point,
    scale: f64,
    tau: Point,
    c: f64,
    plain: bool,
    base_support: SupportHint,
    label: String,
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec").field("label", &self.label).field("dim", &self.dim).finish()
    }
}

pub fn builtin(b: Builtin) -> Result<GeneratorSpec, SpectraError> {
    b.validate()?;
    let dim = b.dim();
    let label = format!("{b:?}");
    let base_support = b.support();
    Ok(GeneratorSpec::from_profile(Profile::Builtin(b), dim, base_support, label))
}

/// Generator from a closure. `space` is the inverse transform when known.
pub fn custom(
    label: &str,
    dim: usize,
    support: SupportHint,
    f: FourierFn,
    space: Option<FourierFn>,
) -> GeneratorSpec {
    GeneratorSpec::from_profile(Profile::Custom { f, space }, dim, support, label.to_string())
}

impl GeneratorSpec {
    fn from_profile(profile: Profile, dim: usize, base_support: SupportHint, label: String) -> Self {
        GeneratorSpec {
            profile,
            dim,
            m: Mat::identity(dim),
            b: Point::from_elem(0.0, dim),
            scale: 1.0,
            tau: Point::from_elem(0.0, dim),
            c: 0.0,
            plain: true,
            base_support,
            label,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    #[inline]
    fn base(&self, xi: &[f64]) -> C64 {
        match &self.profile {
            Profile::Builtin(b) => b.eval(xi),
            Profile::Custom { f, .. } => f(xi),
        }
    }

    #[inline]
    pub fn eval(&self, w: &[f64]) -> C64 {
        if self.plain {
            return self.base(w);
        }
        let xi: Point = self.m.apply(w).iter().zip(&self.b).map(|(x, b)| x + b).collect();
        let v = self.base(&xi);
        if v.re == 0.0 && v.im == 0.0 {
            return v;
        }
        let ph = self.c + self.tau.iter().zip(w).map(|(t, x)| t * x).sum::<f64>();
        if ph == 0.0 {
            v * self.scale
        } else {
            v * C64::from_polar(self.scale, 2.0 * PI * ph)
        }
    }

    /// Inverse transform, when the profile provides one.
    pub fn space_eval(&self, x: &[f64]) -> Option<C64> {
        let minv = self.m.inverse()?;
        let xt: Point = x.iter().zip(&self.tau).map(|(a, t)| a + t).collect();
        let y = minv.transpose().apply(&xt);
        let g0 = match &self.profile {
            Profile::Builtin(b) => b.space(&y)?,
            Profile::Custom { space, .. } => space.as_ref()?(&y),
        };
        let mb = minv.apply(&self.b);
        let ph = self.c - xt.iter().zip(&mb).map(|(a, b)| a * b).sum::<f64>();
        let s = self.scale / self.m.det().abs();
        Some(g0 * C64::from_polar(s, 2.0 * PI * ph))
    }

    /// Region carrying the space-side generator, when known.
    pub fn space_support_hint(&self) -> Option<SupportHint> {
        let base = match &self.profile {
            Profile::Builtin(b) => b.space_support()?,
            Profile::Custom { .. } => return None,
        };
        if self.plain {
            return Some(base);
        }
        // x lies in the support when M^{-T}(x + tau) does
        let mit = self.m.inverse()?.transpose();
        let shift: Point = self.tau.iter().map(|t| -t).collect();
        let pull = |r: &Region| -> Option<Region> {
            let zero = Point::from_elem(0.0, self.dim);
            let r0 = r.pullback(&mit, &zero)?;
            Some(Region {
                center: r0.center.iter().zip(&shift).map(|(c, s)| c + s).collect(),
                frame: r0.frame,
                radius: r0.radius,
                norm: r0.norm,
            })
        };
        Some(match &base {
            SupportHint::Compact(r) => SupportHint::Compact(pull(r)?),
            SupportHint::Decay { region, eps } => SupportHint::Decay { region: pull(region)?, eps: *eps },
            SupportHint::Everywhere => SupportHint::Everywhere,
        })
    }

    pub fn has_space_eval(&self) -> bool {
        let z = vec![0.0; self.dim];
        self.space_eval(&z).is_some()
    }

    /// Finite support on Z for deltas with integer phase shifts.
    pub fn space_support_z(&self) -> Option<Vec<(i64, C64)>> {
        match &self.profile {
            Profile::Builtin(Builtin::Delta { tau }) if self.dim == 1 => {
                if self.m.get(0, 0) != 1.0 || self.b[0] != 0.0 || self.c != 0.0 || self.scale != 1.0 {
                    return None;
                }
                let t = self.tau[0];
                if t != t.round() {
                    return None;
                }
                Some(vec![(tau + t as i64, C64::new(1.0, 0.0))])
            }
            _ => None,
        }
    }

    pub fn support_hint(&self) -> SupportHint {
        if self.plain {
            return self.base_support.clone();
        }
        match &self.base_support {
            SupportHint::Compact(r) => SupportHint::Compact(r.pullback(&self.m, &self.b).expect("invertible")),
            SupportHint::Decay { region, eps } => SupportHint::Decay {
                region: region.pullback(&self.m, &self.b).expect("invertible"),
                eps: eps * self.scale,
            },
            SupportHint::Everywhere => SupportHint::Everywhere,
        }
    }

    /// Region whose complement is (numerically) outside the support.
    pub fn region(&self) -> Option<Region> {
        self.support_hint().region().cloned()
    }

    pub fn dilate(&self, a: &Mat) -> Result<GeneratorSpec, SpectraError> {
        if a.dim() != self.dim {
            return Err(SpectraError::DimensionMismatch { expected: self.dim, got: a.dim() });
        }
        let ainv = a.inverse().ok_or(SpectraError::SingularDilation)?;
        let det = a.det().abs();
        let mut g = self.clone();
        let ait = ainv.transpose();
        g.tau = ainv.apply(&self.tau);
        g.m = self.m.mul(&ait);
        g.scale = self.scale / det.sqrt();
        g.plain = false;
        Ok(g)
    }

    pub fn modulate(&self, lambda: &[f64]) -> Result<GeneratorSpec, SpectraError> {
        if lambda.len() != self.dim {
            return Err(SpectraError::DimensionMismatch { expected: self.dim, got: lambda.len() });
        }
        let mut g = self.clone();
        let ml = self.m.apply(lambda);
        g.b = self.b.iter().zip(&ml).map(|(b, v)| b - v).collect();
        g.c = self.c - self.tau.iter().zip(lambda).map(|(t, l)| t * l).sum::<f64>();
        g.plain = false;
        Ok(g)
    }

    pub fn phase(&self, tau: &[f64]) -> Result<GeneratorSpec, SpectraError> {
        if tau.len() != self.dim {
            return Err(SpectraError::DimensionMismatch { expected: self.dim, got: tau.len() });
        }
        let mut g = self.clone();
        g.tau = self.tau.iter().zip(tau).map(|(a, b)| a + b).collect();
        g.plain = false;
        Ok(g)
    }

    /// Multiplies the transform by a constant positive factor.
    pub fn scaled(&self, s: f64) -> GeneratorSpec {
        let mut g = self.clone();
        g.scale *= s;
        g.plain = false;
        g
    }
}

/// One step of a transform chain.
#[derive(Clone, Debug)]
pub enum Transform {
    /// |det A|^{-1/2} g(A^{-T} w)
    Dilate(Mat),
    /// g(w - lambda)
    Modulate(Vec<f64>),
    /// e^{2 pi i tau.w} g(w)
    Phase(Vec<f64>),
}

#[derive(Clone, Debug, Default)]
pub struct TransformChain(pub Vec<Transform>);

pub fn apply(chain: &TransformChain, g: &GeneratorSpec) -> Result<GeneratorSpec, SpectraError> {
    let mut out = g.clone();
    for t in &chain.0 {
        out = match t {
            Transform::Dilate(a) => out.dilate(a)?,
            Transform::Modulate(l) => out.modulate(l)?,
            Transform::Phase(t) => out.phase(t)?,
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shannon_indicator() {
        let g = builtin(Builtin::Shannon).unwrap();
        assert_eq!(g.eval(&[0.75]), C64::new(1.0, 0.0));
        assert_eq!(g.eval(&[0.25]), C64::new(0.0, 0.0));
    }

    #[test]
    fn delta_character() {
        let g = builtin(Builtin::Delta { tau: 1 }).unwrap();
        let v = g.eval(&[1.0 / 3.0]);
        let want = C64::from_polar(1.0, 2.0 * PI / 3.0);
        assert!((v - want).norm() < 1e-15);
    }

    #[test]
    fn nu_symmetry() {
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            assert!((meyer_nu(x) + meyer_nu(1.0 - x) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(builtin(Builtin::Gaussian { sigma: 0.0, dim: 1, decay_eps: 1e-8 }).is_err());
        assert!(builtin(Builtin::BSpline { order: 0, dim: 1, decay_eps: 1e-4 }).is_err());
        assert!(Builtin::by_name("morlet").is_err());
    }

    #[test]
    fn dilate_identity_is_noop() {
        let g = builtin(Builtin::Meyer).unwrap();
        let h = g.dilate(&Mat::identity(1)).unwrap();
        for k in 0..50 {
            let w = -2.0 + 0.08 * k as f64;
            assert_eq!(g.eval(&[w]), h.eval(&[w]));
        }
    }

    #[test]
    fn gaussian_dilation() {
        let g = builtin(Builtin::Gaussian { sigma: 1.0, dim: 1, decay_eps: 1e-16 }).unwrap();
        let h = g.dilate(&Mat::diag(&[2.0])).unwrap();
        for k in 0..40 {
            let w = -3.0 + 0.15 * k as f64;
            let want = g.eval(&[w / 2.0]) / 2f64.sqrt();
            assert!((h.eval(&[w]) - want).norm() < 1e-15);
        }
    }

    #[test]
    fn bspline_space_side() {
        let g = builtin(Builtin::BSpline { order: 2, dim: 1, decay_eps: 1e-4 }).unwrap();
        assert!((g.space_eval(&[0.5]).unwrap().re - 0.5).abs() < 1e-15);
        assert!((g.space_eval(&[1.0]).unwrap().re - 1.0).abs() < 1e-15);
        assert_eq!(g.space_eval(&[2.5]).unwrap().re, 0.0);
    }
}
