//! Turns a parsed configuration into a system description.

use framebound::gti::*;
use framebound::lattice::{Lattice, LatticeZ};
use framebound::rational::rational_from_f64;
use framebound::{builtin, Builtin, GeneratorSpec, LatticeR, Mat};

use crate::config::*;

fn err(field: &str, e: impl std::fmt::Display) -> ConfigError {
    ConfigError { reason: "invalid_system", line: None, column: None, message: format!("{field}: {e}") }
}

pub fn generator(g: &GeneratorConfig, field: &str) -> Result<GeneratorSpec, ConfigError> {
    let mut b = Builtin::by_name(&g.name).map_err(|e| err(field, e))?;
    match &mut b {
        Builtin::Gaussian { sigma, dim, decay_eps } => {
            *sigma = g.sigma.unwrap_or(*sigma);
            *dim = g.dim.unwrap_or(*dim);
            *decay_eps = g.decay_eps.unwrap_or(*decay_eps);
        }
        Builtin::BSpline { order, dim, decay_eps } => {
            *order = g.order.unwrap_or(*order);
            *dim = g.dim.unwrap_or(*dim);
            *decay_eps = g.decay_eps.unwrap_or(*decay_eps);
        }
        Builtin::Haar { decay_eps } => *decay_eps = g.decay_eps.unwrap_or(*decay_eps),
        Builtin::Box { lo, hi } => {
            if let Some(l) = &g.lo {
                *lo = l.clone();
            }
            if let Some(h) = &g.hi {
                *hi = h.clone();
            }
        }
        Builtin::Delta { tau } => *tau = g.tau.unwrap_or(*tau),
        Builtin::LogMeyer { base, start } => {
            *base = g.base.unwrap_or(*base);
            *start = g.start.unwrap_or(*start);
        }
        Builtin::ShearletTensor { start } => *start = g.start.unwrap_or(*start),
        Builtin::LogMeyerScaling { base, start, dim } => {
            *base = g.base.unwrap_or(*base);
            *start = g.start.unwrap_or(*start);
            *dim = g.dim.unwrap_or(*dim);
        }
        Builtin::BandTensor { base, start } => {
            *base = g.base.unwrap_or(*base);
            *start = g.start.unwrap_or(*start);
        }
        Builtin::Meyer | Builtin::MeyerScaling | Builtin::Shannon => {}
    }
    let mut out = builtin(b).map_err(|e| err(field, e))?;
    if let Some(s) = g.scale {
        out = out.scaled(s);
    }
    for (i, t) in g.transforms.iter().enumerate() {
        let f = format!("{field}.transforms[{i}]");
        out = match t {
            TransformConfig::Dilate(m) => out.dilate(&to_mat(m, &f).map_err(ConfigError::invalid)?),
            TransformConfig::Modulate(l) => out.modulate(l),
            TransformConfig::Phase(p) => out.phase(p),
        }
        .map_err(|e| err(&f, e))?;
    }
    Ok(out)
}

fn generators(gs: &[GeneratorConfig], field: &str) -> Result<Vec<GeneratorSpec>, ConfigError> {
    if gs.is_empty() {
        return Err(err(field, "at least one generator is required"));
    }
    gs.iter().enumerate().map(|(i, g)| generator(g, &format!("{field}[{i}]"))).collect()
}

/// Lattice from a row matrix, exact when every entry is rational; `scale`
/// multiplies the generator.
pub fn lattice(m: &Matrix, scale: f64, field: &str) -> Result<LatticeR, ConfigError> {
    let mat = to_mat(m, field).map_err(ConfigError::invalid)?;
    let q = to_qmat(m, field).map_err(ConfigError::invalid)?;
    let lat = match (q, rational_from_f64(scale)) {
        (Some(q), Some(s)) => LatticeR::from_rational(q.scale(s)),
        _ => LatticeR::new(mat.scale(scale)),
    };
    lat.map_err(|e| err(field, e))
}

fn mats(list: &[Matrix], field: &str) -> Result<Vec<Mat>, ConfigError> {
    list.iter().enumerate().map(|(i, m)| to_mat(m, &format!("{field}[{i}]")).map_err(ConfigError::invalid)).collect()
}

fn members(ms: &[MemberConfig], field: &str) -> Result<Vec<Member>, ConfigError> {
    ms.iter()
        .enumerate()
        .map(|(i, m)| Ok(Member::new(m.weight, generator(&m.generator, &format!("{field}[{i}].generator"))?)))
        .collect()
}

pub fn domain(d: &DomainConfig) -> Result<Option<GridDomain>, ConfigError> {
    Ok(match d {
        DomainConfig::Auto => None,
        DomainConfig::Box { lo, hi } => {
            if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                return Err(ConfigError::invalid("grid.domain.box: need lo < hi componentwise"));
            }
            Some(GridDomain::Box { lo: lo.clone(), hi: hi.clone() })
        }
        DomainConfig::Annulus { b } => Some(GridDomain::Annulus { b: to_mat(b, "grid.domain.annulus.b").map_err(ConfigError::invalid)? }),
        DomainConfig::Torus => Some(GridDomain::Torus),
        DomainConfig::Parallelepiped { gen } => Some(GridDomain::Parallelepiped { gen: to_mat(gen, "grid.domain.parallelepiped.gen").map_err(ConfigError::invalid)? }),
    })
}

/// Builds the system; `gamma_scale` multiplies the translation lattice.
pub fn build(cfg: &SystemConfig, gamma_scale: f64) -> Result<SystemSpec, ConfigError> {
    let s = gamma_scale;
    let sys = match cfg {
        SystemConfig::Gabor { generators: gs, gamma, lambda, quadrature } => {
            let gens = generators(gs, "system.generators")?;
            let gamma = lattice(gamma, s, "system.gamma")?;
            let modulation = match (lambda, quadrature) {
                (Some(l), None) => Modulation::Lattice(lattice(l, 1.0, "system.lambda")?),
                (None, Some(q)) => Modulation::Quadrature(q.iter().map(|n| (n.node.clone(), n.weight)).collect()),
                _ => return Err(ConfigError::invalid("system: gabor needs exactly one of lambda or quadrature")),
            };
            gabor_system(gens, gamma, modulation).map_err(|e| err("system", e))?
        }
        SystemConfig::ShiftInvariant { generators: gs, gamma } => {
            shift_invariant_system(generators(gs, "system.generators")?, lattice(gamma, s, "system.gamma")?).map_err(|e| err("system", e))?
        }
        SystemConfig::Wavelet { generators: gs, gamma, dilation, j_min, j_max, dilations, disjoint_certificate } => {
            let gens = generators(gs, "system.generators")?;
            let gamma = lattice(gamma, s, "system.gamma")?;
            let dil = match (dilation, j_min, j_max, dilations) {
                (Some(a), Some(lo), Some(hi), None) => Dilations::Powers { a: to_mat(a, "system.dilation").map_err(ConfigError::invalid)?, j_min: *lo, j_max: *hi },
                (None, None, None, Some(list)) => Dilations::List(mats(list, "system.dilations")?),
                _ => return Err(ConfigError::invalid("system: wavelet needs either dilation with j_min and j_max, or a dilations list")),
            };
            wavelet_system(gens, dil, gamma, *disjoint_certificate).map_err(|e| err("system", e))?
        }
        SystemConfig::Composite { generators: gs, gamma, a_list, b_list } => composite_wavelet_system(
            generators(gs, "system.generators")?,
            mats(a_list, "system.a_list")?,
            mats(b_list, "system.b_list")?,
            lattice(gamma, s, "system.gamma")?,
        )
        .map_err(|e| err("system", e))?,
        SystemConfig::ShearletClassical { generators: gs, gamma, j_range, k_range } => {
            classical_shearlet_system(generators(gs, "system.generators")?, lattice(gamma, s, "system.gamma")?, *j_range, *k_range).map_err(|e| err("system", e))?
        }
        SystemConfig::ShearletCone { phi, psi1, psi2, gamma, j_max } => cone_adapted_shearlet_system(
            generator(phi, "system.phi")?,
            generator(psi1, "system.psi1")?,
            generator(psi2, "system.psi2")?,
            lattice(gamma, s, "system.gamma")?,
            *j_max,
        )
        .map_err(|e| err("system", e))?,
        SystemConfig::ContinuousTi { dim, family } => {
            let ms = match family {
                ContinuousFamily::Wavelet { psi, a_min, a_max, n } => {
                    continuous_wavelet_members(&generator(psi, "system.family.psi")?, *a_min, *a_max, *n).map_err(|e| err("system.family", e))?
                }
                ContinuousFamily::AlphaShearlet { psi, alpha, order, a_range, r_range, na, nr } => {
                    alpha_shearlet_members(&generator(psi, "system.family.psi")?, *alpha, *order, *a_range, *r_range, *na, *nr).map_err(|e| err("system.family", e))?
                }
                ContinuousFamily::Members { members: m } => members(m, "system.family.members")?,
            };
            continuous_ti_system(*dim, ms).map_err(|e| err("system", e))?
        }
        SystemConfig::Nadic { n, j_max, closing } => {
            let (sys, _, _) = match closing {
                Some(c) => nadic_counterexample_opts(*n, *j_max, *c),
                None => nadic_counterexample(*n, *j_max),
            }
            .map_err(|e| err("system", e))?;
            sys
        }
        SystemConfig::CustomLayers { group, dim, layers, disjoint_certificate } => {
            let mut out = Vec::new();
            for (i, l) in layers.iter().enumerate() {
                let field = format!("system.layers[{i}]");
                let lat = match &l.lattice {
                    LatticeConfig::Matrix(m) => Lattice::R(lattice(m, s, &format!("{field}.lattice"))?),
                    LatticeConfig::Modulus(m) => Lattice::Z(LatticeZ::new(*m as i128).map_err(|e| err(&field, e))?),
                    LatticeConfig::Full(d) => Lattice::Full(*d),
                };
                let ms = members(&l.members, &format!("{field}.members"))?;
                let label = if l.label.is_empty() { format!("layer{i}") } else { l.label.clone() };
                out.push(Layer::new(lat, MemberSet::Finite(ms), &label));
            }
            let g = match group {
                GroupConfig::Real => Group::Real(*dim),
                GroupConfig::Integers => Group::Integers,
            };
            SystemSpec::assemble(g, out, SystemKind::Custom, *disjoint_certificate).map_err(|e| err("system", e))?.with_label("custom")
        }
    };
    Ok(sys)
}
