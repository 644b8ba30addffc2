//! Built-in configurations for the standard examples.

use crate::config::*;

pub const NAMES: [&str; 9] = [
    "nadic2",
    "nadic3",
    "meyer",
    "shannon",
    "haar_tchamitchian",
    "gabor_gauss",
    "shearlet_classical",
    "shearlet_cone",
    "bendlet_ti",
];

#[derive(Debug, Clone, PartialEq)]
pub struct UnknownScenario(pub String);

impl std::fmt::Display for UnknownScenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "reason=unknown_scenario: '{}'; available: {}", self.0, NAMES.join(", "))
    }
}

impl std::error::Error for UnknownScenario {}

fn base(name: &str, system: SystemConfig, resolution: usize) -> RunConfig {
    RunConfig {
        version: SCHEMA_VERSION,
        name: name.to_string(),
        system,
        grid: GridConfig::auto(resolution),
        truncation: TruncationConfig::default(),
        oracle: None,
        ucp_asserted: None,
        output: OutputConfig::default(),
        sweep: None,
    }
}

fn dyadic(gen: &str, j: i32) -> SystemConfig {
    SystemConfig::Wavelet {
        generators: vec![GeneratorConfig::named(gen)],
        gamma: identity(1),
        dilation: Some(matrix(&[&[2.0]])),
        j_min: Some(-j),
        j_max: Some(j),
        dilations: None,
        disjoint_certificate: false,
    }
}

pub fn scenario(name: &str) -> Result<RunConfig, UnknownScenario> {
    let cfg = match name {
        "nadic2" => {
            let mut c = base(name, SystemConfig::Nadic { n: 2, j_max: 12, closing: None }, 64);
            c.oracle = Some(OracleConfig::new(4096, 1.0));
            c
        }
        "nadic3" => {
            let mut c = base(name, SystemConfig::Nadic { n: 3, j_max: 8, closing: None }, 64);
            c.oracle = Some(OracleConfig::new(729, 1.0));
            c
        }
        "meyer" => {
            let mut c = base(name, dyadic("meyer", 6), 256);
            c.oracle = Some(OracleConfig::new(1024, 32.0));
            c
        }
        "shannon" => {
            let mut c = base(name, dyadic("shannon", 6), 256);
            c.oracle = Some(OracleConfig::new(1024, 32.0));
            c
        }
        "haar_tchamitchian" => {
            let mut c = base(name, dyadic("haar", 12), 256);
            c.sweep = Some(SweepConfig { gamma_scale: vec![0.5, 1.0, 2.0] });
            c
        }
        "gabor_gauss" => {
            let sys = SystemConfig::Gabor {
                generators: vec![GeneratorConfig::named("gaussian")],
                gamma: vec![vec!["1/2".into()]],
                lambda: Some(vec![vec!["1/2".into()]]),
                quadrature: None,
            };
            let mut c = base(name, sys, 256);
            c.oracle = Some(OracleConfig { n: 512, rate: 32.0, tol: 0.02, fiber_radius: Some(12.0) });
            c
        }
        "shearlet_classical" => {
            let sys = SystemConfig::ShearletClassical {
                generators: vec![GeneratorConfig::named("shearlet_tensor")],
                gamma: identity(2),
                j_range: (0, 4),
                k_range: (-8, 8),
            };
            let mut c = base(name, sys, 48);
            c.grid.domain = DomainConfig::Box { lo: vec![1.0, -1.0], hi: vec![4.0, 1.0] };
            c.truncation.alpha_radius = 16.0;
            c
        }
        "shearlet_cone" => {
            let swap = vec![vec![Entry::Num(0.0), Entry::Num(1.0)], vec![Entry::Num(1.0), Entry::Num(0.0)]];
            let sys = SystemConfig::ShearletCone {
                phi: GeneratorConfig::named("log_meyer_scaling"),
                psi1: GeneratorConfig::named("shearlet_tensor"),
                psi2: GeneratorConfig::named("shearlet_tensor").with_transform(TransformConfig::Dilate(swap)),
                gamma: identity(2),
                j_max: 4,
            };
            let mut c = base(name, sys, 48);
            c.grid.domain = DomainConfig::Box { lo: vec![-4.0, -4.0], hi: vec![4.0, 4.0] };
            c.truncation.alpha_radius = 16.0;
            c
        }
        "bendlet_ti" => {
            let sys = SystemConfig::ContinuousTi {
                dim: 2,
                family: ContinuousFamily::AlphaShearlet {
                    psi: GeneratorConfig::named("band_tensor"),
                    alpha: 0.5,
                    order: 1,
                    a_range: (1.0 / 16.0, 1.0),
                    r_range: (-2.0, 2.0),
                    na: 32,
                    nr: 32,
                },
            };
            let mut c = base(name, sys, 32);
            c.grid.domain = DomainConfig::Box { lo: vec![1.0, -1.0], hi: vec![4.0, 1.0] };
            c
        }
        other => return Err(UnknownScenario(other.to_string())),
    };
    Ok(cfg)
}
