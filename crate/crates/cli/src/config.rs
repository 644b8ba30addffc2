//! JSON run configuration.

use framebound::rational::{parse_rational, rational_from_f64};
use framebound::{Mat, QMat, Q};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// A matrix entry: a JSON number or an exact rational string such as "1/3".
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Entry {
    Num(f64),
    Text(String),
}

impl Entry {
    pub fn exact(&self) -> Option<Q> {
        match self {
            Entry::Num(x) => rational_from_f64(*x),
            Entry::Text(s) => parse_rational(s),
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Entry::Num(x) => Some(*x),
            Entry::Text(s) => parse_rational(s).map(|q| *q.numer() as f64 / *q.denom() as f64).or_else(|| s.trim().parse().ok()),
        }
    }
}

impl From<f64> for Entry {
    fn from(x: f64) -> Self {
        Entry::Num(x)
    }
}

impl From<&str> for Entry {
    fn from(s: &str) -> Self {
        Entry::Text(s.to_string())
    }
}

/// Row list.
pub type Matrix = Vec<Vec<Entry>>;

pub fn matrix(rows: &[&[f64]]) -> Matrix {
    rows.iter().map(|r| r.iter().map(|v| Entry::Num(*v)).collect()).collect()
}

pub fn identity(d: usize) -> Matrix {
    (0..d).map(|i| (0..d).map(|j| Entry::Num(if i == j { 1.0 } else { 0.0 })).collect()).collect()
}

fn check_square(m: &Matrix, field: &str) -> Result<usize, String> {
    let d = m.len();
    if d == 0 || m.iter().any(|r| r.len() != d) {
        return Err(format!("{field}: matrix must be square and non-empty"));
    }
    Ok(d)
}

pub fn to_mat(m: &Matrix, field: &str) -> Result<Mat, String> {
    check_square(m, field)?;
    let rows: Result<Vec<Vec<f64>>, String> = m
        .iter()
        .map(|r| r.iter().map(|e| e.value().ok_or_else(|| format!("{field}: cannot parse entry {e:?}"))).collect())
        .collect();
    let mat = Mat::from_rows(&rows?);
    if mat.det().abs() < 1e-14 {
        return Err(format!("{field}: matrix is singular"));
    }
    Ok(mat)
}

/// Exact form when every entry is rational.
pub fn to_qmat(m: &Matrix, field: &str) -> Result<Option<QMat>, String> {
    check_square(m, field)?;
    let rows: Option<Vec<Vec<Q>>> = m.iter().map(|r| r.iter().map(Entry::exact).collect()).collect();
    Ok(rows.map(|r| QMat::from_rows(&r)))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformConfig {
    Dilate(Matrix),
    Modulate(Vec<f64>),
    Phase(Vec<f64>),
}

/// A built-in generator by name, with optional parameter overrides.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    /// constant factor on the Fourier transform
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<TransformConfig>,
}

impl GeneratorConfig {
    pub fn named(name: &str) -> Self {
        GeneratorConfig {
            name: name.to_string(),
            sigma: None,
            dim: None,
            decay_eps: None,
            lo: None,
            hi: None,
            order: None,
            tau: None,
            base: None,
            start: None,
            scale: None,
            transforms: Vec::new(),
        }
    }

    pub fn with_transform(mut self, t: TransformConfig) -> Self {
        self.transforms.push(t);
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QuadNode {
    pub node: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MemberConfig {
    #[serde(default = "one")]
    pub weight: f64,
    pub generator: GeneratorConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeConfig {
    Matrix(Matrix),
    /// M Z inside Z
    Modulus(i64),
    /// all of R^d
    Full(usize),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LayerConfig {
    pub lattice: LatticeConfig,
    pub members: Vec<MemberConfig>,
    #[serde(default)]
    pub label: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContinuousFamily {
    Wavelet { psi: GeneratorConfig, a_min: f64, a_max: f64, n: usize },
    AlphaShearlet { psi: GeneratorConfig, alpha: f64, order: u32, a_range: (f64, f64), r_range: (f64, f64), na: usize, nr: usize },
    Members { members: Vec<MemberConfig> },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum GroupConfig {
    Real,
    Integers,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    Gabor {
        generators: Vec<GeneratorConfig>,
        gamma: Matrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda: Option<Matrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        quadrature: Option<Vec<QuadNode>>,
    },
    ShiftInvariant {
        generators: Vec<GeneratorConfig>,
        gamma: Matrix,
    },
    Wavelet {
        generators: Vec<GeneratorConfig>,
        gamma: Matrix,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dilation: Option<Matrix>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        j_min: Option<i32>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        j_max: Option<i32>,
        /// explicit list instead of powers of `dilation`
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dilations: Option<Vec<Matrix>>,
        #[serde(default)]
        disjoint_certificate: bool,
    },
    Composite {
        generators: Vec<GeneratorConfig>,
        gamma: Matrix,
        a_list: Vec<Matrix>,
        b_list: Vec<Matrix>,
    },
    ShearletClassical {
        generators: Vec<GeneratorConfig>,
        gamma: Matrix,
        j_range: (i32, i32),
        k_range: (i32, i32),
    },
    ShearletCone {
        phi: GeneratorConfig,
        psi1: GeneratorConfig,
        psi2: GeneratorConfig,
        gamma: Matrix,
        j_max: u32,
    },
    ContinuousTi {
        dim: usize,
        family: ContinuousFamily,
    },
    Nadic {
        n: i64,
        j_max: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        closing: Option<bool>,
    },
    CustomLayers {
        group: GroupConfig,
        dim: usize,
        layers: Vec<LayerConfig>,
        #[serde(default)]
        disjoint_certificate: bool,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    #[default]
    Auto,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Annulus { b: Matrix },
    Torus,
    Parallelepiped { gen: Matrix },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub domain: DomainConfig,
    pub resolution: usize,
    #[serde(default = "yes")]
    pub refine: bool,
    #[serde(default = "refine_tol")]
    pub refine_tol: f64,
    #[serde(default = "refine_passes")]
    pub refine_passes: usize,
}

fn yes() -> bool {
    true
}
fn refine_tol() -> f64 {
    0.005
}
fn refine_passes() -> usize {
    3
}

impl GridConfig {
    pub fn auto(resolution: usize) -> Self {
        GridConfig { domain: DomainConfig::Auto, resolution, refine: true, refine_tol: refine_tol(), refine_passes: refine_passes() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    #[serde(default = "alpha_radius")]
    pub alpha_radius: f64,
    #[serde(default = "max_points")]
    pub max_points: usize,
    #[serde(default = "divergence_delta")]
    pub divergence_delta: f64,
    #[serde(default = "tail_tol")]
    pub tail_tol: f64,
}

fn alpha_radius() -> f64 {
    64.0
}
fn max_points() -> usize {
    2_000_000
}
fn divergence_delta() -> f64 {
    0.1
}
fn tail_tol() -> f64 {
    1e-6
}

impl Default for TruncationConfig {
    fn default() -> Self {
        TruncationConfig { alpha_radius: alpha_radius(), max_points: max_points(), divergence_delta: divergence_delta(), tail_tol: tail_tol() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub n: usize,
    #[serde(default = "unit_rate")]
    pub rate: f64,
    /// relative tolerance of the chain check
    #[serde(default = "chain_tol")]
    pub tol: f64,
    /// annihilator radius of the dual Gramian window (shift-invariant systems)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fiber_radius: Option<f64>,
}

fn unit_rate() -> f64 {
    1.0
}
fn chain_tol() -> f64 {
    0.02
}

impl OracleConfig {
    pub fn new(n: usize, rate: f64) -> Self {
        OracleConfig { n, rate, tol: chain_tol(), fiber_radius: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "formats")]
    pub formats: Vec<String>,
}

fn formats() -> Vec<String> {
    vec!["txt".into(), "csv".into()]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, formats: formats() }
    }
}

/// Repeats the run with the translation lattice scaled by each value.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub gamma_scale: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub name: String,
    pub system: SystemConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleConfig>,
    /// user assertion of the 1-UCP hypothesis
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ucp_asserted: Option<bool>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// A configuration problem with a machine-readable reason.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub reason: &'static str,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "reason={}", self.reason)?;
        if let (Some(l), Some(c)) = (self.line, self.column) {
            write!(f, " line={l} column={c}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub fn invalid(message: impl Into<String>) -> Self {
        ConfigError { reason: "invalid_value", line: None, column: None, message: message.into() }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            reason: match e.classify() {
                serde_json::error::Category::Syntax | serde_json::error::Category::Eof => "syntax",
                _ => "schema",
            },
            line: Some(e.line()),
            column: Some(e.column()),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.version != SCHEMA_VERSION {
            return Err(ConfigError { reason: "version", line: None, column: None, message: format!("version: expected {SCHEMA_VERSION}, got {}", self.version) });
        }
        if self.grid.resolution < 16 {
            return Err(ConfigError::invalid(format!("grid.resolution: must be at least 16, got {}", self.grid.resolution)));
        }
        let t = &self.truncation;
        if !(t.alpha_radius > 0.0) || t.max_points == 0 || !(t.divergence_delta > 0.0) || !(t.tail_tol > 0.0) {
            return Err(ConfigError::invalid("truncation: alpha_radius, max_points, divergence_delta and tail_tol must be positive"));
        }
        if let Some(o) = &self.oracle {
            if o.n < 2 || !(o.rate > 0.0) || !(o.tol >= 0.0) {
                return Err(ConfigError::invalid("oracle: need n >= 2, rate > 0, tol >= 0"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.gamma_scale.is_empty() || s.gamma_scale.iter().any(|v| !(*v > 0.0)) {
                return Err(ConfigError::invalid("sweep.gamma_scale: need positive values"));
            }
        }
        for f in &self.output.formats {
            if f != "txt" && f != "csv" {
                return Err(ConfigError::invalid(format!("output.formats: unknown format '{f}'")));
            }
        }
        Ok(())
    }
}
