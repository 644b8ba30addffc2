//! Executes a configuration and writes the report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use framebound::estimators::{
    alpha_table, bounds_with_points, BoundsReport, EstimatorError, GridSpec, PointEval, Truncation, HYPOTHESIS_DISCLAIMER,
};
use framebound::gti::{Group, SystemSpec};
use framebound::lattice::Lattice;
use framebound::oracle::{
    discretize, fiber_bounds, optimal_bounds, verify_chain, FiberReport, OracleBounds, Verdict, HYPOTHESIS_VIOLATED,
};
use framebound::Point;

use crate::config::{ConfigError, RunConfig};
use crate::system;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_CHAIN: i32 = 4;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Estimator(EstimatorError),
    Io(PathBuf, std::io::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Estimator(e) => write!(f, "reason=estimator: {e}"),
            RunError::Io(p, e) => write!(f, "reason=io path={}: {e}", p.display()),
        }
    }
}

impl std::error::Error for RunError {}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        EXIT_CONFIG
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub bounds: Option<OracleBounds>,
    pub fiber: Option<FiberReport>,
    pub excluded: usize,
    pub provenance: String,
    /// why the oracle could not run
    pub unavailable: Option<String>,
}

/// One system evaluation (one sweep value).
#[derive(Debug, Clone)]
pub struct SingleRun {
    pub label: String,
    pub system: String,
    pub dim: usize,
    pub layers: usize,
    pub notes: Vec<String>,
    pub report: BoundsReport,
    pub evals: Vec<PointEval>,
    pub alphas: Vec<(Point, f64)>,
    pub oracle: Option<OracleOutcome>,
    pub verdict: Option<Verdict>,
    pub code: i32,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub name: String,
    pub runs: Vec<SingleRun>,
    pub code: i32,
    pub ucp_disclaimer: bool,
}

impl RunOutcome {
    pub fn reason(&self) -> &'static str {
        match self.code {
            EXIT_OK => "ok",
            EXIT_DIVERGENCE => "divergence",
            EXIT_CHAIN => "chain_violation",
            _ => "error",
        }
    }
}

fn truncation(cfg: &RunConfig) -> Truncation {
    let t = &cfg.truncation;
    Truncation { alpha_radius: t.alpha_radius, max_points: t.max_points, divergence_delta: t.divergence_delta, tail_tol: t.tail_tol }
}

fn grid_spec(cfg: &RunConfig) -> Result<GridSpec, ConfigError> {
    Ok(GridSpec {
        domain: system::domain(&cfg.grid.domain)?,
        resolution: cfg.grid.resolution,
        refine: cfg.grid.refine,
        refine_tol: cfg.grid.refine_tol,
        refine_passes: cfg.grid.refine_passes,
    })
}

fn rational_lattices(sys: &SystemSpec) -> bool {
    sys.layers.iter().all(|l| match &l.lattice {
        Lattice::R(r) => r.is_exact(),
        _ => true,
    })
}

fn run_oracle(cfg: &RunConfig, sys: &SystemSpec, points: &[Point]) -> Option<OracleOutcome> {
    let oc = cfg.oracle.as_ref()?;
    let mut out = OracleOutcome { bounds: None, fiber: None, excluded: 0, provenance: String::new(), unavailable: None };
    if !rational_lattices(sys) {
        out.unavailable = Some("irrational lattice data: estimates only".into());
        return Some(out);
    }
    match discretize(sys, oc.n, oc.rate) {
        Ok(model) => {
            out.excluded = model.excluded;
            out.provenance = model.provenance.clone();
            match optimal_bounds(&model) {
                Ok(b) => out.bounds = Some(b),
                Err(e) => out.unavailable = Some(e.to_string()),
            }
        }
        Err(e) => out.unavailable = Some(e.to_string()),
    }
    if let Some(r) = oc.fiber_radius {
        if sys.is_shift_invariant() && matches!(sys.group, Group::Real(_)) {
            out.fiber = fiber_bounds(sys, points, r).ok();
        }
    }
    Some(out)
}

/// Computes every report without touching the file system.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    cfg.validate()?;
    let trunc = truncation(cfg);
    let grid = grid_spec(cfg)?;
    let scales: Vec<Option<f64>> = match &cfg.sweep {
        Some(s) => s.gamma_scale.iter().map(|v| Some(*v)).collect(),
        None => vec![None],
    };
    let mut runs = Vec::new();
    for scale in scales {
        let mut sys = system::build(&cfg.system, scale.unwrap_or(1.0))?;
        if let Some(u) = cfg.ucp_asserted {
            sys = sys.with_ucp(u);
        }
        let (report, evals) = bounds_with_points(&sys, &grid, &trunc).map_err(RunError::Estimator)?;
        let points: Vec<Point> = evals.iter().map(|e| framebound::linalg::point(&e.omega)).collect();
        let alphas = alpha_table(&sys, &points, &trunc).map_err(RunError::Estimator)?;
        let oracle = run_oracle(cfg, &sys, &points);
        let tol = cfg.oracle.as_ref().map(|o| o.tol).unwrap_or(0.0);
        let verdict = oracle.as_ref().and_then(|o| o.bounds.as_ref()).map(|b| verify_chain(&report, b, tol));
        let code = if report.divergence.primary() {
            EXIT_DIVERGENCE
        } else if verdict.as_ref().is_some_and(|v| !v.ok) {
            EXIT_CHAIN
        } else {
            EXIT_OK
        };
        let label = match scale {
            Some(c) => format!("c={c}"),
            None => cfg.name.clone(),
        };
        runs.push(SingleRun {
            label,
            system: sys.label.clone(),
            dim: sys.dim(),
            layers: sys.layers.len(),
            notes: sys.notes.clone(),
            report,
            evals,
            alphas,
            oracle,
            verdict,
            code,
        });
    }
    let code = if runs.iter().any(|r| r.code == EXIT_DIVERGENCE) {
        EXIT_DIVERGENCE
    } else if runs.iter().any(|r| r.code == EXIT_CHAIN) {
        EXIT_CHAIN
    } else {
        EXIT_OK
    };
    Ok(RunOutcome { name: cfg.name.clone(), runs, code, ucp_disclaimer: cfg.ucp_asserted.is_some() })
}

/// Fixed 17-significant-digit formatting.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn render_run(out: &mut String, r: &SingleRun, disclaimer: bool) {
    let rep = &r.report;
    let b = &rep.bounds;
    let e = &rep.error_bars;
    let _ = writeln!(out, "[{}]", r.label);
    let _ = writeln!(out, "system: {} (d = {}, {} layers)", r.system, r.dim, r.layers);
    let _ = writeln!(out, "grid: {}", rep.grid);
    let _ = writeln!(out, "alpha radius: {} ({} alphas at the largest point)", rep.alpha_radius, rep.alpha_count);
    let _ = writeln!(out, "{:<8} {:>25} {:>25}", "estimate", "value", "refinement_change");
    for (name, v, eb) in [
        ("A1", b.a1, e.a1),
        ("B1", b.b1, e.b1),
        ("B2", b.b2, e.b2),
        ("A_inf", b.a_inf, e.a_inf),
        ("A'", b.a_prime, e.a_prime),
        ("B'", b.b_prime, e.b_prime),
    ] {
        let _ = writeln!(out, "{:<8} {:>25} {:>25}", name, num(v), num(eb));
    }
    match rep.tight {
        Some(t) => {
            let _ = writeln!(out, "tight: yes, bound {}", num(t));
        }
        None => {
            let _ = writeln!(out, "tight: no");
        }
    }
    if let Some((a, bb)) = rep.abs_separated {
        let _ = writeln!(out, "absolute bounds with separate suprema per shift: A' = {}, B' = {}", num(a), num(bb));
    }
    let d = &rep.divergence;
    let _ = writeln!(
        out,
        "divergence: R {}, R_abs {}, l2 {}, term cap {}",
        yes(d.r),
        yes(d.r_abs),
        yes(d.l2),
        yes(d.overflow)
    );
    if d.primary() {
        let _ = writeln!(out, "divergence sentinels set: the sums do not converge; {HYPOTHESIS_VIOLATED}");
    } else if d.r_abs {
        let _ = writeln!(out, "note: the absolute remainder diverges; A' and B' are sentinels");
    }
    let _ = writeln!(out, "chain consistency (A1 <= A_inf <= B2 <= B1): {}", yes(rep.chain_ok));
    if let Some(o) = &r.oracle {
        if let Some(ob) = &o.bounds {
            let _ = writeln!(
                out,
                "oracle: A_opt = {}, B_opt = {} ({}, {} blocks, largest {}, residual {:.3e}, {} excluded points)",
                num(ob.a_opt),
                num(ob.b_opt),
                ob.method,
                ob.blocks,
                ob.largest_block,
                ob.residual,
                o.excluded
            );
            let _ = writeln!(out, "oracle model: {}", o.provenance);
        }
        if let Some(f) = &o.fiber {
            let _ = writeln!(out, "fiber oracle: A_fib = {}, B_fib = {} (half window: {}, {})", num(f.a_fib), num(f.b_fib), num(f.a_half), num(f.b_half));
        }
        if let Some(u) = &o.unavailable {
            let _ = writeln!(out, "oracle unavailable: {u}");
        }
    }
    if let Some(v) = &r.verdict {
        let _ = writeln!(out, "chain verdict: {}", v.message);
        for l in &v.links {
            let _ = writeln!(out, "  {:<16} {} ({} vs {})", l.name, if l.holds { "holds" } else { "VIOLATED" }, num(l.lhs), num(l.rhs));
        }
    }
    for n in rep.notes.iter().chain(&r.notes) {
        let _ = writeln!(out, "note: {n}");
    }
    if disclaimer {
        let _ = writeln!(out, "disclaimer: {HYPOTHESIS_DISCLAIMER}");
    }
    let _ = writeln!(out, "status: {}", r.code);
}

pub fn render_report(o: &RunOutcome) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "framebound report: {}", o.name);
    let _ = writeln!(out);
    for r in &o.runs {
        render_run(&mut out, r, o.ucp_disclaimer);
        let _ = writeln!(out);
    }
    let _ = writeln!(out, "exit: {} ({})", o.code, o.reason());
    out
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<(), RunError> {
    let io = |e: csv::Error| RunError::Io(path.to_path_buf(), e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.flush().map_err(|e| RunError::Io(path.to_path_buf(), e))
}

fn write_run_csv(dir: &Path, r: &SingleRun, with_oracle: bool) -> Result<(), RunError> {
    let d = r.dim;
    let mut header: Vec<String> = (1..=d).map(|i| format!("omega_{i}")).collect();
    header.extend(["t0", "R", "R_abs", "l2_norm"].map(String::from));
    write_csv(
        &dir.join("bounds.csv"),
        &header,
        r.evals.iter().map(|e| {
            let mut row: Vec<String> = e.omega.iter().map(|v| num(*v)).collect();
            row.extend([num(e.t0), num(e.r), num(e.r_abs), num(e.l2sq.sqrt())]);
            row
        }),
    )?;
    let mut header: Vec<String> = (1..=d).map(|i| format!("alpha_{i}")).collect();
    header.push("sup_abs_t_alpha".into());
    write_csv(
        &dir.join("t_alpha.csv"),
        &header,
        r.alphas.iter().map(|(a, v)| {
            let mut row: Vec<String> = a.iter().map(|x| num(*x)).collect();
            row.push(num(*v));
            row
        }),
    )?;
    if with_oracle {
        if let Some(o) = &r.oracle {
            let mut rows: Vec<(String, String)> = Vec::new();
            if let Some(b) = &o.bounds {
                rows.push(("A_opt".into(), num(b.a_opt)));
                rows.push(("B_opt".into(), num(b.b_opt)));
                rows.push(("residual".into(), num(b.residual)));
                rows.push(("blocks".into(), b.blocks.to_string()));
                rows.push(("largest_block".into(), b.largest_block.to_string()));
                rows.push(("zero_rows".into(), b.zero_rows.to_string()));
                rows.push(("excluded_points".into(), o.excluded.to_string()));
            }
            if let Some(f) = &o.fiber {
                rows.push(("A_fib".into(), num(f.a_fib)));
                rows.push(("B_fib".into(), num(f.b_fib)));
                rows.push(("A_fib_half_window".into(), num(f.a_half)));
                rows.push(("B_fib_half_window".into(), num(f.b_half)));
            }
            if let Some(v) = &r.verdict {
                rows.push(("chain_ok".into(), v.ok.to_string()));
            }
            write_csv(&dir.join("oracle.csv"), &["quantity".into(), "value".into()], rows.into_iter().map(|(a, b)| vec![a, b]))?;
        }
    }
    Ok(())
}

/// Writes report.txt and the CSV files; sweeps get one subdirectory per value.
pub fn write_artifacts(o: &RunOutcome, cfg: &RunConfig, dir: &Path) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::Io(dir.to_path_buf(), e))?;
    let formats = &cfg.output.formats;
    if formats.iter().any(|f| f == "txt") {
        let p = dir.join("report.txt");
        fs::write(&p, render_report(o)).map_err(|e| RunError::Io(p, e))?;
    }
    if formats.iter().any(|f| f == "csv") {
        let with_oracle = cfg.oracle.is_some();
        if cfg.sweep.is_some() {
            for r in &o.runs {
                let sub = dir.join(&r.label);
                fs::create_dir_all(&sub).map_err(|e| RunError::Io(sub.clone(), e))?;
                write_run_csv(&sub, r, with_oracle)?;
            }
        } else if let Some(r) = o.runs.first() {
            write_run_csv(dir, r, with_oracle)?;
        }
    }
    Ok(())
}

/// Reads, runs and writes; returns the process exit code.
pub fn run_file(path: &Path, out: Option<&Path>) -> (i32, String) {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return (EXIT_CONFIG, format!("reason=io path={}: {e}", path.display())),
    };
    let cfg = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return (EXIT_CONFIG, format!("{}: {e}", path.display())),
    };
    run_config(&cfg, out)
}

/// Runs a parsed configuration and writes its artifacts.
pub fn run_config(cfg: &RunConfig, out: Option<&Path>) -> (i32, String) {
    let dir: PathBuf = match (out, &cfg.output.dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from(format!("framebound-{}", cfg.name)),
    };
    let outcome = match execute(cfg) {
        Ok(o) => o,
        Err(e) => return (e.exit_code(), e.to_string()),
    };
    if let Err(e) = write_artifacts(&outcome, cfg, &dir) {
        return (e.exit_code(), e.to_string());
    }
    let summary = format!("{}: exit {} ({}), artifacts in {}", cfg.name, outcome.code, outcome.reason(), dir.display());
    (outcome.code, summary)
}
