//! Parameter sweeps over meshes, wave numbers, shifts and solvers.
//!
//! A sweep is described by a JSON [`SweepSpec`]; every cell becomes one
//! [`SweepRow`] and the table is written as CSV with the columns
//!
//! `mesh,k,eta,precond,method,rhs,iters,converged,breakdown,lambda_min,time,error`
//!
//! `lambda_min` is empty unless requested, `time` is wall-clock seconds and
//! is the only non-deterministic field, and `error` holds the message of a
//! cell that could not be run (the sweep carries on).

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use saddlepc_core::krylov::{solve_case, KrylovOptions, Method, RhsKind};
use saddlepc_core::mesh::{gen_lshape, gen_square, Mesh};
use saddlepc_core::saddle::{DBlock, InnerSolve, PreconditionerConfig, PreconditionerKind, SaddleSystem};
use saddlepc_core::spectral::lambda_min_aeta;
use serde::{Deserialize, Serialize};

use crate::FormatError;

/// Iteration cap of inexact inner solves.
pub const INNER_MAX_IT: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Square,
    Lshape,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Square => "square",
            Domain::Lshape => "lshape",
        }
    }

    pub fn mesh(self, level: usize, grading: f64) -> saddlepc_core::Result<Mesh> {
        match self {
            Domain::Square => gen_square(level, grading),
            Domain::Lshape => gen_lshape(level, grading),
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "square" => Ok(Domain::Square),
            "lshape" | "l-shape" => Ok(Domain::Lshape),
            _ => Err(format!("unknown domain '{s}' (square, lshape)")),
        }
    }
}

pub fn parse_precond(s: &str) -> Result<PreconditionerKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "p" => Ok(PreconditionerKind::P),
        "mtri" => Ok(PreconditionerKind::Mtri),
        "mdiag" => Ok(PreconditionerKind::Mdiag),
        "p0" => Ok(PreconditionerKind::P0),
        "pd" => Ok(PreconditionerKind::PD),
        "directk0" => Ok(PreconditionerKind::DirectK0),
        _ => Err(format!("unknown preconditioner '{s}' (P, Mtri, Mdiag, P0, PD, directk0)")),
    }
}

pub fn parse_method(s: &str) -> Result<Method, String> {
    match s.to_ascii_lowercase().as_str() {
        "cg" => Ok(Method::Cg),
        "minres" => Ok(Method::Minres),
        "direct" => Ok(Method::Direct),
        _ => Err(format!("unknown method '{s}' (cg, minres, direct)")),
    }
}

pub fn parse_rhs(s: &str) -> Result<RhsKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "ones" => Ok(RhsKind::Ones),
        "df0g" => Ok(RhsKind::Df0g),
        "rf0g" => Ok(RhsKind::Rf0g),
        "rfrg" => Ok(RhsKind::Rfrg),
        _ => Err(format!("unknown right-hand side '{s}' (ones, df0g, rf0g, rfrg)")),
    }
}

/// `exact`, `pcg:TOL` or `pcg:TOL:MAXIT`.
pub fn parse_inner(s: &str) -> Result<InnerSolve, String> {
    let lower = s.to_ascii_lowercase();
    if lower == "exact" {
        return Ok(InnerSolve::Exact);
    }
    let mut parts = lower.split(':');
    let bad = || format!("inner solver must be 'exact' or 'pcg:TOL[:MAXIT]', got '{s}'");
    if parts.next() != Some("pcg") {
        return Err(bad());
    }
    let tol: f64 = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
    let max_it = match parts.next() {
        Some(m) => m.parse().map_err(|_| bad())?,
        None => INNER_MAX_IT,
    };
    if parts.next().is_some() || !(tol > 0.0) || max_it == 0 {
        return Err(bad());
    }
    Ok(InnerSolve::Pcg { tol, max_it })
}

pub fn inner_name(inner: InnerSolve) -> String {
    match inner {
        InnerSolve::Exact => "exact".into(),
        InnerSolve::Pcg { tol, max_it } if max_it == INNER_MAX_IT => format!("pcg:{tol}"),
        InnerSolve::Pcg { tol, max_it } => format!("pcg:{tol}:{max_it}"),
    }
}

/// Builds a preconditioner configuration; `epsilon` is read by `Mtri`,
/// `d_scale` (`D = d_scale·L`, default `D = 0`) by `PD`.
pub fn make_config(
    kind: PreconditionerKind,
    eta: f64,
    epsilon: Option<f64>,
    d_scale: Option<f64>,
    inner: InnerSolve,
) -> Result<PreconditionerConfig, String> {
    let cfg = match kind {
        PreconditionerKind::P => PreconditionerConfig::p(eta),
        PreconditionerKind::Mtri => PreconditionerConfig::mtri(eta, epsilon.ok_or("Mtri needs an epsilon")?),
        PreconditionerKind::Mdiag => PreconditionerConfig::mdiag(eta),
        PreconditionerKind::P0 => PreconditionerConfig::p0(),
        PreconditionerKind::PD => {
            let d = d_scale.map_or(DBlock::Zero, DBlock::ScaledLaplacian);
            PreconditionerConfig::pd(eta, d)
        }
        PreconditionerKind::DirectK0 => PreconditionerConfig::direct_k0(),
    };
    Ok(cfg.with_inner(inner))
}

/// One or several numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// `{"k2plus": c}` (or a list of offsets) gives `η = k² + c`;
/// `{"explicit": [...]}` uses the listed values for every `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EtaRule {
    K2plus(OneOrMany),
    Explicit(Vec<f64>),
}

impl Default for EtaRule {
    fn default() -> Self {
        EtaRule::K2plus(OneOrMany::One(1.0))
    }
}

impl EtaRule {
    pub fn etas(&self, k: f64) -> Vec<f64> {
        match self {
            EtaRule::K2plus(c) => c.values().into_iter().map(|c| k * k + c).collect(),
            EtaRule::Explicit(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub precond: String,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_scale: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    1e-6
}

fn default_max_it() -> usize {
    200
}

fn default_rhs() -> Vec<String> {
    vec!["ones".into()]
}

fn default_inner() -> String {
    "exact".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub domain: Domain,
    pub levels: Vec<usize>,
    #[serde(default = "one")]
    pub grading: f64,
    pub k: Vec<f64>,
    #[serde(default)]
    pub eta: EtaRule,
    pub solvers: Vec<SolverSpec>,
    #[serde(default = "default_rhs")]
    pub rhs: Vec<String>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_it")]
    pub max_it: usize,
    #[serde(default = "default_inner")]
    pub inner: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lambda_min: bool,
    /// File name used when no output path is given on the command line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
struct Solver {
    kind: PreconditionerKind,
    method: Method,
    epsilon: Option<f64>,
    d_scale: Option<f64>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        spec.validate().map_err(FormatError::Spec)?;
        Ok(spec)
    }

    /// Checks the grids and parses every textual field.
    pub fn validate(&self) -> Result<(), String> {
        if self.levels.is_empty() || self.k.is_empty() || self.solvers.is_empty() || self.rhs.is_empty() {
            return Err("levels, k, solvers and rhs must be nonempty".into());
        }
        if self.levels.contains(&0) {
            return Err("levels start at 1".into());
        }
        if !(self.tol > 0.0) {
            return Err(format!("outer tolerance must be positive, got {}", self.tol));
        }
        if !(self.grading > 0.0 && self.grading <= 1.0) {
            return Err(format!("grading must be in (0, 1], got {}", self.grading));
        }
        if self.k.iter().any(|k| !k.is_finite()) || self.k.iter().any(|&k| self.eta.etas(k).is_empty()) {
            return Err("every k needs at least one finite eta".into());
        }
        self.solvers()?;
        self.rhs_kinds()?;
        parse_inner(&self.inner)?;
        Ok(())
    }

    fn solvers(&self) -> Result<Vec<Solver>, String> {
        self.solvers
            .iter()
            .map(|s| {
                Ok(Solver {
                    kind: parse_precond(&s.precond)?,
                    method: parse_method(&s.method)?,
                    epsilon: s.epsilon,
                    d_scale: s.d_scale,
                })
            })
            .collect()
    }

    fn rhs_kinds(&self) -> Result<Vec<RhsKind>, String> {
        self.rhs.iter().map(|r| parse_rhs(r)).collect()
    }

    /// Number of rows the sweep produces.
    pub fn n_cells(&self) -> usize {
        let etas: usize = self.k.iter().map(|&k| self.eta.etas(k).len()).sum();
        self.levels.len() * etas * self.solvers.len() * self.rhs.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mesh: String,
    pub k: f64,
    pub eta: f64,
    pub precond: String,
    pub method: String,
    pub rhs: String,
    pub iters: Option<usize>,
    pub converged: bool,
    pub breakdown: bool,
    pub lambda_min: Option<f64>,
    pub time: Option<f64>,
    pub error: String,
}

struct Cell {
    level_idx: usize,
    k: f64,
    eta: f64,
    solver: usize,
    rhs: RhsKind,
}

fn mesh_name(domain: Domain, level: usize, grading: f64) -> String {
    if grading == 1.0 {
        format!("{}-L{level}", domain.name())
    } else {
        format!("{}-L{level}-g{grading}", domain.name())
    }
}

/// Runs every cell, in parallel when called inside a rayon pool. Rows come
/// back in a fixed order: level, k, η, solver, right-hand side.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, FormatError> {
    spec.validate().map_err(FormatError::Spec)?;
    let solvers = spec.solvers().map_err(FormatError::Spec)?;
    let rhs_kinds = spec.rhs_kinds().map_err(FormatError::Spec)?;
    let inner = parse_inner(&spec.inner).map_err(FormatError::Spec)?;

    let systems: Vec<Result<SaddleSystem, String>> = spec
        .levels
        .par_iter()
        .map(|&level| {
            let mesh = spec.domain.mesh(level, spec.grading).map_err(|e| e.to_string())?;
            SaddleSystem::assemble(&mesh, 0.0).map_err(|e| e.to_string())
        })
        .collect();

    let mut cells = Vec::new();
    for level_idx in 0..spec.levels.len() {
        for &k in &spec.k {
            for eta in spec.eta.etas(k) {
                for solver in 0..solvers.len() {
                    for &rhs in &rhs_kinds {
                        cells.push(Cell { level_idx, k, eta, solver, rhs });
                    }
                }
            }
        }
    }

    // λ_min(A_η) once per (mesh, k, η).
    let mut lambda: BTreeMap<(usize, u64, u64), Option<f64>> = BTreeMap::new();
    if spec.lambda_min {
        for c in &cells {
            lambda.insert((c.level_idx, c.k.to_bits(), c.eta.to_bits()), None);
        }
        let keys: Vec<_> = lambda.keys().copied().collect();
        let values: Vec<Option<f64>> = keys
            .par_iter()
            .map(|&(li, kb, eb)| {
                let sys = systems[li].as_ref().ok()?;
                lambda_min_aeta(&sys.with_k(f64::from_bits(kb)), f64::from_bits(eb)).ok()
            })
            .collect();
        for (key, v) in keys.into_iter().zip(values) {
            lambda.insert(key, v);
        }
    }

    let opts = KrylovOptions { tol: spec.tol, max_it: spec.max_it };
    Ok(cells
        .par_iter()
        .map(|c| {
            let s = &solvers[c.solver];
            let level = spec.levels[c.level_idx];
            let mut row = SweepRow {
                mesh: mesh_name(spec.domain, level, spec.grading),
                k: c.k,
                eta: c.eta,
                precond: s.kind.name().into(),
                method: s.method.name().into(),
                rhs: c.rhs.name().into(),
                iters: None,
                converged: false,
                breakdown: false,
                lambda_min: lambda.get(&(c.level_idx, c.k.to_bits(), c.eta.to_bits())).copied().flatten(),
                time: None,
                error: String::new(),
            };
            let result = systems[c.level_idx].clone().and_then(|base| {
                let sys = base.with_k(c.k);
                let cfg = make_config(s.kind, c.eta, s.epsilon, s.d_scale, inner)?;
                solve_case(&sys, &cfg, s.method, c.rhs, spec.seed, opts).map_err(|e| e.to_string())
            });
            match result {
                Ok(out) => {
                    let r = out.report;
                    row.iters = Some(r.iterations);
                    row.converged = r.converged;
                    row.breakdown = r.breakdown;
                    row.time = Some(r.wall_time);
                }
                Err(e) => row.error = e,
            }
            row
        })
        .collect())
}

/// RFC 4180 CSV with a header row. Without `timing` the `time` column is
/// left empty, which makes the output byte-reproducible.
pub fn write_csv<W: std::io::Write>(rows: &[SweepRow], timing: bool, out: W) -> Result<(), FormatError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        if timing {
            w.serialize(row)?;
        } else {
            w.serialize(SweepRow { time: None, ..row.clone() })?;
        }
    }
    if rows.is_empty() {
        w.write_record([
            "mesh",
            "k",
            "eta",
            "precond",
            "method",
            "rhs",
            "iters",
            "converged",
            "breakdown",
            "lambda_min",
            "time",
            "error",
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Preset sweeps shipped with the crate, by name.
pub const PRESETS: &[(&str, &str)] = &[
    ("table1", include_str!("../presets/table1.json")),
    ("table2", include_str!("../presets/table2.json")),
    ("table3", include_str!("../presets/table3.json")),
    ("table4", include_str!("../presets/table4.json")),
    ("table5", include_str!("../presets/table5.json")),
];

pub fn preset(name: &str) -> Option<SweepSpec> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, text)| SweepSpec::from_json(text).expect("presets are valid"))
}

impl fmt::Display for SweepRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let iters = self.iters.map_or("-".to_string(), |i| i.to_string());
        write!(
            f,
            "{} k={} eta={} {}-{} {}: {iters}",
            self.mesh, self.k, self.eta, self.precond, self.method, self.rhs
        )?;
        if self.breakdown {
            write!(f, " (breakdown)")?;
        } else if !self.converged && self.error.is_empty() {
            write!(f, " (not converged)")?;
        }
        if !self.error.is_empty() {
            write!(f, " error: {}", self.error)?;
        }
        Ok(())
    }
}
