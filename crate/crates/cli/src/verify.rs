//! Property suites behind `saddlepc verify`.

use saddlepc_core::fem::verify_structure;
use saddlepc_core::genspd::{
    admissible_shapes, build_null_data, inverse_app1, inverse_app2, random_admissible, rel_diff, verify_inverses,
    verify_lingshi_pr3, GeneralSaddle, IDENTITY_TOL,
};
use saddlepc_core::la::DenseMatrix;
use saddlepc_core::report::CheckReport;
use saddlepc_core::saddle::{verify_t_properties, PreconditionerConfig, SaddleSystem};
use saddlepc_core::spectral::{check_eq31_bounds, spectrum_preconditioned};
use serde::Serialize;

use crate::sweep::Domain;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Structure,
    Inverse,
    Spectral,
    Appendix,
    All,
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "structure" => Ok(Suite::Structure),
            "inverse" => Ok(Suite::Inverse),
            "spectral" => Ok(Suite::Spectral),
            "appendix" => Ok(Suite::Appendix),
            "all" => Ok(Suite::All),
            _ => Err(format!("unknown suite '{s}' (structure, inverse, spectral, appendix, all)")),
        }
    }
}

/// Mesh and parameter selection. `None` fields fall back to each suite's
/// default set.
#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub domain: Option<Domain>,
    pub level: Option<usize>,
    pub grading: f64,
    pub k: Option<f64>,
    pub seed: u64,
    /// Random instances in the appendix suite.
    pub instances: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Section {
    pub suite: &'static str,
    pub case: String,
    pub passed: bool,
    pub checks: CheckReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplicity_of_one: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutput {
    pub passed: bool,
    pub sections: Vec<Section>,
}

fn section(suite: &'static str, case: String, checks: CheckReport) -> Section {
    Section { suite, case, passed: checks.all_passed(), checks, multiplicity_of_one: None, m: None }
}

fn meshes(opts: &VerifyOptions, default_levels: &[usize]) -> Vec<(String, Result<SaddleSystem, String>)> {
    let domains = opts.domain.map_or(vec![Domain::Square, Domain::Lshape], |d| vec![d]);
    let levels = opts.level.map_or(default_levels.to_vec(), |l| vec![l]);
    let mut out = Vec::new();
    for d in domains {
        for &level in &levels {
            let sys = d
                .mesh(level, opts.grading)
                .and_then(|mesh| SaddleSystem::assemble(&mesh, 0.0))
                .map_err(|e| e.to_string());
            out.push((format!("{} L{level} grading {}", d.name(), opts.grading), sys));
        }
    }
    out
}

fn failed(suite: &'static str, case: String, err: impl ToString) -> Section {
    let mut checks = CheckReport::new();
    checks.push_flag(&format!("error: {}", err.to_string()), false);
    section(suite, case, checks)
}

fn structure(opts: &VerifyOptions) -> Vec<Section> {
    meshes(opts, &[1, 2, 3, 4])
        .into_iter()
        .map(|(case, sys)| match sys.and_then(|s| verify_structure(&s).map_err(|e| e.to_string())) {
            Ok(rep) => section("structure", case, rep),
            Err(e) => failed("structure", case, e),
        })
        .collect()
}

fn k_values(opts: &VerifyOptions, default: &[f64]) -> Vec<f64> {
    opts.k.map_or(default.to_vec(), |k| vec![k])
}

fn inverse(opts: &VerifyOptions) -> Vec<Section> {
    let mut out = Vec::new();
    for (case, sys) in meshes(opts, &[2, 3]) {
        for k in k_values(opts, &[0.0, 1.0, 2.0]) {
            let case = format!("{case} k={k} eta=k^2+1");
            let result = sys
                .as_ref()
                .map_err(Clone::clone)
                .and_then(|s| verify_t_properties(&s.with_k(k), k * k + 1.0).map_err(|e| e.to_string()));
            out.push(match result {
                Ok(rep) => section("inverse", case, rep),
                Err(e) => failed("inverse", case, e),
            });
        }
    }
    out
}

fn spectral(opts: &VerifyOptions) -> Vec<Section> {
    let mut out = Vec::new();
    for (case, sys) in meshes(opts, &[2, 3]) {
        for k in k_values(opts, &[0.0, 1.0]) {
            let eta = k * k + 1.0;
            for (name, cfg) in
                [("P", PreconditionerConfig::p(eta)), ("Mtri eps=0.3", PreconditionerConfig::mtri(eta, 0.3))]
            {
                let case = format!("{case} k={k} eta=k^2+1 {name}");
                let result = sys
                    .as_ref()
                    .map_err(Clone::clone)
                    .and_then(|s| spectrum_preconditioned(&s.with_k(k), &cfg).map_err(|e| e.to_string()));
                out.push(match result {
                    Ok(rep) => Section {
                        multiplicity_of_one: Some(rep.multiplicity_of_one),
                        m: Some(rep.m),
                        ..section("spectral", case, check_eq31_bounds(&rep))
                    },
                    Err(e) => failed("spectral", case, e),
                });
            }
        }
    }
    out
}

/// The 3 x 3 instance whose inverse is a permutation.
pub fn hand_instance() -> GeneralSaddle {
    let a = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).expect("rows agree");
    let b = DenseMatrix::from_rows(&[&[0.0], &[1.0]]).expect("rows agree");
    let c = DenseMatrix::from_rows(&[&[0.0, 1.0]]).expect("rows agree");
    GeneralSaddle::new(a, b, c, DenseMatrix::zeros(1, 1)).expect("shapes agree")
}

fn appendix(opts: &VerifyOptions) -> Vec<Section> {
    let shapes = admissible_shapes(8);
    let mut out = Vec::new();
    for i in 0..opts.instances as u64 {
        let seed = opts.seed.wrapping_add(i);
        let shape = shapes[(seed % shapes.len() as u64) as usize];
        let (m, n, k, l) = shape;
        let case = format!("shape {shape:?} seed {seed}");
        let result = random_admissible(m, n, k, l, seed).and_then(|gs| {
            let nd = build_null_data(&gs)?;
            let mut rep = verify_inverses(&gs, &nd)?;
            rep.extend(verify_lingshi_pr3(&gs, &nd, seed)?);
            Ok(rep)
        });
        out.push(match result {
            Ok(rep) => section("appendix", case, rep),
            Err(e) => failed("appendix", case, e),
        });
    }
    let gs = hand_instance();
    let perm = DenseMatrix::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]).expect("rows agree");
    let result = build_null_data(&gs).and_then(|nd| {
        let mut rep = CheckReport::new();
        rep.push("inverse_app1 = permutation", rel_diff(&inverse_app1(&gs, &nd, None)?, &perm)?, IDENTITY_TOL);
        rep.push("inverse_app2 = permutation", rel_diff(&inverse_app2(&gs)?, &perm)?, IDENTITY_TOL);
        Ok(rep)
    });
    out.push(match result {
        Ok(rep) => section("appendix", "hand instance".into(), rep),
        Err(e) => failed("appendix", "hand instance".into(), e),
    });
    out
}

pub fn run_verify(suite: Suite, opts: &VerifyOptions) -> VerifyOutput {
    let mut sections = Vec::new();
    if matches!(suite, Suite::Structure | Suite::All) {
        sections.extend(structure(opts));
    }
    if matches!(suite, Suite::Inverse | Suite::All) {
        sections.extend(inverse(opts));
    }
    if matches!(suite, Suite::Spectral | Suite::All) {
        sections.extend(spectral(opts));
    }
    if matches!(suite, Suite::Appendix | Suite::All) {
        sections.extend(appendix(opts));
    }
    VerifyOutput { passed: sections.iter().all(|s| s.passed), sections }
}
