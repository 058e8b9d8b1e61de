//! Subcommands. Exit codes: 0 success, 2 non-convergence, breakdown or a
//! failed verification, 1 usage or input errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use saddlepc_core::krylov::{solve_case, KrylovOptions, Method, RhsKind};
use saddlepc_core::mesh::Mesh;
use saddlepc_core::saddle::{InnerSolve, PreconditionerKind, SaddleSystem};
use saddlepc_core::spectral::{eigenvalues_csv, spectrum_k_vs_aeta, spectrum_preconditioned};

use crate::matrix_market::write_matrix_market;
use crate::sweep::{
    make_config, parse_inner, parse_method, parse_precond, parse_rhs, preset, run_sweep, write_csv, Domain, SweepSpec,
    PRESETS,
};
use crate::triangle::{read_triangle, write_triangle};
use crate::verify::{run_verify, Suite, VerifyOptions};
use crate::OUT_DIR_ENV;

#[derive(Debug, Parser)]
#[command(name = "saddlepc", version, about = "Preconditioned saddle-point solvers for edge-element Maxwell systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one system and write the report as JSON.
    Solve(SolveArgs),
    /// Run a parameter sweep and write a CSV table.
    Sweep(SweepArgs),
    /// Run property suites and write a JSON report.
    Verify(VerifyArgs),
    /// Write a mesh as Triangle files plus statistics, optionally with matrices.
    Mesh(MeshArgs),
    /// Eigenvalues of a preconditioned operator (and of K vs A_eta).
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Clone, Args)]
pub struct MeshSource {
    #[arg(long, default_value = "square", value_parser = parse_domain)]
    pub domain: Domain,
    #[arg(long, default_value_t = 3)]
    pub level: usize,
    /// Grading in (0, 1]: square refines toward the boundary, lshape toward the re-entrant corner; 1 is uniform.
    #[arg(long, default_value_t = 1.0)]
    pub grading: f64,
    /// Triangle .node file (with --ele), instead of a generated mesh.
    #[arg(long, requires = "ele")]
    pub node: Option<PathBuf>,
    #[arg(long, requires = "node")]
    pub ele: Option<PathBuf>,
}

impl MeshSource {
    fn load(&self) -> anyhow::Result<Mesh> {
        match (&self.node, &self.ele) {
            (Some(node), Some(ele)) => {
                let nt = fs::read_to_string(node).with_context(|| format!("reading {}", node.display()))?;
                let et = fs::read_to_string(ele).with_context(|| format!("reading {}", ele.display()))?;
                Ok(read_triangle(&nt, &et)?)
            }
            _ => Ok(self.domain.mesh(self.level, self.grading)?),
        }
    }

    fn name(&self) -> String {
        match &self.node {
            Some(p) => p.file_stem().map_or("mesh".into(), |s| s.to_string_lossy().into_owned()),
            None => format!("{}-L{}", self.domain.name(), self.level),
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub mesh: MeshSource,
    #[arg(long, default_value_t = 0.0)]
    pub k: f64,
    /// Defaults to k^2 + 1.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value = "P", value_parser = parse_precond)]
    pub precond: PreconditionerKind,
    /// Mtri parameter.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// PD uses D = d_scale * L (default D = 0).
    #[arg(long)]
    pub d_scale: Option<f64>,
    #[arg(long, default_value = "cg", value_parser = parse_method)]
    pub method: Method,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_it: usize,
    /// `exact` or `pcg:TOL[:MAXIT]`.
    #[arg(long, default_value = "exact", value_parser = parse_inner)]
    pub inner: InnerSolve,
    #[arg(long, default_value = "ones", value_parser = parse_rhs)]
    pub rhs: RhsKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; defaults to $SADDLEPC_OUT_DIR/solve.json, else stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// JSON sweep specification.
    #[arg(long, conflicts_with = "preset", required_unless_present_any = ["preset", "list_presets"])]
    pub spec: Option<PathBuf>,
    /// Built-in specification (table1 ... table5).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub list_presets: bool,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// CSV path; defaults to $SADDLEPC_OUT_DIR/<spec output>, else stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Leave the time column empty (byte-reproducible output).
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value = "all", value_parser = parse_suite)]
    pub suite: Suite,
    /// Restrict mesh-based suites to one domain.
    #[arg(long, value_parser = parse_domain)]
    pub domain: Option<Domain>,
    #[arg(long)]
    pub level: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub grading: f64,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random instances in the appendix suite.
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    /// Report path; defaults to $SADDLEPC_OUT_DIR/verify.json, else stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[command(flatten)]
    pub mesh: MeshSource,
    /// Also write A, M, B, C, L as MatrixMarket files and sizes.json.
    #[arg(long)]
    pub matrices: bool,
    /// Defaults to $SADDLEPC_OUT_DIR, else the current directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub mesh: MeshSource,
    #[arg(long, default_value_t = 0.0)]
    pub k: f64,
    /// Defaults to k^2 + 1.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value = "P", value_parser = parse_precond)]
    pub precond: PreconditionerKind,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Also compare the spectra of K and A_eta below this cutoff.
    #[arg(long)]
    pub compare_aeta: Option<f64>,
    /// Defaults to $SADDLEPC_OUT_DIR, else the current directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_domain(s: &str) -> Result<Domain, String> {
    s.parse()
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse()
}

/// Explicit path, else `$SADDLEPC_OUT_DIR/default_name`, else `None`
/// (standard output).
fn output_path(explicit: Option<&Path>, default_name: &str) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(|d| PathBuf::from(d).join(default_name)))
}

fn output_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn emit(path: Option<PathBuf>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            Ok(out.flush()?)
        }
    }
}

fn json(value: &impl serde::Serialize) -> anyhow::Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn solve(args: SolveArgs) -> anyhow::Result<ExitCode> {
    let eta = args.eta.unwrap_or(args.k * args.k + 1.0);
    if !(args.tol > 0.0) {
        bail!("--tol must be positive");
    }
    let cfg = make_config(args.precond, eta, args.epsilon, args.d_scale, args.inner).map_err(anyhow::Error::msg)?;
    cfg.validate(args.k)?;
    let method = if args.precond == PreconditionerKind::DirectK0 { Method::Direct } else { args.method };
    if method == Method::Direct && args.precond != PreconditionerKind::DirectK0 {
        bail!("--method direct needs --precond directk0");
    }
    let mesh = args.mesh.load()?;
    let sys = SaddleSystem::assemble(&mesh, args.k)?;
    let opts = KrylovOptions { tol: args.tol, max_it: args.max_it };
    let out = solve_case(&sys, &cfg, method, args.rhs, args.seed, opts)?;
    let r = &out.report;
    eprintln!(
        "{} n={} m={} k={} eta={eta} {}-{}: {} iterations, residual {:.3e}{}",
        args.mesh.name(),
        sys.n(),
        sys.m(),
        args.k,
        cfg.kind.name(),
        method.name(),
        r.iterations,
        r.final_residual(),
        if r.converged {
            String::new()
        } else if r.breakdown {
            " (breakdown)".into()
        } else {
            " (not converged)".into()
        }
    );
    emit(output_path(args.out.as_deref(), "solve.json"), &json(r)?)?;
    Ok(if r.converged { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn sweep(args: SweepArgs) -> anyhow::Result<ExitCode> {
    if args.list_presets {
        for (name, _) in PRESETS {
            println!("{name}");
        }
        return Ok(ExitCode::SUCCESS);
    }
    let spec = match (&args.spec, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SweepSpec::from_json(&text)?
        }
        (None, Some(name)) => preset(name).with_context(|| format!("unknown preset '{name}'"))?,
        (None, None) => bail!("either --spec or --preset is required"),
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs).build()?;
    let rows = pool.install(|| run_sweep(&spec))?;
    for row in &rows {
        eprintln!("{row}");
    }
    let mut bytes = Vec::new();
    write_csv(&rows, !args.no_timing, &mut bytes)?;
    let default_name = spec.output.clone().unwrap_or_else(|| "sweep.csv".into());
    emit(output_path(args.out.as_deref(), &default_name), &bytes)?;
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> anyhow::Result<ExitCode> {
    let opts = VerifyOptions {
        domain: args.domain,
        level: args.level,
        grading: args.grading,
        k: args.k,
        seed: args.seed,
        instances: args.instances,
    };
    let out = run_verify(args.suite, &opts);
    for s in out.sections.iter().filter(|s| !s.passed) {
        eprintln!("FAILED {} {}:\n{}", s.suite, s.case, s.checks);
    }
    eprintln!("{} of {} cases passed", out.sections.iter().filter(|s| s.passed).count(), out.sections.len());
    emit(output_path(args.out.as_deref(), "verify.json"), &json(&out)?)?;
    Ok(if out.passed { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn mesh(args: MeshArgs) -> anyhow::Result<ExitCode> {
    let mesh = args.mesh.load()?;
    let dir = output_dir(args.out_dir.as_deref());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = args.mesh.name();
    let (node, ele) = write_triangle(&mesh);
    fs::write(dir.join(format!("{name}.node")), node)?;
    fs::write(dir.join(format!("{name}.ele")), ele)?;
    fs::write(dir.join(format!("{name}.stats.json")), json(&mesh.stats())?)?;
    if args.matrices {
        let sys = SaddleSystem::assemble(&mesh, 0.0)?;
        for (m, a) in [("A", sys.a()), ("M", sys.mass()), ("B", sys.b()), ("C", sys.c()), ("L", sys.l())] {
            fs::write(dir.join(format!("{name}.{m}.mtx")), write_matrix_market(a))?;
        }
        let sizes = serde_json::json!({ "n": sys.n(), "m": sys.m() });
        fs::write(dir.join(format!("{name}.sizes.json")), json(&sizes)?)?;
    }
    eprintln!("wrote {name} to {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn spectrum(args: SpectrumArgs) -> anyhow::Result<ExitCode> {
    let eta = args.eta.unwrap_or(args.k * args.k + 1.0);
    let cfg = make_config(args.precond, eta, args.epsilon, None, InnerSolve::Exact).map_err(anyhow::Error::msg)?;
    cfg.validate(args.k)?;
    let mesh = args.mesh.load()?;
    let sys = SaddleSystem::assemble(&mesh, args.k)?;
    let rep = spectrum_preconditioned(&sys, &cfg)?;
    let dir = output_dir(args.out_dir.as_deref());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = format!("{}-k{}-{}", args.mesh.name(), args.k, cfg.kind.name());
    fs::write(dir.join(format!("{stem}.spectrum.json")), json(&rep)?)?;
    fs::write(dir.join(format!("{stem}.eigenvalues.csv")), eigenvalues_csv(&rep.eigenvalues))?;
    if let Some(cutoff) = args.compare_aeta {
        let cmp = spectrum_k_vs_aeta(&sys, eta, cutoff)?;
        fs::write(dir.join(format!("{stem}.k_vs_aeta.json")), json(&cmp)?)?;
        fs::write(dir.join(format!("{stem}.k_eigenvalues.csv")), eigenvalues_csv(&cmp.k_eigenvalues))?;
        fs::write(dir.join(format!("{stem}.aeta_eigenvalues.csv")), eigenvalues_csv(&cmp.aeta_eigenvalues))?;
        eprintln!("negative eigenvalues: K {}, A_eta {}", cmp.k_negative, cmp.aeta_negative);
    }
    eprintln!(
        "{} eigenvalues, multiplicity of 1: {}, lower bound {:.4}, alpha_bar {:.4}",
        rep.eigenvalues.len(),
        rep.multiplicity_of_one,
        rep.bound_lower,
        rep.alpha_bar
    );
    Ok(ExitCode::SUCCESS)
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify(a),
        Command::Mesh(a) => mesh(a),
        Command::Spectrum(a) => spectrum(a),
    }
}

pub fn main<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
