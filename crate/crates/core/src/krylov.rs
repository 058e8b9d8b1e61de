//! Preconditioned CG and MINRES in a block-diagonal inner product, with
//! true-residual tracking and breakdown detection.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::la::vector::{axpy, dot, norm2, sub};
use crate::la::{factorize, FactorKind, SparseMatrix};
use crate::saddle::{
    direct_solve_k0, DirectK0Options, InnerStats, Preconditioner, PreconditionerConfig, PreconditionerKind,
    SaddleSystem,
};
use crate::{Error, Result};

/// `⟨x, y⟩ = xᵀ G y` with `G` either the identity or `diag(top, bottom)`.
#[derive(Debug, Clone, PartialEq)]
pub enum InnerProduct {
    Euclidean,
    BlockDiagonal { top: SparseMatrix, bottom: SparseMatrix },
}

impl InnerProduct {
    /// Block-diagonal inner product; both blocks are checked to be SPD by
    /// factorization.
    pub fn block_diagonal(top: SparseMatrix, bottom: SparseMatrix) -> Result<Self> {
        for blk in [&top, &bottom] {
            if blk.n_rows() > 0 {
                factorize(blk, FactorKind::SymmetricPositiveDefinite)?;
            }
        }
        Ok(Self::BlockDiagonal { top, bottom })
    }

    /// `diag(A + (η - k²)M, I)`.
    pub fn h_block(sys: &SaddleSystem, eta: f64) -> Result<Self> {
        Self::block_diagonal(sys.shifted(eta - sys.k() * sys.k()), SparseMatrix::identity(sys.m()))
    }

    /// `G x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Euclidean => Ok(x.to_vec()),
            Self::BlockDiagonal { top, bottom } => {
                let n = top.n_rows();
                if x.len() != n + bottom.n_rows() {
                    return Err(Error::DimensionMismatch {
                        op: "inner product",
                        expected: n + bottom.n_rows(),
                        found: x.len(),
                    });
                }
                let mut y = top.spmv(&x[..n])?;
                y.extend(bottom.spmv(&x[n..])?);
                Ok(y)
            }
        }
    }

    pub fn dot(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(dot(x, &self.apply(y)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KrylovOptions {
    pub tol: f64,
    pub max_it: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_it: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Method {
    Cg,
    Minres,
    /// The `k = 0` null-space direct solver.
    Direct,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Cg => "cg",
            Self::Minres => "minres",
            Self::Direct => "direct",
        }
    }
}

/// Right-hand side families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RhsKind {
    /// All ones.
    Ones,
    /// Random `f` projected so that `Cᵀf = 0`, `g = 0`.
    Df0g,
    /// Random `f`, `g = 0`.
    Rf0g,
    /// Random `f` and `g`.
    Rfrg,
}

impl RhsKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Ones => "ones",
            Self::Df0g => "df0g",
            Self::Rf0g => "rf0g",
            Self::Rfrg => "rfrg",
        }
    }
}

/// Parameters of a solve, echoed in its report.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CaseEcho {
    pub n: usize,
    pub m: usize,
    pub k: f64,
    pub preconditioner: PreconditionerConfig,
    pub rhs: RhsKind,
    pub seed: u64,
    pub tol: f64,
    pub max_it: usize,
    /// Work of the leading-block and Laplacian inner solvers.
    pub inner_leading: InnerStats,
    pub inner_laplacian: InnerStats,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveReport {
    pub method: Method,
    pub iterations: usize,
    /// `‖b - Kx‖₂ / ‖b‖₂`, starting with the zero initial guess.
    pub relative_residuals: Vec<f64>,
    /// Norm of the preconditioned residual in the chosen inner product.
    pub preconditioned_residuals: Vec<f64>,
    pub converged: bool,
    /// CG steps taken with `⟨Tp, p⟩ < 0`.
    pub negative_curvature_steps: usize,
    pub breakdown: bool,
    pub breakdown_reason: Option<String>,
    pub warnings: Vec<String>,
    /// Seconds; zero when built without `std`.
    pub wall_time: f64,
    pub config: Option<CaseEcho>,
}

impl SolveReport {
    fn new(method: Method) -> Self {
        Self {
            method,
            iterations: 0,
            relative_residuals: Vec::new(),
            preconditioned_residuals: Vec::new(),
            converged: false,
            negative_curvature_steps: 0,
            breakdown: false,
            breakdown_reason: None,
            warnings: Vec::new(),
            wall_time: 0.0,
            config: None,
        }
    }

    pub fn final_residual(&self) -> f64 {
        self.relative_residuals.last().copied().unwrap_or(f64::NAN)
    }

    fn flag_breakdown(&mut self, reason: String) {
        self.breakdown = true;
        self.breakdown_reason = Some(reason);
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOutput {
    pub x: Vec<f64>,
    pub report: SolveReport,
}

/// Relative curvature below which CG declares breakdown.
pub const BREAKDOWN_TOL: f64 = 1e-14;
/// Relative Lanczos asymmetry that triggers a MINRES warning.
pub const LANCZOS_TOL: f64 = 1e-6;

struct Clock(#[cfg(feature = "std")] std::time::Instant);

impl Clock {
    fn start() -> Self {
        Clock(
            #[cfg(feature = "std")]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(feature = "std")]
        {
            self.0.elapsed().as_secs_f64()
        }
        #[cfg(not(feature = "std"))]
        {
            0.0
        }
    }
}

fn safe_sqrt(x: f64) -> f64 {
    crate::la::sqrt(x.max(0.0))
}

/// CG on the preconditioned operator `T = precond ∘ op` in the inner
/// product `ip` (plain PCG when `ip` is the preconditioner itself).
///
/// Negative curvature is tolerated; breakdown is declared when
/// `|⟨Tp, p⟩| ≤ 1e-14 ‖p‖ ‖Tp‖` or a non-finite value appears.
pub fn pcg<F, P>(op: F, precond: P, b: &[f64], ip: &InnerProduct, opts: KrylovOptions) -> Result<KrylovOutput>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    check_opts(opts)?;
    let clock = Clock::start();
    let mut rep = SolveReport::new(Method::Cg);
    let dim = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; dim];
    if bnorm == 0.0 {
        rep.relative_residuals.push(0.0);
        rep.preconditioned_residuals.push(0.0);
        rep.converged = true;
        return Ok(KrylovOutput { x, report: rep });
    }
    rep.relative_residuals.push(1.0);
    let mut z = precond(b)?;
    let mut rho = ip.dot(&z, &z)?;
    rep.preconditioned_residuals.push(safe_sqrt(rho));
    let mut p = z.clone();
    while rep.iterations < opts.max_it {
        let tp = precond(&op(&p)?)?;
        let gp = ip.apply(&p)?;
        let curv = dot(&tp, &gp);
        let scale = safe_sqrt(dot(&p, &gp)) * safe_sqrt(ip.dot(&tp, &tp)?);
        if !curv.is_finite() || !rho.is_finite() || curv.abs() <= BREAKDOWN_TOL * scale {
            rep.flag_breakdown(format!(
                "curvature {curv:.3e} relative to {scale:.3e} at iteration {}",
                rep.iterations + 1
            ));
            break;
        }
        if curv < 0.0 {
            rep.negative_curvature_steps += 1;
        }
        let alpha = rho / curv;
        axpy(alpha, &p, &mut x);
        rep.iterations += 1;
        let r = sub(b, &op(&x)?);
        let res = norm2(&r) / bnorm;
        rep.relative_residuals.push(res);
        // Fresh preconditioned residual rather than the recurrence, so that
        // inexact (nonlinear) inner solves do not make the iteration stall.
        let z_new = precond(&r)?;
        let rho_new = ip.dot(&z_new, &z_new)?;
        rep.preconditioned_residuals.push(safe_sqrt(rho_new));
        if res <= opts.tol {
            rep.converged = true;
            break;
        }
        if !res.is_finite() {
            rep.flag_breakdown(format!("non-finite residual at iteration {}", rep.iterations));
            break;
        }
        let beta = rho_new / rho;
        rho = rho_new;
        z = z_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    rep.wall_time = clock.seconds();
    Ok(KrylovOutput { x, report: rep })
}

/// MINRES on `T = precond ∘ op`, which must be self-adjoint in `ip`.
///
/// Lanczos runs in the `ip` inner product with Paige-Saunders rotations, so
/// the quantity minimized is the `ip`-norm of the preconditioned residual.
/// With an SPD preconditioner and `ip` equal to it this is the usual
/// preconditioned MINRES.
pub fn minres<F, P>(op: F, precond: P, b: &[f64], ip: &InnerProduct, opts: KrylovOptions) -> Result<KrylovOutput>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> Result<Vec<f64>>,
{
    check_opts(opts)?;
    let clock = Clock::start();
    let mut rep = SolveReport::new(Method::Minres);
    let dim = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; dim];
    if bnorm == 0.0 {
        rep.relative_residuals.push(0.0);
        rep.preconditioned_residuals.push(0.0);
        rep.converged = true;
        return Ok(KrylovOutput { x, report: rep });
    }
    rep.relative_residuals.push(1.0);
    let r0 = precond(b)?;
    let beta1_sq = ip.dot(&r0, &r0)?;
    if !(beta1_sq > 0.0) || !beta1_sq.is_finite() {
        rep.preconditioned_residuals.push(f64::NAN);
        rep.flag_breakdown(format!("preconditioned right-hand side has G-norm² {beta1_sq:.3e}"));
        rep.wall_time = clock.seconds();
        return Ok(KrylovOutput { x, report: rep });
    }
    let beta1 = crate::la::sqrt(beta1_sq);
    rep.preconditioned_residuals.push(beta1);

    let mut v_old = vec![0.0; dim];
    let mut v: Vec<f64> = r0.iter().map(|r| r / beta1).collect();
    let mut beta = 0.0;
    let (mut cs, mut sn) = (-1.0, 0.0);
    let (mut dbar, mut epsln) = (0.0, 0.0);
    let mut phibar = beta1;
    let mut w = vec![0.0; dim];
    let mut w2 = vec![0.0; dim];
    let mut warned = false;

    while rep.iterations < opts.max_it {
        let mut tv = precond(&op(&v)?)?;
        if rep.iterations > 0 && !warned {
            // ⟨T v_j, v_{j-1}⟩ must equal β_j when T is self-adjoint.
            let back = ip.dot(&tv, &v_old)?;
            if (back - beta).abs() > LANCZOS_TOL * beta.abs().max(f64::MIN_POSITIVE) {
                rep.warnings.push(format!(
                    "Lanczos symmetry residual {:.3e} at iteration {}: operator not self-adjoint in this inner product",
                    (back - beta).abs() / beta.abs(),
                    rep.iterations + 1
                ));
                warned = true;
            }
        }
        if rep.iterations > 0 {
            axpy(-beta, &v_old, &mut tv);
        }
        let alpha = ip.dot(&tv, &v)?;
        axpy(-alpha, &v, &mut tv);
        let beta_next_sq = ip.dot(&tv, &tv)?;
        if !beta_next_sq.is_finite() || !alpha.is_finite() {
            rep.flag_breakdown(format!("non-finite Lanczos coefficient at iteration {}", rep.iterations + 1));
            break;
        }
        if beta_next_sq < 0.0 {
            rep.flag_breakdown(format!("inner product is indefinite on the Krylov space (norm² {beta_next_sq:.3e})"));
            break;
        }
        let beta_next = crate::la::sqrt(beta_next_sq);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alpha;
        let gbar = sn * dbar - cs * alpha;
        epsln = sn * beta_next;
        dbar = -cs * beta_next;
        let gamma = crate::la::hypot(gbar, beta_next).max(f64::EPSILON * beta1);
        cs = gbar / gamma;
        sn = beta_next / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let w1 = core::mem::replace(&mut w2, core::mem::take(&mut w));
        w = v.iter().zip(&w1).zip(&w2).map(|((vi, a), b)| (vi - oldeps * a - delta * b) / gamma).collect();
        axpy(phi, &w, &mut x);

        rep.iterations += 1;
        let res = norm2(&sub(b, &op(&x)?)) / bnorm;
        rep.relative_residuals.push(res);
        rep.preconditioned_residuals.push(phibar.abs());
        if res <= opts.tol {
            rep.converged = true;
            break;
        }
        if beta_next <= f64::EPSILON * beta1 {
            // Invariant subspace: the iterate is as good as it gets.
            rep.warnings.push(format!("Lanczos terminated early at iteration {}", rep.iterations));
            break;
        }
        v_old = core::mem::replace(&mut v, tv.iter().map(|t| t / beta_next).collect());
        beta = beta_next;
    }
    rep.wall_time = clock.seconds();
    Ok(KrylovOutput { x, report: rep })
}

fn check_opts(opts: KrylovOptions) -> Result<()> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {} must be positive", opts.tol)));
    }
    Ok(())
}

/// Right-hand side `(f, g)` of the requested family, stacked. Random entries
/// are uniform on `[0, 1)` from a ChaCha8 stream seeded with `seed`.
pub fn build_rhs(sys: &SaddleSystem, kind: RhsKind, seed: u64) -> Result<Vec<f64>> {
    let (n, m) = (sys.n(), sys.m());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random::<f64>()).collect() };
    let mut out = match kind {
        RhsKind::Ones => return Ok(vec![1.0; n + m]),
        RhsKind::Rf0g | RhsKind::Df0g => random(n),
        RhsKind::Rfrg => {
            let mut f = random(n);
            f.extend(random(m));
            return Ok(f);
        }
    };
    if kind == RhsKind::Df0g && m > 0 {
        // f := (I - BᵀL⁻¹Cᵀ) f₀, so that Cᵀf = 0.
        let lf = factorize(sys.l(), FactorKind::SymmetricPositiveDefinite)?;
        let s = lf.solve(&sys.c().spmv_transpose(&out)?)?;
        axpy(-1.0, &sys.b().spmv_transpose(&s)?, &mut out);
    }
    out.extend(core::iter::repeat_n(0.0, m));
    Ok(out)
}

/// One table cell: a preconditioned solve of `K x = b` from the zero guess.
///
/// `PD` solves `[[A, Bᵀ], [B, D]]` instead of `K` (its `k` is ignored);
/// `DirectK0` runs the null-space direct solver.
pub fn solve_case(
    sys: &SaddleSystem,
    config: &PreconditionerConfig,
    method: Method,
    rhs: RhsKind,
    seed: u64,
    opts: KrylovOptions,
) -> Result<KrylovOutput> {
    let b = build_rhs(sys, rhs, seed)?;
    let echo = |leading: InnerStats, laplacian: InnerStats| CaseEcho {
        n: sys.n(),
        m: sys.m(),
        k: sys.k(),
        preconditioner: config.clone(),
        rhs,
        seed,
        tol: opts.tol,
        max_it: opts.max_it,
        inner_leading: leading,
        inner_laplacian: laplacian,
    };

    if config.kind == PreconditionerKind::DirectK0 || method == Method::Direct {
        config.validate(sys.k())?;
        if config.kind != PreconditionerKind::DirectK0 {
            return Err(Error::InvalidParameter("the direct method needs the directk0 configuration".into()));
        }
        let clock = Clock::start();
        let (f, g) = b.split_at(sys.n());
        let (mut u, p, dr) = direct_solve_k0(sys, f, g, DirectK0Options::default())?;
        let mut rep = SolveReport::new(Method::Direct);
        rep.relative_residuals = vec![1.0, dr.relative_residual];
        rep.preconditioned_residuals = vec![f64::NAN, dr.cg_residual];
        rep.converged = dr.relative_residual <= opts.tol;
        if !dr.cg_converged {
            rep.warnings.push(format!(
                "singular curl-curl CG stopped at residual {:.3e} after {} iterations",
                dr.cg_residual, dr.cg_iterations
            ));
        }
        rep.wall_time = clock.seconds();
        rep.config = Some(echo(InnerStats::default(), InnerStats::default()));
        u.extend(p);
        return Ok(KrylovOutput { x: u, report: rep });
    }

    let pc = Preconditioner::new(sys, config.clone())?;
    let ip = pc.inner_product()?;
    let op = |x: &[f64]| -> Result<Vec<f64>> {
        match pc.d_block() {
            Some(d) => sys.apply_with_d(d, x),
            None => sys.apply_k(x),
        }
    };
    let prec = |r: &[f64]| pc.apply(r);
    let mut out = match method {
        Method::Cg => pcg(op, prec, &b, &ip, opts)?,
        Method::Minres => minres(op, prec, &b, &ip, opts)?,
        Method::Direct => unreachable!("handled above"),
    };
    if !pc.is_self_adjoint() {
        out.report.warnings.push(
            "experimental: M_{eta,eps} with eps != 1/eta is not self-adjoint in any block inner product used here"
                .into(),
        );
    }
    if config.kind == PreconditionerKind::PD && sys.k() != 0.0 {
        out.report.warnings.push("PD solves [[A, B^T], [B, D]]; the wave number is ignored".into());
    }
    let (lead, lap) = pc.inner_stats();
    if lead.unconverged + lap.unconverged > 0 {
        out.report.warnings.push(format!(
            "{} inner solves stopped before their tolerance (worst residual {:.3e})",
            lead.unconverged + lap.unconverged,
            lead.worst_residual.max(lap.worst_residual)
        ));
    }
    out.report.config = Some(echo(lead, lap));
    Ok(out)
}
