//! The Maxwell saddle-point system, its preconditioner actions, the dense
//! exact-inverse formulas and the null-space direct solver for `k = 0`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use crate::fem;
use crate::krylov::InnerProduct;
use crate::la::vector::{axpy, dot, norm2, sub};
use crate::la::{factorize, DenseMatrix, FactorKind, Factorization, IncompleteCholesky, SparseMatrix};
use crate::mesh::Mesh;
use crate::report::CheckReport;
use crate::{Error, Result};

/// `K = [[A - k²M, Bᵀ], [B, 0]]` together with `C` and `L = BC`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSystem {
    a: SparseMatrix,
    mass: SparseMatrix,
    b: SparseMatrix,
    c: SparseMatrix,
    l: SparseMatrix,
    k: f64,
}

impl SaddleSystem {
    /// Assembles all five matrices on `mesh`.
    pub fn assemble(mesh: &Mesh, k: f64) -> Result<Self> {
        let a = fem::assemble_curlcurl(mesh)?;
        let mass = fem::assemble_edge_mass(mesh)?;
        let c = fem::discrete_gradient(mesh);
        let (b, l) = fem::derive_b_and_l(&mass, &c)?;
        Self::from_parts(a, mass, b, c, l, k)
    }

    /// Wraps given matrices after checking their shapes only; the algebraic
    /// identities between them are left to [`fem::verify_structure`].
    pub fn from_parts(
        a: SparseMatrix,
        mass: SparseMatrix,
        b: SparseMatrix,
        c: SparseMatrix,
        l: SparseMatrix,
        k: f64,
    ) -> Result<Self> {
        let n = a.n_rows();
        let m = l.n_rows();
        let shapes = [
            ("A", a.shape(), (n, n)),
            ("M", mass.shape(), (n, n)),
            ("B", b.shape(), (m, n)),
            ("C", c.shape(), (n, m)),
            ("L", l.shape(), (m, m)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::InvalidParameter(format!("{name} has shape {got:?}, expected {want:?}")));
            }
        }
        if !k.is_finite() {
            return Err(Error::InvalidParameter(format!("wave number {k} is not finite")));
        }
        Ok(Self { a, mass, b, c, l, k })
    }

    /// Same matrices, different wave number.
    pub fn with_k(&self, k: f64) -> Self {
        Self { k, ..self.clone() }
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn b(&self) -> &SparseMatrix {
        &self.b
    }

    pub fn c(&self) -> &SparseMatrix {
        &self.c
    }

    pub fn l(&self) -> &SparseMatrix {
        &self.l
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Number of edge unknowns.
    pub fn n(&self) -> usize {
        self.a.n_rows()
    }

    /// Number of multiplier unknowns.
    pub fn m(&self) -> usize {
        self.l.n_rows()
    }

    pub fn dim(&self) -> usize {
        self.n() + self.m()
    }

    /// `A + s M`.
    pub fn shifted(&self, s: f64) -> SparseMatrix {
        self.a.add_scaled(1.0, &self.mass, s).expect("A and M share a shape")
    }

    fn check_len(&self, op: &'static str, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { op, expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    /// `(f, g) = ((A - k²M)u + Bᵀp, Bu)` on the stacked vector `(u, p)`.
    pub fn apply_k(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len("apply_K", x)?;
        let (u, p) = x.split_at(self.n());
        let mut f = self.a.spmv(u)?;
        axpy(-self.k * self.k, &self.mass.spmv(u)?, &mut f);
        let btp = self.b.spmv_transpose(p)?;
        axpy(1.0, &btp, &mut f);
        f.extend(self.b.spmv(u)?);
        Ok(f)
    }

    /// `[[A, Bᵀ], [B, D]]` applied to `(u, p)`.
    pub fn apply_with_d(&self, d: &SparseMatrix, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len("apply_A_D", x)?;
        let (u, p) = x.split_at(self.n());
        let mut f = self.a.spmv(u)?;
        axpy(1.0, &self.b.spmv_transpose(p)?, &mut f);
        let mut g = self.b.spmv(u)?;
        axpy(1.0, &d.spmv(p)?, &mut g);
        f.extend(g);
        Ok(f)
    }

    /// The saddle matrix `K` as a dense matrix.
    pub fn dense_k(&self) -> DenseMatrix {
        let s = self.shifted(-self.k * self.k).to_dense();
        let b = self.b.to_dense();
        DenseMatrix::block2x2(&s, &b.transpose(), &b, &DenseMatrix::zeros(self.m(), self.m()))
            .expect("blocks have matching shapes")
    }
}

/// Accuracy policy for the inner SPD solves with `L` and `A + (η - k²)M`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InnerSolve {
    /// Sparse Cholesky factorization, computed once.
    #[default]
    Exact,
    /// CG preconditioned by IC(0), stopped at a relative residual `tol`.
    Pcg { tol: f64, max_it: usize },
}

/// Snapshot of the work done by an [`InnerSolver`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InnerStats {
    pub solves: usize,
    pub iterations: usize,
    pub unconverged: usize,
    pub worst_residual: f64,
}

#[derive(Debug)]
enum SolverKind {
    Empty,
    Factor(Factorization),
    Pcg { ic: IncompleteCholesky, tol: f64, max_it: usize },
}

/// An SPD solve `x = S⁻¹ b` with usage counters.
///
/// Counters are atomic so a solver can be shared between threads.
#[derive(Debug)]
pub struct InnerSolver {
    matrix: SparseMatrix,
    kind: SolverKind,
    solves: AtomicUsize,
    iterations: AtomicUsize,
    unconverged: AtomicUsize,
    worst: AtomicU64,
}

impl InnerSolver {
    /// Factorizes (or prepares IC(0) for) an SPD matrix. An indefinite matrix
    /// is reported as [`Error::Indefinite`] under the exact policy.
    pub fn new(matrix: SparseMatrix, policy: InnerSolve) -> Result<Self> {
        let kind = if matrix.n_rows() == 0 {
            SolverKind::Empty
        } else {
            match policy {
                InnerSolve::Exact => SolverKind::Factor(factorize(&matrix, FactorKind::SymmetricPositiveDefinite)?),
                InnerSolve::Pcg { tol, max_it } => {
                    if !(tol > 0.0) || max_it == 0 {
                        return Err(Error::InvalidParameter(format!(
                            "inner pcg needs tol > 0 and max_it > 0 (got {tol}, {max_it})"
                        )));
                    }
                    SolverKind::Pcg { ic: IncompleteCholesky::new(&matrix)?, tol, max_it }
                }
            }
        };
        Ok(Self {
            matrix,
            kind,
            solves: AtomicUsize::new(0),
            iterations: AtomicUsize::new(0),
            unconverged: AtomicUsize::new(0),
            worst: AtomicU64::new(0),
        })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solves.fetch_add(1, Ordering::Relaxed);
        match &self.kind {
            SolverKind::Empty => Ok(Vec::new()),
            SolverKind::Factor(f) => f.solve(rhs),
            SolverKind::Pcg { ic, tol, max_it } => {
                let out = sparse_pcg(&self.matrix, |r| ic.apply(r), rhs, *tol, *max_it)?;
                self.iterations.fetch_add(out.iterations, Ordering::Relaxed);
                if !out.converged {
                    self.unconverged.fetch_add(1, Ordering::Relaxed);
                }
                self.worst.fetch_max(out.residual.to_bits(), Ordering::Relaxed);
                Ok(out.x)
            }
        }
    }

    pub fn stats(&self) -> InnerStats {
        InnerStats {
            solves: self.solves.load(Ordering::Relaxed),
            iterations: self.iterations.load(Ordering::Relaxed),
            unconverged: self.unconverged.load(Ordering::Relaxed),
            worst_residual: f64::from_bits(self.worst.load(Ordering::Relaxed)),
        }
    }
}

/// Result of [`sparse_pcg`].
#[derive(Debug, Clone)]
pub struct SparsePcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Plain preconditioned CG on a sparse symmetric matrix, from a zero guess.
///
/// Works on singular consistent systems as long as the right-hand side lies
/// in the range. Stops at `‖b - Sx‖ ≤ tol ‖b‖`; never fails on stagnation,
/// only on non-finite values.
pub fn sparse_pcg(
    s: &SparseMatrix,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_it: usize,
) -> Result<SparsePcgOutcome> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(SparsePcgOutcome { x, iterations: 0, residual: 0.0, converged: true });
    }
    let mut r = b.to_vec();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    let mut it = 0;
    while it < max_it && res > tol {
        let q = s.spmv(&p)?;
        let pq = dot(&p, &q);
        if !pq.is_finite() || pq <= 0.0 {
            break;
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        it += 1;
        res = norm2(&r) / bnorm;
        if !res.is_finite() {
            return Err(Error::NoConvergence { iterations: it, residual: res });
        }
        z = precond(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Ok(SparsePcgOutcome { x, iterations: it, residual: res, converged: res <= tol })
}

/// Which preconditioner to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PreconditionerKind {
    /// The simplified inverse-based preconditioner with parameter η.
    P,
    /// Block upper-triangular `[[A + (η - k²)M, (1 - ηε)Bᵀ], [0, εL]]`.
    Mtri,
    /// `Mtri` with `ε = 1/η`: `diag(A + (η - k²)M, L/η)`.
    Mdiag,
    /// `P` with `k = 0`, `η = 1`, i.e. an `A + M` leading block.
    P0,
    /// Preconditioner for `[[A, Bᵀ], [B, D]]`.
    PD,
    /// Not a preconditioner: the null-space direct solver (only for `k = 0`).
    DirectK0,
}

impl PreconditionerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::P => "P",
            Self::Mtri => "Mtri",
            Self::Mdiag => "Mdiag",
            Self::P0 => "P0",
            Self::PD => "PD",
            Self::DirectK0 => "directk0",
        }
    }
}

/// The (2,2) block `D` used with [`PreconditionerKind::PD`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DBlock {
    Zero,
    /// `D = s L`.
    ScaledLaplacian(f64),
    #[cfg_attr(feature = "serde", serde(skip))]
    Explicit(SparseMatrix),
}

impl DBlock {
    pub fn resolve(&self, sys: &SaddleSystem) -> Result<SparseMatrix> {
        let m = sys.m();
        match self {
            DBlock::Zero => Ok(SparseMatrix::zeros(m, m)),
            DBlock::ScaledLaplacian(s) => Ok(sys.l().scaled(*s)),
            DBlock::Explicit(d) if d.shape() == (m, m) => Ok(d.clone()),
            DBlock::Explicit(d) => {
                Err(Error::DimensionMismatch { op: "D block", expected: m * m, found: d.n_rows() * d.n_cols() })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PreconditionerConfig {
    pub kind: PreconditionerKind,
    pub eta: f64,
    /// Only read for `Mtri`.
    pub epsilon: Option<f64>,
    /// Only read for `PD`.
    pub d: Option<DBlock>,
    pub inner: InnerSolve,
}

impl PreconditionerConfig {
    fn with_kind(kind: PreconditionerKind, eta: f64) -> Self {
        Self { kind, eta, epsilon: None, d: None, inner: InnerSolve::Exact }
    }

    pub fn p(eta: f64) -> Self {
        Self::with_kind(PreconditionerKind::P, eta)
    }

    pub fn mtri(eta: f64, epsilon: f64) -> Self {
        Self { epsilon: Some(epsilon), ..Self::with_kind(PreconditionerKind::Mtri, eta) }
    }

    pub fn mdiag(eta: f64) -> Self {
        Self::with_kind(PreconditionerKind::Mdiag, eta)
    }

    pub fn p0() -> Self {
        Self::with_kind(PreconditionerKind::P0, 1.0)
    }

    pub fn pd(eta: f64, d: DBlock) -> Self {
        Self { d: Some(d), ..Self::with_kind(PreconditionerKind::PD, eta) }
    }

    pub fn direct_k0() -> Self {
        Self::with_kind(PreconditionerKind::DirectK0, 1.0)
    }

    pub fn with_inner(mut self, inner: InnerSolve) -> Self {
        self.inner = inner;
        self
    }

    /// `ε` actually used by the triangular family.
    pub fn effective_epsilon(&self) -> Option<f64> {
        match self.kind {
            PreconditionerKind::Mtri => self.epsilon,
            PreconditionerKind::Mdiag => Some(1.0 / self.eta),
            _ => None,
        }
    }

    /// Rejects parameter choices the preconditioner is not defined for.
    pub fn validate(&self, k: f64) -> Result<()> {
        let k2 = k * k;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !self.eta.is_finite() {
            return bad(format!("eta = {} is not finite", self.eta));
        }
        match self.kind {
            PreconditionerKind::P | PreconditionerKind::Mtri | PreconditionerKind::Mdiag if self.eta <= k2 => {
                bad(format!("{} needs eta > k^2 (eta = {}, k^2 = {k2})", self.kind.name(), self.eta))
            }
            PreconditionerKind::Mtri => match self.epsilon {
                Some(e) if e != 0.0 && e.is_finite() => Ok(()),
                _ => bad("Mtri needs a finite, nonzero epsilon".into()),
            },
            PreconditionerKind::PD if self.eta <= 0.0 => bad(format!("PD needs eta > 0 (eta = {})", self.eta)),
            PreconditionerKind::DirectK0 if k != 0.0 => bad(format!("the k = 0 direct solver was asked for k = {k}")),
            _ => Ok(()),
        }
    }
}

/// A preconditioner bound to a system, with its inner solvers prepared.
#[derive(Debug)]
pub struct Preconditioner<'a> {
    sys: &'a SaddleSystem,
    config: PreconditionerConfig,
    /// `A + shift M`
    w: InnerSolver,
    l: InnerSolver,
    k2: f64,
    d: Option<SparseMatrix>,
}

impl<'a> Preconditioner<'a> {
    pub fn new(sys: &'a SaddleSystem, config: PreconditionerConfig) -> Result<Self> {
        config.validate(sys.k())?;
        let k2 = sys.k() * sys.k();
        let (shift, k2) = match config.kind {
            PreconditionerKind::P | PreconditionerKind::Mtri | PreconditionerKind::Mdiag => (config.eta - k2, k2),
            PreconditionerKind::P0 => (1.0, 0.0),
            PreconditionerKind::PD => (config.eta, 0.0),
            PreconditionerKind::DirectK0 => {
                return Err(Error::InvalidParameter(
                    "the k = 0 direct solver is not a preconditioner; use direct_solve_k0".into(),
                ))
            }
        };
        let d = match config.kind {
            PreconditionerKind::PD => Some(config.d.clone().unwrap_or(DBlock::Zero).resolve(sys)?),
            _ => None,
        };
        let w = InnerSolver::new(sys.shifted(shift), config.inner)?;
        let l = InnerSolver::new(sys.l().clone(), config.inner)?;
        Ok(Self { sys, config, w, l, k2, d })
    }

    pub fn config(&self) -> &PreconditionerConfig {
        &self.config
    }

    pub fn system(&self) -> &SaddleSystem {
        self.sys
    }

    /// The SPD leading block `A + shift M` solved at every application.
    pub fn leading_block(&self) -> &SparseMatrix {
        self.w.matrix()
    }

    /// The resolved `D` block (PD only).
    pub fn d_block(&self) -> Option<&SparseMatrix> {
        self.d.as_ref()
    }

    /// Solve counts for the leading block and for `L`.
    pub fn inner_stats(&self) -> (InnerStats, InnerStats) {
        (self.w.stats(), self.l.stats())
    }

    /// Applies the preconditioner inverse to the stacked vector `(x, y)`.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.sys.check_len("preconditioner apply", r)?;
        let n = self.sys.n();
        let (x, y) = r.split_at(n);
        let c = self.sys.c();
        let (mut u, p) = match self.config.kind {
            PreconditionerKind::P | PreconditionerKind::P0 => {
                let s1 = self.l.solve(&c.spmv_transpose(x)?)?;
                let s2 = self.l.solve(y)?;
                // W⁻¹(x - Bᵀs₁) + C s₂ equals W⁻¹x - C s₁/(η - k²) + C s₂, but
                // does not rely on W⁻¹Bᵀ = C/(η - k²) holding for inexact solves.
                let mut u = self.w.solve(&sub(x, &self.sys.b().spmv_transpose(&s1)?))?;
                axpy(1.0, &c.spmv(&s2)?, &mut u);
                let mut p = s1;
                axpy(self.k2, &s2, &mut p);
                (u, p)
            }
            PreconditionerKind::Mtri | PreconditionerKind::Mdiag => {
                let eps = self.config.effective_epsilon().expect("validated");
                let mut p = self.l.solve(y)?;
                p.iter_mut().for_each(|v| *v /= eps);
                let coupling = 1.0 - self.config.eta * eps;
                let mut rhs = x.to_vec();
                if coupling != 0.0 {
                    axpy(-coupling, &self.sys.b().spmv_transpose(&p)?, &mut rhs);
                }
                (self.w.solve(&rhs)?, p)
            }
            PreconditionerKind::PD => {
                let d = self.d.as_ref().expect("resolved in new");
                let s1 = self.l.solve(&c.spmv_transpose(x)?)?;
                let rhs = sub(x, &self.sys.b().spmv_transpose(&s1)?);
                let mut u = self.w.solve(&rhs)?;
                let q = self.l.solve(&sub(y, &d.spmv(&s1)?))?;
                axpy(1.0, &c.spmv(&q)?, &mut u);
                (u, s1)
            }
            PreconditionerKind::DirectK0 => unreachable!("rejected in new"),
        };
        u.extend(p);
        Ok(u)
    }

    /// Inner product in which the preconditioned operator is self-adjoint:
    /// `diag(A + (η - k²)M, I)` for `P`, `P0`, `PD`, and
    /// `diag(A + (η - k²)M, |ε| L)` for the triangular family (exact only
    /// for `ε = 1/η`).
    pub fn inner_product(&self) -> Result<InnerProduct> {
        let top = self.w.matrix().clone();
        let bottom = match self.config.kind {
            PreconditionerKind::Mtri | PreconditionerKind::Mdiag => {
                let eps = self.config.effective_epsilon().expect("validated");
                self.sys.l().scaled(eps.abs())
            }
            _ => SparseMatrix::identity(self.sys.m()),
        };
        InnerProduct::block_diagonal(top, bottom)
    }

    /// `true` when [`Self::inner_product`] makes the preconditioned operator
    /// self-adjoint.
    pub fn is_self_adjoint(&self) -> bool {
        match self.config.kind {
            PreconditionerKind::Mtri => {
                let e = self.config.effective_epsilon().unwrap_or(0.0);
                (e * self.config.eta - 1.0).abs() <= 1e-14
            }
            _ => true,
        }
    }

    /// The preconditioner inverse as a dense matrix (column by column).
    pub fn dense(&self) -> Result<DenseMatrix> {
        let dim = self.sys.dim();
        let mut cols = Vec::with_capacity(dim);
        let mut e = vec![0.0; dim];
        for j in 0..dim {
            e[j] = 1.0;
            cols.push(self.apply(&e)?);
            e[j] = 0.0;
        }
        Ok(DenseMatrix::from_columns(dim, &cols))
    }
}

/// One application of `P⁻¹` with a freshly prepared preconditioner.
pub fn apply_p_inv(sys: &SaddleSystem, eta: f64, inner: InnerSolve, r: &[f64]) -> Result<Vec<f64>> {
    Preconditioner::new(sys, PreconditionerConfig::p(eta).with_inner(inner))?.apply(r)
}

/// One application of `M_{η,ε}⁻¹`.
pub fn apply_mtri_inv(sys: &SaddleSystem, eta: f64, epsilon: f64, inner: InnerSolve, r: &[f64]) -> Result<Vec<f64>> {
    Preconditioner::new(sys, PreconditionerConfig::mtri(eta, epsilon).with_inner(inner))?.apply(r)
}

/// One application of `P_D⁻¹`.
pub fn apply_pd_inv(sys: &SaddleSystem, d: DBlock, eta: f64, inner: InnerSolve, r: &[f64]) -> Result<Vec<f64>> {
    Preconditioner::new(sys, PreconditionerConfig::pd(eta, d).with_inner(inner))?.apply(r)
}

/// Tolerances for the singular curl-curl solve inside [`direct_solve_k0`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirectK0Options {
    pub tol: f64,
    pub max_it: usize,
}

impl Default for DirectK0Options {
    fn default() -> Self {
        Self { tol: 1e-10, max_it: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DirectK0Report {
    pub cg_iterations: usize,
    pub cg_residual: f64,
    pub cg_converged: bool,
    /// `‖b - K(u,p)‖ / ‖b‖` of the assembled solution.
    pub relative_residual: f64,
}

/// Solves `[[A, Bᵀ], [B, 0]] (u, p) = (f, g)` through the kernel splitting:
/// `p = L⁻¹Cᵀf`, `A u₀ = (I - BᵀL⁻¹Cᵀ) f` by Jacobi-CG on the singular but
/// consistent system, and `u = (I - CL⁻¹B) u₀ + CL⁻¹g`.
pub fn direct_solve_k0(
    sys: &SaddleSystem,
    f: &[f64],
    g: &[f64],
    opts: DirectK0Options,
) -> Result<(Vec<f64>, Vec<f64>, DirectK0Report)> {
    if sys.k() != 0.0 {
        return Err(Error::InvalidParameter(format!("direct solver requires k = 0, got {}", sys.k())));
    }
    let (n, m) = (sys.n(), sys.m());
    if f.len() != n || g.len() != m {
        return Err(Error::DimensionMismatch { op: "direct_solve_k0", expected: n + m, found: f.len() + g.len() });
    }
    let l = InnerSolver::new(sys.l().clone(), InnerSolve::Exact)?;
    let (b, c) = (sys.b(), sys.c());
    let p = l.solve(&c.spmv_transpose(f)?)?;
    let rhs = sub(f, &b.spmv_transpose(&p)?);
    let diag = sys.a().diagonal_values();
    let jacobi =
        |r: &[f64]| -> Vec<f64> { r.iter().zip(&diag).map(|(ri, di)| if *di > 0.0 { ri / di } else { *ri }).collect() };
    let cg = sparse_pcg(sys.a(), jacobi, &rhs, opts.tol, opts.max_it)?;
    let u0 = cg.x;
    let mut u = sub(&u0, &c.spmv(&l.solve(&b.spmv(&u0)?)?)?);
    axpy(1.0, &c.spmv(&l.solve(g)?)?, &mut u);

    let mut x = u.clone();
    x.extend_from_slice(&p);
    let mut rhs_full = f.to_vec();
    rhs_full.extend_from_slice(g);
    let r = sub(&rhs_full, &sys.apply_k(&x)?);
    let bn = norm2(&rhs_full);
    let report = DirectK0Report {
        cg_iterations: cg.iterations,
        cg_residual: cg.residual,
        cg_converged: cg.converged,
        relative_residual: if bn == 0.0 { 0.0 } else { norm2(&r) / bn },
    };
    Ok((u, p, report))
}

/// Dense `L⁻¹` (m x m).
pub fn dense_l_inverse(sys: &SaddleSystem) -> Result<DenseMatrix> {
    let m = sys.m();
    if m == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let f = factorize(sys.l(), FactorKind::SymmetricPositiveDefinite)?;
    let mut cols = Vec::with_capacity(m);
    let mut e = vec![0.0; m];
    for j in 0..m {
        e[j] = 1.0;
        cols.push(f.solve(&e)?);
        e[j] = 0.0;
    }
    Ok(DenseMatrix::from_columns(m, &cols))
}

/// Dense `A + η BᵀL⁻¹B - k²M`.
pub fn dense_schur_block(sys: &SaddleSystem, eta: f64) -> Result<DenseMatrix> {
    let linv = dense_l_inverse(sys)?;
    let b = sys.b().to_dense();
    let btlb = b.transpose().matmul(&linv.matmul(&b)?)?;
    sys.shifted(-sys.k() * sys.k()).to_dense().add(&btlb.scaled(eta))
}

/// Dense `K⁻¹` assembled from the η-parametrized block formula
/// `[[S⁻¹(I - BᵀL⁻¹Cᵀ), CL⁻¹], [L⁻¹Cᵀ, k²L⁻¹]]`, `S = A + ηBᵀL⁻¹B - k²M`.
pub fn dense_k_inverse(sys: &SaddleSystem, eta: f64) -> Result<DenseMatrix> {
    let k2 = sys.k() * sys.k();
    if eta == k2 {
        return Err(Error::InvalidParameter(format!("eta must differ from k^2 = {k2}")));
    }
    let n = sys.n();
    let linv = dense_l_inverse(sys)?;
    let b = sys.b().to_dense();
    let c = sys.c().to_dense();
    let s = dense_schur_block(sys, eta)?;
    let proj = DenseMatrix::identity(n).sub(&b.transpose().matmul(&linv)?.matmul(&c.transpose())?)?;
    let t = s.lu()?.solve_matrix(&proj)?;
    let cl = c.matmul(&linv)?;
    DenseMatrix::block2x2(&t, &cl, &cl.transpose(), &linv.scaled(k2))
}

fn fro_rel(x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    let scale = x.frobenius_norm().max(y.frobenius_norm()).max(f64::MIN_POSITIVE);
    x.sub(y).map(|d| d.frobenius_norm() / scale).unwrap_or(f64::INFINITY)
}

fn fro_zero(prod: &DenseMatrix, x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    prod.frobenius_norm() / (x.frobenius_norm() * y.frobenius_norm()).max(f64::MIN_POSITIVE)
}

/// Checks the identities tying the inverse's leading block `T` (at the
/// system's `k`) to its `k = 0` counterpart `V`.
pub fn check_t_identities(sys: &SaddleSystem, t: &DenseMatrix, v: &DenseMatrix) -> Result<CheckReport> {
    let n = sys.n();
    let tol = 1e-9;
    let a = sys.a().to_dense();
    let b = sys.b().to_dense();
    let c = sys.c().to_dense();
    let linv = dense_l_inverse(sys)?;
    let shifted = sys.shifted(-sys.k() * sys.k()).to_dense();
    let id = DenseMatrix::identity(n);
    let mut rep = CheckReport::new();
    rep.push("BT = 0", fro_zero(&b.matmul(t)?, &b, t), tol);
    rep.push("(A - k^2 M)T = AV", fro_rel(&shifted.matmul(t)?, &a.matmul(v)?), tol);
    let clb = c.matmul(&linv)?.matmul(&b)?;
    rep.push("VA = I - CL^-1B", fro_rel(&v.matmul(&a)?, &id.sub(&clb)?), tol);
    rep.push("VB^T = 0", fro_zero(&v.matmul(&b.transpose())?, v, &b), tol);
    rep.push("AV = I - B^TL^-1C^T", fro_rel(&a.matmul(v)?, &id.sub(&clb.transpose())?), tol);
    rep.push("BV = 0", fro_zero(&b.matmul(v)?, &b, v), tol);
    Ok(rep)
}

/// Dense verification of the inverse formula at the system's `k`.
pub fn verify_t_properties(sys: &SaddleSystem, eta: f64) -> Result<CheckReport> {
    let n = sys.n();
    let kinv = dense_k_inverse(sys, eta)?;
    let t = kinv.block(0, 0, n, n);
    let sys0 = sys.with_k(0.0);
    let v = dense_k_inverse(&sys0, 1.0)?.block(0, 0, n, n);
    let mut rep = check_t_identities(sys, &t, &v)?;
    let prod = sys.dense_k().matmul(&kinv)?;
    let id = DenseMatrix::identity(sys.dim());
    rep.push("K K^-1 = I", prod.sub(&id)?.max_abs(), 1e-8);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::gen_square;

    fn sys(level: usize, k: f64) -> SaddleSystem {
        SaddleSystem::assemble(&gen_square(level, 1.0).unwrap(), k).unwrap()
    }

    #[test]
    fn k_zero_u_zero_gives_bt_p() {
        let s = sys(3, 0.0);
        let p: Vec<f64> = (0..s.m()).map(|i| i as f64 - 1.5).collect();
        let mut x = vec![0.0; s.n()];
        x.extend_from_slice(&p);
        let y = s.apply_k(&x).unwrap();
        let btp = s.b().spmv_transpose(&p).unwrap();
        assert_eq!(&y[..s.n()], &btp[..]);
        assert!(y[s.n()..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_input_maps_to_zero() {
        let s = sys(2, 1.0);
        let z = vec![0.0; s.dim()];
        assert!(apply_p_inv(&s, 2.0, InnerSolve::Exact, &z).unwrap().iter().all(|v| *v == 0.0));
        assert!(apply_mtri_inv(&s, 2.0, 0.3, InnerSolve::Exact, &z).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn p_uses_one_leading_and_two_laplacian_solves() {
        let s = sys(3, 1.0);
        let pc = Preconditioner::new(&s, PreconditionerConfig::p(2.0)).unwrap();
        pc.apply(&vec![1.0; s.dim()]).unwrap();
        let (w, l) = pc.inner_stats();
        assert_eq!((w.solves, l.solves), (1, 2));
    }

    #[test]
    fn config_validation() {
        assert!(PreconditionerConfig::p(1.0).validate(1.0).is_err());
        assert!(PreconditionerConfig::mtri(2.0, 0.0).validate(1.0).is_err());
        assert!(PreconditionerConfig::direct_k0().validate(1.0).is_err());
        assert!(PreconditionerConfig::direct_k0().validate(0.0).is_ok());
        assert!(PreconditionerConfig::mdiag(17.0).validate(4.0).is_ok());
    }

    #[test]
    fn direct_solver_rejects_nonzero_k() {
        let s = sys(2, 1.0);
        let f = vec![1.0; s.n()];
        let g = vec![0.0; s.m()];
        assert!(direct_solve_k0(&s, &f, &g, DirectK0Options::default()).is_err());
    }
}
