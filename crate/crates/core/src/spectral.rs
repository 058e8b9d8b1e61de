//! Dense eigenvalue diagnostics: the inf constant ᾱ on `ker(B)`, the smallest
//! eigenvalue of `A_η = diag(A + ηBᵀL⁻¹B - k²M, I)`, and the spectra of the
//! preconditioned operators.
//!
//! `P⁻¹K` and `M_{η,ε}⁻¹K` are not symmetric, but both reduce to symmetric
//! definite pencils:
//!
//! - `P⁻¹K` has the eigenvalue 1 on the `p` block (multiplicity m) and the
//!   eigenvalues of the pencil `(A + ηBᵀL⁻¹B - k²M, A + (η - k²)M)` on the `u`
//!   block.
//! - `M_{η,ε}⁻¹K` has 1 and `-1/(ε(η - k²))`, each m times, plus
//!   `(a - k²)/(a + η - k²)` for every eigenvalue `a` of `(ZᵀAZ, ZᵀMZ)`,
//!   where the columns of `Z` span `ker(B)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::la::{null_basis, sym_eigvals, DenseMatrix, DEFAULT_RANK_TOL};
use crate::report::CheckReport;
use crate::saddle::{dense_schur_block, PreconditionerConfig, PreconditionerKind, SaddleSystem};
use crate::{Error, Result};

/// Half-width of the cluster counted as the eigenvalue 1.
pub const UNIT_CLUSTER_TOL: f64 = 1e-6;

/// Slack allowed below the lower bound, which is attained at `a = ᾱ`.
pub const BOUND_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpectrumReport {
    pub kind: PreconditionerKind,
    pub n: usize,
    pub m: usize,
    pub k: f64,
    pub eta: f64,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub multiplicity_of_one: usize,
    /// `-1/(ε(η - k²))` for the triangular family.
    pub extra_eigenvalue: Option<f64>,
    pub multiplicity_of_extra: usize,
    /// `(ᾱ - k²)/(ᾱ + η - k²)`.
    pub bound_lower: f64,
    /// Eigenvalues outside `(bound_lower, 1]`, the 1-cluster and the extra
    /// eigenvalue excluded.
    pub violations: Vec<f64>,
    pub alpha_bar: f64,
    pub lambda_min_aeta: f64,
}

/// Orthonormal basis of `ker(B)` as the columns of an `n x (n - m)` matrix.
pub fn kernel_basis_b(sys: &SaddleSystem) -> Result<DenseMatrix> {
    let n = sys.n();
    if sys.m() == 0 {
        return Ok(DenseMatrix::identity(n));
    }
    let pair = null_basis(&sys.b().to_dense(), DEFAULT_RANK_TOL);
    if pair.numerical_rank != sys.m() {
        return Err(Error::RankCondition(format!("B has numerical rank {} but {} rows", pair.numerical_rank, sys.m())));
    }
    Ok(pair.right_basis)
}

fn restricted(z: &DenseMatrix, a: &DenseMatrix) -> Result<DenseMatrix> {
    z.transpose().matmul(&a.matmul(z)?)
}

/// Eigenvalues of the pencil `(ZᵀAZ, ZᵀMZ)`, ascending.
pub fn kernel_pencil_eigenvalues(sys: &SaddleSystem) -> Result<Vec<f64>> {
    let z = kernel_basis_b(sys)?;
    if z.n_cols() == 0 {
        return Ok(Vec::new());
    }
    let za = restricted(&z, &sys.a().to_dense())?;
    let zm = restricted(&z, &sys.mass().to_dense())?;
    sym_eigvals(&za, Some(&zm))
}

/// `ᾱ = min { uᵀAu / uᵀMu : u ∈ ker(B), u ≠ 0 }`.
pub fn estimate_alpha_bar(sys: &SaddleSystem) -> Result<f64> {
    let values = kernel_pencil_eigenvalues(sys)?;
    values.first().copied().ok_or_else(|| {
        Error::InvalidParameter(format!("ker(B) is trivial (n = m = {}), so alpha_bar is undefined", sys.n()))
    })
}

/// Smallest eigenvalue of `A_η = diag(A + ηBᵀL⁻¹B - k²M, I_m)`.
pub fn lambda_min_aeta(sys: &SaddleSystem, eta: f64) -> Result<f64> {
    let s = dense_schur_block(sys, eta)?;
    let top = sym_eigvals(&s, None)?.first().copied().unwrap_or(f64::INFINITY);
    Ok(if sys.m() > 0 { top.min(1.0) } else { top })
}

/// The dense matrix `A_η`.
pub fn dense_aeta(sys: &SaddleSystem, eta: f64) -> Result<DenseMatrix> {
    let (n, m) = (sys.n(), sys.m());
    let s = dense_schur_block(sys, eta)?;
    DenseMatrix::block2x2(&s, &DenseMatrix::zeros(n, m), &DenseMatrix::zeros(m, n), &DenseMatrix::identity(m))
}

fn lower_bound(alpha_bar: f64, k2: f64, eta: f64) -> f64 {
    (alpha_bar - k2) / (alpha_bar + eta - k2)
}

fn near(x: f64, target: f64) -> bool {
    (x - target).abs() <= UNIT_CLUSTER_TOL * target.abs().max(1.0)
}

/// Eigenvalues of `P⁻¹K` or `M_{η,ε}⁻¹K` (exact inner solves) with the
/// bound diagnostics. Only `P`, `Mtri` and `Mdiag` are supported.
pub fn spectrum_preconditioned(sys: &SaddleSystem, config: &PreconditionerConfig) -> Result<SpectrumReport> {
    config.validate(sys.k())?;
    let (n, m) = (sys.n(), sys.m());
    let k2 = sys.k() * sys.k();
    let eta = config.eta;
    let alpha_bar = if n > m { estimate_alpha_bar(sys)? } else { f64::INFINITY };
    let mut extra = None;
    let mut eigenvalues = match config.kind {
        PreconditionerKind::P => {
            let s = dense_schur_block(sys, eta)?;
            let w = sys.shifted(eta - k2).to_dense();
            let mut v = sym_eigvals(&s, Some(&w))?;
            v.extend(core::iter::repeat_n(1.0, m));
            v
        }
        PreconditionerKind::Mtri | PreconditionerKind::Mdiag => {
            let eps = config.effective_epsilon().expect("validated");
            let c = eps * (eta - k2);
            let minus = -1.0 / c;
            extra = Some(minus);
            let mut v: Vec<f64> =
                kernel_pencil_eigenvalues(sys)?.into_iter().map(|a| lower_bound(a, k2, eta)).collect();
            v.extend(core::iter::repeat_n(1.0, m));
            v.extend(core::iter::repeat_n(minus, m));
            v
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "spectrum is only available for P, Mtri and Mdiag, not {}",
                other.name()
            )))
        }
    };
    eigenvalues.sort_by(f64::total_cmp);
    let bound_lower = lower_bound(alpha_bar, k2, eta);
    let multiplicity_of_one = eigenvalues.iter().filter(|&&x| near(x, 1.0)).count();
    let multiplicity_of_extra = match extra {
        Some(e) if !near(e, 1.0) => eigenvalues.iter().filter(|&&x| near(x, e)).count(),
        _ => 0,
    };
    let violations = bound_violations(&eigenvalues, bound_lower, extra);
    Ok(SpectrumReport {
        kind: config.kind,
        n,
        m,
        k: sys.k(),
        eta,
        eigenvalues,
        multiplicity_of_one,
        extra_eigenvalue: extra,
        multiplicity_of_extra,
        bound_lower,
        violations,
        alpha_bar,
        lambda_min_aeta: lambda_min_aeta(sys, eta)?,
    })
}

fn bound_violations(eigenvalues: &[f64], lower: f64, extra: Option<f64>) -> Vec<f64> {
    let slack = BOUND_SLACK * lower.abs().max(1.0);
    eigenvalues
        .iter()
        .copied()
        .filter(|&x| !near(x, 1.0) && !extra.is_some_and(|e| near(x, e)))
        .filter(|&x| x < lower - slack || x >= 1.0)
        .collect()
}

/// Recomputes the bound from `report.alpha_bar` and checks: `k² < ᾱ`, the
/// unit-eigenvalue multiplicity `2m` (`m` for the triangular family, whose
/// `p` block contributes the extra eigenvalue instead), and that every other
/// eigenvalue lies in `(bound_lower, 1)`.
pub fn check_eq31_bounds(report: &SpectrumReport) -> CheckReport {
    let k2 = report.k * report.k;
    let lower = lower_bound(report.alpha_bar, k2, report.eta);
    let mut rep = CheckReport::new();
    rep.push_flag("k^2 < alpha_bar", k2 < report.alpha_bar);
    let expected_ones = match report.kind {
        PreconditionerKind::P => 2 * report.m,
        _ => report.m,
    };
    rep.push("multiplicity of eigenvalue 1", (report.multiplicity_of_one as f64 - expected_ones as f64).abs(), 0.0);
    let violations = bound_violations(&report.eigenvalues, lower, report.extra_eigenvalue);
    let worst = violations.iter().map(|&x| if x >= 1.0 { x - 1.0 } else { lower - x }).fold(0.0, f64::max);
    rep.push("eigenvalues inside (lower bound, 1)", worst, BOUND_SLACK * lower.abs().max(1.0));
    if let Some(e) = report.extra_eigenvalue {
        if !near(e, 1.0) {
            rep.push(
                "multiplicity of -1/(eps(eta - k^2))",
                (report.multiplicity_of_extra as f64 - report.m as f64).abs(),
                0.0,
            );
        }
    }
    rep
}

/// Eigenvalues of `K` and `A_η` below a cutoff, with negative counts.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KVsAeta {
    pub cutoff: f64,
    pub k_eigenvalues: Vec<f64>,
    pub aeta_eigenvalues: Vec<f64>,
    pub k_negative: usize,
    pub aeta_negative: usize,
}

pub fn spectrum_k_vs_aeta(sys: &SaddleSystem, eta: f64, cutoff: f64) -> Result<KVsAeta> {
    let kv = sym_eigvals(&sys.dense_k(), None)?;
    let av = sym_eigvals(&dense_aeta(sys, eta)?, None)?;
    Ok(KVsAeta {
        cutoff,
        k_negative: kv.iter().filter(|&&x| x < 0.0).count(),
        aeta_negative: av.iter().filter(|&&x| x < 0.0).count(),
        k_eigenvalues: kv.into_iter().filter(|&x| x < cutoff).collect(),
        aeta_eigenvalues: av.into_iter().filter(|&x| x < cutoff).collect(),
    })
}

/// Bisects for the `k` at which `λ_min(A_η)`, with `η = k² + eta_offset`,
/// changes sign. Needs a sign change on `[k_lo, k_hi]`.
pub fn sign_change_threshold(sys: &SaddleSystem, eta_offset: f64, k_lo: f64, k_hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) || !(k_lo < k_hi) {
        return Err(Error::InvalidParameter(format!("bad bracket [{k_lo}, {k_hi}] or tolerance {tol}")));
    }
    let sign = |k: f64| -> Result<bool> { Ok(lambda_min_aeta(&sys.with_k(k), k * k + eta_offset)? > 0.0) };
    let (mut lo, mut hi) = (k_lo, k_hi);
    let lo_sign = sign(lo)?;
    if lo_sign == sign(hi)? {
        return Err(Error::InvalidParameter(format!(
            "lambda_min(A_eta) has the same sign at k = {k_lo} and k = {k_hi}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if sign(mid)? == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One-column CSV for external plotting.
pub fn eigenvalues_csv(values: &[f64]) -> String {
    let mut out = String::from("eigenvalue\n");
    for v in values {
        out.push_str(&format!("{v:.17e}\n"));
    }
    out
}
