//! Inverses of generalized saddle-point matrices `[[A, B], [C, D]]` with
//! rectangular, rank-deficient `A` (`A: m x n`, `B: m x k`, `C: l x n`,
//! `D: l x k`, `m + l = n + k = t`).
//!
//! Two independent constructions are provided: the null-space form
//! `[[N, C_r L_r⁻¹], [L_l⁻¹ C_l, 0]]` ([`inverse_app1`]) and the
//! Moore-Penrose form built from `A†`, `B₀ = E_A B` and `C₀ = C F_A`
//! ([`inverse_app2`]).

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::la::{moore_penrose, null_basis, sym_eigvals, ColPivQr, DenseMatrix, DEFAULT_RANK_TOL};
use crate::report::CheckReport;
use crate::{Error, Result};

/// Tolerance of every identity checked in this module.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Attempts at a random `X` once `X = C_r` fails.
pub const X_RETRIES: usize = 5;

const X_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneralSaddle {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
    pub d: DenseMatrix,
}

/// `(m, n, k, l)` for `A: m x n`, `B: m x k`, `C: l x n`, `D: l x k`.
pub type Shape = (usize, usize, usize, usize);

fn rank(a: &DenseMatrix) -> usize {
    if a.n_rows() == 0 || a.n_cols() == 0 {
        return 0;
    }
    ColPivQr::new(a).rank(DEFAULT_RANK_TOL)
}

impl GeneralSaddle {
    pub fn new(a: DenseMatrix, b: DenseMatrix, c: DenseMatrix, d: DenseMatrix) -> Result<Self> {
        let (m, n) = a.shape();
        let k = b.n_cols();
        let l = c.n_rows();
        let mismatch = |op, expected, found| Err(Error::DimensionMismatch { op, expected, found });
        if b.n_rows() != m {
            return mismatch("generalized saddle B rows", m, b.n_rows());
        }
        if c.n_cols() != n {
            return mismatch("generalized saddle C columns", n, c.n_cols());
        }
        if d.shape() != (l, k) {
            return mismatch("generalized saddle D rows", l, d.n_rows());
        }
        if m + l != n + k {
            return Err(Error::InvalidParameter(format!("m + l = {} but n + k = {}", m + l, n + k)));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn shape(&self) -> Shape {
        (self.a.n_rows(), self.a.n_cols(), self.b.n_cols(), self.c.n_rows())
    }

    pub fn t(&self) -> usize {
        self.a.n_rows() + self.c.n_rows()
    }

    /// The assembled `t x t` matrix.
    pub fn block(&self) -> DenseMatrix {
        DenseMatrix::block2x2(&self.a, &self.b, &self.c, &self.d).expect("shapes validated in new")
    }

    /// The rank conditions of the inverse theorem, as 0/1 flags.
    pub fn check_conditions(&self) -> CheckReport {
        let (m, n, k, l) = self.shape();
        let t = self.t();
        let ra = rank(&self.a);
        let mut rep = CheckReport::new();
        rep.push_flag("rank(A) = m + n - t", m + n >= t && ra == m + n - t);
        rep.push_flag("rank(B) = k", rank(&self.b) == k);
        rep.push_flag("rank(C) = l", rank(&self.c) == l);
        let ab = self.a.hstack(&self.b).expect("same row count");
        rep.push_flag("R(A) and R(B) intersect trivially", rank(&ab) == ra + k);
        let act = self.a.transpose().hstack(&self.c.transpose()).expect("same column count");
        rep.push_flag("R(A^T) and R(C^T) intersect trivially", rank(&act) == ra + l);
        rep
    }
}

/// Null-space data: `A C_r = 0`, `C_l A = 0`, `L_l = C_l B`, `L_r = C C_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullData {
    pub c_r: DenseMatrix,
    pub c_l: DenseMatrix,
    pub l_l: DenseMatrix,
    pub l_r: DenseMatrix,
}

fn smallest_singular_value_ratio(a: &DenseMatrix) -> Result<f64> {
    if a.n_rows() == 0 {
        return Ok(1.0);
    }
    let ev = sym_eigvals(&a.transpose().matmul(a)?, None)?;
    let top = ev.last().copied().unwrap_or(0.0).max(0.0);
    if top == 0.0 {
        return Ok(0.0);
    }
    Ok(crate::la::sqrt(ev[0].max(0.0) / top))
}

impl NullData {
    /// Uses caller-provided bases (for instance `C_r = C_l^T = C`, the
    /// discrete gradient, in the symmetric Maxwell setting).
    pub fn from_bases(gs: &GeneralSaddle, c_r: DenseMatrix, c_l: DenseMatrix) -> Result<Self> {
        let (m, n, k, l) = gs.shape();
        if c_r.shape() != (n, l) {
            return Err(Error::DimensionMismatch { op: "C_r rows", expected: n, found: c_r.n_rows() });
        }
        if c_l.shape() != (k, m) {
            return Err(Error::DimensionMismatch { op: "C_l rows", expected: k, found: c_l.n_rows() });
        }
        let scale = gs.a.max_abs().max(f64::MIN_POSITIVE);
        let ac = gs.a.matmul(&c_r)?.max_abs() / (scale * c_r.max_abs().max(f64::MIN_POSITIVE));
        let ca = c_l.matmul(&gs.a)?.max_abs() / (scale * c_l.max_abs().max(f64::MIN_POSITIVE));
        if ac > IDENTITY_TOL || ca > IDENTITY_TOL {
            return Err(Error::RankCondition(format!(
                "bases do not annihilate A (|A C_r| = {ac:.3e}, |C_l A| = {ca:.3e})"
            )));
        }
        let l_l = c_l.matmul(&gs.b)?;
        let l_r = gs.c.matmul(&c_r)?;
        for (name, mat) in [("L_l", &l_l), ("L_r", &l_r)] {
            let ratio = smallest_singular_value_ratio(mat)?;
            if ratio <= 1e-10 {
                return Err(Error::RankCondition(format!(
                    "{name} is singular (smallest/largest singular value {ratio:.3e})"
                )));
            }
        }
        Ok(Self { c_r, c_l, l_l, l_r })
    }
}

/// Orthonormal null-space bases from rank-revealing QR, after checking the
/// rank conditions.
pub fn build_null_data(gs: &GeneralSaddle) -> Result<NullData> {
    let cond = gs.check_conditions();
    if let Some(f) = cond.failures().first() {
        return Err(Error::RankCondition(format!("condition '{}' does not hold", f.name)));
    }
    let pair = null_basis(&gs.a, DEFAULT_RANK_TOL);
    NullData::from_bases(gs, pair.right_basis, pair.left_basis)
}

fn assemble_inverse(nd: &NullData, n_block: &DenseMatrix) -> Result<DenseMatrix> {
    let top_right = nd.c_r.matmul(&nd.l_r.inverse()?)?;
    let bottom_left = nd.l_l.inverse()?.matmul(&nd.c_l)?;
    let (k, l) = (nd.l_l.n_rows(), nd.l_r.n_rows());
    DenseMatrix::block2x2(n_block, &top_right, &bottom_left, &DenseMatrix::zeros(k, l))
}

/// `N = (A + XC)⁻¹ (I - B L_l⁻¹ C_l - X D L_l⁻¹ C_l)` (square `A` only).
pub fn n_block_with_x(gs: &GeneralSaddle, nd: &NullData, x: &DenseMatrix) -> Result<DenseMatrix> {
    let (m, n, _, l) = gs.shape();
    if m != n {
        return Err(Error::InvalidParameter(format!("the X formula needs a square A, got {m} x {n}")));
    }
    if x.shape() != (m, l) {
        return Err(Error::DimensionMismatch { op: "X rows", expected: m, found: x.n_rows() });
    }
    let shifted = gs.a.add(&x.matmul(&gs.c)?)?;
    let lu = shifted.lu()?;
    if lu.pivot_ratio() < 1e-12 {
        return Err(Error::Singular { row: 0 });
    }
    let proj = nd.l_l.inverse()?.matmul(&nd.c_l)?;
    let rhs = DenseMatrix::identity(m).sub(&gs.b.matmul(&proj)?)?.sub(&x.matmul(&gs.d)?.matmul(&proj)?)?;
    lu.solve_matrix(&rhs)
}

/// `N` from `N [A | B] = [I - C_r L_r⁻¹ C | -C_r L_r⁻¹ D]`, solved with the
/// pseudoinverse of the full-row-rank `[A | B]`. Works for any shape.
pub fn n_block_from_row_pinv(gs: &GeneralSaddle, nd: &NullData) -> Result<DenseMatrix> {
    let n = gs.a.n_cols();
    let cr_lr = nd.c_r.matmul(&nd.l_r.inverse()?)?;
    let left = DenseMatrix::identity(n).sub(&cr_lr.matmul(&gs.c)?)?;
    let right = cr_lr.matmul(&gs.d)?.scaled(-1.0);
    let target = left.hstack(&right)?;
    let ab = gs.a.hstack(&gs.b)?;
    target.matmul(&moore_penrose(&ab))
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let entries = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseMatrix::from_row_major(rows, cols, entries).expect("length matches")
}

/// Null-space form of the inverse.
///
/// For square `A` the `(1,1)` block uses `(A + XC)⁻¹`: the given `x`, or
/// `X = C_r` followed by up to [`X_RETRIES`] seeded random matrices. For
/// rectangular `A` it comes from [`n_block_from_row_pinv`] and `x` is ignored.
pub fn inverse_app1(gs: &GeneralSaddle, nd: &NullData, x: Option<&DenseMatrix>) -> Result<DenseMatrix> {
    let (m, n, _, l) = gs.shape();
    let n_block = if m != n {
        n_block_from_row_pinv(gs, nd)?
    } else if let Some(x) = x {
        n_block_with_x(gs, nd, x)?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(X_SEED);
        let mut found = None;
        for attempt in 0..=X_RETRIES {
            let candidate = if attempt == 0 { nd.c_r.clone() } else { random_matrix(&mut rng, m, l) };
            match n_block_with_x(gs, nd, &candidate) {
                Ok(nb) => {
                    found = Some(nb);
                    break;
                }
                Err(Error::Singular { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        found.ok_or_else(|| {
            Error::RankCondition(format!("A + XC was singular for all {} choices of X", X_RETRIES + 1))
        })?
    };
    assemble_inverse(nd, &n_block)
}

/// Pieces of the Moore-Penrose construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoinverseParts {
    pub a_pinv: DenseMatrix,
    /// `E_A = I - A A†`
    pub e_a: DenseMatrix,
    /// `F_A = I - A† A`
    pub f_a: DenseMatrix,
    pub b0_pinv: DenseMatrix,
    pub c0_pinv: DenseMatrix,
}

pub fn pseudoinverse_parts(gs: &GeneralSaddle) -> Result<PseudoinverseParts> {
    let (m, n, _, _) = gs.shape();
    let a_pinv = moore_penrose(&gs.a);
    let e_a = DenseMatrix::identity(m).sub(&gs.a.matmul(&a_pinv)?)?;
    let f_a = DenseMatrix::identity(n).sub(&a_pinv.matmul(&gs.a)?)?;
    let b0_pinv = moore_penrose(&e_a.matmul(&gs.b)?);
    let c0_pinv = moore_penrose(&gs.c.matmul(&f_a)?);
    Ok(PseudoinverseParts { a_pinv, e_a, f_a, b0_pinv, c0_pinv })
}

/// `V`, `T` and `N` of the Moore-Penrose construction.
fn vtn(gs: &GeneralSaddle, pp: &PseudoinverseParts) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let ap = &pp.a_pinv;
    let v = ap.sub(&ap.matmul(&gs.b)?.matmul(&pp.b0_pinv)?)?.sub(&pp.c0_pinv.matmul(&gs.c)?.matmul(ap)?)?;
    let t = v.add(&pp.c0_pinv.matmul(&gs.c)?.matmul(ap)?.matmul(&gs.b)?.matmul(&pp.b0_pinv)?)?;
    let n = t.sub(&pp.c0_pinv.matmul(&gs.d)?.matmul(&pp.b0_pinv)?)?;
    Ok((v, t, n))
}

/// Moore-Penrose form of the inverse.
pub fn inverse_app2(gs: &GeneralSaddle) -> Result<DenseMatrix> {
    let pp = pseudoinverse_parts(gs)?;
    let (_, _, n) = vtn(gs, &pp)?;
    let (k, l) = (gs.b.n_cols(), gs.c.n_rows());
    DenseMatrix::block2x2(&n, &pp.c0_pinv, &pp.b0_pinv, &DenseMatrix::zeros(k, l))
}

/// `‖x - y‖_F / max(‖x‖_F, ‖y‖_F, 1)`.
pub fn rel_diff(x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    let scale = x.frobenius_norm().max(y.frobenius_norm()).max(1.0);
    Ok(x.sub(y)?.frobenius_norm() / scale)
}

/// Every identity relating the two constructions: the Moore-Penrose
/// equations for `A†`, `E_A = C_l†C_l`, `F_A = C_r C_r†`,
/// `B₀† = L_l⁻¹C_l`, `C₀† = C_r L_r⁻¹`, the products of `V`, `T`, `N` with
/// `A`, `B`, `C`, and the two shifted identities for seeded random `X`, `Y`.
pub fn verify_lingshi_pr3(gs: &GeneralSaddle, nd: &NullData, seed: u64) -> Result<CheckReport> {
    let (m, n, k, l) = gs.shape();
    let tol = IDENTITY_TOL;
    let pp = pseudoinverse_parts(gs)?;
    let (a, b, c, d) = (&gs.a, &gs.b, &gs.c, &gs.d);
    let ap = &pp.a_pinv;
    let mut rep = CheckReport::new();

    let aap = a.matmul(ap)?;
    let apa = ap.matmul(a)?;
    rep.push("A+ A A+ = A+", rel_diff(&apa.matmul(ap)?, ap)?, tol);
    rep.push("A A+ A = A", rel_diff(&aap.matmul(a)?, a)?, tol);
    rep.push("(A A+)^T = A A+", rel_diff(&aap.transpose(), &aap)?, tol);
    rep.push("(A+ A)^T = A+ A", rel_diff(&apa.transpose(), &apa)?, tol);

    let cl_pinv = moore_penrose(&nd.c_l);
    let cr_pinv = moore_penrose(&nd.c_r);
    rep.push("E_A = C_l+ C_l", rel_diff(&pp.e_a, &cl_pinv.matmul(&nd.c_l)?)?, tol);
    rep.push("F_A = C_r C_r+", rel_diff(&pp.f_a, &nd.c_r.matmul(&cr_pinv)?)?, tol);

    let ll_inv = nd.l_l.inverse()?;
    let lr_inv = nd.l_r.inverse()?;
    let ll_cl = ll_inv.matmul(&nd.c_l)?;
    let cr_lr = nd.c_r.matmul(&lr_inv)?;
    rep.push("B0+ = L_l^-1 C_l", rel_diff(&pp.b0_pinv, &ll_cl)?, tol);
    rep.push("C0+ = C_r L_r^-1", rel_diff(&pp.c0_pinv, &cr_lr)?, tol);

    let (v, t, nn) = vtn(gs, &pp)?;
    let right_id = DenseMatrix::identity(n).sub(&cr_lr.matmul(c)?)?;
    let left_id = DenseMatrix::identity(m).sub(&b.matmul(&ll_cl)?)?;
    for (name, x) in [("N", &nn), ("T", &t), ("V", &v)] {
        rep.push(&format!("{name}A = I - C_r L_r^-1 C"), rel_diff(&x.matmul(a)?, &right_id)?, tol);
        rep.push(&format!("A{name} = I - B L_l^-1 C_l"), rel_diff(&a.matmul(x)?, &left_id)?, tol);
    }
    let zeros_nk = DenseMatrix::zeros(n, k);
    let zeros_lm = DenseMatrix::zeros(l, m);
    rep.push("TB = 0", rel_diff(&t.matmul(b)?, &zeros_nk)?, tol);
    rep.push("CT = 0", rel_diff(&c.matmul(&t)?, &zeros_lm)?, tol);
    rep.push("NB = -C0+ D", rel_diff(&nn.matmul(b)?, &pp.c0_pinv.matmul(d)?.scaled(-1.0))?, tol);
    rep.push("CN = -D B0+", rel_diff(&c.matmul(&nn)?, &d.matmul(&pp.b0_pinv)?.scaled(-1.0))?, tol);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_matrix(&mut rng, m, l);
    let y = random_matrix(&mut rng, k, n);
    let lhs = nn.matmul(&a.add(&b.matmul(&y)?)?)?;
    let rhs = right_id.sub(&cr_lr.matmul(d)?.matmul(&y)?)?;
    rep.push("N(A + BY) = I - C_r L_r^-1 C - C_r L_r^-1 D Y", rel_diff(&lhs, &rhs)?, tol);
    let lhs = a.add(&x.matmul(c)?)?.matmul(&nn)?;
    let rhs = left_id.sub(&x.matmul(d)?.matmul(&ll_cl)?)?;
    rep.push("(A + XC)N = I - B L_l^-1 C_l - X D L_l^-1 C_l", rel_diff(&lhs, &rhs)?, tol);
    Ok(rep)
}

/// Both inverse constructions against `K K⁻¹ = I` and each other.
pub fn verify_inverses(gs: &GeneralSaddle, nd: &NullData) -> Result<CheckReport> {
    let kmat = gs.block();
    let id = DenseMatrix::identity(gs.t());
    let inv1 = inverse_app1(gs, nd, None)?;
    let inv2 = inverse_app2(gs)?;
    let mut rep = CheckReport::new();
    rep.push("K inverse_app1 = I", rel_diff(&kmat.matmul(&inv1)?, &id)?, IDENTITY_TOL);
    rep.push("K inverse_app2 = I", rel_diff(&kmat.matmul(&inv2)?, &id)?, IDENTITY_TOL);
    rep.push("inverse_app1 = inverse_app2", rel_diff(&inv1, &inv2)?, IDENTITY_TOL);
    Ok(rep)
}

/// A random instance satisfying the rank conditions: `A = U Vᵀ` of rank
/// `m + n - t` with uniform `[-1, 1)` factors, and uniform `B`, `C`, `D`.
/// Redraws (from the same stream) in the unlikely event a check fails.
pub fn random_admissible(m: usize, n: usize, k: usize, l: usize, seed: u64) -> Result<GeneralSaddle> {
    if m + l != n + k {
        return Err(Error::InvalidParameter(format!("m + l = {} but n + k = {}", m + l, n + k)));
    }
    let t = m + l;
    if m + n < t || k > m || l > n {
        return Err(Error::InvalidParameter(format!("infeasible shape (m, n, k, l) = ({m}, {n}, {k}, {l})")));
    }
    let r = m + n - t;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..16 {
        let u = random_matrix(&mut rng, m, r);
        let v = random_matrix(&mut rng, n, r);
        let a = u.matmul(&v.transpose())?;
        let b = random_matrix(&mut rng, m, k);
        let c = random_matrix(&mut rng, l, n);
        let d = random_matrix(&mut rng, l, k);
        let gs = GeneralSaddle::new(a, b, c, d)?;
        if gs.check_conditions().all_passed() {
            return Ok(gs);
        }
    }
    Err(Error::RankCondition(format!("no admissible instance drawn for seed {seed}")))
}

/// Shapes `(m, n, k, l)` with every dimension in `1..=max_dim` (and
/// `rank(A) ≥ 0`) that [`random_admissible`] accepts.
pub fn admissible_shapes(max_dim: usize) -> Vec<Shape> {
    let mut out = Vec::new();
    for m in 1..=max_dim {
        for n in 1..=max_dim {
            for k in 1..=m {
                let Some(l) = (n + k).checked_sub(m) else { continue };
                if l == 0 || l > n || l > max_dim {
                    continue;
                }
                out.push((m, n, k, l));
            }
        }
    }
    out
}
