//! Householder QR with column pivoting, and the null-space / pseudoinverse
//! tools built on it.

use alloc::vec;
use alloc::vec::Vec;

use super::DenseMatrix;

/// Relative rank cutoff (against the largest pivot, a proxy for σ_max).
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// `A P = Q R` with column pivoting (Businger-Golub).
#[derive(Debug, Clone)]
pub struct ColPivQr {
    m: usize,
    n: usize,
    /// R in the upper triangle, Householder vectors (implicit unit head) below.
    qr: DenseMatrix,
    tau: Vec<f64>,
    /// `perm[k]` is the original column moved to position `k`.
    perm: Vec<usize>,
}

impl ColPivQr {
    pub fn new(a: &DenseMatrix) -> Self {
        let (m, n) = a.shape();
        let mut qr = a.clone();
        let steps = m.min(n);
        let mut tau = vec![0.0; steps];
        let mut perm: Vec<usize> = (0..n).collect();
        let mut norms: Vec<f64> = (0..n).map(|j| (0..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum()).collect();
        let mut v = vec![0.0; m];
        for k in 0..steps {
            // Partial norms are recomputed rather than downdated; sizes are small.
            for j in k..n {
                norms[j] = (k..m).map(|i| qr[(i, j)] * qr[(i, j)]).sum();
            }
            let p = (k..n).fold(k, |b, j| if norms[j] > norms[b] { j } else { b });
            if p != k {
                for i in 0..m {
                    let row = qr.row_mut(i);
                    row.swap(k, p);
                }
                perm.swap(k, p);
                norms.swap(k, p);
            }
            let x0 = qr[(k, k)];
            let xnorm = super::sqrt(norms[k]);
            if xnorm == 0.0 {
                tau[k] = 0.0;
                continue;
            }
            let beta = if x0 > 0.0 { -xnorm } else { xnorm };
            let t = (beta - x0) / beta;
            let scale = 1.0 / (x0 - beta);
            v[k] = 1.0;
            for i in k + 1..m {
                v[i] = qr[(i, k)] * scale;
            }
            for j in k + 1..n {
                let s: f64 = t * (k..m).map(|i| v[i] * qr[(i, j)]).sum::<f64>();
                if s != 0.0 {
                    for i in k..m {
                        qr[(i, j)] -= s * v[i];
                    }
                }
            }
            qr[(k, k)] = beta;
            for i in k + 1..m {
                qr[(i, k)] = v[i];
            }
            tau[k] = t;
        }
        Self { m, n, qr, tau, perm }
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// `|R_kk|`, non-increasing by construction.
    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.m.min(self.n)).map(|k| self.qr[(k, k)].abs()).collect()
    }

    /// Number of pivots above `tol * |R_00|`.
    pub fn rank(&self, tol: f64) -> usize {
        let d = self.r_diagonal();
        let Some(&top) = d.first() else { return 0 };
        if top == 0.0 {
            return 0;
        }
        d.iter().take_while(|&&x| x > tol * top).count()
    }

    /// Leading `rows x n` block of R (columns in pivoted order).
    pub fn r(&self, rows: usize) -> DenseMatrix {
        let mut r = DenseMatrix::zeros(rows, self.n);
        for i in 0..rows {
            for j in i..self.n {
                r[(i, j)] = self.qr[(i, j)];
            }
        }
        r
    }

    /// The full orthogonal factor `Q` (m x m).
    pub fn q(&self) -> DenseMatrix {
        let m = self.m;
        let mut q = DenseMatrix::identity(m);
        for k in (0..self.tau.len()).rev() {
            let t = self.tau[k];
            if t == 0.0 {
                continue;
            }
            let v: Vec<f64> = (k..m).map(|i| if i == k { 1.0 } else { self.qr[(i, k)] }).collect();
            for j in 0..m {
                let s: f64 = t * v.iter().enumerate().map(|(o, vi)| vi * q[(k + o, j)]).sum::<f64>();
                if s != 0.0 {
                    for (o, vi) in v.iter().enumerate() {
                        q[(k + o, j)] -= s * vi;
                    }
                }
            }
        }
        q
    }
}

/// Orthonormal bases of the right and left null spaces of a matrix.
#[derive(Debug, Clone)]
pub struct NullBasisPair {
    /// Columns span `ker(A)`.
    pub right_basis: DenseMatrix,
    /// Rows span `{v : vA = 0}`.
    pub left_basis: DenseMatrix,
    pub numerical_rank: usize,
    pub tolerance: f64,
}

/// Null-space bases from a rank-revealing QR of `A` (left) and `Aᵀ` (right).
///
/// The rank is decided once, on `A`, and used for both bases.
pub fn null_basis(a: &DenseMatrix, tol: f64) -> NullBasisPair {
    let (m, n) = a.shape();
    let qa = ColPivQr::new(a);
    let rank = qa.rank(tol);

    let q_left = qa.q();
    let mut left_basis = DenseMatrix::zeros(m - rank, m);
    for (r, j) in (rank..m).enumerate() {
        for i in 0..m {
            left_basis[(r, i)] = q_left[(i, j)];
        }
    }

    let q_right = ColPivQr::new(&a.transpose()).q();
    let mut right_basis = DenseMatrix::zeros(n, n - rank);
    for (c, j) in (rank..n).enumerate() {
        for i in 0..n {
            right_basis[(i, c)] = q_right[(i, j)];
        }
    }

    NullBasisPair { right_basis, left_basis, numerical_rank: rank, tolerance: tol }
}

/// Moore-Penrose inverse through a complete orthogonal decomposition.
pub fn moore_penrose(a: &DenseMatrix) -> DenseMatrix {
    let (m, n) = a.shape();
    let qr1 = ColPivQr::new(a);
    let r = qr1.rank(DEFAULT_RANK_TOL);
    if r == 0 {
        return DenseMatrix::zeros(n, m);
    }
    let q1 = qr1.q();
    // A = Q1[:, :r] G with G = R1 Pᵀ (r x n, full row rank).
    let r1 = qr1.r(r);
    let mut g_t = DenseMatrix::zeros(n, r);
    for (j, &orig) in qr1.perm().iter().enumerate() {
        for i in 0..r {
            g_t[(orig, i)] = r1[(i, j)];
        }
    }
    // Gᵀ P2 = Q2 R2, hence A† = Q2 R2⁻ᵀ P2ᵀ Q1ᵀ.
    let qr2 = ColPivQr::new(&g_t);
    let q2 = qr2.q();
    let r2 = qr2.r(r);
    let mut z = DenseMatrix::zeros(r, m);
    for (i, &orig) in qr2.perm().iter().enumerate() {
        for j in 0..m {
            z[(i, j)] = q1[(j, orig)];
        }
    }
    // Solve R2ᵀ W = Z (lower triangular).
    for i in 0..r {
        for k in 0..i {
            let f = r2[(k, i)];
            if f != 0.0 {
                for j in 0..m {
                    let zk = z[(k, j)];
                    z[(i, j)] -= f * zk;
                }
            }
        }
        let d = r2[(i, i)];
        for j in 0..m {
            z[(i, j)] /= d;
        }
    }
    let mut out = DenseMatrix::zeros(n, m);
    for i in 0..n {
        for k in 0..r {
            let q = q2[(i, k)];
            if q != 0.0 {
                for j in 0..m {
                    out[(i, j)] += q * z[(k, j)];
                }
            }
        }
    }
    out
}
