//! Direct factorization of sparse symmetric matrices.
//!
//! The matrix is reordered with reverse Cuthill-McKee and factored inside its
//! envelope (profile), which is exact and cheap for the banded 2D matrices
//! this crate produces.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::SparseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FactorKind {
    /// Cholesky `LLᵀ`; a non-positive pivot is reported as indefiniteness.
    SymmetricPositiveDefinite,
    /// `LDLᵀ` without pivoting; only a vanishing pivot is an error.
    SymmetricIndefinite,
}

/// Envelope `LLᵀ`/`LDLᵀ` factor of a symmetric sparse matrix.
#[derive(Debug, Clone)]
pub struct Factorization {
    kind: FactorKind,
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// First stored column of each (permuted) row.
    first: Vec<usize>,
    /// Offset of each row's envelope in `env`; row `i` covers columns `first[i]..=i`.
    start: Vec<usize>,
    env: Vec<f64>,
    /// Pivots (`D` for LDLᵀ, diagonal of `L` for Cholesky).
    diag: Vec<f64>,
}

/// Factorizes a symmetric sparse matrix.
pub fn factorize(a: &SparseMatrix, kind: FactorKind) -> Result<Factorization> {
    Factorization::new(a, kind)
}

impl Factorization {
    pub fn new(a: &SparseMatrix, kind: FactorKind) -> Result<Self> {
        let n = a.n_rows();
        if n != a.n_cols() {
            return Err(Error::DimensionMismatch { op: "factorize", expected: n, found: a.n_cols() });
        }
        let asym = a.asymmetry();
        if asym > 1e-10 * a.max_abs() {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }

        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        let mut first: Vec<usize> = (0..n).collect();
        for (i, j, _) in a.iter() {
            let (pi, pj) = (inv[i], inv[j]);
            if pj < pi {
                first[pi] = first[pi].min(pj);
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i]);
        }
        let mut env = vec![0.0; start[n]];
        let mut diag = vec![0.0; n];
        for (i, j, v) in a.iter() {
            let (pi, pj) = (inv[i], inv[j]);
            if pj < pi {
                env[start[pi] + pj - first[pi]] = v;
            } else if pi == pj {
                diag[pi] = v;
            }
        }

        let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(a.max_abs());
        match kind {
            FactorKind::SymmetricPositiveDefinite => {
                for i in 0..n {
                    for j in first[i]..i {
                        let lo = first[i].max(first[j]);
                        let mut s = env[start[i] + j - first[i]];
                        for k in lo..j {
                            s -= env[start[i] + k - first[i]] * env[start[j] + k - first[j]];
                        }
                        env[start[i] + j - first[i]] = s / diag[j];
                    }
                    let row = &env[start[i]..start[i + 1]];
                    let d = diag[i] - row.iter().map(|l| l * l).sum::<f64>();
                    if !(d > 1e-14 * scale) {
                        return Err(Error::Indefinite { row: perm[i], pivot: d });
                    }
                    diag[i] = super::sqrt(d);
                }
            }
            FactorKind::SymmetricIndefinite => {
                let mut w = vec![0.0; n];
                for i in 0..n {
                    for j in first[i]..i {
                        let lo = first[i].max(first[j]);
                        let mut s = env[start[i] + j - first[i]];
                        for k in lo..j {
                            s -= w[k] * env[start[j] + k - first[j]];
                        }
                        // w_j holds l_ij * d_j until the row is finished.
                        w[j] = s;
                        env[start[i] + j - first[i]] = s / diag[j];
                    }
                    let mut d = diag[i];
                    for j in first[i]..i {
                        d -= w[j] * env[start[i] + j - first[i]];
                    }
                    if !(d.abs() > 1e-14 * scale) {
                        return Err(Error::Singular { row: perm[i] });
                    }
                    diag[i] = d;
                }
            }
        }

        Ok(Self { kind, n, perm, first, start, env, diag })
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored off-diagonal factor entries.
    pub fn envelope_size(&self) -> usize {
        self.env.len()
    }

    #[inline]
    fn l(&self, i: usize, k: usize) -> f64 {
        self.env[self.start[i] + k - self.first[i]]
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { op: "factorization solve", expected: self.n, found: b.len() });
        }
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        let unit = self.kind == FactorKind::SymmetricIndefinite;
        // Forward: L y = b (row oriented).
        for i in 0..n {
            let mut s = y[i];
            for k in self.first[i]..i {
                s -= self.l(i, k) * y[k];
            }
            y[i] = if unit { s } else { s / self.diag[i] };
        }
        if unit {
            for (yi, d) in y.iter_mut().zip(&self.diag) {
                *yi /= d;
            }
        }
        // Backward: Lᵀ x = y (column oriented over rows of L).
        for i in (0..n).rev() {
            if !unit {
                y[i] /= self.diag[i];
            }
            let yi = y[i];
            for k in self.first[i]..i {
                y[k] -= self.l(i, k) * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }

    /// Inertia counts `(positive, negative)` of the factored matrix.
    pub fn inertia(&self) -> (usize, usize) {
        match self.kind {
            FactorKind::SymmetricPositiveDefinite => (self.n, 0),
            FactorKind::SymmetricIndefinite => {
                let neg = self.diag.iter().filter(|d| **d < 0.0).count();
                (self.n - neg, neg)
            }
        }
    }
}

/// Reverse Cuthill-McKee ordering of the symmetric pattern of `a`; `perm[new] = old`.
fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.iter().filter(|&&j| j != i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    let mut nbrs: Vec<usize> = Vec::new();
    while order.len() < n {
        let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]).expect("unvisited vertex exists");
        let root = pseudo_peripheral(a, seed, &degree);
        visited[root] = true;
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(a.row(v).0.iter().copied().filter(|&j| !visited[j]));
            nbrs.sort_by_key(|&j| (degree[j], j));
            for &j in &nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(a: &SparseMatrix, root: usize) -> Vec<usize> {
    let n = a.n_rows();
    let mut level = vec![usize::MAX; n];
    level[root] = 0;
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        for &j in a.row(v).0 {
            if level[j] == usize::MAX {
                level[j] = level[v] + 1;
                queue.push_back(j);
            }
        }
    }
    level
}

fn pseudo_peripheral(a: &SparseMatrix, seed: usize, degree: &[usize]) -> usize {
    let mut root = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let level = bfs_levels(a, root);
        let depth = level.iter().filter(|&&l| l != usize::MAX).max().copied().unwrap_or(0);
        if depth <= ecc && ecc > 0 {
            break;
        }
        ecc = depth;
        let next = (0..level.len()).filter(|&i| level[i] == depth).min_by_key(|&i| degree[i]).unwrap_or(root);
        if next == root {
            break;
        }
        root = next;
    }
    root
}
