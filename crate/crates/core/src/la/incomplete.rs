use alloc::vec;
use alloc::vec::Vec;

use super::SparseMatrix;
use crate::{Error, Result};

/// Zero-fill incomplete Cholesky factor `L Lᵀ ≈ A + α diag(A)`.
///
/// When a pivot breaks down the diagonal shift `α` is raised and the
/// factorization restarted.
#[derive(Debug, Clone)]
pub struct IncompleteCholesky {
    /// Strictly lower part of L, row-wise.
    lower: SparseMatrix,
    diag: Vec<f64>,
    shift: f64,
}

impl IncompleteCholesky {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        let n = a.n_rows();
        if n != a.n_cols() {
            return Err(Error::DimensionMismatch { op: "incomplete cholesky", expected: n, found: a.n_cols() });
        }
        let mut shift = 0.0;
        for _ in 0..30 {
            if let Some(f) = Self::try_factor(a, shift) {
                return Ok(f);
            }
            shift = if shift == 0.0 { 1e-3 } else { 2.0 * shift };
        }
        Err(Error::Indefinite { row: 0, pivot: f64::NAN })
    }

    fn try_factor(a: &SparseMatrix, shift: f64) -> Option<Self> {
        let n = a.n_rows();
        let mut offsets = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = vec![0.0; n];
        let mut work = vec![0.0; n];
        let mut in_row = vec![false; n];
        for i in 0..n {
            let (c, v) = a.row(i);
            let row_start = cols.len();
            for (&j, &x) in c.iter().zip(v) {
                if j < i {
                    cols.push(j);
                    vals.push(x);
                }
            }
            let row_end = cols.len();
            for &j in &cols[row_start..row_end] {
                in_row[j] = true;
            }
            for p in row_start..row_end {
                let k = cols[p];
                let mut s = vals[p];
                // Σ_j L_ij L_kj over j < k in both patterns.
                for q in offsets[k]..offsets[k + 1] {
                    let j = cols[q];
                    if in_row[j] {
                        s -= work[j] * vals[q];
                    }
                }
                let lik = s / diag[k];
                vals[p] = lik;
                work[k] = lik;
            }
            let mut d = a.get(i, i) * (1.0 + shift);
            for p in row_start..row_end {
                d -= vals[p] * vals[p];
            }
            for &j in &cols[row_start..row_end] {
                in_row[j] = false;
                work[j] = 0.0;
            }
            if !(d > 0.0) {
                return None;
            }
            diag[i] = super::sqrt(d);
            offsets[i + 1] = cols.len();
        }
        let trip: Vec<_> = (0..n)
            .flat_map(|i| (offsets[i]..offsets[i + 1]).map(move |p| (i, p)))
            .map(|(i, p)| (i, cols[p], vals[p]))
            .collect();
        let lower = SparseMatrix::from_triplets(n, n, &trip).ok()?;
        Some(Self { lower, diag, shift })
    }

    /// Diagonal shift that was needed for a stable factorization.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `z = (L Lᵀ)⁻¹ r`
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut z = r.to_vec();
        for i in 0..n {
            let (c, v) = self.lower.row(i);
            let mut s = z[i];
            for (&k, &l) in c.iter().zip(v) {
                s -= l * z[k];
            }
            z[i] = s / self.diag[i];
        }
        for i in (0..n).rev() {
            z[i] /= self.diag[i];
            let zi = z[i];
            let (c, v) = self.lower.row(i);
            for (&k, &l) in c.iter().zip(v) {
                z[k] -= l * zi;
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_tridiagonal() {
        // IC(0) is the exact Cholesky factor when there is no fill.
        let mut t = Vec::new();
        for i in 0..5 {
            t.push((i, i, 2.0));
            if i + 1 < 5 {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(5, 5, &t).unwrap();
        let ic = IncompleteCholesky::new(&a).unwrap();
        assert_eq!(ic.shift(), 0.0);
        let b = [1.0, 0.0, 2.0, -1.0, 3.0];
        let z = ic.apply(&b);
        let r = a.spmv(&z).unwrap();
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }
}
