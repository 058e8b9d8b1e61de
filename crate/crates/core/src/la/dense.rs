use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::{Error, Result};

/// Row-major dense matrix used by the verification oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.n_cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.entries[i * self.n_cols + j]
    }
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self { n_rows, n_cols, entries: vec![0.0; n_rows * n_cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut d = Self::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = 1.0;
        }
        d
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut d = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            d[(i, i)] = v;
        }
        d
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                op: "DenseMatrix::from_row_major",
                expected: n_rows * n_cols,
                found: entries.len(),
            });
        }
        Ok(Self { n_rows, n_cols, entries })
    }

    /// Builds from nested rows; all rows must have equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut entries = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    op: "DenseMatrix::from_rows",
                    expected: n_cols,
                    found: r.len(),
                });
            }
            entries.extend_from_slice(r);
        }
        Ok(Self { n_rows: rows.len(), n_cols, entries })
    }

    /// Builds column by column.
    pub fn from_columns(n_rows: usize, cols: &[Vec<f64>]) -> Self {
        let mut d = Self::zeros(n_rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for i in 0..n_rows {
                d[(i, j)] = c[i];
            }
        }
        d
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.entries[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[f64]) {
        for (i, &v) in col.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != rhs.n_rows {
            return Err(Error::DimensionMismatch { op: "dense matmul", expected: self.n_cols, found: rhs.n_rows });
        }
        let mut out = Self::zeros(self.n_rows, rhs.n_cols);
        for i in 0..self.n_rows {
            let orow = i * rhs.n_cols;
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let brow = rhs.row(k);
                for (o, &b) in out.entries[orow..orow + rhs.n_cols].iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch { op: "dense matvec", expected: self.n_cols, found: x.len() });
        }
        Ok((0..self.n_rows).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect())
    }

    fn zip_with(&self, rhs: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Result<DenseMatrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch {
                op: "dense elementwise",
                expected: self.n_rows * self.n_cols,
                found: rhs.n_rows * rhs.n_cols,
            });
        }
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            entries: self.entries.iter().zip(&rhs.entries).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.zip_with(rhs, |a, b| a - b)
    }

    pub fn scaled(&self, alpha: f64) -> DenseMatrix {
        Self { n_rows: self.n_rows, n_cols: self.n_cols, entries: self.entries.iter().map(|v| alpha * v).collect() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        super::sqrt(self.entries.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|`; infinite for non-square input.
    pub fn asymmetry(&self) -> f64 {
        if self.n_rows != self.n_cols {
            return f64::INFINITY;
        }
        let mut m: f64 = 0.0;
        for i in 0..self.n_rows {
            for j in 0..i {
                m = m.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        m
    }

    /// Copy of the rectangular block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, n_rows: usize, n_cols: usize) -> DenseMatrix {
        let mut b = Self::zeros(n_rows, n_cols);
        for i in 0..n_rows {
            b.row_mut(i).copy_from_slice(&self.row(r0 + i)[c0..c0 + n_cols]);
        }
        b
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &DenseMatrix) {
        for i in 0..b.n_rows {
            let nc = self.n_cols;
            self.entries[(r0 + i) * nc + c0..(r0 + i) * nc + c0 + b.n_cols].copy_from_slice(b.row(i));
        }
    }

    /// Assembles `[[a, b], [c, d]]`.
    pub fn block2x2(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix, d: &DenseMatrix) -> Result<DenseMatrix> {
        if a.n_rows != b.n_rows || c.n_rows != d.n_rows || a.n_cols != c.n_cols || b.n_cols != d.n_cols {
            return Err(Error::DimensionMismatch {
                op: "block2x2",
                expected: a.n_rows + c.n_rows,
                found: b.n_rows + d.n_rows,
            });
        }
        let mut k = Self::zeros(a.n_rows + c.n_rows, a.n_cols + b.n_cols);
        k.set_block(0, 0, a);
        k.set_block(0, a.n_cols, b);
        k.set_block(a.n_rows, 0, c);
        k.set_block(a.n_rows, a.n_cols, d);
        Ok(k)
    }

    /// `[self | rhs]`
    pub fn hstack(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_rows != rhs.n_rows {
            return Err(Error::DimensionMismatch { op: "hstack", expected: self.n_rows, found: rhs.n_rows });
        }
        let mut k = Self::zeros(self.n_rows, self.n_cols + rhs.n_cols);
        k.set_block(0, 0, self);
        k.set_block(0, self.n_cols, rhs);
        Ok(k)
    }

    pub fn lu(&self) -> Result<DenseLu> {
        DenseLu::new(self)
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        self.lu()?.inverse()
    }

    /// Dense Cholesky factor `L` with `self = L Lᵀ`.
    pub fn cholesky(&self) -> Result<DenseMatrix> {
        let n = self.n_rows;
        if n != self.n_cols {
            return Err(Error::DimensionMismatch { op: "cholesky", expected: n, found: self.n_cols });
        }
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) {
                return Err(Error::Indefinite { row: j, pivot: d });
            }
            let d = super::sqrt(d);
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                let (ri, rj) = (i * n, j * n);
                for k in 0..j {
                    s -= l.entries[ri + k] * l.entries[rj + k];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl DenseLu {
    /// Fails when a pivot is below `1e-13 · max|a_ij|`.
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        let n = a.n_rows;
        if n != a.n_cols {
            return Err(Error::DimensionMismatch { op: "lu", expected: n, found: a.n_cols });
        }
        let scale = a.max_abs();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pv) =
                (k..n).map(|i| (i, lu[(i, k)].abs())).fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if !(pv > 1e-13 * scale) {
                return Err(Error::Singular { row: k });
            }
            if p != k {
                for j in 0..n {
                    lu.entries.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        let v = lu.entries[k * n + j];
                        lu.entries[i * n + j] -= f * v;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch { op: "lu solve", expected: n, found: b.len() });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: f64 = row[..i].iter().zip(&x[..i]).map(|(a, b)| a * b).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(a, b)| a * b).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }

    /// Solves for every column of `b`.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(b.n_rows(), b.n_cols());
        for j in 0..b.n_cols() {
            out.set_column(j, &self.solve(&b.column(j))?);
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        self.solve_matrix(&DenseMatrix::identity(self.dim()))
    }

    /// `min|u_ii| / max|u_ii|`, a cheap conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        let d: Vec<f64> = (0..self.dim()).map(|i| self.lu[(i, i)].abs()).collect();
        let max = d.iter().cloned().fold(0.0, f64::max);
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            0.0
        } else {
            min / max
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_and_inverts() {
        let a = DenseMatrix::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]]).unwrap();
        let inv = a.inverse().unwrap();
        let prod = a.matmul(&inv).unwrap();
        assert!(prod.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn lu_detects_singularity() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        assert!(matches!(a.lu(), Err(Error::Singular { .. })));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DenseMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(a.cholesky(), Err(Error::Indefinite { row: 1, .. })));
        let l = DenseMatrix::from_rows(&[&[4.0, 2.0], &[2.0, 5.0]]).unwrap().cholesky().unwrap();
        assert_eq!(l[(0, 0)], 2.0);
        assert_eq!(l[(1, 0)], 1.0);
        assert_eq!(l[(1, 1)], 2.0);
    }

    #[test]
    fn blocks_round_trip() {
        let a = DenseMatrix::identity(2);
        let b = DenseMatrix::zeros(2, 1);
        let c = DenseMatrix::zeros(1, 2);
        let d = DenseMatrix::from_diagonal(&[7.0]);
        let k = DenseMatrix::block2x2(&a, &b, &c, &d).unwrap();
        assert_eq!(k.block(2, 2, 1, 1), d);
        assert_eq!(k.block(0, 0, 2, 2), a);
    }
}
