//! Dense symmetric (and symmetric-definite generalized) eigensolver:
//! Householder tridiagonalization followed by implicit QL with Wilkinson-type
//! shifts. Generalized pencils `A x = λ H x` are reduced through the Cholesky
//! factor of `H`.

use alloc::vec;
use alloc::vec::Vec;

use super::DenseMatrix;
use crate::{Error, Result};

/// Eigen-decomposition with eigenvalues ascending; eigenvectors are the columns.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

const SYMMETRY_TOL: f64 = 1e-8;

fn symmetrized(a: &DenseMatrix, what: &'static str) -> Result<DenseMatrix> {
    let (n, m) = a.shape();
    if n != m {
        return Err(Error::DimensionMismatch { op: what, expected: n, found: m });
    }
    let asym = a.asymmetry();
    if asym > SYMMETRY_TOL * a.max_abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let mut s = a.clone();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

/// Solves `A x = λ H x` (or the standard problem when `h` is `None`).
pub fn sym_eig(a: &DenseMatrix, h: Option<&DenseMatrix>) -> Result<SymEig> {
    let a = symmetrized(a, "sym_eig")?;
    match h {
        None => {
            let (d, v) = tridiag_ql(a, true)?;
            Ok(sorted(d, v.expect("vectors requested")))
        }
        Some(h) => {
            let (l, c) = reduce_pencil(&a, h)?;
            let (d, y) = tridiag_ql(c, true)?;
            let x = back_substitute_transposed(&l, &y.expect("vectors requested"));
            Ok(sorted(d, x))
        }
    }
}

/// Eigenvalues only, ascending.
pub fn sym_eigvals(a: &DenseMatrix, h: Option<&DenseMatrix>) -> Result<Vec<f64>> {
    let a = symmetrized(a, "sym_eigvals")?;
    let c = match h {
        None => a,
        Some(h) => reduce_pencil(&a, h)?.1,
    };
    let (mut d, _) = tridiag_ql(c, false)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

fn reduce_pencil(a: &DenseMatrix, h: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if h.shape() != a.shape() {
        return Err(Error::DimensionMismatch { op: "sym_eig pencil", expected: a.n_rows(), found: h.n_rows() });
    }
    let h = symmetrized(h, "sym_eig pencil")?;
    let l = h.cholesky()?;
    // C = L⁻¹ A L⁻ᵀ = L⁻¹ (L⁻¹ A)ᵀ for symmetric A.
    let x = forward_substitute(&l, a);
    let c = forward_substitute(&l, &x.transpose());
    Ok((l, symmetrized_unchecked(c)))
}

fn symmetrized_unchecked(mut c: DenseMatrix) -> DenseMatrix {
    let n = c.n_rows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// `L⁻¹ B` for lower-triangular `L`, row oriented.
fn forward_substitute(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let (n, p) = b.shape();
    let mut x = b.clone();
    let mut acc = vec![0.0; p];
    for i in 0..n {
        acc.copy_from_slice(x.row(i));
        for k in 0..i {
            let lik = l[(i, k)];
            if lik != 0.0 {
                for (a, &xk) in acc.iter_mut().zip(x.row(k)) {
                    *a -= lik * xk;
                }
            }
        }
        let d = l[(i, i)];
        for (xi, a) in x.row_mut(i).iter_mut().zip(&acc) {
            *xi = a / d;
        }
    }
    x
}

/// `L⁻ᵀ Y` for lower-triangular `L`.
fn back_substitute_transposed(l: &DenseMatrix, y: &DenseMatrix) -> DenseMatrix {
    let (n, p) = y.shape();
    let mut x = y.clone();
    let mut acc = vec![0.0; p];
    for i in (0..n).rev() {
        acc.copy_from_slice(x.row(i));
        for k in i + 1..n {
            let lki = l[(k, i)];
            if lki != 0.0 {
                for (a, &xk) in acc.iter_mut().zip(x.row(k)) {
                    *a -= lki * xk;
                }
            }
        }
        let d = l[(i, i)];
        for (xi, a) in x.row_mut(i).iter_mut().zip(&acc) {
            *xi = a / d;
        }
    }
    x
}

fn sorted(d: Vec<f64>, v: DenseMatrix) -> SymEig {
    let n = d.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let mut vs = DenseMatrix::zeros(v.n_rows(), n);
    for (new, &old) in idx.iter().enumerate() {
        for k in 0..v.n_rows() {
            vs[(k, new)] = v[(k, old)];
        }
    }
    SymEig { eigenvalues: idx.iter().map(|&i| d[i]).collect(), eigenvectors: vs }
}

/// Householder tridiagonalization and implicit QL (EISPACK tred2/tql2 lineage).
fn tridiag_ql(mut v: DenseMatrix, want_vectors: bool) -> Result<(Vec<f64>, Option<DenseMatrix>)> {
    let n = v.n_rows();
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(|| DenseMatrix::zeros(0, 0))));
    }
    let mut d: Vec<f64> = v.row(n - 1).to_vec();
    let mut e = vec![0.0; n];

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = super::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    let vkj = v[(k, j)];
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if want_vectors {
        for i in 0..n - 1 {
            v[(n - 1, i)] = v[(i, i)];
            v[(i, i)] = 1.0;
            let h = d[i + 1];
            if h != 0.0 {
                for k in 0..=i {
                    d[k] = v[(k, i + 1)] / h;
                }
                for j in 0..=i {
                    let mut g = 0.0;
                    for k in 0..=i {
                        g += v[(k, i + 1)] * v[(k, j)];
                    }
                    for k in 0..=i {
                        v[(k, j)] -= g * d[k];
                    }
                }
            }
            for k in 0..=i {
                v[(k, i + 1)] = 0.0;
            }
        }
        for j in 0..n {
            d[j] = v[(n - 1, j)];
            v[(n - 1, j)] = 0.0;
        }
        v[(n - 1, n - 1)] = 1.0;
    } else {
        for j in 0..n {
            d[j] = v[(j, j)];
        }
    }
    e[0] = 0.0;

    // Implicit QL on the tridiagonal (d, e).
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::NoConvergence { iterations: iter, residual: e[l].abs() });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = super::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in &mut d[l + 2..n] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = super::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            let row = v.row_mut(k);
                            let h = row[i + 1];
                            row[i + 1] = s * row[i] + c * h;
                            row[i] = c * row[i] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok((d, want_vectors.then_some(v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::la::vector::norm2;

    #[test]
    fn diagonal_matrix() {
        let a = DenseMatrix::from_diagonal(&[3.0, 1.0, 2.0]);
        let e = sym_eig(&a, None).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 2.0, 3.0]);
        assert_eq!(sym_eigvals(&a, None).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn diagonal_pencil() {
        let a = DenseMatrix::from_diagonal(&[2.0, 8.0]);
        let h = DenseMatrix::from_diagonal(&[1.0, 2.0]);
        let e = sym_eigvals(&a, Some(&h)).unwrap();
        assert!((e[0] - 2.0).abs() < 1e-14 && (e[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn residuals_small_for_pencil() {
        let a = DenseMatrix::from_rows(&[&[4.0, 1.0, 0.5], &[1.0, -3.0, 2.0], &[0.5, 2.0, 1.0]]).unwrap();
        let h = DenseMatrix::from_rows(&[&[2.0, 0.3, 0.0], &[0.3, 1.0, 0.1], &[0.0, 0.1, 3.0]]).unwrap();
        let e = sym_eig(&a, Some(&h)).unwrap();
        for (j, &lam) in e.eigenvalues.iter().enumerate() {
            let x = e.eigenvectors.column(j);
            let ax = a.matvec(&x).unwrap();
            let hx = h.matvec(&x).unwrap();
            let r: Vec<f64> = ax.iter().zip(&hx).map(|(p, q)| p - lam * q).collect();
            assert!(norm2(&r) <= 1e-12 * a.frobenius_norm() * norm2(&x));
        }
        assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn rejects_nonsymmetric_and_indefinite_metric() {
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eig(&a, None), Err(Error::NotSymmetric { .. })));
        let s = DenseMatrix::identity(2);
        let h = DenseMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(sym_eigvals(&s, Some(&h)), Err(Error::Indefinite { .. })));
    }

    #[test]
    fn one_by_one_and_empty() {
        let a = DenseMatrix::from_diagonal(&[-5.0]);
        assert_eq!(sym_eigvals(&a, None).unwrap(), vec![-5.0]);
        assert!(sym_eigvals(&DenseMatrix::zeros(0, 0), None).unwrap().is_empty());
    }
}
