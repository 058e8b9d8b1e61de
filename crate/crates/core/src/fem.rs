//! Lowest-order edge-element assembly with homogeneous boundary conditions
//! eliminated.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::la::{self, factorize, sym_eigvals, ColPivQr, FactorKind, SparseMatrix};
use crate::mesh::Mesh;
use crate::report::CheckReport;
use crate::saddle::SaddleSystem;
use crate::{Error, Result};

/// Numbering of the unknowns: interior edges carry `u`, interior vertices `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMaps {
    pub edge_to_dof: Vec<Option<usize>>,
    pub vertex_to_dof: Vec<Option<usize>>,
    pub n: usize,
    pub m: usize,
}

impl DofMaps {
    pub fn new(mesh: &Mesh) -> Self {
        let (edge_to_dof, n) = number(mesh.boundary_edge());
        let (vertex_to_dof, m) = number(mesh.boundary_vertex());
        Self { edge_to_dof, vertex_to_dof, n, m }
    }
}

fn number(boundary: &[bool]) -> (Vec<Option<usize>>, usize) {
    let mut next = 0;
    let map = boundary
        .iter()
        .map(|&b| {
            (!b).then(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    (map, next)
}

/// Gradients of the barycentric coordinates and the (positive) area.
pub fn barycentric_gradients(p: &[[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
        g[i] = [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2];
    }
    (g, 0.5 * area2.abs())
}

fn corners(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    let tri = mesh.triangles()[t];
    [mesh.vertices()[tri[0]], mesh.vertices()[tri[1]], mesh.vertices()[tri[2]]]
}

fn signs(mesh: &Mesh, t: usize) -> [f64; 3] {
    let te = mesh.triangle_edges()[t];
    [te[0].1 as f64, te[1].1 as f64, te[2].1 as f64]
}

/// Element curl-curl matrix `s sᵀ / |T|` in local edge order.
pub fn local_curlcurl(mesh: &Mesh, t: usize) -> [[f64; 3]; 3] {
    let s = signs(mesh, t);
    let area = mesh.signed_area(t);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = s[i] * s[j] / area;
        }
    }
    k
}

/// Element mass matrix `∫_T W_i · W_j`, integrated exactly.
pub fn local_mass(mesh: &Mesh, t: usize) -> [[f64; 3]; 3] {
    let (g, area) = barycentric_gradients(&corners(mesh, t));
    let s = signs(mesh, t);
    let gg = |x: usize, y: usize| g[x][0] * g[y][0] + g[x][1] * g[y][1];
    let ii = |x: usize, y: usize| area * if x == y { 2.0 } else { 1.0 } / 12.0;
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        let (a, b) = (i, (i + 1) % 3);
        for j in 0..3 {
            let (c, d) = (j, (j + 1) % 3);
            let v = ii(a, c) * gg(b, d) - ii(a, d) * gg(b, c) - ii(b, c) * gg(a, d) + ii(b, d) * gg(a, c);
            k[i][j] = s[i] * s[j] * v;
        }
    }
    k
}

/// Value at `point` of the globally oriented Whitney function of local edge `j`.
pub fn whitney_basis(mesh: &Mesh, t: usize, j: usize, point: [f64; 2]) -> [f64; 2] {
    let p = corners(mesh, t);
    let (g, _) = barycentric_gradients(&p);
    let lam = barycentric(&p, point);
    let (a, b) = (j, (j + 1) % 3);
    let s = signs(mesh, t)[j];
    [s * (lam[a] * g[b][0] - lam[b] * g[a][0]), s * (lam[a] * g[b][1] - lam[b] * g[a][1])]
}

fn barycentric(p: &[[f64; 2]; 3], x: [f64; 2]) -> [f64; 3] {
    let (g, _) = barycentric_gradients(p);
    let mut lam = [0.0; 3];
    for i in 0..3 {
        // λ_i vanishes on the opposite edge, which contains p[i+1].
        let q = p[(i + 1) % 3];
        lam[i] = g[i][0] * (x[0] - q[0]) + g[i][1] * (x[1] - q[1]);
    }
    lam
}

fn assemble_local(mesh: &Mesh, local: impl Fn(&Mesh, usize) -> [[f64; 3]; 3]) -> Result<SparseMatrix> {
    let dofs = DofMaps::new(mesh);
    let mut trip = Vec::with_capacity(9 * mesh.triangles().len());
    for t in 0..mesh.triangles().len() {
        if mesh.signed_area(t) <= 0.0 {
            return Err(Error::InvalidMesh(alloc::format!("triangle {t} is degenerate")));
        }
        let k = local(mesh, t);
        let te = mesh.triangle_edges()[t];
        for i in 0..3 {
            let Some(r) = dofs.edge_to_dof[te[i].0] else { continue };
            for j in 0..3 {
                if let Some(c) = dofs.edge_to_dof[te[j].0] {
                    trip.push((r, c, k[i][j]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(dofs.n, dofs.n, &trip)
}

/// Curl-curl matrix `A` (n x n).
pub fn assemble_curlcurl(mesh: &Mesh) -> Result<SparseMatrix> {
    assemble_local(mesh, local_curlcurl)
}

/// Edge mass matrix `M` (n x n).
pub fn assemble_edge_mass(mesh: &Mesh) -> Result<SparseMatrix> {
    assemble_local(mesh, local_mass)
}

/// Discrete gradient `C` (n x m): the row of edge `a -> b` holds `-1` at `a`
/// and `+1` at `b`, restricted to interior vertices.
pub fn discrete_gradient(mesh: &Mesh) -> SparseMatrix {
    let dofs = DofMaps::new(mesh);
    let mut trip = Vec::new();
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        let Some(r) = dofs.edge_to_dof[e] else { continue };
        if let Some(c) = dofs.vertex_to_dof[a] {
            trip.push((r, c, -1.0));
        }
        if let Some(c) = dofs.vertex_to_dof[b] {
            trip.push((r, c, 1.0));
        }
    }
    SparseMatrix::from_triplets(dofs.n, dofs.m, &trip).expect("indices come from the dof maps")
}

/// `B = (M C)ᵀ` and `L = B C`.
pub fn derive_b_and_l(m: &SparseMatrix, c: &SparseMatrix) -> Result<(SparseMatrix, SparseMatrix)> {
    let b = m.mul(c)?.transpose();
    let l = b.mul(c)?;
    Ok((b, l))
}

/// `max|x - y|` over the entries of two equally shaped sparse matrices.
fn max_diff(x: &SparseMatrix, y: &SparseMatrix) -> Result<f64> {
    Ok(x.add_scaled(1.0, y, -1.0)?.max_abs())
}

fn positive(x: f64) -> f64 {
    x.max(f64::MIN_POSITIVE)
}

/// Runs [`verify_structure_with`] with 20 samples and seed 0.
pub fn verify_structure(sys: &SaddleSystem) -> Result<CheckReport> {
    verify_structure_with(sys, 20, 0)
}

/// Checks the algebraic structure of an assembled system. Failed identities
/// are reported with their relative residuals, not raised as errors.
///
/// Kernel dimensions are found densely, so this is for desk-scale meshes.
pub fn verify_structure_with(sys: &SaddleSystem, samples: usize, seed: u64) -> Result<CheckReport> {
    let (a, mass, b, c, l) = (sys.a(), sys.mass(), sys.b(), sys.c(), sys.l());
    let (n, m) = (sys.n(), sys.m());
    let mut rep = CheckReport::new();
    let tol = 1e-12;

    let ac = a.mul(c)?;
    rep.push("AC = 0", ac.max_abs() / positive(a.max_abs() * c.max_abs()), tol);
    let mc = mass.mul(c)?;
    let bt = b.transpose();
    rep.push("MC = B^T", max_diff(&mc, &bt)? / positive(mc.max_abs().max(bt.max_abs())), tol);
    let bc = b.mul(c)?;
    rep.push("L = BC", max_diff(l, &bc)? / positive(l.max_abs().max(bc.max_abs())), tol);

    // dim ker(A) from the pencil (A, M), which is scale-free.
    let eig = sym_eigvals(&a.to_dense(), Some(&mass.to_dense()))?;
    let top = eig.last().copied().unwrap_or(0.0).abs();
    let kernel_a = eig.iter().filter(|&&x| x.abs() <= 1e-8 * positive(top)).count();
    rep.push("dim ker(A) = m", kernel_a.abs_diff(m) as f64, 0.0);
    let rank_b = if m == 0 { 0 } else { ColPivQr::new(&b.to_dense()).rank(la::DEFAULT_RANK_TOL) };
    rep.push("n = dim ker(A) + dim ker(B)", n.abs_diff(kernel_a + (n - rank_b)) as f64, 0.0);

    let mut worst_orth: f64 = 0.0;
    let mut worst_ident: f64 = 0.0;
    let mut worst_kernel: f64 = 0.0;
    if m > 0 && samples > 0 {
        let lf = factorize(l, FactorKind::SymmetricPositiveDefinite)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let q: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let ua = c.spmv(&q)?;
            // v - C L⁻¹ B v lies in ker(B).
            let corr = c.spmv(&lf.solve(&b.spmv(&v)?)?)?;
            let ub = la::vector::sub(&v, &corr);
            let mua = mass.spmv(&ua)?;
            let mub = mass.spmv(&ub)?;
            let na = la::vector::dot(&ua, &mua);
            let nb = la::vector::dot(&ub, &mub);
            worst_orth = worst_orth.max(la::vector::dot(&mua, &ub).abs() / positive(la::sqrt(na * nb)));
            let bua = b.spmv(&ua)?;
            let btlb = la::vector::dot(&bua, &lf.solve(&bua)?);
            worst_ident = worst_ident.max((btlb - na).abs() / positive(na));
            let aua = a.spmv(&ua)?;
            worst_kernel = worst_kernel.max(la::vector::norm2(&aua) / positive(a.max_abs() * la::vector::norm2(&ua)));
        }
    }
    rep.push("u_A^T M u_B = 0", worst_orth, 1e-9);
    rep.push("u_A^T B^T L^-1 B u_A = u_A^T M u_A", worst_ident, 1e-9);
    rep.push("A u_A = 0", worst_kernel, 1e-9);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::gen_square;
    use alloc::vec;

    #[test]
    fn reference_triangle_curlcurl() {
        let m = Mesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let k = local_curlcurl(&m, 0);
        let s = signs(&m, 0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(k[i][j], 2.0 * s[i] * s[j]);
            }
        }
    }

    #[test]
    fn gradient_on_single_interior_vertex() {
        let mesh = gen_square(2, 1.0).unwrap();
        let c = discrete_gradient(&mesh);
        assert_eq!(c.shape(), (mesh.n_interior_edges(), 1));
        let centre = mesh.vertices().iter().position(|v| v == &[0.0, 0.0]).unwrap();
        let dofs = DofMaps::new(&mesh);
        for (e, edge) in mesh.edges().iter().enumerate() {
            let Some(r) = dofs.edge_to_dof[e] else { continue };
            let expected = if edge[0] == centre {
                -1.0
            } else if edge[1] == centre {
                1.0
            } else {
                0.0
            };
            assert_eq!(c.get(r, 0), expected);
        }
    }

    #[test]
    fn empty_constraints_on_coarsest_square() {
        let mesh = gen_square(1, 1.0).unwrap();
        let c = discrete_gradient(&mesh);
        let mass = assemble_edge_mass(&mesh).unwrap();
        let (b, l) = derive_b_and_l(&mass, &c).unwrap();
        assert_eq!(b.shape(), (0, 1));
        assert_eq!(l.shape(), (0, 0));
    }
}
