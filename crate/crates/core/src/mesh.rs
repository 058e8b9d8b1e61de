//! 2D conforming triangulations with a canonical oriented edge numbering.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A triangulation with counterclockwise triangles and edges oriented from the
/// lower to the higher vertex index, numbered lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[(usize, i8); 3]>,
    boundary_vertex: Vec<bool>,
    boundary_edge: Vec<bool>,
}

/// Summary counts used by the CLI and the tests.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MeshStats {
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    /// Interior edges (edge-element unknowns).
    pub n: usize,
    /// Interior vertices (multiplier unknowns).
    pub m: usize,
    pub min_edge_length: f64,
    pub max_edge_length: f64,
}

impl Mesh {
    /// Builds the edge structure of a triangle soup.
    ///
    /// Clockwise triangles are reoriented; zero-area triangles, unreferenced
    /// vertices and edges shared by more than two triangles are rejected.
    pub fn from_triangles(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        let extent = vertices.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, c| m.max(c.abs())).max(f64::MIN_POSITIVE);
        let mut tris = triangles;
        let mut used = vec![false; nv];
        for (t, tri) in tris.iter_mut().enumerate() {
            for &v in tri.iter() {
                if v >= nv {
                    return Err(Error::InvalidMesh(format!(
                        "triangle {t} references vertex {v} but only {nv} vertices exist"
                    )));
                }
                used[v] = true;
            }
            let area = signed_area(&vertices, tri);
            if area.abs() <= 1e-14 * extent * extent {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate (zero area)")));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not used by any triangle")));
        }

        let mut edges: Vec<[usize; 2]> =
            tris.iter().flat_map(|t| (0..3).map(move |j| ordered(t[j], t[(j + 1) % 3]))).collect();
        edges.sort_unstable();
        edges.dedup();

        let mut incidence = vec![0u8; edges.len()];
        let mut triangle_edges = Vec::with_capacity(tris.len());
        for t in &tris {
            let mut te = [(0usize, 0i8); 3];
            for j in 0..3 {
                let (a, b) = (t[j], t[(j + 1) % 3]);
                let e = edges.binary_search(&ordered(a, b)).expect("edge was collected");
                incidence[e] += 1;
                te[j] = (e, if a < b { 1 } else { -1 });
            }
            triangle_edges.push(te);
        }
        if let Some(e) = incidence.iter().position(|&c| c > 2) {
            return Err(Error::InvalidMesh(format!("edge {:?} is shared by more than two triangles", edges[e])));
        }
        let boundary_edge: Vec<bool> = incidence.iter().map(|&c| c == 1).collect();
        let mut boundary_vertex = vec![false; nv];
        for (e, &b) in edges.iter().zip(&boundary_edge) {
            if b {
                boundary_vertex[e[0]] = true;
                boundary_vertex[e[1]] = true;
            }
        }
        Ok(Self { vertices, triangles: tris, edges, triangle_edges, boundary_vertex, boundary_edge })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Local edge `j` of a triangle joins its vertices `j` and `j+1 (mod 3)`;
    /// the sign is `+1` when that traversal agrees with the global orientation.
    pub fn triangle_edges(&self) -> &[[(usize, i8); 3]] {
        &self.triangle_edges
    }

    pub fn boundary_vertex(&self) -> &[bool] {
        &self.boundary_vertex
    }

    pub fn boundary_edge(&self) -> &[bool] {
        &self.boundary_edge
    }

    pub fn n_interior_edges(&self) -> usize {
        self.boundary_edge.iter().filter(|b| !**b).count()
    }

    pub fn n_interior_vertices(&self) -> usize {
        self.boundary_vertex.iter().filter(|b| !**b).count()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        libm::hypot(pb[0] - pa[0], pb[1] - pa[1])
    }

    /// `#vertices - #edges + #triangles`; 1 for a simply connected domain.
    pub fn euler_characteristic(&self) -> isize {
        self.vertices.len() as isize - self.edges.len() as isize + self.triangles.len() as isize
    }

    pub fn stats(&self) -> MeshStats {
        let lengths = (0..self.edges.len()).map(|e| self.edge_length(e));
        let (min, max) = lengths.fold((f64::INFINITY, 0.0f64), |(lo, hi), l| (lo.min(l), hi.max(l)));
        MeshStats {
            vertices: self.vertices.len(),
            edges: self.edges.len(),
            triangles: self.triangles.len(),
            n: self.n_interior_edges(),
            m: self.n_interior_vertices(),
            min_edge_length: min,
            max_edge_length: max,
        }
    }

    /// Smallest edge length among edges touching the vertex closest to `point`.
    pub fn min_edge_length_near(&self, point: [f64; 2]) -> f64 {
        let v = (0..self.vertices.len())
            .min_by(|&a, &b| dist2(self.vertices[a], point).total_cmp(&dist2(self.vertices[b], point)))
            .expect("mesh has vertices");
        (0..self.edges.len())
            .filter(|&e| self.edges[e].contains(&v))
            .map(|e| self.edge_length(e))
            .fold(f64::INFINITY, f64::min)
    }
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1])
}

#[inline]
fn ordered(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

fn signed_area(v: &[[f64; 2]], t: &[usize; 3]) -> f64 {
    let (p0, p1, p2) = (v[t[0]], v[t[1]], v[t[2]]);
    0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
}

/// Cell sizes of `cells` intervals covering `[0, 1]`, smallest first.
///
/// The first interval is `grading / cells` long (so `grading = 1` is uniform)
/// and the rest grow geometrically to fill the unit interval.
fn graded_sizes(cells: usize, grading: f64) -> Vec<f64> {
    if cells == 1 || grading >= 1.0 {
        return vec![1.0 / cells as f64; cells];
    }
    let h0 = grading / cells as f64;
    let total = |q: f64| -> f64 { (0..cells).map(|i| h0 * libm::pow(q, i as f64)).sum() };
    let (mut lo, mut hi) = (1.0, 2.0);
    while total(hi) < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = 0.5 * (lo + hi);
    let mut sizes: Vec<f64> = (0..cells).map(|i| h0 * libm::pow(q, i as f64)).collect();
    // Absorb the bisection residue in the largest cell.
    let s: f64 = sizes.iter().sum();
    *sizes.last_mut().unwrap() += 1.0 - s;
    sizes
}

/// Node coordinates on `[-1, 1]` with `2 * half` cells, refined toward the
/// ends (`toward_ends`) or toward the origin.
fn graded_axis(half: usize, grading: f64, toward_ends: bool) -> Vec<f64> {
    let mut sizes = graded_sizes(half, grading);
    if !toward_ends {
        sizes.reverse();
    }
    // `sizes` now runs from x = -1 inward to the midpoint.
    let mut nodes = vec![-1.0];
    let mut x = -1.0;
    for h in &sizes {
        x += h;
        nodes.push(x);
    }
    *nodes.last_mut().unwrap() = 0.0;
    for i in (0..half).rev() {
        nodes.push(-nodes[i]);
    }
    nodes
}

fn check_levels(levels: usize, grading: f64) -> Result<()> {
    if levels == 0 {
        return Err(Error::InvalidParameter("levels must be at least 1".into()));
    }
    if levels > 12 {
        return Err(Error::InvalidParameter(format!("levels = {levels} is beyond desk scale")));
    }
    if !(grading > 0.0 && grading <= 1.0) {
        return Err(Error::InvalidParameter(format!("grading {grading} must lie in (0, 1]")));
    }
    Ok(())
}

/// Splits the tensor grid cells into triangles with diagonals pointing at the
/// origin; `keep` selects which cells (by centre) belong to the domain.
fn grid_mesh(xs: &[f64], keep: impl Fn(f64, f64) -> bool) -> Result<Mesh> {
    let nx = xs.len();
    let mut index = vec![usize::MAX; nx * nx];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut vid = |i: usize, j: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
        let k = j * nx + i;
        if index[k] == usize::MAX {
            index[k] = vertices.len();
            vertices.push([xs[i], xs[j]]);
        }
        index[k]
    };
    for j in 0..nx - 1 {
        for i in 0..nx - 1 {
            let (cx, cy) = (0.5 * (xs[i] + xs[i + 1]), 0.5 * (xs[j] + xs[j + 1]));
            if !keep(cx, cy) {
                continue;
            }
            let v00 = vid(i, j, &mut vertices);
            let v10 = vid(i + 1, j, &mut vertices);
            let v01 = vid(i, j + 1, &mut vertices);
            let v11 = vid(i + 1, j + 1, &mut vertices);
            if cx * cy > 0.0 {
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }
    Mesh::from_triangles(vertices, triangles)
}

/// Triangulation of `(-1, 1)²` with `2^(levels-1)` cells per side.
///
/// With `grading < 1` the cells touching the boundary are `grading` times the
/// uniform size, so elements shrink toward the corners.
pub fn gen_square(levels: usize, grading: f64) -> Result<Mesh> {
    check_levels(levels, grading)?;
    let cells = 1usize << (levels - 1);
    let xs = if cells == 1 { vec![-1.0, 1.0] } else { graded_axis(cells / 2, grading, true) };
    grid_mesh(&xs, |_, _| true)
}

/// Triangulation of the L-shaped domain `(-1, 1)²` minus `[0, 1) x (-1, 0]`
/// with `2^levels` cells per side of the bounding square, graded toward the
/// re-entrant corner at the origin.
pub fn gen_lshape(levels: usize, grading: f64) -> Result<Mesh> {
    check_levels(levels, grading)?;
    let cells = 1usize << levels;
    let xs = graded_axis(cells / 2, grading, false);
    grid_mesh(&xs, |cx, cy| !(cx > 0.0 && cy < 0.0))
}
