use nalgebra::Matrix2;

use super::sparse::{SymmetricSparseMatrix, TripletBuilder};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryEdge, EdgeTag, Mesh, Rect, Region};

const MIN_AREA: f64 = 1e-14;

/// Gradients of the three P1 hat functions on triangle `t` and its area.
pub fn p1_gradients(mesh: &Mesh, t: usize) -> Result<([[f64; 2]; 3], f64)> {
    let [a, b, c] = mesh.vertices(t);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let area = 0.5 * det;
    if !(area >= MIN_AREA) {
        return Err(Error::Assembly(format!(
            "triangle {t} has area {area:e} at ({}, {})",
            a[0], a[1]
        )));
    }
    let g = [
        [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
        [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
        [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
    ];
    Ok((g, area))
}

/// Constant gradient of the P1 interpolant of `u` on triangle `t`.
pub fn element_gradient(mesh: &Mesh, t: usize, u: &[f64]) -> Result<[f64; 2]> {
    let (g, _) = p1_gradients(mesh, t)?;
    let nodes = mesh.triangles[t].nodes;
    let mut out = [0.0; 2];
    for (k, &n) in nodes.iter().enumerate() {
        out[0] += u[n] * g[k][0];
        out[1] += u[n] * g[k][1];
    }
    Ok(out)
}

fn assemble_elements(
    mesh: &Mesh,
    keep: impl Fn(usize) -> bool,
    local: impl Fn(&[[f64; 2]; 3], f64) -> [[f64; 3]; 3],
) -> Result<SymmetricSparseMatrix> {
    let mut b = TripletBuilder::new(mesh.num_nodes());
    for t in (0..mesh.triangles.len()).filter(|&t| keep(t)) {
        let (g, area) = p1_gradients(mesh, t)?;
        let k = local(&g, area);
        let nodes = mesh.triangles[t].nodes;
        for i in 0..3 {
            for j in i..3 {
                b.add(nodes[i], nodes[j], k[i][j]);
            }
        }
    }
    Ok(b.build())
}

fn stiffness_local(g: &[[f64; 2]; 3], area: f64, a: &Matrix2<f64>) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        let ag = [
            a[(0, 0)] * g[i][0] + a[(0, 1)] * g[i][1],
            a[(1, 0)] * g[i][0] + a[(1, 1)] * g[i][1],
        ];
        for j in 0..3 {
            k[i][j] = area * (ag[0] * g[j][0] + ag[1] * g[j][1]);
        }
    }
    k
}

fn mass_local(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

fn is_fluid(mesh: &Mesh) -> impl Fn(usize) -> bool + '_ {
    move |t| mesh.triangles[t].region == Region::Fluid
}

/// P1 stiffness `int grad u . grad v` over the fluid triangles.
pub fn assemble_stiffness(mesh: &Mesh) -> Result<SymmetricSparseMatrix> {
    assemble_stiffness_on(mesh, is_fluid(mesh))
}

/// Stiffness over an arbitrary subset of triangles, holes included.
pub fn assemble_stiffness_on(mesh: &Mesh, keep: impl Fn(usize) -> bool) -> Result<SymmetricSparseMatrix> {
    let id = Matrix2::identity();
    assemble_elements(mesh, keep, |g, area| stiffness_local(g, area, &id))
}

/// `int a grad u . grad v` over the fluid triangles for a constant tensor `a`.
pub fn assemble_anisotropic_stiffness(mesh: &Mesh, a: &Matrix2<f64>) -> Result<SymmetricSparseMatrix> {
    // only the symmetric part contributes to the form
    let sym = 0.5 * (a + a.transpose());
    assemble_elements(mesh, is_fluid(mesh), |g, area| stiffness_local(g, area, &sym))
}

/// Consistent P1 mass over the fluid triangles.
pub fn assemble_mass(mesh: &Mesh) -> Result<SymmetricSparseMatrix> {
    assemble_mass_on(mesh, is_fluid(mesh))
}

pub fn assemble_mass_on(mesh: &Mesh, keep: impl Fn(usize) -> bool) -> Result<SymmetricSparseMatrix> {
    assemble_elements(mesh, keep, |_, area| mass_local(area))
}

/// One-dimensional P1 mass over the boundary edges accepted by `keep`.
pub fn assemble_edge_mass_on(mesh: &Mesh, keep: impl Fn(&BoundaryEdge) -> bool) -> Result<SymmetricSparseMatrix> {
    let mut b = TripletBuilder::new(mesh.num_nodes());
    for e in mesh.boundary_edges.iter().filter(|e| keep(e)) {
        let [p, q] = e.nodes;
        let (a, c) = (mesh.nodes[p], mesh.nodes[q]);
        let len = (c[0] - a[0]).hypot(c[1] - a[1]);
        if !(len > 0.0) {
            return Err(Error::Assembly(format!("zero-length edge at ({}, {})", a[0], a[1])));
        }
        b.add(p, p, len / 3.0);
        b.add(q, q, len / 3.0);
        b.add(p, q, len / 6.0);
    }
    Ok(b.build())
}

pub fn edge_midpoint(mesh: &Mesh, e: &BoundaryEdge) -> [f64; 2] {
    let (a, c) = (mesh.nodes[e.nodes[0]], mesh.nodes[e.nodes[1]]);
    [0.5 * (a[0] + c[0]), 0.5 * (a[1] + c[1])]
}

/// Robin mass with `q = 1` on hole boundary edges whose midpoint lies
/// outside the closed rectangle `k` and `q = 0` otherwise.
pub fn assemble_robin_mass(mesh: &Mesh, k: Rect) -> Result<SymmetricSparseMatrix> {
    assemble_edge_mass_on(mesh, |e| {
        matches!(e.tag, EdgeTag::HoleBoundary(_)) && !k.contains(edge_midpoint(mesh, e))
    })
}

/// Boundary mass over every hole boundary edge (`q = 1` on all of `Sigma_eps`).
pub fn assemble_hole_boundary_mass(mesh: &Mesh) -> Result<SymmetricSparseMatrix> {
    assemble_edge_mass_on(mesh, |e| matches!(e.tag, EdgeTag::HoleBoundary(_)))
}
