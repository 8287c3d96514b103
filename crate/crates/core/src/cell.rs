//! Periodic cell problem, effective tensor and corrector evaluation.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::eigensolve::solve_source;
use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, p1_gradients, ConstraintMap};
use crate::geometry::{CellMesh, Point, PointLocator, Region};

/// Corrector fields and effective coefficients of the template cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSolution {
    /// Nodal values of `chi^1`, `chi^2` on the template; zero at nodes that
    /// only touch hole triangles.
    pub chi: [Vec<f64>; 2],
    pub a_hom: Matrix2<f64>,
    /// `|Y|`
    pub cell_area: f64,
    /// `|Sigma^0|`
    pub hole_perimeter: f64,
    /// `|Sigma^0| / |Y|`
    pub c_star: f64,
    /// `(|Sigma^0| + 4) / |Y|`, reading `|dY|` as the full boundary of `Y`.
    pub c_star_full_boundary: f64,
}

/// Solves `int_Y (e_i + grad chi^i) . grad v = 0` for all periodic `v`.
pub fn solve_cell_problem(cell: &CellMesh) -> Result<CellSolution> {
    let mesh = &cell.mesh;
    let n = mesh.num_nodes();
    let active = mesh.active_nodes();
    let pairs = cell.periodic_pairs()?;
    let mut paired = vec![false; n];
    for &(s, m) in &pairs {
        paired[s] = true;
        paired[m] = true;
    }
    let pin = (0..n)
        .find(|&i| active[i] && !paired[i])
        .ok_or_else(|| Error::Geometry("cell mesh has no interior node to pin".into()))?;
    let fixed = (0..n).filter(|&i| !active[i]).chain([pin]);
    let cmap = ConstraintMap::periodic(n, pairs).with_fixed(fixed);
    let red = cmap.reduction()?;

    let s = assemble_stiffness(mesh)?;
    let s_red = red.reduce_matrix(&s)?;
    let mass = assemble_mass(mesh)?;
    let ones: Vec<f64> = active.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();
    let weights = mass.mul_vec(&ones)?;
    let cell_area = weights.iter().sum::<f64>();

    let mut chi = [vec![0.0; n], vec![0.0; n]];
    for (dir, field) in chi.iter_mut().enumerate() {
        let mut load = vec![0.0; n];
        for t in (0..mesh.triangles.len()).filter(|&t| mesh.triangles[t].region == Region::Fluid) {
            let (g, area) = p1_gradients(mesh, t)?;
            for (k, &node) in mesh.triangles[t].nodes.iter().enumerate() {
                load[node] -= area * g[k][dir];
            }
        }
        let x = solve_source(&s_red, &red.reduce_load(&load)?)?;
        let mut u = red.expand(&x)?;
        let mean = u.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>() / cell_area;
        for (v, &a) in u.iter_mut().zip(&active) {
            if a {
                *v -= mean;
            }
        }
        *field = u;
    }
    let a_hom = compute_ahom(&chi, cell)?;
    Ok(CellSolution {
        chi,
        a_hom,
        cell_area,
        hole_perimeter: cell.hole_perimeter,
        c_star: cell.hole_perimeter / cell_area,
        c_star_full_boundary: (cell.hole_perimeter + 4.0) / cell_area,
    })
}

/// `a_kl = int_Y (e_k + grad chi^k) . (e_l + grad chi^l)`, element by element.
pub fn compute_ahom(chi: &[Vec<f64>; 2], cell: &CellMesh) -> Result<Matrix2<f64>> {
    let mesh = &cell.mesh;
    let mut a = [[0.0; 2]; 2];
    for t in (0..mesh.triangles.len()).filter(|&t| mesh.triangles[t].region == Region::Fluid) {
        let (g, area) = p1_gradients(mesh, t)?;
        let nodes = mesh.triangles[t].nodes;
        let mut w = [[0.0; 2]; 2];
        for (k, wk) in w.iter_mut().enumerate() {
            wk[k] = 1.0;
            for (j, &node) in nodes.iter().enumerate() {
                wk[0] += chi[k][node] * g[j][0];
                wk[1] += chi[k][node] * g[j][1];
            }
        }
        for k in 0..2 {
            for l in k..2 {
                a[k][l] += area * (w[k][0] * w[l][0] + w[k][1] * w[l][1]);
            }
        }
    }
    Ok(Matrix2::new(a[0][0], a[0][1], a[0][1], a[1][1]))
}

/// `f^hom(xi) = xi^T a_hom xi`.
pub fn fhom(xi: [f64; 2], sol: &CellSolution) -> f64 {
    let a = &sol.a_hom;
    xi[0] * (a[(0, 0)] * xi[0] + a[(0, 1)] * xi[1]) + xi[1] * (a[(1, 0)] * xi[0] + a[(1, 1)] * xi[1])
}

/// `int_Y |xi + grad(xi . chi)|^2`, evaluated directly on the mesh.
pub fn fhom_direct(xi: [f64; 2], sol: &CellSolution, cell: &CellMesh) -> Result<f64> {
    let mesh = &cell.mesh;
    let w: Vec<f64> = (0..mesh.num_nodes())
        .map(|i| xi[0] * sol.chi[0][i] + xi[1] * sol.chi[1][i])
        .collect();
    let mut total = 0.0;
    for t in (0..mesh.triangles.len()).filter(|&t| mesh.triangles[t].region == Region::Fluid) {
        let (g, area) = p1_gradients(mesh, t)?;
        let mut v = xi;
        for (j, &node) in mesh.triangles[t].nodes.iter().enumerate() {
            v[0] += w[node] * g[j][0];
            v[1] += w[node] * g[j][1];
        }
        total += area * (v[0] * v[0] + v[1] * v[1]);
    }
    Ok(total)
}

/// `chi(x/eps)` and the gradient `grad_y chi` of the containing triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiValue {
    pub value: [f64; 2],
    /// `grad[i]` is `grad_y chi^i`.
    pub grad: [[f64; 2]; 2],
}

/// Point evaluator for `chi(x/eps)` backed by a bucket locator.
#[derive(Clone, Debug)]
pub struct CellEvaluator<'a> {
    cell: &'a CellMesh,
    sol: &'a CellSolution,
    locator: PointLocator,
}

impl<'a> CellEvaluator<'a> {
    pub fn new(cell: &'a CellMesh, sol: &'a CellSolution) -> Self {
        Self {
            cell,
            sol,
            locator: PointLocator::new(&cell.mesh),
        }
    }

    /// Fast coordinate in the unit cell.
    pub fn fold(x: Point, eps: f64) -> Point {
        let f = |v: f64| {
            let y = v / eps;
            y - y.floor()
        };
        [f(x[0]), f(x[1])]
    }

    pub fn eval(&self, x: Point, eps: f64) -> Result<ChiValue> {
        let y = Self::fold(x, eps);
        let mesh = &self.cell.mesh;
        let loc = self
            .locator
            .locate(mesh, y)
            .ok_or(Error::Outside { x: x[0], y: x[1] })?;
        let nodes = mesh.triangles[loc.triangle].nodes;
        let (g, _) = p1_gradients(mesh, loc.triangle)?;
        let mut out = ChiValue {
            value: [0.0; 2],
            grad: [[0.0; 2]; 2],
        };
        for i in 0..2 {
            let chi = &self.sol.chi[i];
            out.value[i] = (0..3).map(|k| loc.bary[k] * chi[nodes[k]]).sum();
            for (k, &node) in nodes.iter().enumerate() {
                out.grad[i][0] += chi[node] * g[k][0];
                out.grad[i][1] += chi[node] * g[k][1];
            }
        }
        Ok(out)
    }
}

/// One-off evaluation of `chi(x/eps)`; build a [`CellEvaluator`] for many points.
pub fn eval_chi(sol: &CellSolution, cell: &CellMesh, x: Point, eps: f64) -> Result<ChiValue> {
    CellEvaluator::new(cell, sol).eval(x, eps)
}
