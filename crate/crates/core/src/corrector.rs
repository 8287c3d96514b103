//! First-order correctors, eigenspace alignment and the Visik residual.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cell::{CellEvaluator, CellSolution};
use crate::eigensolve::Spectrum;
use crate::error::{Error, Result};
use crate::fem::{p1_gradients, SymmetricSparseMatrix};
use crate::geometry::{CellMesh, Mesh, Point, PointLocator, Rect, Region};
use crate::spectral::{apply_keps, DiscreteOperatorBundle, ProblemKind};

/// Nodal gradients by area-weighted averaging of the adjacent element gradients.
pub fn recover_gradient(mesh: &Mesh, u: &[f64]) -> Result<Vec<[f64; 2]>> {
    if u.len() != mesh.num_nodes() {
        return Err(Error::Dimension {
            expected: mesh.num_nodes(),
            got: u.len(),
        });
    }
    let mut acc = vec![[0.0; 2]; mesh.num_nodes()];
    let mut weight = vec![0.0; mesh.num_nodes()];
    for t in (0..mesh.triangles.len()).filter(|&t| mesh.triangles[t].region == Region::Fluid) {
        let (g, area) = p1_gradients(mesh, t)?;
        let nodes = mesh.triangles[t].nodes;
        let mut grad = [0.0; 2];
        for (k, &n) in nodes.iter().enumerate() {
            grad[0] += u[n] * g[k][0];
            grad[1] += u[n] * g[k][1];
        }
        for &n in &nodes {
            acc[n][0] += area * grad[0];
            acc[n][1] += area * grad[1];
            weight[n] += area;
        }
    }
    Ok(acc
        .into_iter()
        .zip(weight)
        .map(|(a, w)| if w > 0.0 { [a[0] / w, a[1] / w] } else { [0.0; 2] })
        .collect())
}

/// A P1 field on the mesh of `A` with its recovered gradient, evaluable at
/// arbitrary points.
#[derive(Clone, Debug)]
pub struct MacroField<'a> {
    mesh: &'a Mesh,
    values: &'a [f64],
    grad: Vec<[f64; 2]>,
    locator: PointLocator,
}

impl<'a> MacroField<'a> {
    pub fn new(mesh: &'a Mesh, values: &'a [f64]) -> Result<Self> {
        Ok(Self {
            grad: recover_gradient(mesh, values)?,
            locator: PointLocator::new(mesh),
            mesh,
            values,
        })
    }

    /// Value and recovered gradient at `x`, `None` off the mesh.
    pub fn eval(&self, x: Point) -> Option<(f64, [f64; 2])> {
        let loc = self.locator.locate(self.mesh, x)?;
        let nodes = self.mesh.triangles[loc.triangle].nodes;
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for (&w, &n) in loc.bary.iter().zip(&nodes) {
            v += w * self.values[n];
            g[0] += w * self.grad[n][0];
            g[1] += w * self.grad[n][1];
        }
        Some((v, g))
    }
}

/// Interpolates a field given on the mesh of `A` onto `target`, extending it
/// by zero outside the open rectangle `a_rect`.
pub fn interpolate_zero_extended(u: &[f64], a_mesh: &Mesh, a_rect: Rect, target: &Mesh) -> Result<Vec<f64>> {
    let field = MacroField::new(a_mesh, u)?;
    let mut failed = Vec::new();
    let out = target
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if !a_rect.contains_open(x) {
                return 0.0;
            }
            field.eval(x).map_or_else(
                || {
                    failed.push(i);
                    0.0
                },
                |(v, _)| v,
            )
        })
        .collect();
    location_result(out, failed, target)
}

fn location_result(out: Vec<f64>, failed: Vec<usize>, target: &Mesh) -> Result<Vec<f64>> {
    match failed.first() {
        None => Ok(out),
        Some(&i) => Err(Error::Location {
            first: target.nodes[i],
            nodes: failed,
        }),
    }
}

/// `U = u + eps psi chi(x/eps) . grad u` on the nodes of a perforated mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectorField {
    pub values: Vec<f64>,
    pub cutoff_applied: bool,
    pub mode: usize,
    pub eps: f64,
}

/// Inputs shared by every corrector built on one macro mesh and cell.
#[derive(Clone, Copy, Debug)]
pub struct CorrectorSetup<'a> {
    pub a_mesh: &'a Mesh,
    pub a_rect: Rect,
    pub cell: &'a CellMesh,
    pub sol: &'a CellSolution,
}

/// Cutoff `psi = clamp(dist(x, dA) / (2 eps), 0, 1)`, zero outside `A`.
pub fn cutoff(a_rect: Rect, x: Point, eps: f64) -> f64 {
    if !a_rect.contains_open(x) {
        return 0.0;
    }
    (a_rect.inner_distance(x) / (2.0 * eps)).clamp(0.0, 1.0)
}

pub fn build_corrector(
    setup: &CorrectorSetup,
    u_hom: &[f64],
    mode: usize,
    eps: f64,
    target: &Mesh,
    with_cutoff: bool,
) -> Result<CorrectorField> {
    let field = MacroField::new(setup.a_mesh, u_hom)?;
    let chi = CellEvaluator::new(setup.cell, setup.sol);
    let fluid = target.active_nodes();
    let mut failed = Vec::new();
    let values = target
        .nodes
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if !fluid[i] || !setup.a_rect.contains_open(x) {
                return 0.0;
            }
            let (Some((u, g)), Ok(c)) = (field.eval(x), chi.eval(x, eps)) else {
                failed.push(i);
                return 0.0;
            };
            let psi = if with_cutoff { cutoff(setup.a_rect, x, eps) } else { 1.0 };
            u + eps * psi * (c.value[0] * g[0] + c.value[1] * g[1])
        })
        .collect();
    Ok(CorrectorField {
        values: location_result(values, failed, target)?,
        cutoff_applied: with_cutoff,
        mode,
        eps,
    })
}

/// Orthogonal Procrustes alignment of a corrector family with discrete eigenfunctions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// `M_eps`, row `l` combines the discrete modes approximating `U^l`.
    pub rotation: DMatrix<f64>,
    /// `||U^l - sum_k M_lk u^k||_eps` per mode.
    pub heps_errors: Vec<f64>,
    /// `||U^l - sum_k M_lk u^k||_{L^2}` per mode.
    pub l2_errors: Vec<f64>,
    /// Largest principal-angle sine between the two spans.
    pub gap: f64,
}

fn gram(a: &[Vec<f64>], b: &[Vec<f64>], m: &SymmetricSparseMatrix) -> Result<DMatrix<f64>> {
    let mb: Vec<Vec<f64>> = b.iter().map(|v| m.mul_vec(v)).collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
        a[i].iter().zip(&mb[j]).map(|(x, y)| x * y).sum()
    }))
}

fn check_family(a: &[Vec<f64>], b: &[Vec<f64>], n: usize) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    if let Some(v) = a.iter().chain(b).find(|v| v.len() != n) {
        return Err(Error::Dimension {
            expected: n,
            got: v.len(),
        });
    }
    Ok(())
}

pub fn align_eigenspaces(
    u_eps: &[Vec<f64>],
    correctors: &[Vec<f64>],
    bundle: &DiscreteOperatorBundle,
) -> Result<AlignmentResult> {
    let m = &bundle.mass;
    check_family(u_eps, correctors, m.dim())?;
    let g = gram(correctors, u_eps, m)?;
    let svd = g.clone().svd(true, true);
    let smin = svd.singular_values.min();
    if !(smin >= 1e-12) {
        return Err(Error::Alignment(format!(
            "cross Gram matrix is rank deficient (smallest singular value {smin:e})"
        )));
    }
    let (w, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let rotation = w * vt;
    let mut heps_errors = Vec::with_capacity(correctors.len());
    let mut l2_errors = Vec::with_capacity(correctors.len());
    for (l, target) in correctors.iter().enumerate() {
        let mut e = target.clone();
        for (k, u) in u_eps.iter().enumerate() {
            let c = rotation[(l, k)];
            e.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
        heps_errors.push(bundle.eps_norm(&e)?);
        l2_errors.push(m.quad_form(&e)?.max(0.0).sqrt());
    }
    Ok(AlignmentResult {
        gap: eigenspace_gap(correctors, u_eps, m)?,
        rotation,
        heps_errors,
        l2_errors,
    })
}

/// `M`-orthonormal basis coefficients: returns `C` with `(F C)^T M (F C) = I`.
fn orthonormalizer(f: &[Vec<f64>], m: &SymmetricSparseMatrix) -> Result<DMatrix<f64>> {
    let g = gram(f, f, m)?;
    let eig = g.symmetric_eigen();
    let max = eig.eigenvalues.max();
    if !(eig.eigenvalues.min() > 1e-24 * max.max(1e-300)) {
        return Err(Error::Alignment("family is linearly dependent".into()));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

fn combine(f: &[Vec<f64>], c: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..c.ncols())
        .map(|j| {
            let mut out = vec![0.0; f[0].len()];
            for (i, v) in f.iter().enumerate() {
                let w = c[(i, j)];
                out.iter_mut().zip(v).for_each(|(o, x)| *o += w * x);
            }
            out
        })
        .collect()
}

/// Largest principal-angle sine between `span(a)` and `span(b)` in the `M` inner product.
pub fn eigenspace_gap(a: &[Vec<f64>], b: &[Vec<f64>], m: &SymmetricSparseMatrix) -> Result<f64> {
    check_family(a, b, m.dim())?;
    let qa = combine(a, &orthonormalizer(a, m)?);
    let qb = combine(b, &orthonormalizer(b, m)?);
    let s = gram(&qa, &qb, m)?.singular_values();
    let smin = s.min().clamp(0.0, 1.0);
    Ok((1.0 - smin * smin).max(0.0).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisikResult {
    /// `||K_eps U - mu U||_eps` for `||U||_eps = 1`.
    pub alpha: f64,
    /// `min_j |1/lambda^j_eps - mu|` over the supplied spectrum.
    pub distance: f64,
    pub nearest: usize,
    /// An eigenvalue of `K_eps` lies within `alpha` of `mu`.
    pub certificate: bool,
    /// The verdict is final: either the certificate holds, or the window
    /// `[mu - alpha, mu + alpha]` stays above the smallest supplied `1/lambda`,
    /// so no unsupplied eigenvalue can fall inside it.
    pub conclusive: bool,
}

pub fn visik_check(bundle: &DiscreteOperatorBundle, u: &[f64], mu: f64, spectrum: &Spectrum) -> Result<VisikResult> {
    if bundle.kind != ProblemKind::Perforated {
        return Err(Error::Precondition("Visik check needs a perforated bundle".into()));
    }
    if spectrum.is_empty() {
        return Err(Error::Precondition("empty spectrum".into()));
    }
    let u = bundle.project(u)?;
    let norm = bundle.eps_norm(&u)?;
    if !(norm > 0.0) {
        return Err(Error::Precondition("trial field has zero energy norm".into()));
    }
    let u: Vec<f64> = u.iter().map(|v| v / norm).collect();
    let ku = apply_keps(bundle, &u)?;
    let r: Vec<f64> = ku.iter().zip(&u).map(|(k, v)| k - mu * v).collect();
    let alpha = bundle.eps_norm(&r)?;
    let (nearest, distance) = spectrum
        .eigenvalues
        .iter()
        .map(|l| (1.0 / l - mu).abs())
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, f64::INFINITY));
    let certificate = distance <= alpha * (1.0 + 1e-8);
    let lowest = spectrum.eigenvalues.iter().fold(0.0f64, |m, l| m.max(*l));
    Ok(VisikResult {
        alpha,
        distance,
        nearest,
        certificate,
        conclusive: certificate || mu - alpha > 1.0 / lowest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_domain_mesh;

    #[test]
    fn gradient_recovery_is_exact_for_linears() {
        let mesh = build_domain_mesh(Rect::unit(), 0.25).unwrap();
        let u: Vec<f64> = mesh.nodes.iter().map(|p| 1.5 * p[0] - 0.5 * p[1]).collect();
        for g in recover_gradient(&mesh, &u).unwrap() {
            assert!((g[0] - 1.5).abs() < 1e-13 && (g[1] + 0.5).abs() < 1e-13);
        }
    }

    #[test]
    fn cutoff_profile() {
        let a = Rect::new(0.25, 0.25, 0.75, 0.75);
        assert_eq!(cutoff(a, [0.1, 0.5], 0.1), 0.0);
        assert_eq!(cutoff(a, [0.5, 0.5], 0.1), 1.0);
        assert!((cutoff(a, [0.35, 0.5], 0.1) - 0.5).abs() < 1e-12);
    }
}
