//! The three eigenproblems, the source operator `K_eps` and the extension `T_eps`.
//!
//! All fields exchanged with callers are full nodal vectors on the bundle's
//! mesh; constrained nodes carry zero.

use std::sync::OnceLock;

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::eigensolve::{solve_gevp, solve_gevp_dense, Normalization, SourceSolver, Spectrum, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_anisotropic_stiffness, assemble_mass, assemble_robin_mass, assemble_stiffness, assemble_stiffness_on,
    ConstraintMap, Reduction, SymmetricSparseMatrix,
};
use crate::geometry::{
    build_cell_mesh, build_perforated_mesh, build_tiled_mesh, CellMesh, DomainConfig, EdgeTag, Mesh, Rect,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    Perforated,
    Homogenized,
    DirichletLaplacian,
    Cell,
}

/// Assembled forms of one problem together with its constraint elimination.
#[derive(Debug)]
pub struct DiscreteOperatorBundle {
    pub kind: ProblemKind,
    pub mesh: Mesh,
    /// Unperforated tiling sharing the node numbering of `mesh`.
    pub full_mesh: Option<Mesh>,
    pub k_rect: Option<Rect>,
    /// Full-node stiffness, mass and Robin mass.
    pub stiffness: SymmetricSparseMatrix,
    pub mass: SymmetricSparseMatrix,
    pub robin: Option<SymmetricSparseMatrix>,
    pub constraints: ConstraintMap,
    pub reduction: Reduction,
    /// Reduced `S + R` and `M`.
    pub system: SymmetricSparseMatrix,
    pub system_mass: SymmetricSparseMatrix,
    solver: OnceLock<SourceSolver>,
}

impl DiscreteOperatorBundle {
    fn new(
        kind: ProblemKind,
        mesh: Mesh,
        stiffness: SymmetricSparseMatrix,
        mass: SymmetricSparseMatrix,
        robin: Option<SymmetricSparseMatrix>,
        constraints: ConstraintMap,
    ) -> Result<Self> {
        let reduction = constraints.reduction()?;
        let energy = match &robin {
            Some(r) => stiffness.add(r)?,
            None => stiffness.clone(),
        };
        Ok(Self {
            kind,
            system: reduction.reduce_matrix(&energy)?,
            system_mass: reduction.reduce_matrix(&mass)?,
            mesh,
            full_mesh: None,
            k_rect: None,
            stiffness,
            mass,
            robin,
            constraints,
            reduction,
            solver: OnceLock::new(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn eps(&self) -> Option<f64> {
        self.mesh.eps
    }

    /// `a_eps(u, v) = int grad u . grad v + int_{Sigma \ K} u v`.
    pub fn energy(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let mut e = self.stiffness.bilinear(u, v)?;
        if let Some(r) = &self.robin {
            e += r.bilinear(u, v)?;
        }
        Ok(e)
    }

    pub fn eps_norm(&self, u: &[f64]) -> Result<f64> {
        Ok(self.energy(u, u)?.max(0.0).sqrt())
    }

    pub fn l2_inner(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.mass.bilinear(u, v)
    }

    /// Zeroes constrained nodes so that `u` lies in the discrete space.
    pub fn project(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.reduction.expand(&self.reduction.restrict(u)?)
    }

    fn source_solver(&self) -> Result<&SourceSolver> {
        if let Some(s) = self.solver.get() {
            return Ok(s);
        }
        let s = SourceSolver::new(&self.system)?;
        Ok(self.solver.get_or_init(|| s))
    }

    /// Solves `(S + R) u = M f` on the constrained space.
    pub fn solve_source(&self, f: &[f64]) -> Result<Vec<f64>> {
        let rhs = self.reduction.reduce_load(&self.mass.mul_vec(f)?)?;
        self.reduction.expand(&self.source_solver()?.solve(&rhs)?)
    }

    /// `k` smallest eigenpairs of the reduced pencil, eigenvectors expanded
    /// to full nodal fields.
    pub fn eigenpairs(&self, k: usize, tol: f64) -> Result<Spectrum> {
        let mut spec = solve_gevp(&self.system, &self.system_mass, k, tol)?;
        spec.eigenvectors = spec
            .eigenvectors
            .iter()
            .map(|v| self.reduction.expand(v))
            .collect::<Result<_>>()?;
        Ok(spec)
    }

    /// Every eigenpair by a dense solve; only for small problems.
    pub fn full_spectrum(&self) -> Result<Spectrum> {
        let mut spec = solve_gevp_dense(&self.system, &self.system_mass)?;
        spec.eigenvectors = spec
            .eigenvectors
            .iter()
            .map(|v| self.reduction.expand(v))
            .collect::<Result<_>>()?;
        Ok(spec)
    }
}

fn fixed_nodes(mesh: &Mesh) -> Vec<usize> {
    let outer = mesh.nodes_on_edges(|t| *t == EdgeTag::Outer);
    let active = mesh.active_nodes();
    (0..mesh.num_nodes()).filter(|&i| outer[i] || !active[i]).collect()
}

/// Forms on `Omega_eps` with Dirichlet conditions on the outer square. With
/// `robin = false` the holes carry pure Neumann conditions.
pub fn perforated_bundle(cfg: &DomainConfig, cell: &CellMesh, robin: bool) -> Result<DiscreteOperatorBundle> {
    let mesh = build_perforated_mesh(cfg, cell)?;
    let full_mesh = build_tiled_mesh(cfg.cells_per_side, cell, true)?;
    let s = assemble_stiffness(&mesh)?;
    let m = assemble_mass(&mesh)?;
    let r = if robin {
        assemble_robin_mass(&mesh, cfg.k_rect)?
    } else {
        SymmetricSparseMatrix::zeros(mesh.num_nodes())
    };
    let cmap = ConstraintMap::dirichlet(mesh.num_nodes(), fixed_nodes(&mesh));
    let mut b = DiscreteOperatorBundle::new(ProblemKind::Perforated, mesh, s, m, Some(r), cmap)?;
    b.full_mesh = Some(full_mesh);
    b.k_rect = Some(cfg.k_rect);
    Ok(b)
}

/// Perforated Neumann-Robin eigenproblem; eigenfunctions are
/// `L^2(Omega_eps)`-orthonormal.
pub fn solve_perforated_evp(cfg: &DomainConfig, k: usize) -> Result<(Spectrum, DiscreteOperatorBundle)> {
    let cell = build_cell_mesh(cfg.radius, cfg.n_poly, cfg.h_ref)?;
    solve_perforated_evp_with(cfg, &cell, k)
}

pub fn solve_perforated_evp_with(
    cfg: &DomainConfig,
    cell: &CellMesh,
    k: usize,
) -> Result<(Spectrum, DiscreteOperatorBundle)> {
    let bundle = perforated_bundle(cfg, cell, true)?;
    let spec = bundle.eigenpairs(k, DEFAULT_TOL)?;
    Ok((spec, bundle))
}

/// `-div(a_hom grad u) = mu u` on `A` with homogeneous Dirichlet data.
pub fn homogenized_bundle(a_mesh: &Mesh, a_hom: &Matrix2<f64>) -> Result<DiscreteOperatorBundle> {
    if a_hom.symmetric_eigenvalues().min() <= 0.0 {
        return Err(Error::Precondition("a_hom must be positive definite".into()));
    }
    let s = assemble_anisotropic_stiffness(a_mesh, a_hom)?;
    let m = assemble_mass(a_mesh)?;
    let cmap = ConstraintMap::dirichlet(a_mesh.num_nodes(), fixed_nodes(a_mesh));
    DiscreteOperatorBundle::new(ProblemKind::Homogenized, a_mesh.clone(), s, m, None, cmap)
}

/// Homogenized eigenpairs `lambda^j = mu^j / |Y|` with `int_A u^2 = 1/|Y|`.
pub fn solve_homogenized_evp(a_mesh: &Mesh, a_hom: &Matrix2<f64>, cell_area: f64, k: usize) -> Result<Spectrum> {
    if !(cell_area > 0.0) {
        return Err(Error::Precondition(format!(
            "cell area must be positive, got {cell_area}"
        )));
    }
    let bundle = homogenized_bundle(a_mesh, a_hom)?;
    let mut spec = bundle.eigenpairs(k, DEFAULT_TOL)?;
    let scale = 1.0 / cell_area.sqrt();
    for (lam, v) in spec.eigenvalues.iter_mut().zip(spec.eigenvectors.iter_mut()) {
        *lam /= cell_area;
        v.iter_mut().for_each(|x| *x *= scale);
    }
    spec.residuals.iter_mut().for_each(|r| *r *= scale);
    spec.normalization = Normalization::InverseCellArea;
    Ok(spec)
}

pub fn dirichlet_bundle(a_mesh: &Mesh) -> Result<DiscreteOperatorBundle> {
    let s = assemble_stiffness(a_mesh)?;
    let m = assemble_mass(a_mesh)?;
    let cmap = ConstraintMap::dirichlet(a_mesh.num_nodes(), fixed_nodes(a_mesh));
    DiscreteOperatorBundle::new(ProblemKind::DirichletLaplacian, a_mesh.clone(), s, m, None, cmap)
}

/// Dirichlet Laplacian eigenpairs `alpha^j` on `A`.
pub fn solve_dirichlet_laplacian(a_mesh: &Mesh, k: usize) -> Result<Spectrum> {
    dirichlet_bundle(a_mesh)?.eigenpairs(k, DEFAULT_TOL)
}

/// Discrete `K_eps f`: the solution of `(S + R) u = M f`.
pub fn apply_keps(bundle: &DiscreteOperatorBundle, f: &[f64]) -> Result<Vec<f64>> {
    if bundle.kind != ProblemKind::Perforated {
        return Err(Error::Precondition("K_eps needs a perforated bundle".into()));
    }
    bundle.solve_source(f)
}

/// Discrete harmonic extension of `u` into every hole; the result lives on
/// the unperforated mesh `bundle.full_mesh`.
pub fn extend_teps(bundle: &DiscreteOperatorBundle, u: &[f64]) -> Result<Vec<f64>> {
    let full = bundle
        .full_mesh
        .as_ref()
        .ok_or_else(|| Error::Precondition("bundle carries no unperforated mesh".into()))?;
    let n = full.num_nodes();
    if u.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: u.len(),
        });
    }
    let fluid = bundle.mesh.active_nodes();
    let inner: Vec<usize> = (0..n).filter(|&i| !fluid[i]).collect();
    let mut out = u.to_vec();
    if inner.is_empty() {
        return Ok(out);
    }
    let s = assemble_stiffness_on(full, |_| true)?;
    let mut known = u.to_vec();
    for &i in &inner {
        known[i] = 0.0;
    }
    let load: Vec<f64> = s.mul_vec(&known)?.iter().map(|v| -v).collect();
    let cmap = ConstraintMap::dirichlet(n, (0..n).filter(|&i| fluid[i]));
    let red = cmap.reduction()?;
    let x = SourceSolver::new(&red.reduce_matrix(&s)?)?.solve(&red.reduce_load(&load)?)?;
    for (r, &node) in red.reduced_to_full.iter().enumerate() {
        out[node] = x[r];
    }
    Ok(out)
}

/// `u^T (S + R) u / u^T M u`.
pub fn rayleigh_quotient(bundle: &DiscreteOperatorBundle, u: &[f64]) -> Result<f64> {
    let den = bundle.mass.quad_form(u)?;
    if !(den > 0.0) {
        return Err(Error::Precondition("Rayleigh quotient of a zero field".into()));
    }
    Ok(bundle.energy(u, u)? / den)
}
