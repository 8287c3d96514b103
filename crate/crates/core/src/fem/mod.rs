//! P1 bilinear forms, constraint elimination and the discrete norms.

mod assembly;
mod constraint;
mod sparse;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use assembly::{
    assemble_anisotropic_stiffness, assemble_edge_mass_on, assemble_hole_boundary_mass, assemble_mass,
    assemble_mass_on, assemble_robin_mass, assemble_stiffness, assemble_stiffness_on, edge_midpoint, element_gradient,
    p1_gradients,
};
pub use constraint::{apply_constraints, ConstraintKind, ConstraintMap, ReducedSystem, Reduction};
pub use sparse::{SymmetricSparseMatrix, TripletBuilder};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    /// `int u^2`
    pub l2: f64,
    /// `int |grad u|^2`
    pub h1_semi: f64,
    /// `int |grad u|^2 + int_{Sigma \ K} u^2`
    pub eps_norm_sq: f64,
}

pub fn norms(
    s: &SymmetricSparseMatrix,
    m: &SymmetricSparseMatrix,
    r: &SymmetricSparseMatrix,
    u: &[f64],
) -> Result<Norms> {
    let h1_semi = s.quad_form(u)?;
    Ok(Norms {
        l2: m.quad_form(u)?,
        h1_semi,
        eps_norm_sq: h1_semi + r.quad_form(u)?,
    })
}
