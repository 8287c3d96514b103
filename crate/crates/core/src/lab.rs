//! Randomized stress tests of the quantitative lemmas.
//!
//! Every check reports the worst ratio of the two sides of an inequality
//! over its samples. Ratios are quadratic in the field on both sides, so
//! they are invariant under scaling of the field.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cell::CellSolution;
use crate::eigensolve::Spectrum;
use crate::error::{Error, Result};
use crate::fem::{
    assemble_edge_mass_on, assemble_hole_boundary_mass, assemble_mass, assemble_mass_on, assemble_stiffness_on,
    SymmetricSparseMatrix,
};
use crate::geometry::{build_tiled_mesh, cells_per_side, CellMesh, EdgeTag, Mesh, Point, Rect, Region};
use crate::spectral::{DiscreteOperatorBundle, ProblemKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabRow {
    pub check: String,
    /// `eps` for the homogenization checks, `delta` for the strip check.
    pub param: f64,
    pub ratio: f64,
    pub samples: usize,
    /// Samples whose denominator vanished.
    pub skipped: usize,
    pub seed: u64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabReport {
    pub rows: Vec<LabRow>,
}

impl LabReport {
    pub fn push(&mut self, row: LabRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = LabRow>) {
        self.rows.extend(rows);
    }

    pub fn rows_of<'a>(&'a self, check: &'a str) -> impl Iterator<Item = &'a LabRow> + 'a {
        self.rows.iter().filter(move |r| r.check == check)
    }

    /// `max/min` of the worst ratios of one check across its rows.
    pub fn spread(&self, check: &str) -> Option<f64> {
        spread(self.rows_of(check).map(|r| r.ratio))
    }
}

pub fn spread(ratios: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (lo, hi, n) = ratios.into_iter().fold((f64::INFINITY, 0.0f64, 0), |(lo, hi, n), r| {
        (lo.min(r), hi.max(r), n + 1)
    });
    (n > 0).then(|| if lo > 0.0 { hi / lo } else { f64::INFINITY })
}

/// Seed of one check, derived from the master seed and a stream tag.
pub fn derive_seed(master: u64, tag: &str, param: f64) -> u64 {
    let mut z = master ^ param.to_bits().rotate_left(17);
    for b in tag.bytes() {
        z = z.rotate_left(5) ^ u64::from(b);
    }
    // splitmix64 finalizer
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn require_perforated(bundle: &DiscreteOperatorBundle) -> Result<f64> {
    match (bundle.kind, bundle.eps()) {
        (ProblemKind::Perforated, Some(eps)) => Ok(eps),
        _ => Err(Error::Precondition("check needs a perforated bundle".into())),
    }
}

/// Independent standard normal nodal values, zero on constrained nodes.
pub fn random_nodal_field(bundle: &DiscreteOperatorBundle, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let u: Vec<f64> = (0..bundle.num_nodes()).map(|_| StandardNormal.sample(rng)).collect();
    bundle.project(&u)
}

fn worst(check: &str, param: f64, seed: u64, samples: usize, ratios: impl Iterator<Item = Option<f64>>) -> LabRow {
    let mut ratio = 0.0f64;
    let mut skipped = 0;
    for r in ratios {
        match r {
            Some(r) => ratio = ratio.max(r),
            None => skipped += 1,
        }
    }
    LabRow {
        check: check.into(),
        param,
        ratio,
        samples,
        skipped,
        seed,
        pass: ratio.is_finite() && skipped < samples,
    }
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0 && den.is_finite()).then(|| num / den)
}

/// Trace inequality `int_Sigma u^2 <= c (eps^-1 int u^2 + eps int |grad u|^2)`.
pub fn check_trace(bundle: &DiscreteOperatorBundle, n_samples: usize, seed: u64) -> Result<LabRow> {
    let eps = require_perforated(bundle)?;
    let sigma = assemble_hole_boundary_mass(&bundle.mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields: Vec<Vec<f64>> = (0..n_samples)
        .map(|_| random_nodal_field(bundle, &mut rng))
        .collect::<Result<_>>()?;
    let ratios = fields
        .iter()
        .map(|u| trace_ratio(bundle, &sigma, eps, u))
        .collect::<Result<Vec<_>>>()?;
    Ok(worst("trace", eps, seed, n_samples, ratios.into_iter()))
}

pub fn trace_ratio(
    bundle: &DiscreteOperatorBundle,
    sigma: &SymmetricSparseMatrix,
    eps: f64,
    u: &[f64],
) -> Result<Option<f64>> {
    let num = sigma.quad_form(u)?;
    let den = bundle.mass.quad_form(u)? / eps + eps * bundle.stiffness.quad_form(u)?;
    Ok(ratio(num, den))
}

/// Lattice test: the closed cell `eps (i + Q)` meets the interior of `K`
/// in a set of positive area.
fn cell_meets_k(cell: [u32; 2], eps: f64, k: Rect) -> bool {
    let (x0, y0) = (cell[0] as f64 * eps, cell[1] as f64 * eps);
    let (x1, y1) = (x0 + eps, y0 + eps);
    x0 < k.x1 && x1 > k.x0 && y0 < k.y1 && y1 > k.y0
}

/// Forms restricted to `Omega_eps^K`: fluid triangles outside `K` and the
/// hole boundaries of the cells lying in `Omega \ K`.
pub struct VolsupForms {
    pub mass: SymmetricSparseMatrix,
    pub stiffness: SymmetricSparseMatrix,
    pub sigma: SymmetricSparseMatrix,
}

pub fn volsup_forms(mesh: &Mesh, eps: f64, k: Rect) -> Result<VolsupForms> {
    let keep = |t: usize| {
        let tri = &mesh.triangles[t];
        tri.region == Region::Fluid
            && match tri.cell {
                Some(c) => !cell_meets_k(c, eps, k),
                None => !k.contains(mesh.centroid(t)),
            }
    };
    if !(0..mesh.triangles.len()).any(keep) {
        return Err(Error::Config("Omega_eps^K is empty; K covers every cell".into()));
    }
    Ok(VolsupForms {
        mass: assemble_mass_on(mesh, keep)?,
        stiffness: assemble_stiffness_on(mesh, keep)?,
        sigma: assemble_edge_mass_on(mesh, |e| match e.tag {
            EdgeTag::HoleBoundary(c) => !cell_meets_k(c, eps, k),
            EdgeTag::Outer => false,
        })?,
    })
}

/// `|C*/eps int w^2 - int_Sigma w^2| / int |grad w|^2` on `Omega_eps^K`.
pub fn volsup_ratio(forms: &VolsupForms, c_star: f64, eps: f64, w: &[f64]) -> Result<Option<f64>> {
    let mass = forms.mass.quad_form(w)?;
    let lhs = (c_star / eps * mass - forms.sigma.quad_form(w)?).abs();
    let rhs = forms.stiffness.quad_form(w)?;
    // constants leave only roundoff in the gradient term
    if rhs <= 1e-12 * mass / (eps * eps) {
        return Ok(None);
    }
    Ok(ratio(lhs, rhs))
}

/// Volume-surface averaging inequality on `Omega_eps^K`.
pub fn check_volsup(
    bundle: &DiscreteOperatorBundle,
    sol: &CellSolution,
    k: Rect,
    n_samples: usize,
    seed: u64,
) -> Result<LabRow> {
    let eps = require_perforated(bundle)?;
    let forms = volsup_forms(&bundle.mesh, eps, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let w = random_nodal_field(bundle, &mut rng)?;
        ratios.push(volsup_ratio(&forms, sol.c_star, eps, &w)?);
    }
    Ok(worst("volsup", eps, seed, n_samples, ratios.into_iter()))
}

/// Oscillating-coefficient estimate `|int chi^1(x/eps) u v| <= c eps ||u||_H1 ||v||_H1`.
///
/// The integral runs over the fluid part of the tiled mesh, where
/// `chi^1(x/eps)` is the exact nodal copy of the cell solution; the norms
/// are taken over the whole square.
pub fn check_periodic_osc(
    sol: &CellSolution,
    cell: &CellMesh,
    eps_list: &[f64],
    u: &dyn Fn(Point) -> f64,
    v: &dyn Fn(Point) -> f64,
) -> Result<Vec<LabRow>> {
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let full = build_tiled_mesh(cells_per_side(eps)?, cell, true)?;
        let chi = tiled_field(&sol.chi[0], cell, &full)?;
        let uu: Vec<f64> = full.nodes.iter().map(|&p| u(p)).collect();
        let vv: Vec<f64> = full.nodes.iter().map(|&p| v(p)).collect();
        // the three-factor product is interpolated, then integrated exactly
        let prod: Vec<f64> = (0..uu.len()).map(|i| chi[i] * uu[i] * vv[i]).collect();
        let fluid = assemble_mass(&full)?;
        let integral = fluid.mul_vec(&prod)?.iter().sum::<f64>();
        let s = assemble_stiffness_on(&full, |_| true)?;
        let m = assemble_mass_on(&full, |_| true)?;
        let h1 = |x: &[f64]| -> Result<f64> { Ok((s.quad_form(x)? + m.quad_form(x)?).sqrt()) };
        let r = ratio(integral.abs(), eps * h1(&uu)? * h1(&vv)?);
        rows.push(LabRow {
            check: "periodic_osc".into(),
            param: eps,
            ratio: r.unwrap_or(0.0),
            samples: 1,
            skipped: usize::from(r.is_none()),
            seed: 0,
            pass: r.is_none_or(f64::is_finite),
        });
    }
    Ok(rows)
}

/// Copies a template nodal field onto every cell of a tiled mesh built with
/// its holes, whose triangles come cell by cell in template order.
fn tiled_field(values: &[f64], cell: &CellMesh, tiled: &Mesh) -> Result<Vec<f64>> {
    let nt = cell.mesh.triangles.len();
    if values.len() != cell.mesh.num_nodes() || !tiled.triangles.len().is_multiple_of(nt) {
        return Err(Error::Dimension {
            expected: cell.mesh.num_nodes(),
            got: values.len(),
        });
    }
    let mut out = vec![0.0; tiled.num_nodes()];
    for (k, t) in tiled.triangles.iter().enumerate() {
        let tmpl = cell.mesh.triangles[k % nt].nodes;
        for (&node, &src) in t.nodes.iter().zip(&tmpl) {
            out[node] = values[src];
        }
    }
    Ok(out)
}

/// Strip Poincare inequality `int_strip u^2 <= C delta^2 int_strip |grad u|^2`.
pub fn check_strip_poincare(a_mesh: &Mesh, a_rect: Rect, u: &[f64], deltas: &[f64]) -> Result<Vec<LabRow>> {
    let mut rows = Vec::new();
    for &delta in deltas {
        let keep = |t: usize| a_rect.inner_distance(a_mesh.centroid(t)) <= delta;
        if !(0..a_mesh.triangles.len()).any(keep) {
            continue;
        }
        let m = assemble_mass_on(a_mesh, keep)?;
        let s = assemble_stiffness_on(a_mesh, keep)?;
        let r = ratio(m.quad_form(u)?, delta * delta * s.quad_form(u)?);
        rows.push(LabRow {
            check: "strip_poincare".into(),
            param: delta,
            ratio: r.unwrap_or(0.0),
            samples: 1,
            skipped: usize::from(r.is_none()),
            seed: 0,
            pass: r.is_none_or(f64::is_finite),
        });
    }
    Ok(rows)
}

/// Uniform eigenvalue bounds over an `eps` sweep and the upper bound
/// `lambda^1_eps <= 1.05 alpha^1_h` at the two smallest `eps`.
pub fn check_eigen_bounds(sweep: &[(f64, Spectrum)], dirichlet: &Spectrum) -> Result<LabRow> {
    if sweep.len() < 2 {
        return Err(Error::Precondition(
            "eigenvalue bounds need at least two eps values".into(),
        ));
    }
    let alpha1 = *dirichlet
        .eigenvalues
        .first()
        .ok_or_else(|| Error::Precondition("empty Dirichlet spectrum".into()))?;
    let min1 = sweep
        .iter()
        .map(|(_, s)| s.eigenvalues[0])
        .fold(f64::INFINITY, f64::min);
    let finite = sweep.iter().all(|(_, s)| s.eigenvalues.iter().all(|l| l.is_finite()));
    let mut by_eps: Vec<&(f64, Spectrum)> = sweep.iter().collect();
    by_eps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let worst_upper = by_eps[..2]
        .iter()
        .map(|(_, s)| s.eigenvalues[0] / alpha1)
        .fold(0.0, f64::max);
    Ok(LabRow {
        check: "eigen_bounds".into(),
        param: by_eps[0].0,
        ratio: worst_upper,
        samples: sweep.len(),
        skipped: 0,
        seed: 0,
        pass: min1 > 0.0 && finite && worst_upper <= 1.05,
    })
}
