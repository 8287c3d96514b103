use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::sparse::{SymmetricSparseMatrix, TripletBuilder};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    Dirichlet,
    Periodic,
}

/// Homogeneous Dirichlet nodes plus, for periodic problems, slave-to-master
/// identifications. Fixed nodes take the value zero; a periodic problem may
/// also fix nodes (pinned or inactive ones).
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintMap {
    pub kind: ConstraintKind,
    pub num_nodes: usize,
    pub fixed: Vec<usize>,
    /// `(slave, master)` pairs.
    pub pairs: Vec<(usize, usize)>,
}

impl ConstraintMap {
    pub fn none(num_nodes: usize) -> Self {
        Self::dirichlet(num_nodes, [])
    }

    pub fn dirichlet(num_nodes: usize, nodes: impl IntoIterator<Item = usize>) -> Self {
        let mut fixed: Vec<usize> = nodes.into_iter().collect();
        fixed.sort_unstable();
        fixed.dedup();
        Self {
            kind: ConstraintKind::Dirichlet,
            num_nodes,
            fixed,
            pairs: Vec::new(),
        }
    }

    pub fn periodic(num_nodes: usize, pairs: Vec<(usize, usize)>) -> Self {
        Self {
            kind: ConstraintKind::Periodic,
            num_nodes,
            fixed: Vec::new(),
            pairs,
        }
    }

    pub fn with_fixed(mut self, nodes: impl IntoIterator<Item = usize>) -> Self {
        self.fixed.extend(nodes);
        self.fixed.sort_unstable();
        self.fixed.dedup();
        self
    }

    /// Masters that keep a degree of freedom, ascending.
    pub fn retained_masters(&self) -> Vec<usize> {
        let mut m: Vec<usize> = self.pairs.iter().map(|&(_, m)| m).collect();
        m.sort_unstable();
        m.dedup();
        m
    }

    pub fn reduction(&self) -> Result<Reduction> {
        let n = self.num_nodes;
        let bad = |msg: String| Err(Error::Constraint(msg));
        let mut fixed = vec![false; n];
        for &i in &self.fixed {
            if i >= n {
                return bad(format!("fixed node {i} out of range {n}"));
            }
            fixed[i] = true;
        }
        let mut master_of: BTreeMap<usize, usize> = BTreeMap::new();
        for &(s, m) in &self.pairs {
            if s >= n || m >= n {
                return bad(format!("periodic pair ({s}, {m}) out of range {n}"));
            }
            if s == m {
                return bad(format!("node {s} paired with itself"));
            }
            if let Some(&old) = master_of.get(&s) {
                if old != m {
                    return bad(format!("node {s} has masters {old} and {m}"));
                }
            }
            master_of.insert(s, m);
        }
        for (&s, &m) in &master_of {
            if master_of.contains_key(&m) {
                return bad(format!("node {m} is both master and slave"));
            }
            if fixed[s] || fixed[m] {
                return bad(format!("periodic pair ({s}, {m}) touches a fixed node"));
            }
        }
        let mut full_to_reduced = vec![None; n];
        let mut reduced_to_full = Vec::new();
        for i in 0..n {
            if !fixed[i] && !master_of.contains_key(&i) {
                full_to_reduced[i] = Some(reduced_to_full.len());
                reduced_to_full.push(i);
            }
        }
        for (&s, &m) in &master_of {
            full_to_reduced[s] = full_to_reduced[m];
        }
        if reduced_to_full.is_empty() {
            return bad("degenerate constraint set: no free degrees of freedom remain".into());
        }
        Ok(Reduction {
            full_to_reduced,
            reduced_to_full,
        })
    }
}

/// Index maps between full nodal vectors and reduced unknowns.
#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    /// Reduced index of each node; slaves share their master's index and
    /// fixed nodes map to `None`.
    pub full_to_reduced: Vec<Option<usize>>,
    /// Representative node of each reduced unknown.
    pub reduced_to_full: Vec<usize>,
}

impl Reduction {
    pub fn dim(&self) -> usize {
        self.reduced_to_full.len()
    }

    pub fn num_full(&self) -> usize {
        self.full_to_reduced.len()
    }

    fn check(&self, len: usize, expected: usize) -> Result<()> {
        if len != expected {
            return Err(Error::Dimension { expected, got: len });
        }
        Ok(())
    }

    /// `P^T A P` where `P` expands reduced vectors to full ones.
    pub fn reduce_matrix(&self, a: &SymmetricSparseMatrix) -> Result<SymmetricSparseMatrix> {
        self.check(a.dim(), self.num_full())?;
        let mut b = TripletBuilder::new(self.dim());
        for (i, j, v) in a.triplets().filter(|&(i, j, _)| i <= j) {
            if let (Some(r), Some(c)) = (self.full_to_reduced[i], self.full_to_reduced[j]) {
                // an off-diagonal pair that folds onto one unknown contributes twice
                let w = if i != j && r == c { 2.0 * v } else { v };
                b.add(r, c, w);
            }
        }
        Ok(b.build())
    }

    /// `P^T f`: slave loads are added to their master.
    pub fn reduce_load(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f.len(), self.num_full())?;
        let mut out = vec![0.0; self.dim()];
        for (i, &v) in f.iter().enumerate() {
            if let Some(r) = self.full_to_reduced[i] {
                out[r] += v;
            }
        }
        Ok(out)
    }

    /// Reads the reduced unknowns off a full vector (representative values).
    pub fn restrict(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u.len(), self.num_full())?;
        Ok(self.reduced_to_full.iter().map(|&i| u[i]).collect())
    }

    /// `P x`: slaves copy their master and fixed nodes are zero.
    pub fn expand(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x.len(), self.dim())?;
        Ok(self.full_to_reduced.iter().map(|r| r.map_or(0.0, |r| x[r])).collect())
    }
}

/// Matrices restricted to the constrained space.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub stiffness: SymmetricSparseMatrix,
    pub mass: SymmetricSparseMatrix,
    pub robin: Option<SymmetricSparseMatrix>,
    pub reduction: Reduction,
}

pub fn apply_constraints(
    s: &SymmetricSparseMatrix,
    m: &SymmetricSparseMatrix,
    r: Option<&SymmetricSparseMatrix>,
    cmap: &ConstraintMap,
) -> Result<ReducedSystem> {
    let reduction = cmap.reduction()?;
    Ok(ReducedSystem {
        stiffness: reduction.reduce_matrix(s)?,
        mass: reduction.reduce_matrix(m)?,
        robin: r.map(|r| reduction.reduce_matrix(r)).transpose()?,
        reduction,
    })
}
