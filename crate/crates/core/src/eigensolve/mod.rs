//! Symmetric generalized eigenproblems `A u = lambda B u` and SPD solves.
//!
//! Small problems go through a dense Cholesky reduction. Larger ones use
//! shift-invert block subspace iteration with Rayleigh-Ritz projection on
//! top of an envelope Cholesky factorization. Every path is deterministic.

mod cholesky;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::SymmetricSparseMatrix;

pub use cholesky::{rcm_ordering, EnvelopeCholesky};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Problems up to this size are solved densely.
pub const DENSE_LIMIT: usize = 600;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    BOrthonormal,
    /// `B`-norm squared equal to `1/|Y|` (homogenized eigenfunctions).
    InverseCellArea,
}

/// Ascending eigenpairs with `B`-orthonormal eigenvectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// `||A u - lambda B u||_2` per pair.
    pub residuals: Vec<f64>,
    pub normalization: Normalization,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the random start block.
    pub seed: u64,
    pub dense_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: 1000,
            seed: 0x5eed,
            dense_limit: DENSE_LIMIT,
        }
    }
}

/// The `k` smallest eigenpairs of `A u = lambda B u`.
pub fn solve_gevp(a: &SymmetricSparseMatrix, b: &SymmetricSparseMatrix, k: usize, tol: f64) -> Result<Spectrum> {
    solve_gevp_with(
        a,
        b,
        k,
        &SolverOptions {
            tol,
            ..SolverOptions::default()
        },
    )
}

pub fn solve_gevp_with(
    a: &SymmetricSparseMatrix,
    b: &SymmetricSparseMatrix,
    k: usize,
    opts: &SolverOptions,
) -> Result<Spectrum> {
    let n = a.dim();
    if b.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: b.dim(),
        });
    }
    if k == 0 || k >= n {
        return Err(Error::Precondition(format!(
            "need 1 <= k < dimension, got k = {k}, n = {n}"
        )));
    }
    let block = block_size(k).min(n);
    let (values, vectors) = if n <= opts.dense_limit || 2 * block >= n {
        let (vals, vecs) = dense_gevp(&a.to_dense(), &b.to_dense())?;
        (
            vals[..k].to_vec(),
            (0..k).map(|j| vecs.column(j).iter().copied().collect()).collect(),
        )
    } else {
        subspace_iteration(a, b, k, block, opts)?
    };
    finish(a, b, values, vectors, opts.tol)
}

/// Every eigenpair of a small problem, ascending.
pub fn solve_gevp_dense(a: &SymmetricSparseMatrix, b: &SymmetricSparseMatrix) -> Result<Spectrum> {
    let (vals, vecs) = dense_gevp(&a.to_dense(), &b.to_dense())?;
    let vectors = (0..vals.len())
        .map(|j| vecs.column(j).iter().copied().collect())
        .collect();
    finish(a, b, vals, vectors, f64::INFINITY)
}

fn block_size(k: usize) -> usize {
    (2 * k).max(k + 8)
}

/// Dense `A x = l B x` by reduction `L^-1 A L^-T`; columns are `B`-orthonormal.
fn dense_gevp(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solver("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv_a = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Solver("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| Error::Solver("singular Cholesky factor".into()))?;
    let c = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| eig.eigenvectors[(r, idx[c])]);
    let x = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::Solver("singular Cholesky factor".into()))?;
    Ok((vals, x))
}

fn apply_block(m: &SymmetricSparseMatrix, cols: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    cols.iter().map(|c| m.mul_vec(c)).collect()
}

fn gram(x: &[Vec<f64>], y: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), y.len(), |i, j| dot(&x[i], &y[j]))
}

fn combine(cols: &[Vec<f64>], coef: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = cols[0].len();
    (0..coef.ncols())
        .map(|j| {
            let mut out = vec![0.0; n];
            for (i, c) in cols.iter().enumerate() {
                let w = coef[(i, j)];
                if w != 0.0 {
                    out.iter_mut().zip(c).for_each(|(o, v)| *o += w * v);
                }
            }
            out
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn subspace_iteration(
    a: &SymmetricSparseMatrix,
    b: &SymmetricSparseMatrix,
    k: usize,
    p: usize,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.dim();
    EnvelopeCholesky::new(b).map_err(|_| Error::Solver("mass matrix is not positive definite".into()))?;
    let factor = EnvelopeCholesky::new(a)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut best = vec![f64::INFINITY; k];
    for iter in 1..=opts.max_iter {
        let bx = apply_block(b, &x)?;
        let y = factor.solve_many(&bx)?;
        let ay = apply_block(a, &y)?;
        let by = apply_block(b, &y)?;
        let (vals, vecs) = dense_gevp(&gram(&y, &ay), &gram(&y, &by))
            .map_err(|e| Error::Solver(format!("Rayleigh-Ritz step failed: {e}")))?;
        x = combine(&y, &vecs);
        let ax = combine(&ay, &vecs);
        let bxn = combine(&by, &vecs);
        let res: Vec<f64> = (0..k)
            .map(|j| {
                ax[j]
                    .iter()
                    .zip(&bxn[j])
                    .map(|(u, v)| (u - vals[j] * v).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        for (b, r) in best.iter_mut().zip(&res) {
            *b = b.min(*r);
        }
        if res.iter().all(|&r| r <= opts.tol) {
            return Ok((vals[..k].to_vec(), x[..k].to_vec()));
        }
        if iter == opts.max_iter {
            break;
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iter,
        residuals: best,
    })
}

/// Applies the sign convention, `B`-normalizes and records residuals.
fn finish(
    a: &SymmetricSparseMatrix,
    b: &SymmetricSparseMatrix,
    values: Vec<f64>,
    mut vectors: Vec<Vec<f64>>,
    tol: f64,
) -> Result<Spectrum> {
    let mut residuals = Vec::with_capacity(values.len());
    for (lam, v) in values.iter().zip(vectors.iter_mut()) {
        let bv = b.mul_vec(v)?;
        let norm = dot(v, &bv).sqrt();
        let flip = v.iter().find(|x| x.abs() > 1e-8).is_some_and(|&x| x < 0.0);
        let s = if flip { -1.0 / norm } else { 1.0 / norm };
        v.iter_mut().for_each(|x| *x *= s);
        let av = a.mul_vec(v)?;
        let bv = b.mul_vec(v)?;
        let r = av
            .iter()
            .zip(&bv)
            .map(|(p, q)| (p - lam * q).powi(2))
            .sum::<f64>()
            .sqrt();
        residuals.push(r);
    }
    if let Some((j, r)) = residuals.iter().enumerate().find(|(_, &r)| !(r <= tol)) {
        return Err(Error::Solver(format!("eigenpair {j} has residual {r:e}")));
    }
    Ok(Spectrum {
        eigenvalues: values,
        eigenvectors: vectors,
        residuals,
        normalization: Normalization::BOrthonormal,
    })
}

/// Reusable factorization of an SPD matrix for repeated source solves.
#[derive(Clone, Debug)]
pub struct SourceSolver {
    a: SymmetricSparseMatrix,
    factor: EnvelopeCholesky,
}

impl SourceSolver {
    pub fn new(a: &SymmetricSparseMatrix) -> Result<Self> {
        let factor =
            EnvelopeCholesky::new(a).map_err(|e| Error::Solver(format!("singular or indefinite system: {e}")))?;
        Ok(Self { a: a.clone(), factor })
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// Solves `A u = rhs` with one step of iterative refinement when the
    /// relative residual exceeds `1e-12`.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut u = self.factor.solve(rhs)?;
        let scale = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if scale == 0.0 {
            return Ok(u);
        }
        for _ in 0..3 {
            let au = self.a.mul_vec(&u)?;
            let r: Vec<f64> = rhs.iter().zip(&au).map(|(b, v)| b - v).collect();
            let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rn <= 1e-12 * scale {
                return Ok(u);
            }
            let du = self.factor.solve(&r)?;
            u.iter_mut().zip(&du).for_each(|(a, d)| *a += d);
        }
        let au = self.a.mul_vec(&u)?;
        let rn = rhs.iter().zip(&au).map(|(b, v)| (b - v).powi(2)).sum::<f64>().sqrt();
        if rn > 1e-10 * scale {
            return Err(Error::Solver(format!(
                "source solve residual {:e} exceeds tolerance",
                rn / scale
            )));
        }
        Ok(u)
    }
}

/// Solves `A u = rhs` for symmetric positive definite `A`.
pub fn solve_source(a: &SymmetricSparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    SourceSolver::new(a)?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_problem() {
        let a = SymmetricSparseMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        let b = SymmetricSparseMatrix::identity(3);
        let s = solve_gevp(&a, &b, 2, 1e-12).unwrap();
        assert_eq!(s.eigenvalues.len(), 2);
        assert!((s.eigenvalues[0] - 1.0).abs() < 1e-14 && (s.eigenvalues[1] - 2.0).abs() < 1e-14);
        assert!((s.eigenvectors[0][0] - 1.0).abs() < 1e-14);
        assert!((s.eigenvectors[1][1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn k_must_be_smaller_than_dimension() {
        let a = SymmetricSparseMatrix::identity(3);
        assert!(matches!(solve_gevp(&a, &a, 3, 1e-9), Err(Error::Precondition(_))));
        assert!(matches!(solve_gevp(&a, &a, 0, 1e-9), Err(Error::Precondition(_))));
    }

    #[test]
    fn indefinite_mass_is_rejected() {
        let a = SymmetricSparseMatrix::identity(3);
        let b = SymmetricSparseMatrix::from_diagonal(&[1.0, -1.0, 1.0]);
        assert!(matches!(solve_gevp(&a, &b, 1, 1e-9), Err(Error::Solver(_))));
    }

    #[test]
    fn source_solve_identity_and_zero() {
        let a = SymmetricSparseMatrix::identity(4);
        assert_eq!(
            solve_source(&a, &[1.0, 2.0, 3.0, 4.0]).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0]
        );
        assert_eq!(solve_source(&a, &[0.0; 4]).unwrap(), vec![0.0; 4]);
    }
}
