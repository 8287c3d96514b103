use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::fem::SymmetricSparseMatrix;

/// Reverse Cuthill-McKee ordering; `perm[new] = old`.
pub fn rcm_ordering(a: &SymmetricSparseMatrix) -> Vec<usize> {
    let adj = a.graph();
    let n = adj.len();
    let deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for start in 0..n {
        if visited[start] {
            continue;
        }
        let root = pseudo_peripheral(&adj, &deg, start);
        visited[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (deg[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Level structure rooted at `root`: (eccentricity, last level).
fn levels(adj: &[Vec<usize>], root: usize) -> (usize, Vec<usize>) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = vec![root];
    let mut depth = 0;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                if dist[w] > depth {
                    depth = dist[w];
                    last.clear();
                }
                if dist[w] == depth {
                    last.push(w);
                }
                queue.push_back(w);
            }
        }
    }
    (depth, last)
}

fn pseudo_peripheral(adj: &[Vec<usize>], deg: &[usize], start: usize) -> usize {
    let mut root = start;
    let (mut ecc, mut last) = levels(adj, root);
    loop {
        let cand = *last.iter().min_by_key(|&&w| (deg[w], w)).unwrap_or(&root);
        let (e, l) = levels(adj, cand);
        if e <= ecc {
            return root;
        }
        root = cand;
        ecc = e;
        last = l;
    }
}

/// Cholesky factor `P A P^T = L L^T` in envelope (variable band) storage.
#[derive(Clone, Debug)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    /// first stored column of each row of `L`
    first: Vec<usize>,
    /// offset of `L[i][first[i]]` in `data`
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn new(a: &SymmetricSparseMatrix) -> Result<Self> {
        Self::with_ordering(a, rcm_ordering(a))
    }

    pub fn with_ordering(a: &SymmetricSparseMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        if perm.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: perm.len(),
            });
        }
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                first[new] = first[new].min(inv[j]);
            }
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for (new, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let c = inv[j];
                if c <= new {
                    data[start[new] + c - first[new]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let si = start[i];
            for j in fi..i {
                let fj = first[j];
                let sj = start[j];
                let k0 = fi.max(fj);
                let mut s = data[si + j - fi];
                let li = &data[si + k0 - fi..si + j - fi];
                let lj = &data[sj + k0 - fj..sj + j - fj];
                s -= dot(li, lj);
                data[si + j - fi] = s / data[sj + j - fj];
            }
            let row = &data[si..si + i - fi];
            let d = data[si + i - fi] - dot(row, row);
            if !(d > 0.0) {
                return Err(Error::Solver(format!(
                    "matrix is not positive definite (pivot {d:e} at row {})",
                    perm[i]
                )));
            }
            data[si + i - fi] = d.sqrt();
        }
        Ok(Self {
            perm,
            first,
            start,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of `L`.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: b.len(),
            });
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let (fi, si) = (self.first[i], self.start[i]);
            let s = dot(&self.data[si..si + i - fi], &y[fi..i]);
            y[i] = (y[i] - s) / self.data[si + i - fi];
        }
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.start[i]);
            y[i] /= self.data[si + i - fi];
            let yi = y[i];
            for (k, l) in self.data[si..si + i - fi].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }

    /// Solves for several right-hand sides at once, streaming the factor a
    /// single time for the whole block.
    pub fn solve_many(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let n = self.dim();
        let p = rhs.len();
        if let Some(bad) = rhs.iter().find(|b| b.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                got: bad.len(),
            });
        }
        // row-major n x p buffer so each factor entry touches p contiguous values
        let mut y = vec![0.0; n * p];
        for (new, &old) in self.perm.iter().enumerate() {
            for (c, b) in rhs.iter().enumerate() {
                y[new * p + c] = b[old];
            }
        }
        let mut acc = vec![0.0; p];
        for i in 0..n {
            let (fi, si) = (self.first[i], self.start[i]);
            acc.iter_mut().for_each(|a| *a = 0.0);
            for (k, &l) in self.data[si..si + i - fi].iter().enumerate() {
                let row = &y[(fi + k) * p..(fi + k + 1) * p];
                acc.iter_mut().zip(row).for_each(|(a, v)| *a += l * v);
            }
            let d = self.data[si + i - fi];
            for c in 0..p {
                y[i * p + c] = (y[i * p + c] - acc[c]) / d;
            }
        }
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.start[i]);
            let d = self.data[si + i - fi];
            for c in 0..p {
                y[i * p + c] /= d;
            }
            let (head, tail) = y.split_at_mut(i * p);
            let yi = &tail[..p];
            for (k, &l) in self.data[si..si + i - fi].iter().enumerate() {
                let row = &mut head[(fi + k) * p..(fi + k + 1) * p];
                row.iter_mut().zip(yi).for_each(|(r, v)| *r -= l * v);
            }
        }
        let mut out = vec![vec![0.0; n]; p];
        for (new, &old) in self.perm.iter().enumerate() {
            for (c, o) in out.iter_mut().enumerate() {
                o[old] = y[new * p + c];
            }
        }
        Ok(out)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
