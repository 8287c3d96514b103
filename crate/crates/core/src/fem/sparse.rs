use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Accumulates symmetric contributions. Only the upper triangle is stored;
/// the lower triangle is a mirror, so `(i, j)` and `(j, i)` are bitwise equal.
#[derive(Clone, Debug)]
pub struct TripletBuilder {
    dim: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl TripletBuilder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push((r as u32, c as u32, v));
    }

    pub fn build(mut self) -> SymmetricSparseMatrix {
        // stable sort keeps insertion order within an entry, so summation is
        // reproducible run to run
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut upper: Vec<(u32, u32, f64)> = Vec::with_capacity(self.entries.len());
        for (r, c, v) in self.entries {
            match upper.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => upper.push((r, c, v)),
            }
        }
        let n = self.dim;
        let mut counts = vec![0usize; n];
        for &(r, c, _) in &upper {
            counts[r as usize] += 1;
            if r != c {
                counts[c as usize] += 1;
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + counts[i];
        }
        let mut fill = row_ptr[..n].to_vec();
        let mut cols = vec![0u32; row_ptr[n]];
        let mut vals = vec![0.0; row_ptr[n]];
        // upper entries arrive sorted by (row, col); lower mirrors of row c
        // arrive sorted by their column r, and all precede the diagonal of c
        for &(r, c, v) in &upper {
            if r != c {
                let k = fill[c as usize];
                cols[k] = r;
                vals[k] = v;
                fill[c as usize] += 1;
            }
            let k = fill[r as usize];
            cols[k] = c;
            vals[k] = v;
            fill[r as usize] += 1;
        }
        SymmetricSparseMatrix {
            dim: n,
            row_ptr,
            cols,
            vals,
        }
    }
}

/// Symmetric matrix in compressed-row form with both triangles stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricSparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SymmetricSparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        TripletBuilder::new(dim).build()
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diagonal(&vec![1.0; dim])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut b = TripletBuilder::new(d.len());
        for (i, &v) in d.iter().enumerate() {
            b.add(i, i, v);
        }
        b.build()
    }

    /// Builds from a dense matrix, reading the upper triangle only.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let mut b = TripletBuilder::new(a.nrows());
        for i in 0..a.nrows() {
            for j in i..a.ncols() {
                if a[(i, j)] != 0.0 {
                    b.add(i, j, a[(i, j)]);
                }
            }
        }
        Ok(b.build())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored entries counting both triangles.
    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[s..e]
            .iter()
            .zip(&self.vals[s..e])
            .map(|(&c, &v)| (c as usize, v))
    }

    /// All stored `(row, col, value)` triplets in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[s..e].binary_search(&(j as u32)) {
            Ok(k) => self.vals[s + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: len,
            });
        }
        Ok(())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok((0..self.dim)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect())
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        let ay = self.mul_vec(y)?;
        Ok(x.iter().zip(&ay).map(|(a, b)| a * b).sum())
    }

    pub fn quad_form(&self, x: &[f64]) -> Result<f64> {
        self.bilinear(x, x)
    }

    /// `alpha * self + beta * other`, preserving exact symmetry.
    pub fn lin_comb(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        self.check_len(other.dim)?;
        let mut b = TripletBuilder::new(self.dim);
        for (i, j, v) in self.triplets().filter(|&(i, j, _)| i <= j) {
            b.add(i, j, alpha * v);
        }
        for (i, j, v) in other.triplets().filter(|&(i, j, _)| i <= j) {
            b.add(i, j, beta * v);
        }
        Ok(b.build())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.lin_comb(1.0, other, 1.0)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut m = self.clone();
        m.vals.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    pub fn is_symmetric(&self) -> bool {
        self.triplets().all(|(i, j, v)| self.get(j, i).to_bits() == v.to_bits())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            a[(i, j)] = v;
        }
        a
    }

    /// Sorted adjacency lists without the diagonal.
    pub fn graph(&self) -> Vec<Vec<usize>> {
        (0..self.dim)
            .map(|i| self.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
            .collect()
    }

    /// Writes `dim dim nnz` followed by one-based `i j v` triplets of the
    /// upper triangle.
    pub fn write_coo(&self, mut out: impl Write) -> Result<()> {
        let upper: Vec<_> = self.triplets().filter(|&(i, j, _)| i <= j).collect();
        writeln!(out, "{} {} {}", self.dim, self.dim, upper.len())?;
        for (i, j, v) in upper {
            writeln!(out, "{} {} {:?}", i + 1, j + 1, v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_mirrored() {
        let mut b = TripletBuilder::new(3);
        b.add(0, 1, 1.0);
        b.add(1, 0, 2.0);
        b.add(2, 2, 5.0);
        let m = b.build();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
        assert_eq!(m.get(2, 2), 5.0);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.nnz(), 3);
        assert!(m.is_symmetric());
    }

    #[test]
    fn rows_are_sorted() {
        let mut b = TripletBuilder::new(4);
        for (i, j) in [(3, 0), (0, 2), (1, 3), (0, 0), (2, 1)] {
            b.add(i, j, 1.0);
        }
        let m = b.build();
        for i in 0..4 {
            let cols: Vec<usize> = m.row(i).map(|(j, _)| j).collect();
            assert!(cols.windows(2).all(|w| w[0] < w[1]), "row {i}: {cols:?}");
        }
    }

    #[test]
    fn mul_vec_matches_dense() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, -1.0, 0.0, -1.0, 2.0]);
        let m = SymmetricSparseMatrix::from_dense(&a).unwrap();
        let x = [1.0, -2.0, 0.5];
        let y = m.mul_vec(&x).unwrap();
        let yd = &a * nalgebra::DVector::from_column_slice(&x);
        for i in 0..3 {
            assert_eq!(y[i], yd[i]);
        }
        assert!(m.mul_vec(&[1.0]).is_err());
    }

    #[test]
    fn coo_dump_lists_upper_triangle() {
        let m = SymmetricSparseMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0])).unwrap();
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "2 2 3\n1 1 2.0\n1 2 -1.0\n2 2 2.0\n");
    }
}
