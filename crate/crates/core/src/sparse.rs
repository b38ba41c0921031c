//! Minimal compressed-sparse-column matrix used for incidence and adjacency
//! matrices. Only the handful of operations the graph machinery needs.

use nalgebra::DMatrix;

/// Real sparse matrix in CSC layout. Row indices within a column are sorted
/// and duplicates are summed on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Exact zeros are kept
    /// out of the pattern.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));

        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            row_idx.push(r);
            values.push(v);
            col_ptr[c + 1] += 1;
            last = Some((r, c));
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        let mut m = Self {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        };
        m.prune();
        m
    }

    fn prune(&mut self) {
        if self.values.iter().all(|v| *v != 0.0) {
            return;
        }
        let triplets: Vec<_> = self.iter().filter(|t| t.2 != 0.0).collect();
        let mut col_ptr = vec![0usize; self.ncols + 1];
        for &(_, c, _) in &triplets {
            col_ptr[c + 1] += 1;
        }
        for c in 0..self.ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        self.row_idx = triplets.iter().map(|t| t.0).collect();
        self.values = triplets.iter().map(|t| t.2).collect();
        self.col_ptr = col_ptr;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates stored entries as `(row, col, value)` in column-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], c, self.values[k]))
        })
    }

    /// Stored entries of column `c` as `(row, value)`.
    pub fn column(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        match self.row_idx[range.clone()].binary_search(&r) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Self {
        let triplets: Vec<_> = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &triplets)
    }

    /// Keeps the listed rows, in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut position = vec![None; self.nrows];
        for (new, &old) in rows.iter().enumerate() {
            position[old] = Some(new);
        }
        let triplets: Vec<_> = self
            .iter()
            .filter_map(|(r, c, v)| position[r].map(|nr| (nr, c, v)))
            .collect();
        Self::from_triplets(rows.len(), self.ncols, &triplets)
    }

    pub fn matmul(&self, rhs: &SparseMatrix) -> Self {
        assert_eq!(self.ncols, rhs.nrows, "inner dimensions differ");
        let mut triplets = Vec::new();
        for j in 0..rhs.ncols {
            for (k, b) in rhs.column(j) {
                for (i, a) in self.column(k) {
                    triplets.push((i, j, a * b));
                }
            }
        }
        Self::from_triplets(self.nrows, rhs.ncols, &triplets)
    }

    pub fn add(&self, rhs: &SparseMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (rhs.nrows, rhs.ncols));
        let triplets: Vec<_> = self.iter().chain(rhs.iter()).collect();
        Self::from_triplets(self.nrows, self.ncols, &triplets)
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        y.iter_mut().for_each(|v| *v = 0.0);
        for (c, &xc) in x.iter().enumerate() {
            if xc == 0.0 {
                continue;
            }
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.values[k] * xc;
            }
        }
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.ncols).map(|c| self.column(c).map(|(_, v)| v).sum()).collect()
    }

    pub fn col_nnz(&self, c: usize) -> usize {
        self.col_ptr[c + 1] - self.col_ptr[c]
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    /// Largest absolute entrywise difference; both matrices must have the same shape.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        (&self.to_dense() - &other.to_dense()).amax()
    }

    /// Induced l1 norm (maximum absolute column sum).
    pub fn norm_l1(&self) -> f64 {
        (0..self.ncols)
            .map(|c| self.column(c).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}
