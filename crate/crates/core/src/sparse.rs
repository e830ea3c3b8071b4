//! Compressed sparse row matrices with the handful of operations the
//! meta-path machinery needs: chain products, transposes and row/column sums.

use std::fmt;

/// A real-valued matrix in CSR layout. Column indices are sorted within each
/// row and no explicit zeros are stored.
#[derive(Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for CsrMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CsrMatrix")
            .field("shape", &(self.nrows, self.ncols))
            .field("nnz", &self.nnz())
            .finish()
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets. Duplicate
    /// coordinates are summed; entries summing to zero are dropped.
    ///
    /// Duplicates are accumulated in a canonical order so the result does
    /// not depend on the order of the input.
    ///
    /// Panics if a coordinate is out of bounds.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then_with(|| a.2.total_cmp(&b.2)));

        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut data = Vec::with_capacity(sorted.len());
        let mut iter = sorted.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 != r || c2 != c {
                    break;
                }
                v += v2;
                iter.next();
            }
            if v != 0.0 {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let triplets: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(r, row)| {
                assert_eq!(row.len(), ncols, "ragged dense input");
                row.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(move |(c, v)| (r, c, *v))
            })
            .collect();
        Self::from_triplets(nrows, ncols, &triplets)
    }

    pub fn identity(n: usize) -> Self {
        let triplets: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &triplets)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.data[span])
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    /// Iterates stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let slot = next[c];
                indices[slot] = r;
                data[slot] = v;
                next[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            data,
        }
    }

    /// Sparse product `self * rhs` (Gustavson's row-by-row algorithm with a
    /// dense accumulator).
    ///
    /// Panics on a shape mismatch.
    pub fn matmul(&self, rhs: &CsrMatrix) -> CsrMatrix {
        assert_eq!(
            self.ncols, rhs.nrows,
            "shape mismatch: {}x{} * {}x{}",
            self.nrows, self.ncols, rhs.nrows, rhs.ncols
        );
        let mut acc = vec![0.0f64; rhs.ncols];
        let mut touched = vec![false; rhs.ncols];
        let mut pattern: Vec<usize> = Vec::new();

        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut data = Vec::new();

        for r in 0..self.nrows {
            let (lcols, lvals) = self.row(r);
            for (&k, &lv) in lcols.iter().zip(lvals) {
                let (rcols, rvals) = rhs.row(k);
                for (&c, &rv) in rcols.iter().zip(rvals) {
                    if !touched[c] {
                        touched[c] = true;
                        pattern.push(c);
                    }
                    acc[c] += lv * rv;
                }
            }
            pattern.sort_unstable();
            for &c in &pattern {
                let v = acc[c];
                if v != 0.0 {
                    indices.push(c);
                    data.push(v);
                }
                acc[c] = 0.0;
                touched[c] = false;
            }
            pattern.clear();
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: rhs.ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Elementwise `a * self + b * other`.
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        let triplets: Vec<_> = self
            .iter()
            .map(|(r, c, v)| (r, c, a * v))
            .chain(other.iter().map(|(r, c, v)| (r, c, b * v)))
            .collect();
        CsrMatrix::from_triplets(self.nrows, self.ncols, &triplets)
    }

    /// Applies `f` to every stored value, dropping entries that map to zero.
    pub fn map_values(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> CsrMatrix {
        let triplets: Vec<_> = self.iter().map(|(r, c, v)| (r, c, f(r, c, v))).collect();
        CsrMatrix::from_triplets(self.nrows, self.ncols, &triplets)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.ncols];
        for (_, c, v) in self.iter() {
            sums[c] += v;
        }
        sums
    }

    /// Largest `|A(i,j) - A(j,i)|` over the matrix; infinite if not square.
    pub fn max_asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let t = self.transpose();
        let diff = self.linear_combination(1.0, &t, -1.0);
        diff.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.iter() {
            out[r][c] = v;
        }
        out
    }

    /// Permutes rows and columns: entry `(r, c)` moves to
    /// `(row_perm[r], col_perm[c])`.
    pub fn permute(&self, row_perm: &[usize], col_perm: &[usize]) -> CsrMatrix {
        assert_eq!(row_perm.len(), self.nrows);
        assert_eq!(col_perm.len(), self.ncols);
        let triplets: Vec<_> = self.iter().map(|(r, c, v)| (row_perm[r], col_perm[c], v)).collect();
        CsrMatrix::from_triplets(self.nrows, self.ncols, &triplets)
    }
}
