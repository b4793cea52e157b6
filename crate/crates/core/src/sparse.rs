//! Compressed sparse row storage for symmetric affinity matrices.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::par::map_rows;

/// Symmetric, zero-diagonal, nonnegative `n x n` weight matrix stored as CSR.
///
/// Entry `(i, j)` is the similarity between observations `i` and `j`. Columns
/// within a row are sorted ascending. Structural entries are kept even when
/// their weight underflows to zero, so [`AffinityMatrix::degree`] counts graph
/// edges rather than positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl AffinityMatrix {
    /// Build from `(i, j, w)` triplets. Both orientations of every edge must
    /// be present with bit-identical weights.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in triplets {
            if i >= n || j >= n {
                return Err(Error::Graph(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            if i == j {
                return Err(Error::Graph(format!("diagonal entry ({i}, {i}) must be zero")));
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Graph(format!("weight {w} at ({i}, {j}) outside [0, 1]")));
            }
            rows[i].push((j, w));
        }
        let m = Self::from_rows(rows)?;
        m.check_symmetric()?;
        Ok(m)
    }

    /// Keep the entries of a dense symmetric matrix selected by `keep`.
    pub(crate) fn from_dense_mask(dense: &Array2<f64>, keep: &[Vec<usize>]) -> Self {
        let rows = keep
            .iter()
            .enumerate()
            .map(|(i, cols)| cols.iter().map(|&j| (j, dense[[i, j]])).collect())
            .collect();
        Self::from_rows(rows).expect("mask entries are unique")
    }

    /// Dense matrix with every off-diagonal entry stored.
    pub fn from_dense(dense: &Array2<f64>) -> Result<Self> {
        let n = dense.nrows();
        if dense.ncols() != n {
            return Err(Error::Graph(format!("affinity must be square, got {:?}", dense.dim())));
        }
        let mut triplets = Vec::new();
        for ((i, j), &w) in dense.indexed_iter() {
            if i != j && w != 0.0 {
                triplets.push((i, j, w));
            } else if i == j && w != 0.0 {
                return Err(Error::Graph(format!("diagonal entry ({i}, {i}) must be zero")));
            }
        }
        Self::from_triplets(n, &triplets)
    }

    fn from_rows(mut rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::Graph(format!("duplicate entry ({i}, {})", w[0].0)));
            }
            for &(j, w) in row.iter() {
                indices.push(j);
                values.push(w);
            }
            indptr.push(indices.len());
        }
        Ok(AffinityMatrix {
            n,
            indptr,
            indices,
            values,
        })
    }

    fn check_symmetric(&self) -> Result<()> {
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                if self.get(j, i) != Some(w) {
                    return Err(Error::Graph(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries (twice the number of undirected edges).
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn degree(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let span = self.indptr[i]..self.indptr[i + 1];
        let cols = &self.indices[span.clone()];
        cols.binary_search(&j)
            .ok()
            .map(|k| self.values[span.start + k])
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, w)| w).sum()).collect()
    }

    /// All stored entries as `(i, j, w)` in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, w)| (i, j, w)))
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n, self.n));
        for (i, j, w) in self.triplets() {
            out[[i, j]] = w;
        }
        out
    }

    /// `W * x` for a dense `n x m` right-hand side.
    pub fn mul_dense(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(x.nrows(), self.n, "row count mismatch in sparse product");
        let m = x.ncols();
        let rows = map_rows(self.n, |i| {
            let mut acc = vec![0.0; m];
            for (j, w) in self.row(i) {
                for (a, v) in acc.iter_mut().zip(x.row(j).iter()) {
                    *a += w * v;
                }
            }
            acc
        });
        Array2::from_shape_vec((self.n, m), rows.into_iter().flatten().collect())
            .expect("shape is n x m")
    }

    /// Same sparsity pattern with every weight mapped through `f(i, j, w)`.
    pub fn map_values(&self, f: impl Fn(usize, usize, f64) -> f64) -> AffinityMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out.values[k] = f(i, self.indices[k], self.values[k]);
            }
        }
        out
    }

    /// Connected components (nodes in ascending order, components ordered by
    /// their smallest node).
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (i, j, _) in self.triplets() {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; self.n];
        for i in 0..self.n {
            let r = find(&mut parent, i);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(i);
        }
        groups
    }
}
