//! Affinity graph construction: cosine distances, self-tuning local scales,
//! the exponential kernel, and log-degree kNN sparsification.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::par::map_rows;
use crate::preprocess::FeatureMatrix;
use crate::sparse::AffinityMatrix;

/// Default neighbor rank used for the local kernel scale.
pub const DEFAULT_SCALE_RANK: usize = 7;

/// Smallest admissible local scale, used when a point only has duplicates.
pub const SCALE_FLOOR: f64 = 1e-12;

/// Cosine distance `1 - <a, b> / (|a| |b|)`, clamped to `[0, 2]`.
///
/// A zero-norm vector has no direction; its distance to anything is 1.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine distance needs equal lengths");
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 2.0)
}

/// Symmetric `n x n` matrix of pairwise cosine distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(Array2<f64>);

impl DistanceMatrix {
    /// Wrap a precomputed matrix, checking shape, symmetry and range.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let n = values.nrows();
        if values.ncols() != n {
            return Err(Error::Graph(format!("distance matrix must be square, got {:?}", values.dim())));
        }
        for ((i, j), &v) in values.indexed_iter() {
            if !(0.0..=2.0).contains(&v) {
                return Err(Error::Graph(format!("distance {v} at ({i}, {j}) outside [0, 2]")));
            }
            if i == j && v != 0.0 {
                return Err(Error::Graph(format!("nonzero diagonal distance at {i}")));
            }
            if (v - values[[j, i]]).abs() > 1e-12 {
                return Err(Error::Graph(format!("distance matrix not symmetric at ({i}, {j})")));
            }
        }
        Ok(DistanceMatrix(values))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[[i, j]]
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    // Off-diagonal entries of row i, sorted ascending.
    fn sorted_row(&self, i: usize) -> Vec<f64> {
        let mut row: Vec<f64> = self
            .0
            .row(i)
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .collect();
        row.sort_by(f64::total_cmp);
        row
    }
}

/// Pairwise cosine distances between all rows of `features`.
pub fn distance_matrix(features: &FeatureMatrix) -> DistanceMatrix {
    let x = features.as_array().as_standard_layout();
    let n = x.nrows();
    let rows: Vec<&[f64]> = x
        .rows()
        .into_iter()
        .map(|r| r.to_slice().expect("standard layout rows are contiguous"))
        .collect();
    let zero_rows = rows.iter().filter(|r| r.iter().all(|&v| v == 0.0)).count();
    if zero_rows > 0 {
        log::warn!("{zero_rows} all-zero feature rows: their cosine distances are set to 1");
    }
    // cosine_distance is bitwise symmetric in its arguments, so D is exactly symmetric
    let dist: Vec<Vec<f64>> = map_rows(n, |i| {
        (0..n)
            .map(|j| if i == j { 0.0 } else { cosine_distance(rows[i], rows[j]) })
            .collect()
    });
    let flat: Vec<f64> = dist.into_iter().flatten().collect();
    DistanceMatrix(Array2::from_shape_vec((n, n), flat).expect("n x n"))
}

/// Per-point kernel bandwidths.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalScales(Vec<f64>);

impl LocalScales {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Graph(format!("local scale {v} at {i} must be positive")));
        }
        Ok(LocalScales(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Distance of each point to its `neighbor_rank`-th nearest neighbor.
///
/// The rank is clamped to `n - 1`. A zero scale (every candidate neighbor is a
/// duplicate) falls back to the smallest positive distance of the row, then to
/// [`SCALE_FLOOR`].
pub fn local_scales(distances: &DistanceMatrix, neighbor_rank: usize) -> Result<LocalScales> {
    let n = distances.n();
    if n < 2 {
        return Err(Error::Graph(format!("local scales need at least 2 points, got {n}")));
    }
    if neighbor_rank == 0 {
        return Err(Error::config("graph", "neighbor rank must be at least 1"));
    }
    let rank = neighbor_rank.min(n - 1);
    let sigma = map_rows(n, |i| {
        let row = distances.sorted_row(i);
        let s = row[rank - 1];
        if s > 0.0 {
            s
        } else {
            row.iter().copied().find(|&v| v > 0.0).unwrap_or(SCALE_FLOOR)
        }
    });
    Ok(LocalScales(sigma))
}

/// Dense kernel matrix before sparsification.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseAffinity(Array2<f64>);

impl DenseAffinity {
    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }
}

/// `w_ij = exp(-d_ij^2 / (sigma_i sigma_j))` off the diagonal, 0 on it.
pub fn build_affinity(distances: &DistanceMatrix, scales: &LocalScales) -> Result<DenseAffinity> {
    let n = distances.n();
    let sigma = scales.as_slice();
    if sigma.len() != n {
        return Err(Error::dimension(
            "graph",
            format!("{} local scales for {n} points", sigma.len()),
        ));
    }
    let rows = map_rows(n, |i| {
        (0..n)
            .map(|j| {
                if i == j {
                    0.0
                } else {
                    let d = distances.get(i, j);
                    (-d * d / (sigma[i] * sigma[j])).exp()
                }
            })
            .collect::<Vec<f64>>()
    });
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DenseAffinity(Array2::from_shape_vec((n, n), flat).expect("n x n")))
}

/// Neighbor count kept per node: `floor(log2 n) + 1`.
pub fn knn_count(n: usize) -> usize {
    assert!(n >= 1, "knn_count of an empty graph");
    n.ilog2() as usize + 1
}

/// Keep, for each node, all neighbors within its k-th nearest distance (ties
/// included), then symmetrize by union.
pub fn sparsify(affinity: &DenseAffinity, distances: &DistanceMatrix) -> Result<AffinityMatrix> {
    let n = distances.n();
    if affinity.n() != n {
        return Err(Error::dimension(
            "graph",
            format!("affinity is {0}x{0}, distances {n}x{n}", affinity.n()),
        ));
    }
    if n < 2 {
        return Err(Error::Graph(format!("sparsify needs at least 2 points, got {n}")));
    }
    let k = knn_count(n).min(n - 1);
    let thresholds = map_rows(n, |i| distances.sorted_row(i)[k - 1]);
    let mut keep = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && distances.get(i, j) <= thresholds[i] {
                keep[i][j] = true;
                keep[j][i] = true;
            }
        }
    }
    let cols: Vec<Vec<usize>> = keep
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, &k)| k).map(|(j, _)| j).collect())
        .collect();
    let sparse = AffinityMatrix::from_dense_mask(affinity.as_array(), &cols);
    let components = sparse.components().len();
    if components > 1 {
        log::warn!("sparsified graph has {components} connected components");
    }
    Ok(sparse)
}

/// Knobs for [`affinity_graph`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphConfig {
    pub scale_rank: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            scale_rank: DEFAULT_SCALE_RANK,
        }
    }
}

/// Distances, local scales, kernel and sparsification in one call.
pub fn affinity_graph(features: &FeatureMatrix, cfg: GraphConfig) -> Result<AffinityMatrix> {
    let distances = distance_matrix(features);
    let scales = local_scales(&distances, cfg.scale_rank)?;
    let dense = build_affinity(&distances, &scales)?;
    sparsify(&dense, &distances)
}

/// Write every stored entry as `i j w`, 0-indexed, one per line.
pub fn write_coo(w: &AffinityMatrix, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = std::io::BufWriter::new(file);
    let wrap = |e| Error::io(path.display().to_string(), e);
    for (i, j, v) in w.triplets() {
        writeln!(out, "{i} {j} {v:?}").map_err(wrap)?;
    }
    out.flush().map_err(wrap)
}
