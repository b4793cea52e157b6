//! Joint standardization of source and target features.
//!
//! Statistics are always taken over the row-wise union of both domains so the
//! two feature sets end up in one common coordinate frame.

use ndarray::{concatenate, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `n x d` matrix of finite feature values, one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix(Array2<f64>);

impl FeatureMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, d) = values.dim();
        if n == 0 || d == 0 {
            return Err(Error::data(
                "preprocess",
                format!("feature matrix must be non-empty, got {n}x{d}"),
            ));
        }
        if let Some(((i, j), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::data(
                "preprocess",
                format!("non-finite value {v} at row {i}, column {j}"),
            ));
        }
        Ok(FeatureMatrix(values))
    }

    /// Build from nested rows; rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::dimension(
                "preprocess",
                format!("row {i} has {} columns, expected {d}", rows[i].len()),
            ));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| Error::dimension("preprocess", e.to_string()))?;
        Self::new(values)
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Row-wise concatenation `[self; other]`.
    pub fn stack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.cols() != other.cols() {
            return Err(Error::dimension(
                "preprocess",
                format!("cannot stack {} and {} columns", self.cols(), other.cols()),
            ));
        }
        let values = concatenate(Axis(0), &[self.view(), other.view()])
            .map_err(|e| Error::dimension("preprocess", e.to_string()))?;
        Ok(FeatureMatrix(values))
    }
}

/// Which scaling to apply to every feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMode {
    /// Divide by the standard deviation only; zero entries stay zero.
    Std,
    /// Subtract the mean, then divide by the standard deviation.
    #[default]
    ZScore,
}

impl std::str::FromStr for NormalizationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "std" => Ok(NormalizationMode::Std),
            "zscore" | "z-score" => Ok(NormalizationMode::ZScore),
            other => Err(format!("unknown normalization mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone)]
struct ColumnStats {
    mean: Array1<f64>,
    std: Array1<f64>,
}

// Population statistics over the blocks taken in order.
fn column_stats(blocks: &[ArrayView2<'_, f64>]) -> ColumnStats {
    let d = blocks[0].ncols();
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut mean = Array1::<f64>::zeros(d);
    for block in blocks {
        for row in block.rows() {
            mean += &row;
        }
    }
    mean /= n as f64;
    let mut var = Array1::<f64>::zeros(d);
    for block in blocks {
        for row in block.rows() {
            for ((v, x), mu) in var.iter_mut().zip(row.iter()).zip(mean.iter()) {
                let dev = x - mu;
                *v += dev * dev;
            }
        }
    }
    var /= n as f64;
    ColumnStats {
        mean,
        std: var.mapv(f64::sqrt),
    }
}

fn apply(block: ArrayView2<'_, f64>, stats: &ColumnStats, mode: NormalizationMode) -> Array2<f64> {
    let mut out = block.to_owned();
    for mut row in out.rows_mut() {
        for ((v, mu), sd) in row.iter_mut().zip(stats.mean.iter()).zip(stats.std.iter()) {
            *v = match mode {
                NormalizationMode::ZScore if *sd > 0.0 => (*v - mu) / sd,
                NormalizationMode::ZScore => 0.0,
                NormalizationMode::Std if *sd > 0.0 => *v / sd,
                NormalizationMode::Std => *v,
            };
        }
    }
    out
}

/// Standardize source and target with statistics of their union.
///
/// Constant columns map to 0 under [`NormalizationMode::ZScore`] and are left
/// untouched under [`NormalizationMode::Std`].
pub fn joint_standardize(
    source: &FeatureMatrix,
    target: &FeatureMatrix,
    mode: NormalizationMode,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    if source.cols() != target.cols() {
        return Err(Error::dimension(
            "preprocess",
            format!(
                "source has {} features, target has {}",
                source.cols(),
                target.cols()
            ),
        ));
    }
    let stats = column_stats(&[source.view(), target.view()]);
    Ok((
        FeatureMatrix(apply(source.view(), &stats, mode)),
        FeatureMatrix(apply(target.view(), &stats, mode)),
    ))
}

/// Standardize a single block with its own statistics.
pub fn standardize(features: &FeatureMatrix, mode: NormalizationMode) -> FeatureMatrix {
    let stats = column_stats(&[features.view()]);
    FeatureMatrix(apply(features.view(), &stats, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn fm(a: Array2<f64>) -> FeatureMatrix {
        FeatureMatrix::new(a).unwrap()
    }

    #[test]
    fn zscore_hand_example() {
        let (s, t) = joint_standardize(
            &fm(array![[0.0], [2.0]]),
            &fm(array![[4.0], [6.0]]),
            NormalizationMode::ZScore,
        )
        .unwrap();
        // mean 3, population std sqrt(5)
        let sd = 5f64.sqrt();
        assert_abs_diff_eq!(s.as_array()[[0, 0]], -3.0 / sd, epsilon = 1e-12);
        assert_abs_diff_eq!(s.as_array()[[1, 0]], -1.0 / sd, epsilon = 1e-12);
        assert_abs_diff_eq!(t.as_array()[[0, 0]], 1.0 / sd, epsilon = 1e-12);
        assert_abs_diff_eq!(t.as_array()[[1, 0]], 3.0 / sd, epsilon = 1e-12);
        assert_abs_diff_eq!(s.as_array()[[0, 0]], -1.3416, epsilon = 1e-4);
        assert_abs_diff_eq!(t.as_array()[[0, 0]], 0.4472, epsilon = 1e-4);
    }

    #[test]
    fn constant_features_collapse_to_zero() {
        let (s, t) = joint_standardize(
            &fm(array![[1.0, 5.0]]),
            &fm(array![[1.0, 5.0]]),
            NormalizationMode::ZScore,
        )
        .unwrap();
        assert_eq!(s.as_array(), &array![[0.0, 0.0]]);
        assert_eq!(t.as_array(), &array![[0.0, 0.0]]);

        let (s, _) = joint_standardize(
            &fm(array![[1.0, 5.0]]),
            &fm(array![[1.0, 5.0]]),
            NormalizationMode::Std,
        )
        .unwrap();
        assert_eq!(s.as_array(), &array![[1.0, 5.0]]);
    }

    #[test]
    fn already_standardized_is_fixed() {
        // union {-1, 1, -1, 1}: mean 0, std 1
        let src = fm(array![[-1.0], [1.0]]);
        let tgt = fm(array![[-1.0], [1.0]]);
        let (s, t) = joint_standardize(&src, &tgt, NormalizationMode::ZScore).unwrap();
        assert_eq!(s, src);
        assert_eq!(t, tgt);
    }

    #[test]
    fn rejects_mismatch_and_non_finite() {
        let err = joint_standardize(
            &fm(array![[1.0, 2.0]]),
            &fm(array![[1.0]]),
            NormalizationMode::ZScore,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        assert!(matches!(
            FeatureMatrix::new(array![[1.0, f64::NAN]]).unwrap_err(),
            Error::Data { .. }
        ));
        assert!(FeatureMatrix::new(Array2::zeros((0, 3))).is_err());
    }

    fn matrix(max_rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
        (1..max_rows).prop_flat_map(move |n| {
            prop::collection::vec(prop_oneof![Just(0.0), -50.0..50.0f64], n * cols)
                .prop_map(move |v| Array2::from_shape_vec((n, cols), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn zscore_union_has_zero_mean_unit_std(a in matrix(12, 4), b in matrix(12, 4)) {
            let (s, t) = joint_standardize(&fm(a.clone()), &fm(b.clone()), NormalizationMode::ZScore).unwrap();
            let raw = fm(a).stack(&fm(b)).unwrap();
            let raw_std = column_stats(&[raw.view()]).std;
            let union = s.stack(&t).unwrap();
            let stats = column_stats(&[union.view()]);
            for j in 0..4 {
                if raw_std[j] > 1e-9 {
                    prop_assert!(stats.mean[j].abs() < 1e-9);
                    prop_assert!((stats.std[j] - 1.0).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn std_mode_preserves_zeros(a in matrix(12, 3), b in matrix(12, 3)) {
            let (s, t) = joint_standardize(&fm(a.clone()), &fm(b.clone()), NormalizationMode::Std).unwrap();
            for (x, y) in a.iter().zip(s.as_array().iter()).chain(b.iter().zip(t.as_array().iter())) {
                if *x == 0.0 {
                    prop_assert_eq!(*y, 0.0);
                }
            }
        }

        #[test]
        fn split_point_does_not_matter(a in matrix(10, 3), b in matrix(10, 3), zs in any::<bool>()) {
            let mode = if zs { NormalizationMode::ZScore } else { NormalizationMode::Std };
            let (fa, fb) = (fm(a), fm(b));
            let (s, t) = joint_standardize(&fa, &fb, mode).unwrap();
            let whole = standardize(&fa.stack(&fb).unwrap(), mode);
            prop_assert_eq!(s.stack(&t).unwrap(), whole);
        }
    }
}
