//! Seeded Gaussian-blob domain shift for self-contained experiments.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::labels::LabelVector;
use crate::preprocess::FeatureMatrix;

/// Per-coordinate standard deviation of every class blob.
pub const CLASS_SPREAD: f64 = 0.1;

/// A labeled source set and a shifted target set sharing the same classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTask {
    pub source: FeatureMatrix,
    pub source_labels: LabelVector,
    pub target: FeatureMatrix,
    pub target_labels: LabelVector,
}

/// Class centers at pairwise distance 1: `e_k / sqrt(2)` while classes fit in
/// the basis, seeded random directions of the same norm beyond that.
fn centers(classes: usize, dim: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut c = Array2::zeros((classes, dim));
    for k in 0..classes {
        if k < dim {
            c[[k, k]] = scale;
        } else {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (j, x) in v.into_iter().enumerate() {
                c[[k, j]] = scale * x / norm;
            }
        }
    }
    c
}

/// Source blobs around unit-separated centers; the target repeats them,
/// translated by `shift` along the fixed unit direction `(e_0 + e_{d-1}) / sqrt(2)`
/// with extra isotropic noise of standard deviation `noise`. Rows are
/// interleaved by class.
pub fn generate_synthetic_shift(
    n_per_class: usize,
    classes: usize,
    dim: usize,
    shift: f64,
    noise: f64,
    seed: u64,
) -> Result<SyntheticTask> {
    if classes < 2 || dim < 2 {
        return Err(Error::config("synthetic", format!("need at least 2 classes and 2 dimensions, got {classes} and {dim}")));
    }
    if n_per_class == 0 {
        return Err(Error::config("synthetic", "need at least one sample per class"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = centers(classes, dim, &mut rng);
    // (e_0 + e_{d-1}) / sqrt(2): partly toward the first class center, partly off it
    let mut dir = vec![0.0; dim];
    dir[0] = std::f64::consts::FRAC_1_SQRT_2;
    dir[dim - 1] = std::f64::consts::FRAC_1_SQRT_2;
    let n = n_per_class * classes;
    let labels: Vec<usize> = (0..n).map(|i| i % classes + 1).collect();
    let mut draw = |extra: f64, translate: f64| {
        Array2::from_shape_fn((n, dim), |(i, j)| {
            let z: f64 = rng.sample(StandardNormal);
            let e: f64 = if extra > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
            mu[[i % classes, j]] + CLASS_SPREAD * z + extra * e + translate * dir[j]
        })
    };
    let source = draw(0.0, 0.0);
    let target = draw(noise, shift);
    Ok(SyntheticTask {
        source: FeatureMatrix::new(source)?,
        source_labels: LabelVector::new(labels.clone(), classes)?,
        target: FeatureMatrix::new(target)?,
        target_labels: LabelVector::new(labels, classes)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_runs_match() {
        let a = generate_synthetic_shift(10, 3, 5, 0.5, 0.1, 7).unwrap();
        let b = generate_synthetic_shift(10, 3, 5, 0.5, 0.1, 7).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_shift(10, 3, 5, 0.5, 0.1, 8).unwrap();
        assert_ne!(a.source, c.source);
    }

    #[test]
    fn shapes_and_labels() {
        let t = generate_synthetic_shift(4, 6, 3, 1.0, 0.0, 1).unwrap();
        assert_eq!(t.source.rows(), 24);
        assert_eq!(t.target.cols(), 3);
        assert_eq!(t.source_labels.classes(), 6);
        assert!(t.source_labels.missing_classes().is_empty());
    }

    #[test]
    fn centers_are_unit_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = centers(4, 6, &mut rng);
        for a in 0..4 {
            for b in (a + 1)..4 {
                let d: f64 = (0..6).map(|j| (c[[a, j]] - c[[b, j]]).powi(2)).sum::<f64>().sqrt();
                assert!((d - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_degenerate_requests() {
        assert!(generate_synthetic_shift(10, 1, 5, 0.0, 0.0, 0).is_err());
        assert!(generate_synthetic_shift(10, 3, 1, 0.0, 0.0, 0).is_err());
    }
}
