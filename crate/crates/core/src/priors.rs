//! Multinomial logistic regression used to seed target strategies.
//!
//! The model is fit on source features only. The regularization strength is
//! picked by stratified k-fold cross-validation over a log-spaced grid and the
//! winner is refit on the whole source set with L-BFGS.

use std::collections::VecDeque;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{argmax, LabelVector};
use crate::par::map_rows;
use crate::preprocess::FeatureMatrix;

/// Smallest probability a prior entry may take. Keeping every entry positive
/// leaves every class reachable by the replicator update.
pub const PRIOR_FLOOR: f64 = 1e-12;

/// `|T| x m` matrix of class probabilities for the target rows.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorMatrix(Array2<f64>);

impl PriorMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("priors", "prior contains non-finite entries"));
        }
        Ok(PriorMatrix(values))
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Most probable class per row (1-based), lowest index on ties.
    pub fn hard_labels(&self) -> LabelVector {
        crate::gtg::hard_labels(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LRModel {
    /// `m x d`, one row per class.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    /// Inverse regularization strength the model was fit with.
    pub c: f64,
}

impl LRModel {
    pub fn zeros(classes: usize, dim: usize, c: f64) -> Self {
        LRModel {
            weights: Array2::zeros((classes, dim)),
            biases: Array1::zeros(classes),
            c,
        }
    }

    pub fn classes(&self) -> usize {
        self.biases.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    fn to_params(&self) -> Vec<f64> {
        self.weights.iter().chain(self.biases.iter()).copied().collect()
    }

    fn from_params(params: &[f64], classes: usize, dim: usize, c: f64) -> Self {
        let split = classes * dim;
        LRModel {
            weights: Array2::from_shape_vec((classes, dim), params[..split].to_vec()).expect("m x d"),
            biases: Array1::from_vec(params[split..].to_vec()),
            c,
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let doc = ModelDocument {
            classes: self.classes(),
            weights: self.weights.iter().copied().collect(),
            biases: self.biases.to_vec(),
            selected_c: self.c,
        };
        let text = serde_json::to_string_pretty(&doc).expect("model serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let doc: ModelDocument = serde_json::from_str(&text)
            .map_err(|e| Error::data("priors", format!("{}: {e}", path.display())))?;
        let m = doc.classes;
        if m == 0 || doc.biases.len() != m || !doc.weights.len().is_multiple_of(m) {
            return Err(Error::dimension(
                "priors",
                format!(
                    "model has {} classes, {} biases and {} weights",
                    m,
                    doc.biases.len(),
                    doc.weights.len()
                ),
            ));
        }
        let d = doc.weights.len() / m;
        Ok(LRModel {
            weights: Array2::from_shape_vec((m, d), doc.weights).expect("checked length"),
            biases: Array1::from_vec(doc.biases),
            c: doc.selected_c,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    classes: usize,
    /// Row-major `classes x d`.
    weights: Vec<f64>,
    biases: Vec<f64>,
    #[serde(rename = "selected_C")]
    selected_c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LRConfig {
    pub c_grid: Vec<f64>,
    pub folds: usize,
    pub max_opt_iters: usize,
    /// Stop when the largest gradient component falls below this.
    pub opt_tol: f64,
}

impl Default for LRConfig {
    fn default() -> Self {
        LRConfig {
            c_grid: (-3..=4).map(|e| 10f64.powi(e)).collect(),
            folds: 2,
            max_opt_iters: 500,
            opt_tol: 1e-6,
        }
    }
}

impl LRConfig {
    fn validate(&self) -> Result<()> {
        if self.c_grid.is_empty() {
            return Err(Error::config("priors", "C grid is empty"));
        }
        if let Some(c) = self.c_grid.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return Err(Error::config("priors", format!("C values must be positive, got {c}")));
        }
        if self.folds < 2 {
            return Err(Error::config("priors", "cross-validation needs at least 2 folds"));
        }
        if self.max_opt_iters == 0 {
            return Err(Error::config("priors", "optimizer needs at least one iteration"));
        }
        Ok(())
    }
}

fn logits(weights: &Array2<f64>, biases: &Array1<f64>, features: ArrayView2<'_, f64>) -> Array2<f64> {
    features.dot(&weights.t()) + biases
}

// In-place row softmax with max subtraction.
fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Softmax of one logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut z = Array2::from_shape_vec((1, logits.len()), logits.to_vec()).expect("1 x m");
    softmax_rows(&mut z);
    z.into_raw_vec_and_offset().0
}

/// Regularized cross-entropy `sum_i -log p(y_i | f_i) + |W|^2 / (2C)` and its
/// gradient, returned in model shape. Biases are not penalized.
pub fn loss_and_gradient(model: &LRModel, features: &FeatureMatrix, labels: &LabelVector) -> (f64, LRModel) {
    loss_grad_rows(model, features.view(), labels.as_slice())
}

fn loss_grad_rows(model: &LRModel, x: ArrayView2<'_, f64>, y: &[usize]) -> (f64, LRModel) {
    let mut z = logits(&model.weights, &model.biases, x);
    let mut loss = 0.0;
    for (row, &label) in z.rows().into_iter().zip(y) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - row[label - 1];
    }
    softmax_rows(&mut z);
    // z now holds P; turn it into P - Y
    for (mut row, &label) in z.rows_mut().into_iter().zip(y) {
        row[label - 1] -= 1.0;
    }
    let inv_c = 1.0 / model.c;
    loss += 0.5 * inv_c * model.weights.iter().map(|w| w * w).sum::<f64>();
    let gw = z.t().dot(&x) + &model.weights * inv_c;
    let gb = z.sum_axis(Axis(0));
    (
        loss,
        LRModel {
            weights: gw,
            biases: gb,
            c: model.c,
        },
    )
}

const LBFGS_MEMORY: usize = 10;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// Deterministic L-BFGS with Armijo backtracking.
fn fit(x: ArrayView2<'_, f64>, y: &[usize], classes: usize, c: f64, cfg: &LRConfig) -> LRModel {
    let dim = x.ncols();
    let eval = |p: &[f64]| {
        let (f, g) = loss_grad_rows(&LRModel::from_params(p, classes, dim, c), x, y);
        (f, g.to_params())
    };
    let mut params = vec![0.0; classes * dim + classes];
    let (mut f, mut g) = eval(&params);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    for _ in 0..cfg.max_opt_iters {
        if g.iter().fold(0.0f64, |a, v| a.max(v.abs())) <= cfg.opt_tol {
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, yv, rho) in history.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, yv, _)) = history.back() {
            let gamma = dot(s, yv) / dot(yv, yv);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let gnorm = dot(&g, &g).sqrt();
            q.iter_mut().for_each(|v| *v /= gnorm.max(1.0));
        }
        for ((s, yv, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(yv, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            history.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let trial: Vec<f64> = params.iter().zip(&dir).map(|(p, d)| p + step * d).collect();
            let (ft, gt) = eval(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((next, f_next, g_next)) = accepted else {
            break;
        };
        let s: Vec<f64> = next.iter().zip(&params).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-12 {
            if history.len() == LBFGS_MEMORY {
                history.pop_front();
            }
            history.push_back((s, yv, 1.0 / sy));
        }
        let decrease = f - f_next;
        params = next;
        f = f_next;
        g = g_next;
        if decrease <= 1e-14 * f.abs().max(1.0) {
            break;
        }
    }
    LRModel::from_params(&params, classes, dim, c)
}

/// Fold index per row: within each class, the r-th occurrence goes to fold
/// `r mod folds`. Falls back to contiguous chunks when some training split
/// would miss a class, which happens when a class has a single sample.
pub fn fold_assignment(labels: &LabelVector, folds: usize) -> Vec<usize> {
    let mut seen = vec![0usize; labels.classes()];
    let stratified: Vec<usize> = labels
        .iter()
        .map(|y| {
            let r = seen[y - 1];
            seen[y - 1] += 1;
            r % folds
        })
        .collect();
    if seen.iter().all(|&count| count >= 2) {
        return stratified;
    }
    log::warn!("a class has a single sample; using contiguous folds");
    let n = labels.len();
    (0..n).map(|i| i * folds / n).collect()
}

fn accuracy_of(model: &LRModel, x: ArrayView2<'_, f64>, y: &[usize]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let z = logits(&model.weights, &model.biases, x);
    let correct = z
        .rows()
        .into_iter()
        .zip(y)
        .filter(|(row, &label)| argmax(row.iter().copied()) + 1 == label)
        .count();
    correct as f64 / y.len() as f64
}

/// Mean held-out accuracy for every grid value, in grid order.
pub fn cross_validate(features: &FeatureMatrix, labels: &LabelVector, cfg: &LRConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_training_set(features, labels)?;
    let assignment = fold_assignment(labels, cfg.folds);
    let x = features.as_array();
    let split = |fold: usize, held_out: bool| {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| (assignment[i] == fold) == held_out).collect();
        let y: Vec<usize> = rows.iter().map(|&i| labels.as_slice()[i]).collect();
        (x.select(Axis(0), &rows), y)
    };
    let splits: Vec<_> = (0..cfg.folds).map(|k| (split(k, false), split(k, true))).collect();
    let scores = map_rows(cfg.c_grid.len(), |ci| {
        let c = cfg.c_grid[ci];
        let total: f64 = splits
            .iter()
            .map(|((xt, yt), (xv, yv))| {
                let model = fit(xt.view(), yt, labels.classes(), c, cfg);
                accuracy_of(&model, xv.view(), yv)
            })
            .sum();
        total / cfg.folds as f64
    });
    Ok(scores)
}

fn check_training_set(features: &FeatureMatrix, labels: &LabelVector) -> Result<()> {
    if features.rows() != labels.len() {
        return Err(Error::dimension(
            "priors",
            format!("{} feature rows but {} labels", features.rows(), labels.len()),
        ));
    }
    let missing = labels.missing_classes();
    if !missing.is_empty() {
        return Err(Error::config("priors", format!("classes {missing:?} have no training samples")));
    }
    Ok(())
}

/// Select C by cross-validation (ties go to the smaller C) and refit on all
/// rows.
pub fn train_lr(features: &FeatureMatrix, labels: &LabelVector, cfg: &LRConfig) -> Result<LRModel> {
    let scores = cross_validate(features, labels, cfg)?;
    let mut order: Vec<usize> = (0..cfg.c_grid.len()).collect();
    order.sort_by(|&a, &b| cfg.c_grid[a].total_cmp(&cfg.c_grid[b]));
    let mut best = order[0];
    for &i in &order[1..] {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    let c = cfg.c_grid[best];
    log::info!("logistic regression: C = {c:e} (cv accuracy {:.4})", scores[best]);
    Ok(fit(features.view(), labels.as_slice(), labels.classes(), c, cfg))
}

/// Class probabilities `softmax(W f + b)` per row, floored at [`PRIOR_FLOOR`].
pub fn predict_proba(model: &LRModel, features: &FeatureMatrix) -> Result<PriorMatrix> {
    if features.cols() != model.dim() {
        return Err(Error::dimension(
            "priors",
            format!("model expects {} features, got {}", model.dim(), features.cols()),
        ));
    }
    let mut z = logits(&model.weights, &model.biases, features.view());
    softmax_rows(&mut z);
    for mut row in z.rows_mut() {
        if row.iter().any(|&p| p < PRIOR_FLOOR) {
            row.mapv_inplace(|p| p.max(PRIOR_FLOOR));
            let sum = row.sum();
            row /= sum;
        }
    }
    Ok(PriorMatrix(z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_model_is_uniform() {
        let model = LRModel::zeros(4, 3, 1.0);
        let f = FeatureMatrix::new(array![[1.0, 2.0, 3.0], [-4.0, 0.0, 9.0]]).unwrap();
        let p = predict_proba(&model, &f).unwrap();
        for &v in p.as_array().iter() {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_values() {
        let p = softmax(&[10.0, 0.0]);
        // 1 / (1 + e^-10)
        assert_abs_diff_eq!(p[0], 1.0 / (1.0 + (-10f64).exp()), epsilon = 1e-15);
        assert_abs_diff_eq!(p[0], 0.99995, epsilon = 1e-5);
        assert_abs_diff_eq!(p[1], 0.0000454, epsilon = 1e-6);
        let a = softmax(&[0.3, -1.2, 2.0]);
        let b = softmax(&[100.3, 98.8, 102.0]);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        assert_eq!(softmax(&[0.0; 5]), vec![0.2; 5]);
    }

    #[test]
    fn extreme_logits_stay_positive() {
        let model = LRModel {
            weights: array![[1000.0], [-1000.0]],
            biases: array![0.0, 0.0],
            c: 1.0,
        };
        let f = FeatureMatrix::new(array![[1.0]]).unwrap();
        let p = predict_proba(&model, &f).unwrap();
        assert!(p.as_array().iter().all(|&v| v > 0.0));
        assert_abs_diff_eq!(p.as_array().sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let model = LRModel::zeros(2, 3, 1.0);
        let f = FeatureMatrix::new(array![[1.0, 2.0]]).unwrap();
        assert!(matches!(predict_proba(&model, &f), Err(Error::Dimension { .. })));
    }

    #[test]
    fn stratified_folds_interleave() {
        let y = LabelVector::new(vec![1, 1, 2, 1, 2, 2, 1], 2).unwrap();
        assert_eq!(fold_assignment(&y, 2), vec![0, 1, 0, 0, 1, 0, 1]);
        // class 2 has one sample: contiguous halves
        let y = LabelVector::new(vec![1, 1, 1, 2], 2).unwrap();
        assert_eq!(fold_assignment(&y, 2), vec![0, 0, 1, 1]);
    }

    #[test]
    fn missing_class_is_a_config_error() {
        let f = FeatureMatrix::new(array![[1.0], [2.0]]).unwrap();
        let y = LabelVector::new(vec![1, 1], 2).unwrap();
        assert!(matches!(train_lr(&f, &y, &LRConfig::default()), Err(Error::Config { .. })));
    }

    fn blobs(seed: u64) -> (FeatureMatrix, LabelVector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..100 {
            let class = i % 2;
            let cx = if class == 0 { -3.0 } else { 3.0 };
            rows.push(vec![cx + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            y.push(class + 1);
        }
        (FeatureMatrix::from_rows(&rows).unwrap(), LabelVector::new(y, 2).unwrap())
    }

    #[test]
    fn separable_blobs_fit_perfectly() {
        let (f, y) = blobs(3);
        // independent separation check: x = 0 splits the classes
        assert!(f.as_array().rows().into_iter().zip(y.iter()).all(|(r, c)| (r[0] > 0.0) == (c == 2)));
        let model = train_lr(&f, &y, &LRConfig::default()).unwrap();
        let hard = predict_proba(&model, &f).unwrap().hard_labels();
        assert_eq!(hard.as_slice(), y.as_slice());
    }

    #[test]
    fn singleton_grid_is_selected() {
        let (f, y) = blobs(5);
        let cfg = LRConfig { c_grid: vec![0.37], ..LRConfig::default() };
        assert_eq!(train_lr(&f, &y, &cfg).unwrap().c, 0.37);
    }

    #[test]
    fn training_is_deterministic() {
        let (f, y) = blobs(9);
        let a = train_lr(&f, &y, &LRConfig::default()).unwrap();
        let b = train_lr(&f, &y, &LRConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_json_roundtrip() {
        let (f, y) = blobs(11);
        let model = train_lr(&f, &y, &LRConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        model.save_json(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"selected_C\""));
        assert_eq!(LRModel::load_json(&path).unwrap(), model);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (n, d, m) = (20, 5, 3);
        let f = FeatureMatrix::new(Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0))).unwrap();
        let y = LabelVector::new((0..n).map(|i| i % m + 1).collect(), m).unwrap();
        let model = LRModel {
            weights: Array2::from_shape_fn((m, d), |_| rng.random_range(-1.0..1.0)),
            biases: Array1::from_shape_fn(m, |_| rng.random_range(-1.0..1.0)),
            c: 0.7,
        };
        let (_, grad) = loss_and_gradient(&model, &f, &y);
        let analytic = grad.to_params();
        let base = model.to_params();
        let h = 1e-5;
        for k in 0..base.len() {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[k] += h;
            minus[k] -= h;
            let fp = loss_and_gradient(&LRModel::from_params(&plus, m, d, 0.7), &f, &y).0;
            let fm = loss_and_gradient(&LRModel::from_params(&minus, m, d, 0.7), &f, &y).0;
            let numeric = (fp - fm) / (2.0 * h);
            let rel = (numeric - analytic[k]).abs() / analytic[k].abs().max(numeric.abs()).max(1e-8);
            assert!(rel <= 1e-5, "component {k}: {numeric} vs {}", analytic[k]);
        }
    }
}
