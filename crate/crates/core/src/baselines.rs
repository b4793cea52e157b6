//! Classical graph transducers run on the same sparsified affinity matrix as
//! the game: Label Propagation (hard clamping), Label Spreading (soft
//! clamping with factor `alpha`) and the Gaussian-fields harmonic solution.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gtg::{frobenius_distance, DynamicsConfig, MixedStrategyProfile};
use crate::labels::LabelVector;
use crate::sparse::AffinityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Lp,
    Ls,
    Hf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineConfig {
    /// Fraction of neighborhood information mixed in per spreading step.
    pub alpha: f64,
    pub dynamics: DynamicsConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            alpha: 0.2,
            dynamics: DynamicsConfig::default(),
        }
    }
}

impl BaselineConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("baselines", format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.dynamics.validate()
    }
}

fn check_shapes(w: &AffinityMatrix, y0: &MixedStrategyProfile) -> Result<()> {
    if w.n() != y0.players() {
        return Err(Error::dimension(
            "baselines",
            format!("affinity has {} nodes, labels matrix {} rows", w.n(), y0.players()),
        ));
    }
    Ok(())
}

/// Iterate `Y <- D^-1 W Y`, re-clamping the first `labeled_count` rows and
/// renormalizing the rest after every sweep.
pub fn label_propagation(
    w: &AffinityMatrix,
    y0: &MixedStrategyProfile,
    labeled_count: usize,
    cfg: &BaselineConfig,
) -> Result<Array2<f64>> {
    propagate(w, y0, labeled_count, cfg).map(|r| r.scores)
}

/// Scores plus the iteration count and final change of an iterative baseline.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IterativeRun {
    pub scores: Array2<f64>,
    pub iterations: usize,
    pub tolerance: f64,
}

pub(crate) fn propagate(
    w: &AffinityMatrix,
    y0: &MixedStrategyProfile,
    labeled_count: usize,
    cfg: &BaselineConfig,
) -> Result<IterativeRun> {
    cfg.validate()?;
    check_shapes(w, y0)?;
    let n = w.n();
    let m = y0.strategies();
    let labeled_count = labeled_count.min(n);
    let degree = w.row_sums();
    let clamp = y0.as_array().slice(s![..labeled_count, ..]).to_owned();
    let mut y = y0.as_array().clone();
    let mut tol = f64::INFINITY;
    let mut t = 0;
    while tol >= cfg.dynamics.tolerance && t < cfg.dynamics.max_iterations {
        let mut next = w.mul_dense(&y);
        for i in 0..n {
            let mut row = next.row_mut(i);
            if i < labeled_count {
                row.assign(&clamp.row(i));
                continue;
            }
            if degree[i] > 0.0 {
                row /= degree[i];
            } else {
                row.assign(&y.row(i));
            }
            let sum = row.sum();
            if sum > 0.0 {
                row /= sum;
            } else {
                row.fill(1.0 / m as f64);
            }
        }
        tol = frobenius_distance(&next, &y);
        y = next;
        t += 1;
    }
    log::debug!("label propagation stopped after {t} iterations, tol {tol:e}");
    Ok(IterativeRun {
        scores: y,
        iterations: t,
        tolerance: tol,
    })
}

/// Symmetric normalization `D^-1/2 W D^-1/2`; isolated nodes get empty rows.
pub fn normalized_affinity(w: &AffinityMatrix) -> AffinityMatrix {
    let inv_sqrt: Vec<f64> = w
        .row_sums()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    w.map_values(|i, j, v| v * inv_sqrt[i] * inv_sqrt[j])
}

/// Iterate `F <- alpha S F + (1 - alpha) Y0` from `F = Y0`. Rows of the result
/// are class scores, not probabilities.
pub fn label_spreading(w: &AffinityMatrix, y0: &MixedStrategyProfile, cfg: &BaselineConfig) -> Result<Array2<f64>> {
    spread(w, y0, cfg).map(|r| r.scores)
}

pub(crate) fn spread(w: &AffinityMatrix, y0: &MixedStrategyProfile, cfg: &BaselineConfig) -> Result<IterativeRun> {
    cfg.validate()?;
    check_shapes(w, y0)?;
    let s = normalized_affinity(w);
    let base = y0.as_array() * (1.0 - cfg.alpha);
    let mut f = y0.as_array().clone();
    let mut tol = f64::INFINITY;
    let mut t = 0;
    while tol >= cfg.dynamics.tolerance && t < cfg.dynamics.max_iterations {
        let next = s.mul_dense(&f) * cfg.alpha + &base;
        tol = frobenius_distance(&next, &f);
        f = next;
        t += 1;
    }
    log::debug!("label spreading stopped after {t} iterations, tol {tol:e}");
    Ok(IterativeRun {
        scores: f,
        iterations: t,
        tolerance: tol,
    })
}

/// Relative residual the harmonic solve must reach.
pub const HARMONIC_RESIDUAL: f64 = 1e-10;

/// Harmonic solution: labeled rows are the one-hot `labels` (the first
/// `labels.len()` nodes), unlabeled rows solve `(D_uu - W_uu) F_u = W_ul Y_l`.
///
/// Solved per class with Jacobi-preconditioned conjugate gradients.
pub fn harmonic_function(w: &AffinityMatrix, labels: &LabelVector) -> Result<Array2<f64>> {
    let n = w.n();
    let l = labels.len();
    let m = labels.classes();
    if l > n {
        return Err(Error::dimension("baselines", format!("{l} labels for {n} nodes")));
    }
    for comp in w.components() {
        if comp.iter().all(|&i| i >= l) {
            return Err(Error::SingularSystem { component: comp });
        }
    }
    let mut out = Array2::zeros((n, m));
    for i in 0..l {
        out[[i, labels.index(i)]] = 1.0;
    }
    let u = n - l;
    if u == 0 {
        return Ok(out);
    }
    let degree = w.row_sums();
    let diag: Vec<f64> = degree[l..].to_vec();
    // rhs[k][h] = sum over labeled j of w_kj [y_j = h]
    let mut rhs = Array2::<f64>::zeros((u, m));
    for k in 0..u {
        for (j, v) in w.row(l + k) {
            if j < l {
                rhs[[k, labels.index(j)]] += v;
            }
        }
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        for k in 0..u {
            let mut acc = diag[k] * x[k];
            for (j, v) in w.row(l + k) {
                if j >= l {
                    acc -= v * x[j - l];
                }
            }
            y[k] = acc;
        }
    };
    for h in 0..m {
        let b: Vec<f64> = rhs.column(h).to_vec();
        let x = conjugate_gradient(&apply, &diag, &b)?;
        for k in 0..u {
            out[[l + k, h]] = x[k];
        }
    }
    Ok(out)
}

fn conjugate_gradient(apply: &dyn Fn(&[f64], &mut [f64]), diag: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let u = b.len();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let target = HARMONIC_RESIDUAL * norm(b).max(1.0);
    let mut x = vec![0.0; u];
    let mut r = b.to_vec();
    if norm(&r) < target {
        return Ok(x);
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; u];
    let max_iter = 10 * u + 100;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::numerics("baselines", "harmonic system is not positive definite"));
        }
        let step = rz / pap;
        for k in 0..u {
            x[k] += step * p[k];
            r[k] -= step * ap[k];
        }
        if norm(&r) < target {
            return Ok(x);
        }
        for k in 0..u {
            z[k] = r[k] / diag[k];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..u {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::numerics(
        "baselines",
        format!("conjugate gradients did not reach residual {HARMONIC_RESIDUAL:e} in {max_iter} iterations"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn edge_list(n: usize, edges: &[(usize, usize, f64)]) -> AffinityMatrix {
        let mut t = Vec::new();
        for &(i, j, w) in edges {
            t.push((i, j, w));
            t.push((j, i, w));
        }
        AffinityMatrix::from_triplets(n, &t).unwrap()
    }

    fn profile(a: Array2<f64>) -> MixedStrategyProfile {
        MixedStrategyProfile::new(a).unwrap()
    }

    #[test]
    fn lp_two_nodes() {
        let w = edge_list(2, &[(0, 1, 1.0)]);
        let y = label_propagation(&w, &profile(array![[1.0, 0.0], [0.5, 0.5]]), 1, &BaselineConfig::default()).unwrap();
        assert_eq!(y, array![[1.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn lp_fully_labeled_is_unchanged() {
        let w = edge_list(3, &[(0, 1, 0.4), (1, 2, 0.9)]);
        let y0 = profile(array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]);
        let y = label_propagation(&w, &y0, 3, &BaselineConfig::default()).unwrap();
        assert_eq!(&y, y0.as_array());
    }

    #[test]
    fn lp_isolated_node_stays_uniform() {
        let w = edge_list(3, &[(0, 1, 1.0)]);
        let y0 = profile(array![[1.0, 0.0], [0.5, 0.5], [0.5, 0.5]]);
        let y = label_propagation(&w, &y0, 1, &BaselineConfig::default()).unwrap();
        assert_eq!(y.row(2), array![0.5, 0.5]);
    }

    #[test]
    fn ls_two_nodes_prefers_label() {
        let w = edge_list(2, &[(0, 1, 1.0)]);
        let f = label_spreading(&w, &profile(array![[1.0, 0.0], [0.5, 0.5]]), &BaselineConfig::default()).unwrap();
        assert!(f[[1, 0]] > f[[1, 1]]);
    }

    #[test]
    fn ls_small_alpha_keeps_y0() {
        let w = edge_list(3, &[(0, 1, 1.0), (1, 2, 0.5)]);
        let y0 = profile(array![[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]]);
        let cfg = BaselineConfig { alpha: 1e-9, ..BaselineConfig::default() };
        let f = label_spreading(&w, &y0, &cfg).unwrap();
        for (a, b) in f.iter().zip(y0.as_array().iter()) {
            assert!((a - b).abs() < 1e-8);
        }
        let bad = BaselineConfig { alpha: 1.0, ..BaselineConfig::default() };
        assert!(label_spreading(&w, &y0, &bad).is_err());
    }

    #[test]
    fn hf_chain_midpoint() {
        // labeled nodes first: 0 = class 1, 1 = class 2, node 2 sits between them
        let w = edge_list(3, &[(0, 2, 1.0), (1, 2, 1.0)]);
        let y = LabelVector::new(vec![1, 2], 2).unwrap();
        let f = harmonic_function(&w, &y).unwrap();
        assert!((f[[2, 0]] - 0.5).abs() < 1e-12 && (f[[2, 1]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hf_unanimous_neighbors() {
        let w = edge_list(4, &[(0, 3, 0.3), (1, 3, 0.8), (2, 3, 1.0)]);
        let y = LabelVector::new(vec![2, 2, 2], 3).unwrap();
        let f = harmonic_function(&w, &y).unwrap();
        assert!((f[[3, 1]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hf_detects_unreachable_component() {
        let w = edge_list(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        let y = LabelVector::new(vec![1], 1).unwrap();
        match harmonic_function(&w, &y) {
            Err(Error::SingularSystem { component }) => assert_eq!(component, vec![2, 3]),
            other => panic!("expected singular system, got {other:?}"),
        }
    }
}
