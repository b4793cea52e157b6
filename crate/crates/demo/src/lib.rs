//! Browser bindings: generate a two-dimensional shifted task, inspect the
//! sparsified graph, and run a transducer on it.

use gtda::graph::affinity_graph;
use gtda::pipeline::{accuracy, adapt, Method, PipelineConfig, PriorKind};
use gtda::preprocess::{joint_standardize, FeatureMatrix};
use gtda::synthetic::{generate_synthetic_shift, SyntheticTask};
use gtda::DynamicsConfig;
use wasm_bindgen::prelude::*;

fn js_err(e: gtda::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// A source/target pair in the plane plus the last transduction result.
#[wasm_bindgen]
pub struct Scene {
    task: SyntheticTask,
    prediction: Option<Vec<u32>>,
}

/// Outcome of [`Scene::run`].
#[wasm_bindgen]
pub struct RunSummary {
    labels: Vec<u32>,
    confidence: Vec<f64>,
    accuracy: f64,
    iterations: Option<usize>,
    converged: bool,
}

#[wasm_bindgen]
impl RunSummary {
    /// Predicted target classes, 1-based.
    #[wasm_bindgen(getter)]
    pub fn labels(&self) -> Vec<u32> {
        self.labels.clone()
    }

    /// Largest class probability of every target point.
    #[wasm_bindgen(getter)]
    pub fn confidence(&self) -> Vec<f64> {
        self.confidence.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    /// `undefined` for the harmonic function, which is solved directly.
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> Option<usize> {
        self.iterations
    }

    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }
}

fn flatten(f: &FeatureMatrix) -> Vec<f64> {
    f.as_array().iter().copied().collect()
}

#[wasm_bindgen]
impl Scene {
    /// Gaussian blobs around `classes` directions; the target copy is moved
    /// by `shift` and perturbed by `noise`.
    #[wasm_bindgen(constructor)]
    pub fn new(n_per_class: usize, classes: usize, shift: f64, noise: f64, seed: u64) -> Result<Scene, JsError> {
        let task = generate_synthetic_shift(n_per_class, classes, 2, shift, noise, seed).map_err(js_err)?;
        Ok(Scene { task, prediction: None })
    }

    #[wasm_bindgen(getter)]
    pub fn classes(&self) -> usize {
        self.task.source_labels.classes()
    }

    /// Source coordinates as `x0, y0, x1, y1, ...`.
    #[wasm_bindgen(js_name = sourcePoints)]
    pub fn source_points(&self) -> Vec<f64> {
        flatten(&self.task.source)
    }

    #[wasm_bindgen(js_name = targetPoints)]
    pub fn target_points(&self) -> Vec<f64> {
        flatten(&self.task.target)
    }

    #[wasm_bindgen(js_name = sourceLabels)]
    pub fn source_labels(&self) -> Vec<u32> {
        self.task.source_labels.iter().map(|l| l as u32).collect()
    }

    #[wasm_bindgen(js_name = targetLabels)]
    pub fn target_labels(&self) -> Vec<u32> {
        self.task.target_labels.iter().map(|l| l as u32).collect()
    }

    /// Edges of the sparsified joint graph as `i, j, w` triples with `i < j`.
    /// Indices below the source count are source points.
    pub fn edges(&self, knn_rank: usize) -> Result<Vec<f64>, JsError> {
        let cfg = PipelineConfig::default();
        let (s, t) = joint_standardize(&self.task.source, &self.task.target, cfg.normalize).map_err(js_err)?;
        let joint = FeatureMatrix::stack(&s, &t).map_err(js_err)?;
        let graph = affinity_graph(&joint, gtda::GraphConfig { scale_rank: knn_rank }).map_err(js_err)?;
        Ok(graph
            .triplets()
            .filter(|&(i, j, _)| i < j)
            .flat_map(|(i, j, w)| [i as f64, j as f64, w])
            .collect())
    }

    /// Label the target with `method` (`gtg`, `lp`, `ls` or `hf`), optionally
    /// starting from logistic-regression priors.
    pub fn run(&mut self, method: &str, lr_prior: bool, eps: f64, max_iter: usize) -> Result<RunSummary, JsError> {
        let method: Method = method.parse().map_err(|e: String| JsError::new(&e))?;
        let cfg = PipelineConfig {
            method,
            prior: if lr_prior { PriorKind::Lr } else { PriorKind::None },
            dynamics: DynamicsConfig {
                tolerance: eps,
                max_iterations: max_iter,
            },
            ..PipelineConfig::default()
        };
        let out = adapt(&self.task.source, &self.task.source_labels, &self.task.target, &cfg).map_err(js_err)?;
        let (correct, _) = accuracy(&out.hard, &self.task.target_labels).map_err(js_err)?;
        let labels: Vec<u32> = out.hard.iter().map(|l| l as u32).collect();
        self.prediction = Some(labels.clone());
        Ok(RunSummary {
            labels,
            confidence: out.soft.rows().into_iter().map(|r| r.fold(0.0, |a: f64, &b| a.max(b))).collect(),
            accuracy: correct as f64 / self.task.target_labels.len() as f64,
            iterations: out.iterations,
            converged: out.converged,
        })
    }

    /// Target indices whose latest prediction is wrong.
    pub fn mistakes(&self) -> Vec<u32> {
        let Some(pred) = &self.prediction else {
            return Vec::new();
        };
        pred.iter()
            .zip(self.task.target_labels.iter())
            .enumerate()
            .filter(|(_, (&p, t))| p as usize != *t)
            .map(|(i, _)| i as u32)
            .collect()
    }
}
