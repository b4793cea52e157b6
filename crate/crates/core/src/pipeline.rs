//! End-to-end adaptation: standardize, optional logistic-regression prior,
//! seed the profile, build the sparsified graph, transduce, predict.

use std::path::PathBuf;
use std::time::Instant;

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineConfig};
use crate::error::{Error, Result};
use crate::graph::{self, GraphConfig};
use crate::gtg::{self, DynamicsConfig};
use crate::io;
use crate::labels::LabelVector;
use crate::preprocess::{joint_standardize, FeatureMatrix, NormalizationMode};
use crate::priors::{self, LRConfig, LRModel, PriorMatrix};
use crate::sparse::AffinityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    #[default]
    None,
    Lr,
}

/// Transducer run on the sparsified graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Gtg,
    Lp,
    Ls,
    Hf,
}

impl std::str::FromStr for PriorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(PriorKind::None),
            "lr" => Ok(PriorKind::Lr),
            other => Err(format!("unknown prior `{other}`")),
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gtg" => Ok(Method::Gtg),
            "lp" => Ok(Method::Lp),
            "ls" => Ok(Method::Ls),
            "hf" => Ok(Method::Hf),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub normalize: NormalizationMode,
    pub prior: PriorKind,
    pub method: Method,
    pub dynamics: DynamicsConfig,
    pub alpha: f64,
    pub graph: GraphConfig,
    pub lr: LRConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            normalize: NormalizationMode::default(),
            prior: PriorKind::default(),
            method: Method::default(),
            dynamics: DynamicsConfig::default(),
            alpha: BaselineConfig::default().alpha,
            graph: GraphConfig::default(),
            lr: LRConfig::default(),
        }
    }
}

impl PipelineConfig {
    fn baseline(&self) -> BaselineConfig {
        BaselineConfig {
            alpha: self.alpha,
            dynamics: self.dynamics,
        }
    }
}

/// Everything an adaptation run produces.
#[derive(Debug, Clone)]
pub struct Adaptation {
    /// `|T| x m`, rows sum to 1.
    pub soft: Array2<f64>,
    /// Row-wise argmax of `soft`, 1-based.
    pub hard: LabelVector,
    /// Iterations of the transducer; `None` for the direct harmonic solve.
    pub iterations: Option<usize>,
    pub final_tolerance: Option<f64>,
    pub converged: bool,
    pub graph: AffinityMatrix,
    pub prior_model: Option<LRModel>,
}

// Clamp to nonnegative and rescale each row to sum 1; empty rows become uniform.
fn to_distribution(scores: &Array2<f64>) -> Array2<f64> {
    let m = scores.ncols();
    let mut out = scores.mapv(|v| v.max(0.0));
    for mut row in out.rows_mut() {
        let sum = row.sum();
        if sum > 0.0 {
            row /= sum;
        } else {
            row.fill(1.0 / m as f64);
        }
    }
    out
}

/// Run the full pipeline on in-memory data. Target labels are never seen.
pub fn adapt(
    source: &FeatureMatrix,
    source_labels: &LabelVector,
    target: &FeatureMatrix,
    cfg: &PipelineConfig,
) -> Result<Adaptation> {
    if source.rows() != source_labels.len() {
        return Err(Error::dimension(
            "pipeline",
            format!("{} source rows but {} source labels", source.rows(), source_labels.len()),
        ));
    }
    let classes = source_labels.classes();
    let (fs, ft) = joint_standardize(source, target, cfg.normalize)?;

    let (prior, prior_model) = match cfg.prior {
        PriorKind::None => (None, None),
        PriorKind::Lr => {
            let model = priors::train_lr(&fs, source_labels, &cfg.lr)?;
            (Some(priors::predict_proba(&model, &ft)?), Some(model))
        }
    };
    let x0 = gtg::init_profile(source_labels, classes, prior.as_ref(), ft.rows())?;
    let w = graph::affinity_graph(&fs.stack(&ft)?, cfg.graph)?;

    let s = source.rows();
    let (scores, iterations, tol, converged) = match cfg.method {
        Method::Gtg => {
            let res = gtg::run_dynamics(&x0, &w, cfg.dynamics)?;
            (res.profile.into_inner(), Some(res.iterations), Some(res.tolerance), res.converged)
        }
        Method::Lp => {
            let run = baselines::propagate(&w, &x0, s, &cfg.baseline())?;
            let converged = run.tolerance < cfg.dynamics.tolerance;
            (run.scores, Some(run.iterations), Some(run.tolerance), converged)
        }
        Method::Ls => {
            let run = baselines::spread(&w, &x0, &cfg.baseline())?;
            let converged = run.tolerance < cfg.dynamics.tolerance;
            (run.scores, Some(run.iterations), Some(run.tolerance), converged)
        }
        Method::Hf => (baselines::harmonic_function(&w, source_labels)?, None, None, true),
    };
    let soft = to_distribution(&scores.slice(s![s.., ..]).to_owned());
    let hard = gtg::hard_labels(&soft);
    Ok(Adaptation {
        soft,
        hard,
        iterations,
        final_tolerance: tol,
        converged,
        graph: w,
        prior_model,
    })
}

/// Accuracy of `predicted` against `truth`, plus per-class accuracy
/// (`None` for classes absent from `truth`).
pub fn accuracy(predicted: &LabelVector, truth: &LabelVector) -> Result<(usize, Vec<Option<f64>>)> {
    if predicted.len() != truth.len() {
        return Err(Error::dimension(
            "pipeline",
            format!("{} predictions for {} target labels", predicted.len(), truth.len()),
        ));
    }
    let classes = predicted.classes().max(truth.classes());
    let mut hits = vec![0usize; classes];
    let mut totals = vec![0usize; classes];
    for (p, t) in predicted.iter().zip(truth.iter()) {
        totals[t - 1] += 1;
        if p == t {
            hits[t - 1] += 1;
        }
    }
    let per_class = hits
        .iter()
        .zip(&totals)
        .map(|(&h, &n)| (n > 0).then(|| h as f64 / n as f64))
        .collect();
    Ok((hits.iter().sum(), per_class))
}

/// Accuracy of the logistic-regression prior on its own.
pub fn prior_accuracy(prior: &PriorMatrix, truth: &LabelVector) -> Result<f64> {
    let (correct, _) = accuracy(&prior.hard_labels(), truth)?;
    Ok(correct as f64 / truth.len() as f64)
}

/// A file-backed adaptation run.
#[derive(Debug, Clone)]
pub struct AdaptationTask {
    pub source: PathBuf,
    pub source_labels: PathBuf,
    pub target: PathBuf,
    /// Read only after predictions exist, for scoring.
    pub target_labels: Option<PathBuf>,
    pub config: PipelineConfig,
    pub out_soft: Option<PathBuf>,
    pub out_hard: Option<PathBuf>,
    pub dump_graph: Option<PathBuf>,
    pub dump_model: Option<PathBuf>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub normalize: NormalizationMode,
    pub prior: PriorKind,
    pub method: Method,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub alpha: f64,
    pub knn_rank: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_class_accuracy: Option<Vec<Option<f64>>>,
    pub iterations: Option<usize>,
    pub final_tolerance: Option<f64>,
    pub converged: bool,
    pub target_count: usize,
    pub classes: usize,
    pub graph_edges: usize,
    pub wall_time_secs: f64,
    pub config: ConfigEcho,
}

/// Load the task's files, adapt, write the requested outputs and score the
/// predictions if target labels were given.
pub fn run_task(task: &AdaptationTask) -> Result<(EvaluationReport, Adaptation)> {
    let started = Instant::now();
    let source = io::load_features(&task.source)?;
    let source_labels = io::load_labels(&task.source_labels)?;
    let target = io::load_features(&task.target)?;
    let result = adapt(&source, &source_labels, &target, &task.config)?;

    if let Some(path) = &task.out_soft {
        io::write_matrix(path, &result.soft)?;
    }
    if let Some(path) = &task.out_hard {
        io::write_labels(path, &result.hard)?;
    }
    if let Some(path) = &task.dump_graph {
        graph::write_coo(&result.graph, path)?;
    }
    if let (Some(path), Some(model)) = (&task.dump_model, &result.prior_model) {
        model.save_json(path)?;
    }

    let mut report = EvaluationReport {
        accuracy: None,
        correct: None,
        total: None,
        per_class_accuracy: None,
        iterations: result.iterations,
        final_tolerance: result.final_tolerance,
        converged: result.converged,
        target_count: target.rows(),
        classes: source_labels.classes(),
        graph_edges: result.graph.nnz() / 2,
        wall_time_secs: 0.0,
        config: ConfigEcho {
            normalize: task.config.normalize,
            prior: task.config.prior,
            method: task.config.method,
            tolerance: task.config.dynamics.tolerance,
            max_iterations: task.config.dynamics.max_iterations,
            alpha: task.config.alpha,
            knn_rank: task.config.graph.scale_rank,
            seed: task.seed,
            selected_c: result.prior_model.as_ref().map(|m| m.c),
        },
    };
    if let Some(path) = &task.target_labels {
        let truth = io::load_labels(path)?;
        if truth.classes() > source_labels.classes() {
            return Err(Error::data(
                "pipeline",
                format!(
                    "target labels use class {} but the source only has {}",
                    truth.classes(),
                    source_labels.classes()
                ),
            ));
        }
        let (correct, per_class) = accuracy(&result.hard, &truth)?;
        report.accuracy = Some(correct as f64 / truth.len() as f64);
        report.correct = Some(correct);
        report.total = Some(truth.len());
        report.per_class_accuracy = Some(per_class);
    }
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok((report, result))
}
