//! Multi-task accuracy tables: one row per method, one column per
//! adaptation task, plus the average over the tasks that ran.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphConfig, DEFAULT_SCALE_RANK};
use crate::gtg::DynamicsConfig;
use crate::io;
use crate::pipeline::{accuracy, adapt, Method, PipelineConfig, PriorKind};
use crate::preprocess::NormalizationMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub source: PathBuf,
    pub source_labels: PathBuf,
    pub target: PathBuf,
    pub target_labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    pub method: Method,
    #[serde(default)]
    pub prior: PriorKind,
}

fn default_methods() -> Vec<MethodSpec> {
    vec![
        MethodSpec {
            name: "GTDA".into(),
            method: Method::Gtg,
            prior: PriorKind::None,
        },
        MethodSpec {
            name: "GTDA + LR".into(),
            method: Method::Gtg,
            prior: PriorKind::Lr,
        },
    ]
}

/// JSON document listing the tasks and methods to tabulate. Relative paths
/// resolve against the directory holding the document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    #[serde(default)]
    pub normalize: NormalizationMode,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_knn_rank")]
    pub knn_rank: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<MethodSpec>,
    pub tasks: Vec<TaskSpec>,
}

fn default_eps() -> f64 {
    DynamicsConfig::default().tolerance
}
fn default_max_iter() -> usize {
    DynamicsConfig::default().max_iterations
}
fn default_alpha() -> f64 {
    0.2
}
fn default_knn_rank() -> usize {
    DEFAULT_SCALE_RANK
}

impl TableConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut cfg: TableConfig = serde_json::from_str(&text)
            .map_err(|e| Error::config("table", format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for t in &mut cfg.tasks {
            for p in [&mut t.source, &mut t.source_labels, &mut t.target, &mut t.target_labels] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    fn pipeline(&self, method: &MethodSpec) -> PipelineConfig {
        PipelineConfig {
            normalize: self.normalize,
            prior: method.prior,
            method: method.method,
            dynamics: DynamicsConfig {
                tolerance: self.eps,
                max_iterations: self.max_iter,
            },
            alpha: self.alpha,
            graph: GraphConfig {
                scale_rank: self.knn_rank,
            },
            ..PipelineConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub method: String,
    /// Accuracy in percent, one per entry of [`AccuracyTable::tasks`].
    pub accuracies: Vec<f64>,
    pub avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyTable {
    pub tasks: Vec<String>,
    pub skipped: Vec<String>,
    pub rows: Vec<TableRow>,
}

/// Run every method on every task whose files exist.
pub fn reproduce_table(cfg: &TableConfig) -> Result<AccuracyTable> {
    let mut tasks = Vec::new();
    let mut skipped = Vec::new();
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); cfg.methods.len()];
    for task in &cfg.tasks {
        let paths = [&task.source, &task.source_labels, &task.target, &task.target_labels];
        if let Some(missing) = paths.iter().find(|p| !p.exists()) {
            log::warn!("skipping task {}: {} not found", task.name, missing.display());
            skipped.push(task.name.clone());
            continue;
        }
        let source = io::load_features(&task.source)?;
        let source_labels = io::load_labels(&task.source_labels)?;
        let target = io::load_features(&task.target)?;
        let truth = io::load_labels(&task.target_labels)?;
        for (k, method) in cfg.methods.iter().enumerate() {
            let out = adapt(&source, &source_labels, &target, &cfg.pipeline(method))?;
            let (correct, _) = accuracy(&out.hard, &truth)?;
            let acc = 100.0 * correct as f64 / truth.len() as f64;
            log::info!("{} {}: {acc:.1}", task.name, method.name);
            cells[k].push(acc);
        }
        tasks.push(task.name.clone());
    }
    let rows = cfg
        .methods
        .iter()
        .zip(cells)
        .map(|(m, accuracies)| {
            let avg = if accuracies.is_empty() {
                f64::NAN
            } else {
                accuracies.iter().sum::<f64>() / accuracies.len() as f64
            };
            TableRow {
                method: m.name.clone(),
                accuracies,
                avg,
            }
        })
        .collect();
    Ok(AccuracyTable { tasks, skipped, rows })
}

impl AccuracyTable {
    /// Aligned plain-text rendering with one decimal per cell.
    pub fn render(&self) -> String {
        let name_width = self.rows.iter().map(|r| r.method.chars().count()).max().unwrap_or(0).max(6);
        let headers: Vec<&str> = self.tasks.iter().map(String::as_str).chain(["avg"]).collect();
        let widths: Vec<usize> = headers.iter().map(|h| h.chars().count().max(5)).collect();
        let mut out = format!("{:name_width$}", "method");
        for (h, w) in headers.iter().zip(&widths) {
            out.push_str(&format!("  {h:>w$}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!("{:name_width$}", row.method));
            for (v, w) in row.accuracies.iter().chain([&row.avg]).zip(&widths) {
                out.push_str(&format!("  {v:>w$.1}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}
