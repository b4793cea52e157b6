//! Unsupervised domain adaptation by graph transduction games.
//!
//! Labeled source observations and unlabeled target observations become the
//! players of a non-cooperative game on a sparsified similarity graph. The
//! discrete replicator dynamics drive the game toward a Nash equilibrium,
//! which is read out as a consistent labeling of the target set. Target
//! strategies may be seeded with logistic-regression priors, and three
//! classical graph transducers run on the identical graph for comparison.

pub mod baselines;
pub mod error;
pub mod graph;
pub mod gtg;
pub mod io;
pub mod labels;
mod par;
pub mod pipeline;
pub mod preprocess;
pub mod priors;
pub mod sparse;
pub mod synthetic;
pub mod table;

pub use error::{Error, Result};
pub use graph::GraphConfig;
pub use gtg::{DynamicsConfig, DynamicsResult, MixedStrategyProfile};
pub use labels::LabelVector;
pub use pipeline::{adapt, Adaptation, AdaptationTask, EvaluationReport, Method, PipelineConfig, PriorKind};
pub use preprocess::{FeatureMatrix, NormalizationMode};
pub use priors::{LRConfig, LRModel, PriorMatrix};
pub use sparse::AffinityMatrix;
