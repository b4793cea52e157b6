//! Graph transduction game.
//!
//! Every observation is a player whose pure strategies are the class labels.
//! With identity partial payoffs scaled by the pairwise similarity, the payoff
//! of player `i` for pure strategy `h` is `(W x)_ih`, and the discrete
//! replicator update grows each strategy in proportion to how much it beats
//! the player's average payoff. Labeled players start on their one-hot label
//! and never move; unlabeled players drift toward a consistent labeling.

use ndarray::{s, Array2, ArrayView2, Zip};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::labels::{argmax, LabelVector};
use crate::priors::PriorMatrix;
use crate::sparse::AffinityMatrix;

/// Tolerance on row sums for a valid mixed strategy.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Tolerance accepted on prior rows when seeding the profile.
pub const PRIOR_SIMPLEX_TOL: f64 = 1e-6;

/// `n x m` row-stochastic matrix; row `i` is player `i`'s mixed strategy.
///
/// The first rows are the labeled (source) players, the rest unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategyProfile(Array2<f64>);

fn row_in_simplex(row: impl IntoIterator<Item = f64>, tol: f64) -> bool {
    let mut sum = 0.0;
    for v in row {
        if !(v >= 0.0) || !v.is_finite() {
            return false;
        }
        sum += v;
    }
    (sum - 1.0).abs() <= tol
}

impl MixedStrategyProfile {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return Err(Error::Init("profile needs at least one strategy".into()));
        }
        if let Some(i) = (0..values.nrows()).find(|&i| !row_in_simplex(values.row(i).iter().copied(), SIMPLEX_TOL)) {
            return Err(Error::Init(format!("row {i} is not a mixed strategy: {}", values.row(i))));
        }
        Ok(MixedStrategyProfile(values))
    }

    pub fn players(&self) -> usize {
        self.0.nrows()
    }

    pub fn strategies(&self) -> usize {
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
}

/// Stopping rule for the replicator iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicsConfig {
    /// Stop once the Frobenius change between consecutive profiles drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            tolerance: 1e-5,
            max_iterations: 1000,
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::config("gtg", format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("gtg", "max iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsResult {
    pub profile: MixedStrategyProfile,
    pub iterations: usize,
    pub tolerance: f64,
    pub converged: bool,
}

/// Seed the game: one-hot rows for labeled players, then either the prior
/// rows or the uniform strategy for the `target_count` unlabeled players.
pub fn init_profile(
    source_labels: &LabelVector,
    classes: usize,
    target_prior: Option<&PriorMatrix>,
    target_count: usize,
) -> Result<MixedStrategyProfile> {
    if classes == 0 {
        return Err(Error::Init("class count must be positive".into()));
    }
    if let Some((i, y)) = source_labels.iter().enumerate().find(|&(_, y)| y == 0 || y > classes) {
        return Err(Error::Init(format!("label {y} at position {i} outside 1..={classes}")));
    }
    let s = source_labels.len();
    let mut x = Array2::zeros((s + target_count, classes));
    for (i, y) in source_labels.iter().enumerate() {
        x[[i, y - 1]] = 1.0;
    }
    match target_prior {
        None => x.slice_mut(s![s.., ..]).fill(1.0 / classes as f64),
        Some(prior) => {
            let p = prior.as_array();
            if p.dim() != (target_count, classes) {
                return Err(Error::Init(format!(
                    "prior is {:?}, expected ({target_count}, {classes})",
                    p.dim()
                )));
            }
            if let Some(i) = (0..target_count).find(|&i| !row_in_simplex(p.row(i).iter().copied(), PRIOR_SIMPLEX_TOL)) {
                return Err(Error::Init(format!("prior row {i} is not in the simplex: {}", p.row(i))));
            }
            x.slice_mut(s![s.., ..]).assign(p);
        }
    }
    Ok(MixedStrategyProfile(x))
}

fn check_shapes(x: &MixedStrategyProfile, w: &AffinityMatrix) -> Result<()> {
    if x.players() != w.n() {
        return Err(Error::dimension(
            "gtg",
            format!("profile has {} players, affinity has {} nodes", x.players(), w.n()),
        ));
    }
    Ok(())
}

/// Pure-strategy payoffs `P = W x`; `P_ih` is what player `i` earns by
/// playing `h` against everyone else's current mixed strategy.
pub fn payoff_matrix(x: &MixedStrategyProfile, w: &AffinityMatrix) -> Result<Array2<f64>> {
    check_shapes(x, w)?;
    Ok(w.mul_dense(x.as_array()))
}

fn step_with_payoff(x: &Array2<f64>, payoff: &Array2<f64>) -> Array2<f64> {
    let mut next = x.clone();
    Zip::from(next.rows_mut())
        .and(payoff.rows())
        .for_each(|mut row, p| {
            let mean: f64 = row.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
            if mean > 0.0 {
                row.zip_mut_with(&p, |v, &ph| *v = *v * ph / mean);
            }
        });
    next
}

/// One synchronous replicator update. Rows with zero expected payoff are
/// returned unchanged.
pub fn replicator_step(x: &MixedStrategyProfile, w: &AffinityMatrix) -> Result<MixedStrategyProfile> {
    let payoff = payoff_matrix(x, w)?;
    Ok(MixedStrategyProfile(step_with_payoff(x.as_array(), &payoff)))
}

/// Iterate [`replicator_step`] until the profile stops moving or the
/// iteration cap is hit.
pub fn run_dynamics(x0: &MixedStrategyProfile, w: &AffinityMatrix, cfg: DynamicsConfig) -> Result<DynamicsResult> {
    cfg.validate()?;
    check_shapes(x0, w)?;
    let mut x = x0.as_array().clone();
    let mut tol = f64::INFINITY;
    let mut t = 0;
    while tol >= cfg.tolerance && t < cfg.max_iterations {
        let payoff = w.mul_dense(&x);
        let next = step_with_payoff(&x, &payoff);
        tol = frobenius_distance(&next, &x);
        if !tol.is_finite() || next.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerics("gtg", format!("non-finite profile at iteration {}", t + 1)));
        }
        x = next;
        t += 1;
    }
    log::debug!("replicator dynamics stopped after {t} iterations, tol {tol:e}");
    Ok(DynamicsResult {
        profile: MixedStrategyProfile(x),
        iterations: t,
        tolerance: tol,
        converged: tol < cfg.tolerance,
    })
}

pub(crate) fn frobenius_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Soft target rows (everything after the first `source_count` players) and
/// their argmax labels, ties going to the lowest class.
pub fn extract_predictions(
    x: &MixedStrategyProfile,
    source_count: usize,
) -> Result<(Array2<f64>, LabelVector)> {
    if source_count >= x.players() {
        return Err(Error::dimension(
            "gtg",
            format!("{source_count} source players leaves no targets among {}", x.players()),
        ));
    }
    let soft = x.as_array().slice(s![source_count.., ..]).to_owned();
    let hard = hard_labels(&soft);
    Ok((soft, hard))
}

pub(crate) fn hard_labels(scores: &Array2<f64>) -> LabelVector {
    let labels = scores
        .rows()
        .into_iter()
        .map(|r| argmax(r.iter().copied()) + 1)
        .collect();
    LabelVector::new(labels, scores.ncols()).expect("argmax stays in range")
}

/// Quadratic potential `sum_ij w_ij <x_i, x_j>`, non-decreasing under the
/// replicator update for symmetric nonnegative `W`.
pub fn potential(x: &MixedStrategyProfile, w: &AffinityMatrix) -> Result<f64> {
    let payoff = payoff_matrix(x, w)?;
    Ok(x.as_array().iter().zip(payoff.iter()).map(|(a, b)| a * b).sum())
}

/// Largest gap `|P_ih - x_i . P_i|` over strategies with `x_ih > support`.
///
/// At a Nash equilibrium every strategy in a player's support earns exactly
/// the player's expected payoff, so this is zero.
pub fn nash_gap(x: &MixedStrategyProfile, w: &AffinityMatrix, support: f64) -> Result<f64> {
    let payoff = payoff_matrix(x, w)?;
    let mut gap: f64 = 0.0;
    for (row, p) in x.as_array().rows().into_iter().zip(payoff.rows()) {
        let mean: f64 = row.iter().zip(p.iter()).map(|(a, b)| a * b).sum();
        for (&v, &ph) in row.iter().zip(p.iter()) {
            if v > support {
                gap = gap.max((ph - mean).abs());
            }
        }
    }
    Ok(gap)
}
