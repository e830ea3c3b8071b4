//! Hold-out evaluation: random train/test splits, error metrics, baseline
//! recommenders, the experiment grid and per-path weight reports.

mod baselines;
mod experiment;

pub use baselines::{ItemMean, Nmf, NmfOptions, Predictor, UserMean};
pub use experiment::{run_experiment, Cell, ExperimentConfig, Failure, Method, MetricReport};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::RatingMatrix;
use crate::learner::LearnerError;
use crate::metapath::Group;
use crate::model::{ModelError, PathWeights};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("need at least 2 observed ratings to split, got {0}")]
    TooFewRatings(usize),
    #[error("prediction and truth lengths differ ({pred} vs {truth})")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("cannot score an empty prediction list")]
    Empty,
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    /// Share of observed ratings used for training.
    pub train_fraction: f64,
    pub trials: usize,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, trials: usize, seed: u64) -> Result<Self, EvalError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(EvalError::InvalidSplit(format!(
                "train fraction {train_fraction} must lie strictly between 0 and 1"
            )));
        }
        if trials == 0 {
            return Err(EvalError::InvalidSplit("trial count must be >= 1".into()));
        }
        Ok(Self {
            train_fraction,
            trials,
            seed,
        })
    }

    /// Training-set size for `total` observed entries; both sides keep at
    /// least one entry.
    pub fn train_size(&self, total: usize) -> usize {
        ((self.train_fraction * total as f64).round() as usize).clamp(1, total - 1)
    }
}

/// Random partition of the observed entries for one trial. The permutation
/// depends only on `(spec.seed, trial)`.
pub fn split(
    ratings: &RatingMatrix,
    spec: &SplitSpec,
    trial: usize,
) -> Result<(RatingMatrix, RatingMatrix), EvalError> {
    let total = ratings.len();
    if total < 2 {
        return Err(EvalError::TooFewRatings(total));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(trial as u64);
    let mut positions: Vec<usize> = (0..total).collect();
    positions.shuffle(&mut rng);
    let k = spec.train_size(total);
    Ok((ratings.subset(&positions[..k]), ratings.subset(&positions[k..])))
}

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<(), EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    check_lengths(pred, truth)?;
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / pred.len() as f64)
}

/// Root mean squared error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    check_lengths(pred, truth)?;
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sum / pred.len() as f64).sqrt())
}

/// One row of a weight report.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRow {
    pub group: Group,
    pub path: String,
    pub weight: f64,
    /// `weight` divided by the group maximum; zero for an all-zero group.
    pub normalized: f64,
}

/// Learned weights per meta-path, scaled so each group's largest weight
/// is 1. `labels` lists `(group, path)` in weight order.
pub fn report_weights(weights: &PathWeights, labels: &[(Group, String)]) -> Vec<WeightRow> {
    let mut rows = Vec::new();
    for group in Group::ALL {
        let values = weights.group(group);
        let names: Vec<&String> = labels.iter().filter(|(g, _)| *g == group).map(|(_, p)| p).collect();
        let max = values.iter().copied().fold(0.0, f64::max);
        for (k, &w) in values.iter().enumerate() {
            rows.push(WeightRow {
                group,
                path: names.get(k).map_or_else(|| format!("{group}[{k}]"), |s| s.to_string()),
                weight: w,
                normalized: if max > 0.0 { w / max } else { 0.0 },
            });
        }
    }
    rows
}

/// Renders a weight report as aligned text.
pub fn format_weights(rows: &[WeightRow]) -> String {
    let width = rows.iter().map(|r| r.path.len()).max().unwrap_or(4).max(4);
    let mut out = format!(
        "{:<5} {:<width$} {:>10} {:>10}\n",
        "group", "path", "weight", "normalized"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<5} {:<width$} {:>10.4} {:>10.4}\n",
            r.group, r.path, r.weight, r.normalized
        ));
    }
    out
}
